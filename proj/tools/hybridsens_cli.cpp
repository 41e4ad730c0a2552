#include "hybridsens/cli.hpp"

int main(int argc, char** argv) { return hybridsens::cli::run(argc, argv); }
