#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridsens/models.hpp"
#include "hybridsens/tracking.hpp"

namespace hybridsens::cli {

/// Input signal description: zero or a constant vector.
struct SignalSpec {
  std::string kind = "zero";
  Vector value;

  InputSignal build(int dim, const TimeSpan& span) const;
};

struct RunConfig {
  std::string source;
  std::string model_name;
  std::shared_ptr<const models::ModelCatalogEntry> model;
  Vector x0;
  TimeSpan span;
  SignalSpec input;
  IntegrationOptions integration;

  Vector z0;
  SignalSpec v;
  std::vector<double> eps;

  Matrix Q;
  Matrix R;
  Matrix P_T;
  double horizon = 0.0;
  RiccatiOptions riccati;

  Vector delta;
  SwitchingPolicy policy = SwitchingPolicy::kMinNorm;
  int random_trials = 0;

  InputSignal mu() const { return input.build(model->system.n_input(), span); }
  InputSignal v_signal() const { return v.build(model->system.n_input(), span); }
  LqrWeights weights() const { return LqrWeights::constant(Q, R, P_T, horizon); }
};

/// Parses a JSON config. Errors are HybridError(kConfigError) whose message
/// names the source, the line for syntax errors or the field path.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::uint32_t seed = 0;
  std::optional<SwitchingPolicy> policy;
};

/// Each command writes its files into ``out_dir`` and returns the files
/// written.
std::vector<std::filesystem::path> cmd_simulate(const RunConfig& cfg,
                                                const CommandOptions& opts);
std::vector<std::filesystem::path> cmd_sensitize(const RunConfig& cfg,
                                                 const CommandOptions& opts);
std::vector<std::filesystem::path> cmd_synthesize(const RunConfig& cfg,
                                                  const CommandOptions& opts);
std::vector<std::filesystem::path> cmd_track(const RunConfig& cfg,
                                             const CommandOptions& opts);

/// Exit code for an error kind: 2 for configuration errors, 1 otherwise.
int exit_code(ErrorKind kind);

/// Entry point of the ``hybridsens`` executable.
int run(int argc, char** argv);

}  // namespace hybridsens::cli
