#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridsens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Which smooth segment of a single-jump hybrid trajectory is meant.
enum class Mode { kAnte, kPost };

std::string_view to_string(Mode mode);

enum class ErrorKind {
  kInvalidArgument,
  kNoEventInSpan,
  kGrazingEvent,
  kIntegrationFailure,
  kNoSignChange,
  kTransversalityViolated,
  kSwitchOutsideSpan,
  kRiccatiBlowup,
  kNonSymmetricDrift,
  kEventLost,
  kConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit code.
class HybridError : public std::runtime_error {
 public:
  HybridError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw HybridError(kind, what);
}

}  // namespace hybridsens
