#include "hybridsens/types.hpp"

namespace hybridsens {

std::string_view to_string(Mode mode) {
  return mode == Mode::kAnte ? "ante" : "post";
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kNoEventInSpan: return "NoEventInSpan";
    case ErrorKind::kGrazingEvent: return "GrazingEvent";
    case ErrorKind::kIntegrationFailure: return "IntegrationFailure";
    case ErrorKind::kNoSignChange: return "NoSignChange";
    case ErrorKind::kTransversalityViolated: return "TransversalityViolated";
    case ErrorKind::kSwitchOutsideSpan: return "SwitchOutsideSpan";
    case ErrorKind::kRiccatiBlowup: return "RiccatiBlowup";
    case ErrorKind::kNonSymmetricDrift: return "NonSymmetricDrift";
    case ErrorKind::kEventLost: return "EventLost";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace hybridsens
