#include "gridrecon/error.hpp"

namespace gridrecon {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::NonBinary: return "NonBinary";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidHyperparameters: return "InvalidHyperparameters";
    case ErrorCode::NoiseOnRectangular: return "NoiseOnRectangular";
    case ErrorCode::EmptyObservations: return "EmptyObservations";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::ModeFilterMismatch: return "ModeFilterMismatch";
    case ErrorCode::StaleStep: return "StaleStep";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::NonCausalQuery: return "NonCausalQuery";
    case ErrorCode::InvalidBasis: return "InvalidBasis";
    case ErrorCode::VerificationFailure: return "VerificationFailure";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NonRadialTopology: return "NonRadialTopology";
    case ErrorCode::AllTargetsNearZero: return "AllTargetsNearZero";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::PartitionInfeasible: return "PartitionInfeasible";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::MissingRequired: return "MissingRequired";
    case ErrorCode::MutuallyExclusive: return "MutuallyExclusive";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace gridrecon
