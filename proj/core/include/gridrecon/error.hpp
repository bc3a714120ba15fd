#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridrecon {

/// Failure categories raised by the library. Every thrown gridrecon::Error
/// carries exactly one of these.
enum class ErrorCode {
  // graph
  NonSymmetric,
  SelfLoop,
  NonBinary,
  Disconnected,
  SingularSystem,
  DimensionMismatch,
  // kernel
  InvalidHyperparameters,
  NoiseOnRectangular,
  // gp
  EmptyObservations,
  FactorizationFailure,
  ModeFilterMismatch,
  StaleStep,
  EmptyQuery,
  NonCausalQuery,
  InvalidBasis,
  VerificationFailure,
  // hyper
  InsufficientData,
  AllCandidatesFailed,
  // dsse
  NotConverged,
  NonRadialTopology,
  // simlab
  AllTargetsNearZero,
  EmptySeries,
  PartitionInfeasible,
  InvalidSpec,
  // io / cli
  ParseError,
  UnknownKey,
  TypeError,
  MissingRequired,
  MutuallyExclusive,
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace gridrecon
