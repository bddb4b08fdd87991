#pragma once

#include <stdexcept>
#include <string>

namespace nslfa {

// Base class for every error raised by the library. Each concrete type
// corresponds to one contract violation so callers (and tests) can catch
// them individually.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define NSLFA_ERROR(name)            \
  struct name final : Error {        \
    using Error::Error;              \
  }

// model
NSLFA_ERROR(EmptyMatrix);
NSLFA_ERROR(NonBinaryEntry);
NSLFA_ERROR(AllZeroRow);
NSLFA_ERROR(ShapeMismatch);
NSLFA_ERROR(NonFiniteData);
NSLFA_ERROR(TooFewRows);

// identifiability
NSLFA_ERROR(FactorIndexOutOfRange);
NSLFA_ERROR(FactorCountTooLarge);

// kernel / inference
NSLFA_ERROR(FactorizationFailed);
NSLFA_ERROR(IndexOutOfRange);
NSLFA_ERROR(ConstrainedLoading);
NSLFA_ERROR(ZeroPatternViolated);

// optim
NSLFA_ERROR(NonFiniteObjective);

// estimator / baselines
NSLFA_ERROR(RankDeficient);
NSLFA_ERROR(SingularSubproblem);

// metrics
NSLFA_ERROR(ZeroVector);
NSLFA_ERROR(DegenerateVariance);
NSLFA_ERROR(MissingLabels);

// simulation
NSLFA_ERROR(IndivisibleJ);
NSLFA_ERROR(UnknownScenario);
NSLFA_ERROR(DegenerateDraw);

// io / cli
NSLFA_ERROR(ParseError);
NSLFA_ERROR(DimensionMismatch);
NSLFA_ERROR(WrongColumnCount);

#undef NSLFA_ERROR

}  // namespace nslfa
