#pragma once
// Error taxonomy. Every failure mode that callers are expected to handle has
// its own type; message strings carry the offending value or location.
#include <stdexcept>
#include <string>

namespace pmel {

#define PMEL_DEFINE_ERROR(Name)                                        \
  struct Name : std::runtime_error {                                   \
    explicit Name(const std::string& m) : std::runtime_error(m) {}     \
  }

PMEL_DEFINE_ERROR(ValidationFailure);
PMEL_DEFINE_ERROR(SingularTensor);
PMEL_DEFINE_ERROR(DimensionMismatch);
PMEL_DEFINE_ERROR(InvalidConstants);
PMEL_DEFINE_ERROR(NotSorted);
PMEL_DEFINE_ERROR(AssemblyFailure);
PMEL_DEFINE_ERROR(NonpositiveWeight);
PMEL_DEFINE_ERROR(SolverBreakdown);
PMEL_DEFINE_ERROR(IndefinitePivot);
PMEL_DEFINE_ERROR(EigSolverFailure);
PMEL_DEFINE_ERROR(DegenerateSpace);
PMEL_DEFINE_ERROR(AlphaStrongViolated);
PMEL_DEFINE_ERROR(FullDirichletRejected);
PMEL_DEFINE_ERROR(InfSupFailure);
PMEL_DEFINE_ERROR(NonIntegerRatio);
PMEL_DEFINE_ERROR(ConfigError);
PMEL_DEFINE_ERROR(ScenarioFailure);
PMEL_DEFINE_ERROR(NonPositiveData);
PMEL_DEFINE_ERROR(BudgetExceeded);
PMEL_DEFINE_ERROR(SpaceMismatch);

#undef PMEL_DEFINE_ERROR

}  // namespace pmel
