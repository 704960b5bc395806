#pragma once

#include <stdexcept>
#include <string>

namespace tactile_eit {

enum class ErrorCode {
  kInvalidArgument,
  kElectrodeOverlap,
  kMeshResolution,
  kDimensionMismatch,
  kNonPositiveConductivity,
  kSingularSystem,
  kIllPosed,
  kLatticeDisconnected,
  kCountMismatch,
  kConfig,
  kParse,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class EitError : public std::runtime_error {
 public:
  EitError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tactile_eit
