#include "tactile_eit/error.hpp"

namespace tactile_eit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kElectrodeOverlap: return "electrode overlap";
    case ErrorCode::kMeshResolution: return "mesh resolution";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kNonPositiveConductivity: return "non-positive conductivity";
    case ErrorCode::kSingularSystem: return "singular system";
    case ErrorCode::kIllPosed: return "ill-posed problem";
    case ErrorCode::kLatticeDisconnected: return "lattice disconnected";
    case ErrorCode::kCountMismatch: return "count mismatch";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kParse: return "parse error";
  }
  return "unknown";
}

}  // namespace tactile_eit
