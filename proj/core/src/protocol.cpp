#include "tactile_eit/protocol.hpp"

#include <tuple>

#include "fnv.hpp"
#include "tactile_eit/error.hpp"

namespace tactile_eit {

Pattern reciprocal(const Pattern& p) {
  return {p.meas_plus, p.meas_minus, p.drive_plus, p.drive_minus};
}

Protocol::Protocol(std::vector<Pattern> patterns, std::size_t electrode_count,
                   bool reciprocity_reduced)
    : patterns_(std::move(patterns)),
      electrode_count_(electrode_count),
      reciprocity_reduced_(reciprocity_reduced) {
  for (const auto& p : patterns_) {
    const std::size_t e[] = {p.drive_plus, p.drive_minus, p.meas_plus, p.meas_minus};
    for (auto idx : e) {
      if (idx >= electrode_count_) {
        throw EitError(ErrorCode::kInvalidArgument, "pattern references a missing electrode");
      }
    }
    if (p.drive_plus == p.drive_minus || p.meas_plus == p.meas_minus) {
      throw EitError(ErrorCode::kInvalidArgument, "pattern pair uses one electrode twice");
    }
    if (p.meas_plus == p.drive_plus || p.meas_plus == p.drive_minus ||
        p.meas_minus == p.drive_plus || p.meas_minus == p.drive_minus) {
      throw EitError(ErrorCode::kInvalidArgument, "measurement electrode coincides with drive");
    }
  }
}

std::string Protocol::id() const {
  detail::Fnv1a h;
  h.add(static_cast<std::uint64_t>(electrode_count_));
  for (const auto& p : patterns_) {
    h.add(static_cast<std::uint64_t>(p.drive_plus));
    h.add(static_cast<std::uint64_t>(p.drive_minus));
    h.add(static_cast<std::uint64_t>(p.meas_plus));
    h.add(static_cast<std::uint64_t>(p.meas_minus));
  }
  return h.hex();
}

Protocol generate_adjacent_protocol(std::size_t electrode_count, bool reciprocity_reduced) {
  if (electrode_count < 4) {
    throw EitError(ErrorCode::kInvalidArgument, "adjacent protocol needs at least 4 electrodes");
  }
  const std::size_t n = electrode_count;
  std::vector<Pattern> patterns;
  patterns.reserve(n * (n - 3));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t m1 = (m + 1) % n;
      if (m == k || m == k1 || m1 == k || m1 == k1) continue;
      if (reciprocity_reduced && std::tie(k, k1) > std::tie(m, m1)) continue;
      patterns.push_back({k, k1, m, m1});
    }
  }
  return Protocol(std::move(patterns), n, reciprocity_reduced);
}

}  // namespace tactile_eit
