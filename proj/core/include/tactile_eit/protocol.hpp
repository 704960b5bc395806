#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tactile_eit {

struct Pattern {
  std::size_t drive_plus = 0;
  std::size_t drive_minus = 0;
  std::size_t meas_plus = 0;
  std::size_t meas_minus = 0;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

// Same pattern with drive and measurement pairs exchanged.
Pattern reciprocal(const Pattern& p);

// Drive/measurement schedule. Patterns are ordered by ascending drive index,
// then ascending measurement index.
class Protocol {
 public:
  Protocol(std::vector<Pattern> patterns, std::size_t electrode_count, bool reciprocity_reduced);

  std::span<const Pattern> patterns() const { return patterns_; }
  std::size_t size() const { return patterns_.size(); }
  std::size_t electrode_count() const { return electrode_count_; }
  bool reciprocity_reduced() const { return reciprocity_reduced_; }
  const Pattern& operator[](std::size_t i) const { return patterns_[i]; }

  // Stable hash over the ordered pattern list.
  std::string id() const;

 private:
  std::vector<Pattern> patterns_;
  std::size_t electrode_count_;
  bool reciprocity_reduced_;
};

// Adjacent drive, adjacent measurement. 16 electrodes give 208 patterns, or
// 104 once each reciprocal pair is kept only in its lexicographically first
// orientation.
Protocol generate_adjacent_protocol(std::size_t electrode_count, bool reciprocity_reduced = true);

}  // namespace tactile_eit
