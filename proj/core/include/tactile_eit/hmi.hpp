#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tactile_eit/inverse.hpp"
#include "tactile_eit/mesh.hpp"

namespace tactile_eit {

struct TouchState {
  bool active = false;
  std::optional<Point2> centroid;
  double intensity = 0.0;  // raw reconstruction peak, S/m
  std::size_t frame_index = 0;
};

// Active iff the pre-normalization peak reaches activation_threshold; the
// centroid comes from the blob holding the highest value.
TouchState classify_frame(const ReconstructionImage& image, const Mesh& mesh,
                          double activation_threshold, std::size_t frame_index,
                          double blob_threshold = 0.3);

enum class EventKind { kPressStart, kPressEnd };
const char* to_string(EventKind k);

struct TouchEvent {
  EventKind kind = EventKind::kPressStart;
  Point2 centroid;
  std::size_t duration_frames = 0;  // press_end only
  std::string region_label;
  std::size_t frame_index = 0;
};

// Debounced press detector. A press starts once `debounce_frames` consecutive
// active frames are seen and ends on the first inactive frame; its duration
// counts every active frame from the first one. Shorter blips are dropped.
class EventEngine {
 public:
  explicit EventEngine(std::size_t debounce_frames = 1);

  // Frames must arrive with consecutive indices.
  std::optional<TouchEvent> update(const TouchState& current);

  bool pressed() const { return phase_ == Phase::kPressed; }
  // Active frames of a press not yet ended (pending or pressed).
  std::size_t open_frames() const { return phase_ == Phase::kIdle ? 0 : count_; }

 private:
  enum class Phase { kIdle, kPending, kPressed };
  std::size_t debounce_;
  Phase phase_ = Phase::kIdle;
  std::size_t count_ = 0;
  Point2 centroid_;
  std::optional<std::size_t> last_frame_;
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool contains(Point2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

struct Region {
  std::string label;
  Rect rect;
  std::string action;
};

struct ActionConfig {
  std::vector<Region> regions;
  std::size_t duration_threshold_frames = 6;
  double frame_rate = 20.0;

  void validate() const;
  // Left half advances, right half jumps; 6 frames at 20 fps splits low/high.
  static ActionConfig defaults(double side_mm = 100.0);
  const Region* region_at(Point2 p) const;
};

enum class Amplitude { kLow, kHigh };
const char* to_string(Amplitude a);

struct Action {
  std::string name;
  Amplitude amplitude = Amplitude::kLow;
};

// Needs a press_end event. nullopt when the centroid is in no region.
std::optional<Action> map_action(const TouchEvent& event, const ActionConfig& config);

// One touch session: event engine plus action mapping, with region labels
// filled in on emitted events.
class HmiSession {
 public:
  struct Output {
    std::optional<TouchEvent> event;
    std::optional<Action> action;
  };

  HmiSession(ActionConfig config, std::size_t debounce_frames = 1);
  Output process(const TouchState& state);
  const ActionConfig& config() const { return config_; }

 private:
  ActionConfig config_;
  EventEngine engine_;
};

}  // namespace tactile_eit
