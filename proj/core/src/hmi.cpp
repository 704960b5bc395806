#include "tactile_eit/hmi.hpp"

#include <algorithm>

#include "tactile_eit/error.hpp"
#include "tactile_eit/metrics.hpp"

namespace tactile_eit {

TouchState classify_frame(const ReconstructionImage& image, const Mesh& mesh,
                          double activation_threshold, std::size_t frame_index,
                          double blob_threshold) {
  if (!image.postprocessed) {
    throw EitError(ErrorCode::kInvalidArgument, "classify_frame needs a postprocessed image");
  }
  TouchState state;
  state.frame_index = frame_index;
  state.intensity = image.raw_peak;
  if (!(image.raw_peak > 0.0) || image.raw_peak < activation_threshold) return state;
  const auto report = detect_blobs(image, mesh, blob_threshold);
  if (report.blobs.empty()) return state;
  const auto dominant = std::max_element(
      report.blobs.begin(), report.blobs.end(),
      [](const Blob& a, const Blob& b) { return a.peak < b.peak; });
  state.active = true;
  state.centroid = dominant->centroid;
  return state;
}

const char* to_string(EventKind k) {
  return k == EventKind::kPressStart ? "press_start" : "press_end";
}

const char* to_string(Amplitude a) { return a == Amplitude::kLow ? "low" : "high"; }

EventEngine::EventEngine(std::size_t debounce_frames) : debounce_(debounce_frames) {
  if (debounce_ < 1) throw EitError(ErrorCode::kInvalidArgument, "debounce must be >= 1 frame");
}

std::optional<TouchEvent> EventEngine::update(const TouchState& current) {
  if (last_frame_ && current.frame_index != *last_frame_ + 1) {
    throw EitError(ErrorCode::kInvalidArgument,
                   "frame " + std::to_string(current.frame_index) + " does not follow frame " +
                       std::to_string(*last_frame_));
  }
  last_frame_ = current.frame_index;

  const bool active = current.active && current.centroid.has_value();
  if (!active) {
    const bool was_pressed = phase_ == Phase::kPressed;
    const std::size_t duration = count_;
    phase_ = Phase::kIdle;
    count_ = 0;
    if (!was_pressed) return std::nullopt;
    return TouchEvent{EventKind::kPressEnd, centroid_, duration, {}, current.frame_index};
  }

  if (phase_ == Phase::kIdle) {
    phase_ = Phase::kPending;
    count_ = 0;
    centroid_ = *current.centroid;
  }
  ++count_;
  if (phase_ == Phase::kPending && count_ >= debounce_) {
    phase_ = Phase::kPressed;
    return TouchEvent{EventKind::kPressStart, centroid_, 0, {}, current.frame_index};
  }
  return std::nullopt;
}

void ActionConfig::validate() const {
  if (duration_threshold_frames < 1) {
    throw EitError(ErrorCode::kConfig, "duration_threshold_frames must be >= 1");
  }
  if (!(frame_rate > 0.0)) throw EitError(ErrorCode::kConfig, "frame_rate must be > 0");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& a = regions[i].rect;
    if (!(a.x1 > a.x0 && a.y1 > a.y0)) {
      throw EitError(ErrorCode::kConfig, "region '" + regions[i].label + "' is empty");
    }
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      const auto& b = regions[j].rect;
      const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
      const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
      if (w > 0.0 && h > 0.0) {
        throw EitError(ErrorCode::kConfig,
                       "regions '" + regions[i].label + "' and '" + regions[j].label + "' overlap");
      }
    }
  }
}

ActionConfig ActionConfig::defaults(double side_mm) {
  const double mid = 0.5 * side_mm;
  return {{{"left", {0.0, 0.0, mid, side_mm}, "advance"},
           {"right", {mid, 0.0, side_mm, side_mm}, "jump"}},
          6,
          20.0};
}

const Region* ActionConfig::region_at(Point2 p) const {
  for (const auto& r : regions) {
    if (r.rect.contains(p)) return &r;
  }
  return nullptr;
}

std::optional<Action> map_action(const TouchEvent& event, const ActionConfig& config) {
  if (event.kind != EventKind::kPressEnd) {
    throw EitError(ErrorCode::kInvalidArgument, "actions are mapped from press_end events");
  }
  const Region* region = config.region_at(event.centroid);
  if (region == nullptr) return std::nullopt;
  return Action{region->action, event.duration_frames < config.duration_threshold_frames
                                    ? Amplitude::kLow
                                    : Amplitude::kHigh};
}

HmiSession::HmiSession(ActionConfig config, std::size_t debounce_frames)
    : config_(std::move(config)), engine_(debounce_frames) {
  config_.validate();
}

HmiSession::Output HmiSession::process(const TouchState& state) {
  Output out;
  out.event = engine_.update(state);
  if (out.event) {
    if (const Region* r = config_.region_at(out.event->centroid)) out.event->region_label = r->label;
    if (out.event->kind == EventKind::kPressEnd) out.action = map_action(*out.event, config_);
  }
  return out;
}

}  // namespace tactile_eit
