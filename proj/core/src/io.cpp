#include "tactile_eit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tactile_eit/error.hpp"

namespace tactile_eit::io {

using ojson = nlohmann::ordered_json;

namespace {

nlohmann::json parse_json(std::string_view text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw EitError(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

ojson point_json(Point2 p) { return ojson::array({p.x, p.y}); }

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* what) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw EitError(ErrorCode::kParse, std::string("bad ") + what + " '" + s + "'");
  }
  return value;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EitError(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EitError(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string mesh_to_json(const Mesh& mesh) {
  ojson j;
  j["side_mm"] = mesh.side();
  j["divisions"] = mesh.divisions();
  ojson nodes = ojson::array();
  for (const auto& p : mesh.nodes()) nodes.push_back(point_json(p));
  j["nodes"] = std::move(nodes);
  ojson elements = ojson::array();
  for (const auto& t : mesh.elements()) elements.push_back(ojson::array({t[0], t[1], t[2]}));
  j["elements"] = std::move(elements);
  ojson electrodes = ojson::array();
  for (const auto& e : mesh.electrodes()) {
    ojson segs = ojson::array();
    for (const auto& s : e.segments) {
      segs.push_back(ojson::array({s.node_a, s.node_b, s.t_begin, s.t_end}));
    }
    electrodes.push_back(std::move(segs));
  }
  j["electrodes"] = std::move(electrodes);
  return j.dump() + "\n";
}

Mesh mesh_from_json(std::string_view text) {
  const auto j = parse_json(text, "mesh");
  try {
    std::vector<Point2> nodes;
    for (const auto& p : j.at("nodes")) nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    std::vector<Triangle> elements;
    for (const auto& t : j.at("elements")) {
      elements.push_back({t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>(),
                          t.at(2).get<std::size_t>()});
    }
    std::vector<Electrode> electrodes;
    for (const auto& e : j.at("electrodes")) {
      Electrode electrode;
      for (const auto& s : e) {
        electrode.segments.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                                      s.at(2).get<double>(), s.at(3).get<double>()});
      }
      electrodes.push_back(std::move(electrode));
    }
    return Mesh(std::move(nodes), std::move(elements), std::move(electrodes),
                j.at("side_mm").get<double>(), j.value("divisions", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw EitError(ErrorCode::kParse, std::string("mesh: ") + e.what());
  }
}

std::string protocol_to_json(const Protocol& protocol) {
  ojson j;
  j["protocol_hash"] = protocol.id();
  j["electrode_count"] = protocol.electrode_count();
  j["reciprocity_reduced"] = protocol.reciprocity_reduced();
  ojson patterns = ojson::array();
  for (const auto& p : protocol.patterns()) {
    patterns.push_back(ojson::array({p.drive_plus, p.drive_minus, p.meas_plus, p.meas_minus}));
  }
  j["patterns"] = std::move(patterns);
  return j.dump(1) + "\n";
}

std::string frame_to_csv(const MeasurementFrame& frame, const Protocol& protocol) {
  if (frame.voltages.size() != protocol.size() || frame.protocol_id != protocol.id()) {
    throw EitError(ErrorCode::kDimensionMismatch, "frame does not belong to this protocol");
  }
  std::string out = "# protocol_hash=" + frame.protocol_id +
                    ",drive_current=" + format_double(frame.drive_current) + "\n";
  out += "drive_plus,drive_minus,meas_plus,meas_minus,volts\n";
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    const auto& p = protocol[i];
    out += std::to_string(p.drive_plus) + ',' + std::to_string(p.drive_minus) + ',' +
           std::to_string(p.meas_plus) + ',' + std::to_string(p.meas_minus) + ',' +
           format_double(frame.voltages[i]) + '\n';
  }
  return out;
}

FrameCsv frame_from_csv(std::string_view text) {
  FrameCsv out;
  bool header_seen = false;
  for (const auto& raw : split(text, '\n')) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#", 0) == 0) {
      for (const auto& field : split(std::string_view(line).substr(1), ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        std::string key = field.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        const std::string value = field.substr(eq + 1);
        if (key == "protocol_hash") out.frame.protocol_id = value;
        if (key == "drive_current") out.frame.drive_current = parse_number<double>(value, "current");
      }
      continue;
    }
    if (!header_seen) {
      if (line != "drive_plus,drive_minus,meas_plus,meas_minus,volts") {
        throw EitError(ErrorCode::kParse, "frame CSV: unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 5) throw EitError(ErrorCode::kParse, "frame CSV: row needs 5 columns");
    out.patterns.push_back({parse_number<std::size_t>(cols[0], "electrode"),
                            parse_number<std::size_t>(cols[1], "electrode"),
                            parse_number<std::size_t>(cols[2], "electrode"),
                            parse_number<std::size_t>(cols[3], "electrode")});
    out.frame.voltages.push_back(parse_number<double>(cols[4], "voltage"));
  }
  if (!header_seen) throw EitError(ErrorCode::kParse, "frame CSV: missing header");
  return out;
}

std::string jacobian_to_csv(const SensitivityMatrix& j) {
  std::string out = "# mesh_id=" + j.mesh_id + ",protocol_hash=" + j.protocol_id +
                    ",drive_current=" + format_double(j.drive_current) + ",units=V/(S/m)\n";
  out += std::to_string(j.rows()) + ',' + std::to_string(j.cols()) + '\n';
  for (Eigen::Index r = 0; r < j.entries.rows(); ++r) {
    for (Eigen::Index c = 0; c < j.entries.cols(); ++c) {
      if (c) out += ',';
      out += format_double(j.entries(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string image_to_csv(const ReconstructionImage& image) {
  std::string out = "# mesh_id=" + image.mesh_id +
                    ",postprocessed=" + (image.postprocessed ? "1" : "0") +
                    ",raw_peak=" + format_double(image.raw_peak) + "\n";
  out += "element,value\n";
  for (std::size_t k = 0; k < image.values.size(); ++k) {
    out += std::to_string(k) + ',' + format_double(image.values[k]) + '\n';
  }
  return out;
}

std::string grid_to_pgm(const std::vector<std::vector<double>>& grid) {
  const std::size_t rows = grid.size();
  const std::size_t cols = rows ? grid.front().size() : 0;
  std::string out = "P2\n" + std::to_string(cols) + ' ' + std::to_string(rows) + "\n255\n";
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double v = std::clamp(std::isfinite(row[c]) ? row[c] : 0.0, 0.0, 1.0);
      if (c) out += ' ';
      out += std::to_string(static_cast<int>(std::lround(v * 255.0)));
    }
    out += '\n';
  }
  return out;
}

std::string blob_report_to_json(const BlobReport& report,
                                const std::vector<double>* localization_mm) {
  ojson j;
  j["threshold"] = report.threshold;
  j["min_elements"] = report.min_elements;
  ojson blobs = ojson::array();
  for (const auto& b : report.blobs) {
    ojson o;
    o["centroid_mm"] = point_json(b.centroid);
    o["area_mm2"] = b.area;
    o["peak"] = b.peak;
    o["element_count"] = b.elements.size();
    blobs.push_back(std::move(o));
  }
  j["blobs"] = std::move(blobs);
  if (localization_mm) j["localization_error_mm"] = *localization_mm;
  return j.dump(2) + "\n";
}

std::string sensitivity_report_to_json(const SensitivityReport& report) {
  ojson j;
  j["config_label"] = report.config_label;
  j["mean_relative_change"] = report.mean_relative_change;
  j["excluded"] = report.excluded;
  j["per_measurement_changes"] = report.per_measurement_changes;
  return j.dump(2) + "\n";
}

std::string action_config_to_json(const ActionConfig& config) {
  ojson j;
  ojson regions = ojson::array();
  for (const auto& r : config.regions) {
    ojson o;
    o["label"] = r.label;
    o["rect_mm"] = ojson::array({r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1});
    o["action"] = r.action;
    regions.push_back(std::move(o));
  }
  j["regions"] = std::move(regions);
  j["duration_threshold_frames"] = config.duration_threshold_frames;
  j["frame_rate"] = config.frame_rate;
  return j.dump(2) + "\n";
}

ActionConfig action_config_from_json(std::string_view text) {
  const auto j = parse_json(text, "action config");
  ActionConfig config = ActionConfig::defaults();
  try {
    if (j.contains("regions")) {
      config.regions.clear();
      for (const auto& r : j.at("regions")) {
        const auto& rect = r.at("rect_mm");
        config.regions.push_back({r.at("label").get<std::string>(),
                                  {rect.at(0).get<double>(), rect.at(1).get<double>(),
                                   rect.at(2).get<double>(), rect.at(3).get<double>()},
                                  r.at("action").get<std::string>()});
      }
    }
    config.duration_threshold_frames =
        j.value("duration_threshold_frames", config.duration_threshold_frames);
    config.frame_rate = j.value("frame_rate", config.frame_rate);
  } catch (const nlohmann::json::exception& e) {
    throw EitError(ErrorCode::kConfig, std::string("action config: ") + e.what());
  }
  config.validate();
  return config;
}

std::string state_to_jsonl(const TouchState& state) {
  ojson j;
  j["type"] = "state";
  j["frame"] = state.frame_index;
  j["active"] = state.active;
  j["centroid"] = state.centroid ? point_json(*state.centroid) : ojson(nullptr);
  j["intensity"] = state.intensity;
  return j.dump();
}

std::string event_to_jsonl(const TouchEvent& event, const std::optional<Action>& action) {
  ojson j;
  j["type"] = "event";
  j["kind"] = to_string(event.kind);
  j["frame"] = event.frame_index;
  j["centroid"] = point_json(event.centroid);
  j["region"] = event.region_label;
  if (event.kind == EventKind::kPressEnd) {
    j["duration_frames"] = event.duration_frames;
    j["action"] = action ? ojson(action->name) : ojson(nullptr);
    j["amplitude"] = action ? ojson(to_string(action->amplitude)) : ojson(nullptr);
  }
  return j.dump();
}

std::optional<TouchState> state_from_jsonl(std::string_view line) {
  const auto j = parse_json(line, "session log");
  if (j.value("type", std::string{}) != "state") return std::nullopt;
  try {
    TouchState s;
    s.frame_index = j.at("frame").get<std::size_t>();
    s.active = j.at("active").get<bool>();
    s.intensity = j.value("intensity", 0.0);
    if (j.contains("centroid") && !j.at("centroid").is_null()) {
      s.centroid = Point2{j["centroid"].at(0).get<double>(), j["centroid"].at(1).get<double>()};
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw EitError(ErrorCode::kParse, std::string("session log: ") + e.what());
  }
}

}  // namespace tactile_eit::io
