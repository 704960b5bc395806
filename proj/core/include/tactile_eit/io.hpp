#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tactile_eit/forward.hpp"
#include "tactile_eit/hmi.hpp"
#include "tactile_eit/inverse.hpp"
#include "tactile_eit/mesh.hpp"
#include "tactile_eit/metrics.hpp"
#include "tactile_eit/protocol.hpp"
#include "tactile_eit/sensitivity.hpp"

// Text formats only (JSON, CSV, PGM) so outputs diff cleanly. Every writer
// is deterministic: fixed key order and round-trip number formatting.
namespace tactile_eit::io {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// Shortest text that parses back to the same double.
std::string format_double(double v);

// {"side_mm", "divisions", "nodes": [[x,y],...], "elements": [[a,b,c],...],
//  "electrodes": [[[node_a,node_b,t_begin,t_end],...],...]}
std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(std::string_view text);

std::string protocol_to_json(const Protocol& protocol);

// "# protocol_hash=<hex>,drive_current=<A>" then
// "drive_plus,drive_minus,meas_plus,meas_minus,volts" and one row per pattern.
std::string frame_to_csv(const MeasurementFrame& frame, const Protocol& protocol);
struct FrameCsv {
  MeasurementFrame frame;
  std::vector<Pattern> patterns;
};
FrameCsv frame_from_csv(std::string_view text);

// Provenance comment lines, then "rows,cols" and the row-major entries.
std::string jacobian_to_csv(const SensitivityMatrix& j);

// "element,value" rows.
std::string image_to_csv(const ReconstructionImage& image);
// Plain PGM (P2), 8-bit; values clamped to [0, 1] and scaled to 0..255.
std::string grid_to_pgm(const std::vector<std::vector<double>>& grid);

std::string blob_report_to_json(const BlobReport& report,
                                const std::vector<double>* localization_mm = nullptr);
std::string sensitivity_report_to_json(const SensitivityReport& report);

std::string action_config_to_json(const ActionConfig& config);
ActionConfig action_config_from_json(std::string_view text);

// JSON-lines session log records.
std::string state_to_jsonl(const TouchState& state);
std::string event_to_jsonl(const TouchEvent& event, const std::optional<Action>& action);
// Parses a "state" record; nullopt for any other record type.
std::optional<TouchState> state_from_jsonl(std::string_view line);

}  // namespace tactile_eit::io
