#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tactile_eit/forward.hpp"
#include "tactile_eit/hmi.hpp"
#include "tactile_eit/inverse.hpp"
#include "tactile_eit/mesh.hpp"
#include "tactile_eit/phantom.hpp"
#include "tactile_eit/protocol.hpp"
#include "tactile_eit/sensitivity.hpp"

namespace tactile_eit {

struct MeshSettings {
  double side_mm = 100.0;
  std::size_t sim_divisions = 64;
  std::size_t recon_divisions = 32;
  std::size_t electrode_count = 16;
  double electrode_width_mm = 3.0;
  // Same mesh for data and reconstruction is refused unless set.
  bool allow_inverse_crime = false;
};

struct NoiseSettings {
  double snr_db = 40.0;  // +inf disables noise
  std::uint64_t seed = 7;
};

struct NamedPhantom {
  std::string label;
  std::vector<TouchSpec> touches;
};

struct SweepSettings {
  std::size_t divisions = 100;
  double pitch_mm = 20.0;
  std::vector<double> channel_widths_mm{2.0, 4.0, 6.0, 8.0, 10.0};
  bool include_uniform = true;
  double background_conductivity = 1e-6;
  double channel_conductivity = kBackgroundConductivity;
  std::vector<double> levels{2.0, 3.0, 4.0, 5.0};
  // Touch levels are replaced by each sweep level.
  std::vector<NamedPhantom> phantoms;
};

struct ReconSettings {
  std::vector<NamedPhantom> phantoms;
  std::vector<ReconstructionParams> methods;
  double blob_threshold = 0.3;
  std::size_t min_blob_elements = 3;
  std::size_t raster = 64;
};

struct HmiSettings {
  ActionConfig actions = ActionConfig::defaults();
  std::size_t debounce_frames = 1;
  double activation_threshold = 0.25;  // raw reconstruction peak, S/m
  ReconstructionParams method = ReconstructionParams::tikhonov();
  double touch_level = 5.0;
  double default_radius_mm = 10.0;
  double blob_threshold = 0.3;
  std::size_t raster = 64;
};

struct ExperimentConfig {
  MeshSettings mesh;
  bool reciprocity_reduced = true;
  double drive_current = kDefaultDriveCurrent;
  NoiseSettings noise;
  SweepSettings sweep;
  ReconSettings recon;
  HmiSettings hmi;
  std::filesystem::path output_dir = "out";

  // Settings of the reference study with every list filled in.
  static ExperimentConfig reference_defaults();
  // Throws kConfig naming the offending field.
  void validate() const;
};

// Missing keys take reference_defaults() values; unknown keys are rejected.
// Errors are kParse (with line and column) or kConfig (with a JSON pointer).
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

struct SweepRow {
  std::string config;                    // "uniform" or "lattice_w<width>"
  std::optional<double> channel_width_mm;  // none for uniform
  double level = 0.0;
  std::string phantom;
  double mean_relative_change = 0.0;
  std::size_t measurements = 0;
  std::size_t excluded = 0;
};

// Rows ordered config, level, phantom. Configurations run concurrently;
// the result does not depend on scheduling.
std::vector<SweepRow> compute_sweep(const ExperimentConfig& config);
std::string sweep_to_csv(std::span<const SweepRow> rows);
// Writes <output_dir>/sweep.csv and returns its path.
std::filesystem::path run_sweep(const ExperimentConfig& config);

// Fine-mesh simulation, coarse-mesh Jacobian at the uniform background, and
// one Reconstructor per entry of `methods`. Const members are safe to call
// concurrently.
class ReconstructionPipeline {
 public:
  ReconstructionPipeline(const ExperimentConfig& config,
                         std::span<const ReconstructionParams> methods);

  const Mesh& sim_mesh() const { return sim_mesh_; }
  const Mesh& recon_mesh() const { return recon_mesh_; }
  const Protocol& protocol() const { return protocol_; }
  const SensitivityMatrix& jacobian() const { return jacobian_; }
  const MeasurementFrame& reference() const { return reference_; }

  // Touched minus untouched frame on the simulation mesh, plus noise at the
  // configured SNR when a seed is given.
  MeasurementFrame delta_frame(std::span<const TouchSpec> touches,
                               std::optional<std::uint64_t> noise_seed) const;
  // Raw (not postprocessed) image on the reconstruction mesh, using the
  // method at `method_index` in the constructor list.
  ReconstructionImage reconstruct(const MeasurementFrame& delta_v,
                                  std::size_t method_index = 0) const;
  std::size_t method_count() const { return reconstructors_.size(); }

 private:
  double snr_db_;
  double drive_current_;
  Mesh sim_mesh_;
  Mesh recon_mesh_;
  Protocol protocol_;
  MeasurementFrame reference_;
  SensitivityMatrix jacobian_;
  std::vector<Reconstructor> reconstructors_;
};

struct AnnulusCoverage {
  std::size_t ring_elements = 0;
  std::size_t ring_covered = 0;     // ring elements at or above threshold
  std::size_t center_elements = 0;  // within inner_radius / 2 of the center
  std::size_t center_covered = 0;
  double coverage() const {
    return ring_elements ? static_cast<double>(ring_covered) / ring_elements : 0.0;
  }
};

// Ring and hole occupancy of a postprocessed image for an annulus touch.
AnnulusCoverage annulus_coverage(const ReconstructionImage& image, const Mesh& mesh,
                                 const TouchSpec& annulus, double threshold = 0.5);

struct ReconOutcome {
  std::string phantom;
  std::string method;
  bool ok = false;
  std::string error;
  std::size_t expected_blobs = 0;
  std::size_t blob_count = 0;
  std::vector<double> localization_mm;  // empty unless counts match
  double raw_peak = 0.0;
  std::optional<AnnulusCoverage> annulus;
};

// One image, CSV and blob report per phantom and method, plus summary.json.
// A failing phantom is recorded in its outcome and the batch continues.
std::vector<ReconOutcome> run_reconstruction(const ExperimentConfig& config);

}  // namespace tactile_eit
