#include "tactile_eit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "json.hpp"
#include "tactile_eit/error.hpp"
#include "tactile_eit/io.hpp"
#include "tactile_eit/metrics.hpp"

namespace tactile_eit {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
  throw EitError(ErrorCode::kConfig,
                 "config " + (pointer.empty() ? std::string("/") : pointer) + ": " + message);
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
    if (!j_.is_object()) fail(pointer_, "expected an object");
  }

  std::string at(const std::string& key) const { return pointer_ + "/" + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(at(key), "expected a number");
    return v->get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) fail(at(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, std::string fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) fail(at(key) + "/" + std::to_string(i), "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(at(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string pointer_;
  std::set<std::string> seen_;
};

Point2 read_point(const json& j, const std::string& pointer) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    fail(pointer, "expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

TouchSpec read_touch(const json& j, const std::string& pointer) {
  ObjectReader r(j, pointer);
  TouchSpec t;
  const std::string shape = r.text("shape", "disc");
  if (shape == "disc") {
    t.shape = TouchSpec::Shape::kDisc;
    t.outer_radius = r.number("radius", 10.0);
  } else if (shape == "annulus") {
    t.shape = TouchSpec::Shape::kAnnulus;
    t.inner_radius = r.number("inner_radius", 0.0);
    t.outer_radius = r.number("outer_radius", 0.0);
  } else {
    fail(r.at("shape"), "expected \"disc\" or \"annulus\"");
  }
  const json* center = r.find("center");
  if (!center) fail(r.at("center"), "missing");
  t.center = read_point(*center, r.at("center"));
  t.level = r.number("level", 5.0);
  r.finish();
  return t;
}

std::vector<NamedPhantom> read_phantoms(const json& j, const std::string& pointer) {
  if (!j.is_array()) fail(pointer, "expected an array of phantoms");
  std::vector<NamedPhantom> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = pointer + "/" + std::to_string(i);
    ObjectReader r(j[i], p);
    NamedPhantom phantom;
    phantom.label = r.text("label", "");
    const json* touches = r.find("touches");
    if (!touches || !touches->is_array()) fail(r.at("touches"), "expected an array of touches");
    for (std::size_t k = 0; k < touches->size(); ++k) {
      phantom.touches.push_back(read_touch((*touches)[k], r.at("touches") + "/" + std::to_string(k)));
    }
    r.finish();
    out.push_back(std::move(phantom));
  }
  return out;
}

ReconstructionParams read_params(const json& j, const std::string& pointer,
                                 const ReconstructionParams& fallback) {
  ObjectReader r(j, pointer);
  ReconstructionParams p = fallback;
  try {
    p.method = parse_method(r.text("method", to_string(fallback.method)));
  } catch (const EitError& e) {
    fail(r.at("method"), e.what());
  }
  p.lambda = r.number("lambda", fallback.lambda);
  const auto iterations = r.count("iterations", static_cast<std::uint64_t>(fallback.iterations));
  if (iterations > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    fail(r.at("iterations"), "too large");
  }
  p.iterations = static_cast<int>(iterations);
  try {
    p.lambda_scaling = parse_lambda_scaling(r.text("lambda_scaling", to_string(fallback.lambda_scaling)));
  } catch (const EitError& e) {
    fail(r.at("lambda_scaling"), e.what());
  }
  try {
    p.prior = parse_prior(r.text("prior", to_string(fallback.prior)));
  } catch (const EitError& e) {
    fail(r.at("prior"), e.what());
  }
  r.finish();
  return p;
}

ActionConfig read_actions(const json& j, const std::string& pointer, const ActionConfig& fallback) {
  ObjectReader r(j, pointer);
  ActionConfig c = fallback;
  if (const json* regions = r.find("regions")) {
    if (!regions->is_array()) fail(r.at("regions"), "expected an array of regions");
    c.regions.clear();
    for (std::size_t i = 0; i < regions->size(); ++i) {
      const std::string p = r.at("regions") + "/" + std::to_string(i);
      ObjectReader rr((*regions)[i], p);
      Region region;
      region.label = rr.text("label", "region" + std::to_string(i));
      region.action = rr.text("action", "");
      const auto rect = rr.numbers("rect_mm", {});
      if (rect.size() != 4) fail(rr.at("rect_mm"), "expected [x0, y0, x1, y1]");
      region.rect = {rect[0], rect[1], rect[2], rect[3]};
      rr.finish();
      c.regions.push_back(std::move(region));
    }
  }
  c.duration_threshold_frames = r.count("duration_threshold_frames", c.duration_threshold_frames);
  c.frame_rate = r.number("frame_rate", c.frame_rate);
  r.finish();
  return c;
}

double read_snr(ObjectReader& r, const std::string& key, double fallback) {
  const json* v = r.find(key);
  if (!v) return fallback;
  if (v->is_null()) return std::numeric_limits<double>::infinity();
  if (v->is_string() && v->get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!v->is_number()) fail(r.at(key), "expected a number or \"inf\"");
  return v->get<double>();
}

ojson point_json(Point2 p) { return ojson::array({p.x, p.y}); }

ojson touch_json(const TouchSpec& t) {
  ojson j;
  if (t.shape == TouchSpec::Shape::kDisc) {
    j["shape"] = "disc";
    j["center"] = point_json(t.center);
    j["radius"] = t.outer_radius;
  } else {
    j["shape"] = "annulus";
    j["center"] = point_json(t.center);
    j["inner_radius"] = t.inner_radius;
    j["outer_radius"] = t.outer_radius;
  }
  j["level"] = t.level;
  return j;
}

ojson phantoms_json(const std::vector<NamedPhantom>& phantoms) {
  ojson out = ojson::array();
  for (const auto& p : phantoms) {
    ojson touches = ojson::array();
    for (const auto& t : p.touches) touches.push_back(touch_json(t));
    out.push_back({{"label", p.label}, {"touches", std::move(touches)}});
  }
  return out;
}

ojson params_json(const ReconstructionParams& p) {
  ojson j;
  j["method"] = to_string(p.method);
  j["lambda"] = p.lambda;
  j["iterations"] = p.iterations;
  j["lambda_scaling"] = to_string(p.lambda_scaling);
  j["prior"] = to_string(p.prior);
  return j;
}

void check(bool ok, const std::string& pointer, const std::string& message) {
  if (!ok) fail(pointer, message);
}

void check_phantoms(const std::vector<NamedPhantom>& phantoms, const std::string& pointer,
                    double side) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < phantoms.size(); ++i) {
    const std::string p = pointer + "/" + std::to_string(i);
    const auto& ph = phantoms[i];
    check(!ph.label.empty(), p + "/label", "must not be empty");
    check(ph.label.find_first_of("/\\ ,") == std::string::npos, p + "/label",
          "must not contain path separators, commas or spaces");
    check(labels.insert(ph.label).second, p + "/label", "duplicate label '" + ph.label + "'");
    check(!ph.touches.empty(), p + "/touches", "must not be empty");
    for (std::size_t k = 0; k < ph.touches.size(); ++k) {
      const auto& t = ph.touches[k];
      const std::string tp = p + "/touches/" + std::to_string(k);
      try {
        t.validate();
      } catch (const EitError& e) {
        fail(tp, e.what());
      }
      check(t.center.x >= 0.0 && t.center.x <= side && t.center.y >= 0.0 && t.center.y <= side,
            tp + "/center", "outside the sensor");
    }
  }
}

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

std::vector<TouchSpec> at_level(const std::vector<TouchSpec>& touches, double level) {
  std::vector<TouchSpec> out = touches;
  for (auto& t : out) t.level = level;
  return out;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads and
// rethrows the first failure by index.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::reference_defaults() {
  ExperimentConfig c;
  const double r = 10.0, level = 5.0;
  auto disc = [&](double x, double y) { return TouchSpec::disc({x, y}, r, level); };
  // Sweep touches sit on lattice crossings so every configuration has
  // channel under the disc.
  c.sweep.phantoms = {{"single", {disc(40, 60)}},
                      {"double", {disc(40, 40), disc(60, 60)}},
                      {"triple", {disc(40, 40), disc(60, 40), disc(40, 60)}}};
  c.recon.phantoms = {{"single", {disc(35, 60)}},
                      {"double", {disc(30, 50), disc(70, 50)}},
                      {"triple", {disc(30, 30), disc(70, 30), disc(50, 72)}},
                      {"annulus", {TouchSpec::annulus({50, 50}, 15, 25, level)}}};
  c.recon.methods = {ReconstructionParams::tikhonov(), ReconstructionParams::l1()};
  return c;
}

void ExperimentConfig::validate() const {
  check(positive(mesh.side_mm), "/mesh/side_mm", "must be > 0");
  check(mesh.sim_divisions >= 2, "/mesh/sim_divisions", "must be >= 2");
  check(mesh.recon_divisions >= 2, "/mesh/recon_divisions", "must be >= 2");
  check(mesh.electrode_count >= 4 && mesh.electrode_count % 4 == 0, "/mesh/electrode_count",
        "must be a positive multiple of 4");
  check(positive(mesh.electrode_width_mm), "/mesh/electrode_width_mm", "must be > 0");
  check(mesh.allow_inverse_crime || mesh.sim_divisions != mesh.recon_divisions,
        "/mesh/recon_divisions",
        "equals sim_divisions (inverse crime); set allow_inverse_crime to override");
  check(positive(drive_current), "/drive_current_a", "must be > 0");
  check(!std::isnan(noise.snr_db) && noise.snr_db != -std::numeric_limits<double>::infinity(),
        "/noise/snr_db", "must be a number or \"inf\"");

  check(sweep.divisions >= 2, "/sweep/divisions", "must be >= 2");
  check(positive(sweep.pitch_mm), "/sweep/pitch_mm", "must be > 0");
  for (std::size_t i = 0; i < sweep.channel_widths_mm.size(); ++i) {
    const double w = sweep.channel_widths_mm[i];
    check(positive(w) && w <= sweep.pitch_mm, "/sweep/channel_widths_mm/" + std::to_string(i),
          "must satisfy 0 < width <= pitch");
  }
  check(positive(sweep.background_conductivity), "/sweep/background_conductivity", "must be > 0");
  check(positive(sweep.channel_conductivity), "/sweep/channel_conductivity", "must be > 0");
  for (std::size_t i = 0; i < sweep.levels.size(); ++i) {
    check(positive(sweep.levels[i]), "/sweep/levels/" + std::to_string(i), "must be > 0");
  }
  check_phantoms(sweep.phantoms, "/sweep/phantoms", mesh.side_mm);

  check_phantoms(recon.phantoms, "/recon/phantoms", mesh.side_mm);
  for (std::size_t i = 0; i < recon.methods.size(); ++i) {
    try {
      recon.methods[i].validate();
    } catch (const EitError& e) {
      fail("/recon/methods/" + std::to_string(i), e.what());
    }
  }
  check(recon.blob_threshold > 0.0 && recon.blob_threshold < 1.0, "/recon/blob_threshold",
        "must be in (0, 1)");
  check(recon.raster >= 1, "/recon/raster", "must be >= 1");

  try {
    hmi.actions.validate();
  } catch (const EitError& e) {
    fail("/hmi/actions", e.what());
  }
  check(hmi.debounce_frames >= 1, "/hmi/debounce_frames", "must be >= 1");
  check(positive(hmi.activation_threshold), "/hmi/activation_threshold", "must be > 0");
  try {
    hmi.method.validate();
  } catch (const EitError& e) {
    fail("/hmi/method", e.what());
  }
  check(positive(hmi.touch_level), "/hmi/touch_level", "must be > 0");
  check(positive(hmi.default_radius_mm), "/hmi/default_radius_mm", "must be > 0");
  check(hmi.blob_threshold > 0.0 && hmi.blob_threshold < 1.0, "/hmi/blob_threshold",
        "must be in (0, 1)");
  check(hmi.raster >= 1, "/hmi/raster", "must be >= 1");
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // e.what() carries "line L, column C".
    throw EitError(ErrorCode::kParse, std::string("config: ") + e.what());
  }

  ExperimentConfig c = ExperimentConfig::reference_defaults();
  ObjectReader top(root, "");
  if (const json* m = top.find("mesh")) {
    ObjectReader r(*m, "/mesh");
    c.mesh.side_mm = r.number("side_mm", c.mesh.side_mm);
    c.mesh.sim_divisions = r.count("sim_divisions", c.mesh.sim_divisions);
    c.mesh.recon_divisions = r.count("recon_divisions", c.mesh.recon_divisions);
    c.mesh.electrode_count = r.count("electrode_count", c.mesh.electrode_count);
    c.mesh.electrode_width_mm = r.number("electrode_width_mm", c.mesh.electrode_width_mm);
    c.mesh.allow_inverse_crime = r.flag("allow_inverse_crime", c.mesh.allow_inverse_crime);
    r.finish();
  }
  if (const json* p = top.find("protocol")) {
    ObjectReader r(*p, "/protocol");
    c.reciprocity_reduced = r.flag("reciprocity_reduced", c.reciprocity_reduced);
    r.finish();
  }
  c.drive_current = top.number("drive_current_a", c.drive_current);
  if (const json* n = top.find("noise")) {
    ObjectReader r(*n, "/noise");
    c.noise.snr_db = read_snr(r, "snr_db", c.noise.snr_db);
    c.noise.seed = r.count("seed", c.noise.seed);
    r.finish();
  }
  if (const json* s = top.find("sweep")) {
    ObjectReader r(*s, "/sweep");
    c.sweep.divisions = r.count("divisions", c.sweep.divisions);
    c.sweep.pitch_mm = r.number("pitch_mm", c.sweep.pitch_mm);
    c.sweep.channel_widths_mm = r.numbers("channel_widths_mm", c.sweep.channel_widths_mm);
    c.sweep.include_uniform = r.flag("include_uniform", c.sweep.include_uniform);
    c.sweep.background_conductivity =
        r.number("background_conductivity", c.sweep.background_conductivity);
    c.sweep.channel_conductivity = r.number("channel_conductivity", c.sweep.channel_conductivity);
    c.sweep.levels = r.numbers("levels", c.sweep.levels);
    if (const json* ph = r.find("phantoms")) c.sweep.phantoms = read_phantoms(*ph, r.at("phantoms"));
    r.finish();
  }
  if (const json* s = top.find("recon")) {
    ObjectReader r(*s, "/recon");
    if (const json* ph = r.find("phantoms")) c.recon.phantoms = read_phantoms(*ph, r.at("phantoms"));
    if (const json* m = r.find("methods")) {
      if (!m->is_array()) fail(r.at("methods"), "expected an array");
      c.recon.methods.clear();
      for (std::size_t i = 0; i < m->size(); ++i) {
        c.recon.methods.push_back(
            read_params((*m)[i], r.at("methods") + "/" + std::to_string(i), ReconstructionParams{}));
      }
    }
    c.recon.blob_threshold = r.number("blob_threshold", c.recon.blob_threshold);
    c.recon.min_blob_elements = r.count("min_blob_elements", c.recon.min_blob_elements);
    c.recon.raster = r.count("raster", c.recon.raster);
    r.finish();
  }
  if (const json* h = top.find("hmi")) {
    ObjectReader r(*h, "/hmi");
    if (const json* a = r.find("actions")) c.hmi.actions = read_actions(*a, r.at("actions"), c.hmi.actions);
    c.hmi.debounce_frames = r.count("debounce_frames", c.hmi.debounce_frames);
    c.hmi.activation_threshold = r.number("activation_threshold", c.hmi.activation_threshold);
    if (const json* m = r.find("method")) c.hmi.method = read_params(*m, r.at("method"), c.hmi.method);
    c.hmi.touch_level = r.number("touch_level", c.hmi.touch_level);
    c.hmi.default_radius_mm = r.number("default_radius_mm", c.hmi.default_radius_mm);
    c.hmi.blob_threshold = r.number("blob_threshold", c.hmi.blob_threshold);
    c.hmi.raster = r.count("raster", c.hmi.raster);
    r.finish();
  }
  c.output_dir = top.text("output_dir", c.output_dir.string());
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text_file(path));
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["mesh"] = {{"side_mm", c.mesh.side_mm},
               {"sim_divisions", c.mesh.sim_divisions},
               {"recon_divisions", c.mesh.recon_divisions},
               {"electrode_count", c.mesh.electrode_count},
               {"electrode_width_mm", c.mesh.electrode_width_mm},
               {"allow_inverse_crime", c.mesh.allow_inverse_crime}};
  j["protocol"] = {{"reciprocity_reduced", c.reciprocity_reduced}};
  j["drive_current_a"] = c.drive_current;
  j["noise"] = {{"snr_db", std::isinf(c.noise.snr_db) ? ojson("inf") : ojson(c.noise.snr_db)},
                {"seed", c.noise.seed}};
  j["sweep"] = {{"divisions", c.sweep.divisions},
                {"pitch_mm", c.sweep.pitch_mm},
                {"channel_widths_mm", c.sweep.channel_widths_mm},
                {"include_uniform", c.sweep.include_uniform},
                {"background_conductivity", c.sweep.background_conductivity},
                {"channel_conductivity", c.sweep.channel_conductivity},
                {"levels", c.sweep.levels},
                {"phantoms", phantoms_json(c.sweep.phantoms)}};
  ojson methods = ojson::array();
  for (const auto& p : c.recon.methods) methods.push_back(params_json(p));
  j["recon"] = {{"phantoms", phantoms_json(c.recon.phantoms)},
                {"methods", std::move(methods)},
                {"blob_threshold", c.recon.blob_threshold},
                {"min_blob_elements", c.recon.min_blob_elements},
                {"raster", c.recon.raster}};
  ojson regions = ojson::array();
  for (const auto& r : c.hmi.actions.regions) {
    regions.push_back({{"label", r.label},
                       {"rect_mm", {r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1}},
                       {"action", r.action}});
  }
  j["hmi"] = {{"actions",
               {{"regions", std::move(regions)},
                {"duration_threshold_frames", c.hmi.actions.duration_threshold_frames},
                {"frame_rate", c.hmi.actions.frame_rate}}},
              {"debounce_frames", c.hmi.debounce_frames},
              {"activation_threshold", c.hmi.activation_threshold},
              {"method", params_json(c.hmi.method)},
              {"touch_level", c.hmi.touch_level},
              {"default_radius_mm", c.hmi.default_radius_mm},
              {"blob_threshold", c.hmi.blob_threshold},
              {"raster", c.hmi.raster}};
  j["output_dir"] = c.output_dir.generic_string();
  return j.dump(2) + "\n";
}

std::vector<SweepRow> compute_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto& s = config.sweep;
  struct Task {
    std::string label;
    std::optional<double> width;
  };
  std::vector<Task> tasks;
  if (s.include_uniform) tasks.push_back({"uniform", std::nullopt});
  for (double w : s.channel_widths_mm) tasks.push_back({"lattice_w" + io::format_double(w), w});
  if (tasks.empty() || s.levels.empty() || s.phantoms.empty()) return {};

  const Mesh mesh = build_mesh(config.mesh.side_mm, s.divisions, config.mesh.electrode_count,
                               config.mesh.electrode_width_mm);
  const Protocol protocol =
      generate_adjacent_protocol(config.mesh.electrode_count, config.reciprocity_reduced);

  std::vector<std::vector<SweepRow>> per_task(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const ConductivityField base =
        task.width ? apply_lattice(mesh, {s.pitch_mm, *task.width, s.background_conductivity},
                                   s.channel_conductivity)
                   : uniform_field(mesh, s.channel_conductivity);
    const MeasurementFrame reference = simulate_frame(mesh, base, protocol, config.drive_current);
    for (double level : s.levels) {
      for (const auto& phantom : s.phantoms) {
        const auto touches = at_level(phantom.touches, level);
        const MeasurementFrame touched =
            simulate_frame(mesh, apply_touches(base, mesh, touches), protocol, config.drive_current);
        const SensitivityReport report = mean_relative_change(reference, touched, task.label);
        per_task[i].push_back({task.label, task.width, level, phantom.label,
                               report.mean_relative_change, protocol.size(), report.excluded});
      }
    }
  });

  std::vector<SweepRow> rows;
  for (auto& block : per_task) {
    for (auto& row : block) rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out =
      "config,channel_width_mm,level,phantom,mean_relative_change,measurements,excluded\n";
  for (const auto& r : rows) {
    out += r.config + ',' + (r.channel_width_mm ? io::format_double(*r.channel_width_mm) : "") +
           ',' + io::format_double(r.level) + ',' + r.phantom + ',' +
           io::format_double(r.mean_relative_change) + ',' + std::to_string(r.measurements) + ',' +
           std::to_string(r.excluded) + '\n';
  }
  return out;
}

std::filesystem::path run_sweep(const ExperimentConfig& config) {
  const auto rows = compute_sweep(config);
  const auto path = config.output_dir / "sweep.csv";
  io::write_text_file(path, sweep_to_csv(rows));
  return path;
}

ReconstructionPipeline::ReconstructionPipeline(const ExperimentConfig& config,
                                               std::span<const ReconstructionParams> methods)
    : snr_db_((config.validate(), config.noise.snr_db)),
      drive_current_(config.drive_current),
      sim_mesh_(build_mesh(config.mesh.side_mm, config.mesh.sim_divisions,
                           config.mesh.electrode_count, config.mesh.electrode_width_mm)),
      recon_mesh_(build_mesh(config.mesh.side_mm, config.mesh.recon_divisions,
                             config.mesh.electrode_count, config.mesh.electrode_width_mm)),
      protocol_(generate_adjacent_protocol(config.mesh.electrode_count,
                                           config.reciprocity_reduced)),
      reference_(simulate_frame(sim_mesh_, uniform_field(sim_mesh_), protocol_, drive_current_)),
      jacobian_(compute_jacobian(recon_mesh_, uniform_field(recon_mesh_), protocol_,
                                 drive_current_)) {
  if (methods.empty()) throw EitError(ErrorCode::kInvalidArgument, "no reconstruction method");
  reconstructors_.reserve(methods.size());
  for (const auto& p : methods) reconstructors_.emplace_back(jacobian_, p);
}

MeasurementFrame ReconstructionPipeline::delta_frame(std::span<const TouchSpec> touches,
                                                     std::optional<std::uint64_t> noise_seed) const {
  const ConductivityField field = apply_touches(uniform_field(sim_mesh_), sim_mesh_, touches);
  MeasurementFrame dv =
      difference(simulate_frame(sim_mesh_, field, protocol_, drive_current_), reference_);
  if (noise_seed) dv = add_noise(dv, snr_db_, *noise_seed);
  return dv;
}

ReconstructionImage ReconstructionPipeline::reconstruct(const MeasurementFrame& delta_v,
                                                        std::size_t method_index) const {
  if (method_index >= reconstructors_.size()) {
    throw EitError(ErrorCode::kInvalidArgument, "method index out of range");
  }
  return reconstructors_[method_index](delta_v);
}

AnnulusCoverage annulus_coverage(const ReconstructionImage& image, const Mesh& mesh,
                                 const TouchSpec& annulus, double threshold) {
  if (image.values.size() != mesh.element_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "image does not match the mesh");
  }
  AnnulusCoverage c;
  for (std::size_t k = 0; k < mesh.element_count(); ++k) {
    const Point2 p = mesh.centroid(k);
    const bool hot = image.values[k] >= threshold;
    if (annulus.contains(p)) {
      ++c.ring_elements;
      if (hot) ++c.ring_covered;
    }
    if (distance(p, annulus.center) <= 0.5 * annulus.inner_radius) {
      ++c.center_elements;
      if (hot) ++c.center_covered;
    }
  }
  return c;
}

std::vector<ReconOutcome> run_reconstruction(const ExperimentConfig& config) {
  config.validate();
  const auto& rc = config.recon;
  const ReconstructionPipeline pipeline(config, rc.methods);
  const Mesh& mesh = pipeline.recon_mesh();
  const auto& out_dir = config.output_dir;

  std::vector<ReconOutcome> outcomes;
  for (const auto& phantom : rc.phantoms) {
    std::optional<MeasurementFrame> dv;
    std::string frame_error;
    try {
      dv = pipeline.delta_frame(phantom.touches, config.noise.seed);
      io::write_text_file(out_dir / (phantom.label + "_dv.csv"),
                          io::frame_to_csv(*dv, pipeline.protocol()));
    } catch (const std::exception& e) {
      frame_error = e.what();
    }

    std::vector<Point2> truth;
    bool all_discs = true;
    for (const auto& t : phantom.touches) {
      all_discs = all_discs && t.shape == TouchSpec::Shape::kDisc;
      truth.push_back(t.center);
    }

    for (std::size_t m = 0; m < rc.methods.size(); ++m) {
      ReconOutcome o;
      o.phantom = phantom.label;
      o.method = to_string(rc.methods[m].method);
      o.expected_blobs = phantom.touches.size();
      if (!dv) {
        o.error = frame_error;
        outcomes.push_back(std::move(o));
        continue;
      }
      try {
        const ReconstructionImage image = postprocess(pipeline.reconstruct(*dv, m));
        const BlobReport blobs = detect_blobs(image, mesh, rc.blob_threshold, rc.min_blob_elements);
        o.raw_peak = image.raw_peak;
        o.blob_count = blobs.blobs.size();
        if (all_discs && o.blob_count == truth.size()) {
          o.localization_mm = localization_error(blobs, truth);
        }
        if (phantom.touches.size() == 1 && !all_discs) {
          o.annulus = annulus_coverage(image, mesh, phantom.touches.front());
        }
        const std::string stem = phantom.label + "_" + o.method;
        io::write_text_file(out_dir / (stem + ".pgm"),
                            io::grid_to_pgm(rasterize(image, mesh, rc.raster)));
        io::write_text_file(out_dir / (stem + ".csv"), io::image_to_csv(image));
        io::write_text_file(out_dir / (stem + "_blobs.json"),
                            io::blob_report_to_json(
                                blobs, o.localization_mm.empty() ? nullptr : &o.localization_mm));
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      outcomes.push_back(std::move(o));
    }
  }

  ojson results = ojson::array();
  for (const auto& o : outcomes) {
    ojson r;
    r["phantom"] = o.phantom;
    r["method"] = o.method;
    r["ok"] = o.ok;
    if (!o.ok) r["error"] = o.error;
    r["expected_blobs"] = o.expected_blobs;
    r["blob_count"] = o.blob_count;
    r["localization_error_mm"] = o.localization_mm;
    r["raw_peak"] = o.raw_peak;
    if (o.annulus) {
      r["annulus"] = {{"ring_elements", o.annulus->ring_elements},
                      {"ring_covered", o.annulus->ring_covered},
                      {"coverage", o.annulus->coverage()},
                      {"center_elements", o.annulus->center_elements},
                      {"center_covered", o.annulus->center_covered}};
    }
    results.push_back(std::move(r));
  }
  ojson summary;
  summary["protocol_hash"] = pipeline.protocol().id();
  summary["sim_mesh_id"] = pipeline.sim_mesh().id();
  summary["recon_mesh_id"] = mesh.id();
  summary["measurements"] = pipeline.protocol().size();
  summary["elements"] = mesh.element_count();
  summary["noise"] = {{"snr_db", std::isinf(config.noise.snr_db) ? ojson("inf")
                                                                 : ojson(config.noise.snr_db)},
                      {"seed", config.noise.seed}};
  summary["results"] = std::move(results);
  io::write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
  io::write_text_file(out_dir / "config.json", config_to_json(config));
  return outcomes;
}

}  // namespace tactile_eit
