// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 on any FAIL.
// Every check computes its own reference values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tactile_eit/error.hpp"
#include "tactile_eit/experiment.hpp"
#include "tactile_eit/hmi.hpp"
#include "tactile_eit/io.hpp"
#include "tactile_eit/metrics.hpp"
#include "tactile_eit/phantom.hpp"
#include "tactile_eit/sensitivity.hpp"

using namespace tactile_eit;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ConductivityField random_field(const Mesh& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  std::vector<double> v(mesh.element_count());
  for (auto& x : v) x = u(rng);
  return ConductivityField(std::move(v));
}

using Quad = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;

// Adjacent drive pairs against adjacent measurement pairs sharing no electrode.
std::vector<Quad> enumerate_adjacent(std::size_t e) {
  std::vector<Quad> out;
  for (std::size_t d = 0; d < e; ++d) {
    for (std::size_t m = 0; m < e; ++m) {
      const std::set<std::size_t> used{d, (d + 1) % e, m, (m + 1) % e};
      if (used.size() == 4) out.emplace_back(d, (d + 1) % e, m, (m + 1) % e);
    }
  }
  return out;
}

Result p1_protocol_count() {
  const auto reduced = generate_adjacent_protocol(16, true).size();
  const auto full = generate_adjacent_protocol(16, false).size();
  const auto all = enumerate_adjacent(16);
  std::size_t unordered = 0;
  for (const auto& [d, d2, m, m2] : all) unordered += std::make_pair(d, d2) < std::make_pair(m, m2);
  const bool ok = reduced == 104 && full == 208 && all.size() == 208 && unordered == 104;
  return {ok, "reduced " + std::to_string(reduced) + ", full " + std::to_string(full)};
}

Result p2_reciprocity() {
  const Mesh mesh = build_mesh(100, 64, 16, 3);
  const auto protocol = generate_adjacent_protocol(16, false);
  std::map<Quad, std::size_t> row;
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    const auto& p = protocol[i];
    row[{p.drive_plus, p.drive_minus, p.meas_plus, p.meas_minus}] = i;
  }
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto v = simulate_frame(mesh, random_field(mesh, seed), protocol).voltages;
    for (std::size_t i = 0; i < protocol.size(); ++i) {
      const auto& p = protocol[i];
      const double a = v[i], b = v[row.at({p.meas_plus, p.meas_minus, p.drive_plus, p.drive_minus})];
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
  }
  return {worst < 1e-9, "max reciprocal mismatch " + fmt("%.2e", worst) + " over 5 fields"};
}

Result p3_conservation() {
  const Mesh mesh = build_mesh(100, 64, 16, 3);
  const auto field = random_field(mesh, 42);
  const LinearSystem system(mesh, field);
  const double current = kDefaultDriveCurrent;
  double worst_load = 0.0, worst_flux = 0.0;
  for (std::size_t d = 0; d < 16; ++d) {
    const auto load = drive_load(mesh, d, (d + 1) % 16, current);
    worst_load = std::max(worst_load, std::abs(load.sum()) / current);
    const auto u = solve_drive(system, mesh, d, (d + 1) % 16, current).node_potentials;
    // Nodal currents implied by the solved potentials, ground node included.
    const Eigen::VectorXd injected = system.stiffness() * u;
    worst_flux = std::max(worst_flux, std::abs(injected.sum()) / current);
  }
  const auto protocol = generate_adjacent_protocol(16, true);
  const auto a = simulate_frame(mesh, field, protocol), b = simulate_frame(mesh, field, protocol);
  const auto dv = difference(a, b).voltages;
  const bool zero = std::all_of(dv.begin(), dv.end(), [](double v) { return v == 0.0; });
  return {worst_load < 1e-12 && worst_flux < 1e-12 && zero,
          "load sum " + fmt("%.1e", worst_load) + ", nodal current sum " + fmt("%.1e", worst_flux) +
              ", identical-frame dV " + (zero ? "exactly 0" : "nonzero")};
}

Result p4_jacobian() {
  const Mesh mesh = build_mesh(100, 32, 16, 3);
  const auto protocol = generate_adjacent_protocol(16, true);
  const auto field = random_field(mesh, 3);
  const auto j = compute_jacobian(mesh, field, protocol);
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, mesh.element_count() - 1);
  const double h = 1e-4;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = pick(rng);
    const auto up = simulate_frame(mesh, field.with_value(k, field[k] + h), protocol).voltages;
    const auto down = simulate_frame(mesh, field.with_value(k, field[k] - h), protocol).voltages;
    for (std::size_t r = 0; r < protocol.size(); ++r) {
      const double exact = j.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      if (std::abs(exact) <= 1e-12) continue;
      const double fd = (up[r] - down[r]) / (2 * h);
      worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
      ++checked;
    }
  }
  return {worst < 1e-3 && checked > 0,
          "max relative FD error " + fmt("%.2e", worst) + " on " + std::to_string(checked) + " entries"};
}

SensitivityMatrix wrap(const Eigen::MatrixXd& j) {
  return {j, ConductivityField(std::vector<double>(static_cast<std::size_t>(j.cols()), 1.0)), "p",
          "m", kDefaultDriveCurrent};
}

MeasurementFrame frame_of(std::vector<double> v) { return {std::move(v), "p", kDefaultDriveCurrent}; }

Result p5_solvers(const ReconstructionPipeline& pipeline) {
  double worst = 0.0;
  auto expect = [&](const ReconstructionImage& img, double a, double b) {
    worst = std::max({worst, std::abs(img.values[0] - a), std::abs(img.values[1] - b)});
  };
  const auto id = wrap(Eigen::MatrixXd::Identity(2, 2));
  expect(reconstruct(id, frame_of({1, 0}), ReconstructionParams::tikhonov(0, LambdaScaling::kAbsolute)), 1, 0);
  expect(reconstruct(id, frame_of({1, 0}), ReconstructionParams::tikhonov(1, LambdaScaling::kAbsolute)), 0.5, 0);
  expect(reconstruct(id, frame_of({1.0, 0.005}), ReconstructionParams::l1(0.01, 200, LambdaScaling::kAbsolute)),
         0.99, 0);
  expect(reconstruct(id, frame_of({0, 0}), ReconstructionParams::l1(0.01, 200, LambdaScaling::kAbsolute)), 0, 0);

  // ISTA on the weighted Jacobian actually solved by the L1 method, for three
  // seeded random touches with noise.
  const auto& jac = pipeline.jacobian().entries;
  const Eigen::MatrixXd jw = jac * column_weights(jac, Prior::kSensitivity).asDiagonal();
  const double lambda = effective_lambda(jw, ReconstructionParams::l1());
  std::size_t increases = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(20, 80), level(2, 5);
    const std::vector<TouchSpec> touch{TouchSpec::disc({pos(rng), pos(rng)}, 10, level(rng))};
    const auto dv = pipeline.delta_frame(touch, seed);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(
        dv.voltages.data(), static_cast<Eigen::Index>(dv.voltages.size()));
    std::vector<double> trace;
    solve_ista(jw, b, lambda, 200, &trace);
    double previous = l1_objective(jw, b, Eigen::VectorXd::Zero(jw.cols()), lambda);
    for (double f : trace) {
      increases += f > previous;
      previous = f;
    }
  }
  return {worst <= 1e-10 && increases == 0,
          "closed-form error " + fmt("%.1e", worst) + ", ISTA objective increases " +
              std::to_string(increases) + " / 600 steps"};
}

Result p6_sweep_trends(const ExperimentConfig& config) {
  const auto rows = compute_sweep(config);
  std::map<std::tuple<std::string, double, std::string>, double> value;
  std::set<std::string> phantoms;
  for (const auto& r : rows) {
    value[{r.config, r.level, r.phantom}] = r.mean_relative_change;
    phantoms.insert(r.phantom);
  }
  const auto& sw = config.sweep;
  std::vector<double> widths = sw.channel_widths_mm;
  std::sort(widths.begin(), widths.end());
  std::vector<double> levels = sw.levels;
  std::sort(levels.begin(), levels.end());
  auto lattice = [](double w) {
    std::ostringstream s;
    s << "lattice_w" << w;
    return s.str();
  };
  std::vector<std::string> configs{"uniform"};
  for (double w : widths) configs.push_back(lattice(w));

  int fail_a = 0, fail_b = 0, fail_c = 0;
  for (const auto& ph : phantoms) {
    for (const auto& c : configs) {
      for (std::size_t i = 1; i < levels.size(); ++i) {
        fail_a += !(value.at({c, levels[i], ph}) > value.at({c, levels[i - 1], ph}));
      }
    }
    for (double lv : levels) {
      for (double w : widths) fail_b += !(value.at({lattice(w), lv, ph}) > value.at({"uniform", lv, ph}));
      for (std::size_t i = 1; i < widths.size(); ++i) {
        fail_c += !(value.at({lattice(widths[i]), lv, ph}) <= value.at({lattice(widths[i - 1]), lv, ph}));
      }
    }
  }
  const bool shape = rows.size() == configs.size() * levels.size() * phantoms.size() && rows.size() == 72;
  return {shape && fail_a == 0 && fail_b == 0 && fail_c == 0,
          std::to_string(rows.size()) + " rows; violations: level " + std::to_string(fail_a) +
              ", lattice>uniform " + std::to_string(fail_b) + ", width " + std::to_string(fail_c)};
}

Result p7_localization(const ExperimentConfig& config, const ReconstructionPipeline& pipeline) {
  std::string detail;
  bool ok = true;
  for (const auto& ph : config.recon.phantoms) {
    if (ph.label == "annulus") continue;
    const auto dv = pipeline.delta_frame(ph.touches, config.noise.seed);
    for (std::size_t m = 0; m < pipeline.method_count(); ++m) {
      const auto img = postprocess(pipeline.reconstruct(dv, m));
      const auto report = detect_blobs(img, pipeline.recon_mesh(), 0.3);
      // Largest error within the minimum-total-distance matching.
      double best = std::numeric_limits<double>::infinity();
      if (report.blobs.size() == ph.touches.size()) {
        std::vector<std::size_t> perm(ph.touches.size());
        std::iota(perm.begin(), perm.end(), 0);
        double best_total = std::numeric_limits<double>::infinity();
        do {
          double total = 0.0, worst = 0.0;
          for (std::size_t i = 0; i < perm.size(); ++i) {
            const double d = distance(ph.touches[i].center, report.blobs[perm[i]].centroid);
            total += d;
            worst = std::max(worst, d);
          }
          if (total < best_total) {
            best_total = total;
            best = worst;
          }
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
      const bool here = best < 10.0;
      ok = ok && here;
      detail += " " + ph.label + "/" + to_string(config.recon.methods[m].method) + "=" +
                std::to_string(report.blobs.size()) + "b," + fmt("%.2fmm", best);
    }
  }
  return {ok, "blobs/max error:" + detail};
}

Result p8_annulus(const ExperimentConfig& config, const ReconstructionPipeline& pipeline) {
  const auto it = std::find_if(config.recon.phantoms.begin(), config.recon.phantoms.end(),
                               [](const NamedPhantom& p) { return p.label == "annulus"; });
  if (it == config.recon.phantoms.end()) return {false, "no annulus phantom configured"};
  const TouchSpec ring = it->touches.front();
  std::size_t l1 = pipeline.method_count();
  for (std::size_t m = 0; m < config.recon.methods.size(); ++m) {
    if (config.recon.methods[m].method == Method::kL1) l1 = m;
  }
  if (l1 == pipeline.method_count()) return {false, "no L1 method configured"};
  const auto img = postprocess(pipeline.reconstruct(pipeline.delta_frame(it->touches, config.noise.seed), l1));
  const Mesh& mesh = pipeline.recon_mesh();
  std::size_t ring_n = 0, ring_hot = 0, hole_hot = 0;
  for (std::size_t k = 0; k < mesh.element_count(); ++k) {
    const double d = std::hypot(mesh.centroid(k).x - ring.center.x, mesh.centroid(k).y - ring.center.y);
    const bool hot = img.values[k] >= 0.5;
    if (d >= ring.inner_radius && d <= ring.outer_radius) {
      ++ring_n;
      ring_hot += hot;
    }
    if (d <= ring.inner_radius / 2) hole_hot += hot;
  }
  const double coverage = ring_n ? static_cast<double>(ring_hot) / ring_n : 0.0;
  return {coverage >= 0.6 && hole_hot == 0,
          "ring coverage " + fmt("%.1f%%", 100 * coverage) + ", centre elements above 0.5: " +
              std::to_string(hole_hot)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_text_file(e.path());
  }
  return out;
}

Result p9_determinism(ExperimentConfig config) {
  config.output_dir = fs::temp_directory_path() / "tactile_eit_acceptance_p9";
  std::vector<std::map<std::string, std::string>> runs;
  for (int i = 0; i < 2; ++i) {
    fs::remove_all(config.output_dir);
    run_sweep(config);
    run_reconstruction(config);
    runs.push_back(snapshot(config.output_dir));
  }
  fs::remove_all(config.output_dir);
  const bool ok = !runs[0].empty() && runs[0] == runs[1];
  return {ok, std::to_string(runs[0].size()) + " files " + (ok ? "byte-identical" : "differ")};
}

// Scripted HMI sessions replayed through the JSONL log format.
struct Script {
  std::string name;
  ActionConfig actions;
  std::size_t debounce;
  std::vector<std::optional<Point2>> frames;  // centroid when active
  // Expected press_end events: duration, action ("" for none), amplitude.
  std::vector<std::tuple<std::size_t, std::string, std::string>> presses;
};

std::vector<std::optional<Point2>> hold(std::optional<Point2> p, std::size_t n) {
  return std::vector<std::optional<Point2>>(n, p);
}

std::vector<std::optional<Point2>> concat(std::initializer_list<std::vector<std::optional<Point2>>> parts) {
  std::vector<std::optional<Point2>> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Result p10_hmi() {
  const Point2 left{25, 50}, right{75, 50}, corner{90, 90};
  ActionConfig only_left;
  only_left.regions = {{"pad", {0, 0, 50, 100}, "advance"}};
  const std::vector<Script> scripts{
      {"short-left", ActionConfig::defaults(), 1, concat({hold({}, 2), hold(left, 3), hold({}, 2)}),
       {{3, "advance", "low"}}},
      {"long-right", ActionConfig::defaults(), 1, concat({hold(right, 10), hold({}, 1)}),
       {{10, "jump", "high"}}},
      {"threshold", ActionConfig::defaults(), 1,
       concat({hold(right, 5), hold({}, 1), hold(right, 6), hold({}, 3), hold(left, 6), hold({}, 1)}),
       {{5, "jump", "low"}, {6, "jump", "high"}, {6, "advance", "high"}}},
      {"debounce", ActionConfig::defaults(), 2,
       concat({hold(left, 1), hold({}, 1), hold(right, 4), hold({}, 1), hold(left, 12), hold({}, 1)}),
       {{4, "jump", "low"}, {12, "advance", "high"}}},
      {"outside", only_left, 1, concat({hold(corner, 8), hold({}, 1), hold(left, 2), hold({}, 1)}),
       {{8, "", ""}, {2, "advance", "low"}}},
  };

  int failures = 0;
  std::size_t events = 0;
  for (const auto& s : scripts) {
    std::ostringstream log;
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      log << io::state_to_jsonl({s.frames[f].has_value(), s.frames[f], s.frames[f] ? 1.0 : 0.0, f}) << '\n';
    }
    HmiSession session(s.actions, s.debounce);
    std::istringstream in(log.str());
    std::string line;
    std::optional<EventKind> last;
    std::vector<std::tuple<std::size_t, std::string, std::string>> got;
    while (std::getline(in, line)) {
      const auto state = io::state_from_jsonl(line);
      if (!state) continue;
      const auto out = session.process(*state);
      if (!out.event) continue;
      ++events;
      if (last == out.event->kind) ++failures;  // must alternate
      if (!last && out.event->kind != EventKind::kPressStart) ++failures;
      last = out.event->kind;
      if (out.event->kind == EventKind::kPressEnd) {
        got.emplace_back(out.event->duration_frames, out.action ? out.action->name : "",
                         out.action ? to_string(out.action->amplitude) : "");
      }
    }
    if (got != s.presses) ++failures;
  }
  return {failures == 0, std::to_string(scripts.size()) + " sessions, " + std::to_string(events) +
                             " events, " + std::to_string(failures) + " mismatches"};
}

}  // namespace

int main() {
  const auto config = ExperimentConfig::reference_defaults();
  std::optional<ReconstructionPipeline> pipeline;
  auto shared = [&]() -> const ReconstructionPipeline& {
    if (!pipeline) pipeline.emplace(config, config.recon.methods);
    return *pipeline;
  };

  struct Criterion {
    const char* id;
    const char* name;
    double limit_s;  // 0 for no runtime bound
    std::function<Result()> run;
  };
  const std::vector<Criterion> criteria{
      {"P1", "protocol count", 1, p1_protocol_count},
      {"P2", "reciprocity", 30, p2_reciprocity},
      {"P3", "conservation and zero baseline", 0, p3_conservation},
      {"P4", "Jacobian finite differences", 60, p4_jacobian},
      {"P5", "solver closed forms and ISTA descent", 0, [&] { return p5_solvers(shared()); }},
      {"P6", "sweep trends", 600, [&] { return p6_sweep_trends(config); }},
      {"P7", "localization", 300, [&] { return p7_localization(config, shared()); }},
      {"P8", "annulus topology", 0, [&] { return p8_annulus(config, shared()); }},
      {"P9", "determinism", 0, [&] { return p9_determinism(config); }},
      {"P10", "HMI event algebra", 0, p10_hmi},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      r.pass = false;
      r.detail += "; over the " + fmt("%.0f", c.limit_s) + " s budget";
    }
    failed += !r.pass;
    std::printf("%-4s %s  %s: %s (%.2f s)\n", c.id, r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
