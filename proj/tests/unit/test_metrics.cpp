#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tactile_eit/error.hpp"
#include "tactile_eit/metrics.hpp"
#include "tactile_eit/phantom.hpp"

using namespace tactile_eit;

namespace {

MeasurementFrame frame(std::vector<double> v, double current = kDefaultDriveCurrent) {
  return {std::move(v), "p", current};
}

ReconstructionImage image_of(std::vector<double> v) { return {std::move(v), "m", true, 1.0}; }

// Exhaustive minimum over every permutation.
double brute_force_total(const std::vector<std::vector<double>>& cost) {
  std::vector<std::size_t> perm(cost.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost[i][perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

BlobReport report_at(const std::vector<Point2>& centers) {
  BlobReport r;
  for (const auto& c : centers) r.blobs.push_back({c, 1.0, 1.0, {0}});
  return r;
}

}  // namespace

TEST_CASE("mean relative change examples") {
  const auto ref = frame({1.0, -2.0, 0.5, 3.0});
  CHECK(mean_relative_change(ref, ref).mean_relative_change == 0.0);
  const auto scaled = frame({1.1, -2.2, 0.55, 3.3});
  const auto report = mean_relative_change(ref, scaled, "lattice_w2");
  CHECK(report.mean_relative_change == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(report.per_measurement_changes.size() == 4);
  CHECK(report.excluded == 0);
  CHECK(report.config_label == "lattice_w2");
}

TEST_CASE("negligible reference voltages are excluded") {
  const auto report = mean_relative_change(frame({1.0, 1e-13, 2.0}), frame({1.5, 1.0, 2.0}));
  CHECK(report.excluded == 1);
  CHECK(report.per_measurement_changes.size() == 2);
  CHECK(report.mean_relative_change == doctest::Approx(0.25));
  CHECK(mean_relative_change(frame({0.0}), frame({1.0})).mean_relative_change == 0.0);
  CHECK_THROWS_AS(mean_relative_change(frame({1.0}), frame({1.0, 2.0})), EitError);
}

TEST_CASE("relative change does not depend on the drive current") {
  const Mesh m = build_mesh(100, 32, 16, 3);
  const auto p = generate_adjacent_protocol(16, true);
  const auto bg = uniform_field(m);
  const std::vector<TouchSpec> touch{TouchSpec::disc({40, 60}, 10, 5.0)};
  const auto touched = apply_touches(bg, m, touch);
  const double a = mean_relative_change(simulate_frame(m, bg, p, 1e-3),
                                        simulate_frame(m, touched, p, 1e-3)).mean_relative_change;
  const double b = mean_relative_change(simulate_frame(m, bg, p, 7e-2),
                                        simulate_frame(m, touched, p, 7e-2)).mean_relative_change;
  CHECK(a > 0.0);
  CHECK(b == doctest::Approx(a).epsilon(1e-10));
}

TEST_CASE("lattice response exceeds the uniform response") {
  const Mesh m = build_mesh(100, 100, 16, 3);
  const auto p = generate_adjacent_protocol(16, true);
  const std::vector<TouchSpec> touch{TouchSpec::disc({40, 60}, 10, 5.0)};
  auto change = [&](const ConductivityField& bg) {
    return mean_relative_change(simulate_frame(m, bg, p),
                                simulate_frame(m, apply_touches(bg, m, touch), p))
        .mean_relative_change;
  };
  CHECK(change(apply_lattice(m, {20.0, 2.0, 1e-6}, 1.0)) > change(uniform_field(m)));
}

TEST_CASE("blob detection on constructed images") {
  const Mesh m = build_mesh(100, 10, 4, 3);
  CHECK(detect_blobs(image_of(std::vector<double>(m.element_count(), 0.0)), m).blobs.empty());

  // Two 5-element strips (cells 0-2 and 77-79), far apart.
  std::vector<double> v(m.element_count(), 0.0);
  const std::vector<std::size_t> a{0, 1, 2, 3, 5}, b{154, 155, 156, 157, 159};
  for (auto k : a) v[k] = 1.0;
  for (auto k : b) v[k] = 1.0;
  const auto report = detect_blobs(image_of(v), m);
  REQUIRE(report.blobs.size() == 2);
  CHECK(report.blobs[0].elements == a);
  CHECK(report.blobs[1].elements == b);
  for (const auto& [blob, members] : {std::pair{report.blobs[0], a}, std::pair{report.blobs[1], b}}) {
    double area = 0.0, x = 0.0, y = 0.0;
    for (auto k : members) {
      area += m.area(k);
      x += m.area(k) * m.centroid(k).x;
      y += m.area(k) * m.centroid(k).y;
    }
    CHECK(blob.area == doctest::Approx(area));
    CHECK(blob.centroid.x == doctest::Approx(x / area));
    CHECK(blob.centroid.y == doctest::Approx(y / area));
    CHECK(blob.peak == 1.0);
  }

  // Specks below min_elements vanish.
  std::vector<double> speck(m.element_count(), 0.0);
  speck[100] = 1.0;
  speck[101] = 1.0;
  CHECK(detect_blobs(image_of(speck), m).blobs.empty());
  CHECK(detect_blobs(image_of(speck), m, 0.3, 1).blobs.size() == 1);

  CHECK_THROWS_AS(detect_blobs(image_of(v), m, 0.0), EitError);
  CHECK_THROWS_AS(detect_blobs(image_of(v), m, 1.0), EitError);
  CHECK_THROWS_AS(detect_blobs(image_of({1.0}), m), EitError);
}

TEST_CASE("lower thresholds never shrink the superlevel set") {
  const Mesh m = build_mesh(100, 16, 16, 3);
  std::vector<double> v(m.element_count());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Point2 c = m.centroid(k);
    v[k] = std::exp(-std::pow(distance(c, {30, 30}), 2) / 200) +
           0.7 * std::exp(-std::pow(distance(c, {70, 65}), 2) / 300);
  }
  double previous = std::numeric_limits<double>::infinity();
  for (double t : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
    double area = 0.0;
    for (const auto& b : detect_blobs(image_of(v), m, t, 1).blobs) area += b.area;
    CHECK(area <= previous);
    previous = area;
  }
}

TEST_CASE("localization error examples") {
  const std::vector<Point2> truth{{10, 10}, {50, 80}, {90, 20}};
  for (double d : localization_error(report_at(truth), truth)) CHECK(d == 0.0);

  const std::vector<Point2> one{{53, 54}};
  CHECK(localization_error(report_at({{50, 50}}), one)[0] == doctest::Approx(5.0));

  try {
    localization_error(report_at({{50, 50}}), truth);
    FAIL("expected a count mismatch");
  } catch (const EitError& e) {
    CHECK(e.code() == ErrorCode::kCountMismatch);
  }
}

TEST_CASE("localization matching equals the permutation oracle") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 6;
    std::vector<Point2> truth(n), found(n);
    for (auto& p : truth) p = {u(rng), u(rng)};
    for (auto& p : found) p = {u(rng), u(rng)};
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) cost[i][j] = distance(truth[i], found[j]);
    }
    const auto d = localization_error(report_at(found), truth);
    CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(brute_force_total(cost)));
  }
}

TEST_CASE("Hungarian assignment is a permutation of minimum cost") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 7;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost) {
      for (auto& c : row) c = u(rng);  // integer costs force ties
    }
    const auto a = min_cost_assignment(cost);
    std::vector<std::size_t> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i][a[i]];
    CHECK(total == brute_force_total(cost));
  }
  CHECK(min_cost_assignment({}).empty());
  CHECK_THROWS_AS(min_cost_assignment({{1.0, 2.0}}), EitError);
}
