#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tactile_eit/error.hpp"
#include "tactile_eit/phantom.hpp"
#include "tactile_eit/sensitivity.hpp"
#include "test_support.hpp"

using namespace tactile_eit;
using test_support::rel_diff;

TEST_CASE("Jacobian matches central finite differences") {
  const Mesh m = build_mesh(100, 16, 16, 3);
  const auto p = generate_adjacent_protocol(16, true);
  const auto f = test_support::random_field(m, 17, 0.8, 1.5);
  const auto j = compute_jacobian(m, f, p);
  CHECK(j.rows() == 104);
  CHECK(j.cols() == m.element_count());
  CHECK(j.entries.allFinite());
  CHECK(j.mesh_id == m.id());
  CHECK(j.protocol_id == p.id());

  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, m.element_count() - 1);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = pick(rng);
    const auto up = simulate_frame(m, f.with_value(k, f[k] + h), p).voltages;
    const auto down = simulate_frame(m, f.with_value(k, f[k] - h), p).voltages;
    for (std::size_t r = 0; r < p.size(); ++r) {
      const double exact = j.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      if (std::abs(exact) <= 1e-12) continue;
      const double fd = (up[r] - down[r]) / (2 * h);
      CHECK(rel_diff(fd, exact) < 1e-3);
    }
  }
}

TEST_CASE("Jacobian is symmetric under a half turn") {
  const std::size_t n = 16;
  const Mesh m = build_mesh(100, n, 16, 3);
  const auto p = generate_adjacent_protocol(16, false);
  const auto j = compute_jacobian(m, uniform_field(m), p);

  std::vector<std::size_t> element_map(m.element_count());
  for (std::size_t k = 0; k < m.element_count(); ++k) {
    const Point2 c = m.centroid(k);
    const auto image = m.locate_element({100 - c.x, 100 - c.y});
    REQUIRE(image);
    CHECK(distance(m.centroid(*image), {100 - c.x, 100 - c.y}) < 1e-9);
    element_map[k] = *image;
  }
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, std::size_t> row_of;
  for (std::size_t r = 0; r < p.size(); ++r) {
    row_of[{p[r].drive_plus, p[r].drive_minus, p[r].meas_plus, p[r].meas_minus}] = r;
  }
  double worst = 0.0, scale = j.entries.cwiseAbs().maxCoeff();
  for (std::size_t r = 0; r < p.size(); ++r) {
    const auto& q = p[r];
    const std::size_t rr = row_of.at({(q.drive_plus + 8) % 16, (q.drive_minus + 8) % 16,
                                      (q.meas_plus + 8) % 16, (q.meas_minus + 8) % 16});
    for (std::size_t k = 0; k < m.element_count(); ++k) {
      worst = std::max(worst, std::abs(j.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) -
                                       j.entries(static_cast<Eigen::Index>(rr),
                                                 static_cast<Eigen::Index>(element_map[k]))));
    }
  }
  CHECK(worst < 1e-8 * std::max(1.0, scale));
}

TEST_CASE("reciprocal rows agree on the full protocol") {
  const Mesh m = build_mesh(100, 16, 16, 3);
  const auto p = generate_adjacent_protocol(16, false);
  const auto j = compute_jacobian(m, test_support::random_field(m, 4), p);
  for (std::size_t r = 0; r < p.size(); ++r) {
    const auto twin = reciprocal(p[r]);
    const auto it = std::find(p.patterns().begin(), p.patterns().end(), twin);
    REQUIRE(it != p.patterns().end());
    const auto rr = static_cast<Eigen::Index>(it - p.patterns().begin());
    const auto a = j.entries.row(static_cast<Eigen::Index>(r));
    const auto b = j.entries.row(rr);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9 * a.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("predict_delta is linear") {
  const Mesh m = build_mesh(100, 16, 16, 3);
  const auto p = generate_adjacent_protocol(16, true);
  const auto j = compute_jacobian(m, uniform_field(m), p);
  const std::size_t n = m.element_count();

  const auto zero = predict_delta(j, std::vector<double>(n, 0.0));
  CHECK(zero.voltages.size() == 104);
  for (double v : zero.voltages) CHECK(v == 0.0);

  std::vector<double> ek(n, 0.0);
  ek[37] = 2.5;
  const auto col = predict_delta(j, ek);
  for (std::size_t r = 0; r < 104; ++r) {
    CHECK(col.voltages[r] == 2.5 * j.entries(static_cast<Eigen::Index>(r), 37));
  }

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<double> d1(n), d2(n), mix(n);
  for (std::size_t k = 0; k < n; ++k) {
    d1[k] = g(rng);
    d2[k] = g(rng);
    mix[k] = 3.0 * d1[k] - 0.5 * d2[k];
  }
  const auto v1 = predict_delta(j, d1).voltages, v2 = predict_delta(j, d2).voltages;
  const auto vm = predict_delta(j, mix).voltages;
  for (std::size_t r = 0; r < 104; ++r) {
    CHECK(std::abs(vm[r] - (3.0 * v1[r] - 0.5 * v2[r])) <=
          1e-12 * (std::abs(3.0 * v1[r]) + std::abs(0.5 * v2[r])));
  }
  CHECK_THROWS_AS(predict_delta(j, std::vector<double>(n + 1, 0.0)), EitError);
}

TEST_CASE("linear prediction tracks a small nonlinear touch") {
  const Mesh m = build_mesh(100, 32, 16, 3);
  const auto p = generate_adjacent_protocol(16, true);
  const auto bg = uniform_field(m);
  const auto j = compute_jacobian(m, bg, p);
  const std::vector<TouchSpec> touch{TouchSpec::disc({40, 55}, 10, 1.1)};
  const auto touched = apply_touches(bg, m, touch);
  std::vector<double> delta(m.element_count());
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = touched[k] - bg[k];

  const auto linear = predict_delta(j, delta).voltages;
  const auto exact = difference(simulate_frame(m, touched, p), simulate_frame(m, bg, p)).voltages;
  std::vector<std::size_t> order(exact.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(exact[a]) > std::abs(exact[b]); });
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(rel_diff(linear[order[i]], exact[order[i]]) < 0.05);
  }
}
