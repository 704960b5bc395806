#include <algorithm>
#include <set>
#include <tuple>

#include "doctest.h"
#include "tactile_eit/error.hpp"
#include "tactile_eit/protocol.hpp"

using namespace tactile_eit;

namespace {

using Quad = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;

// Every adjacent drive pair against every adjacent measurement pair sharing
// no electrode with it.
std::vector<Quad> enumerate_full(std::size_t e) {
  std::vector<Quad> out;
  for (std::size_t d = 0; d < e; ++d) {
    const std::size_t d2 = (d + 1) % e;
    for (std::size_t m = 0; m < e; ++m) {
      const std::size_t m2 = (m + 1) % e;
      const std::set<std::size_t> used{d, d2, m, m2};
      if (used.size() == 4) out.emplace_back(d, d2, m, m2);
    }
  }
  return out;
}

Quad as_quad(const Pattern& p) { return {p.drive_plus, p.drive_minus, p.meas_plus, p.meas_minus}; }

}  // namespace

TEST_CASE("sixteen electrodes give 104 reduced and 208 full patterns") {
  CHECK(generate_adjacent_protocol(16, true).size() == 104);
  CHECK(generate_adjacent_protocol(16, false).size() == 208);
  CHECK(enumerate_full(16).size() == 208);
}

TEST_CASE("eight electrodes give 40 full patterns") {
  CHECK(generate_adjacent_protocol(8, false).size() == 40);
  CHECK(enumerate_full(8).size() == 8 * 5);
}

TEST_CASE("full protocol equals brute-force enumeration in order") {
  for (std::size_t e = 4; e <= 24; ++e) {
    const auto p = generate_adjacent_protocol(e, false);
    const auto expected = enumerate_full(e);
    REQUIRE(p.size() == expected.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(as_quad(p[i]) == expected[i]);
    CHECK(p.size() == e * (e - 3));
  }
}

TEST_CASE("reduced protocol keeps the lexicographically first of each reciprocal pair") {
  for (std::size_t e = 4; e <= 24; ++e) {
    const auto full = enumerate_full(e);
    std::vector<Quad> expected;
    for (const auto& [d, d2, m, m2] : full) {
      if (std::make_pair(d, d2) < std::make_pair(m, m2)) expected.emplace_back(d, d2, m, m2);
    }
    const auto p = generate_adjacent_protocol(e, true);
    REQUIRE(p.size() == expected.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(as_quad(p[i]) == expected[i]);
    CHECK(2 * p.size() == generate_adjacent_protocol(e, false).size());
    CHECK(p.reciprocity_reduced());
  }
}

TEST_CASE("every full pattern's reciprocal appears exactly once") {
  const auto p = generate_adjacent_protocol(16, false);
  for (const auto& pat : p.patterns()) {
    const auto r = reciprocal(pat);
    CHECK(std::count(p.patterns().begin(), p.patterns().end(), r) == 1);
  }
}

TEST_CASE("pattern invariants") {
  const auto p = generate_adjacent_protocol(16, false);
  for (const auto& pat : p.patterns()) {
    CHECK(pat.drive_minus == (pat.drive_plus + 1) % 16);
    CHECK(pat.meas_minus == (pat.meas_plus + 1) % 16);
    CHECK(pat.meas_plus != pat.drive_plus);
    CHECK(pat.meas_plus != pat.drive_minus);
    CHECK(pat.meas_minus != pat.drive_plus);
    CHECK(pat.meas_minus != pat.drive_minus);
  }
}

TEST_CASE("protocol errors") {
  CHECK_THROWS_AS(generate_adjacent_protocol(3), EitError);
  CHECK_THROWS_AS(Protocol({{0, 1, 1, 2}}, 4, false), EitError);
  CHECK_THROWS_AS(Protocol({{0, 1, 2, 9}}, 4, false), EitError);
  CHECK_THROWS_AS(Protocol({{0, 0, 2, 3}}, 4, false), EitError);
}

TEST_CASE("protocol id depends on the ordered pattern list") {
  CHECK(generate_adjacent_protocol(16).id() == generate_adjacent_protocol(16).id());
  CHECK(generate_adjacent_protocol(16, true).id() != generate_adjacent_protocol(16, false).id());
  const Protocol a({{0, 1, 2, 3}, {1, 2, 3, 0}}, 4, false);
  const Protocol b({{1, 2, 3, 0}, {0, 1, 2, 3}}, 4, false);
  CHECK(a.id() != b.id());
}
