#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pwdesk/error.hpp"
#include "pwdesk/kgrid.hpp"
#include "pwdesk/structure.hpp"
#include "pwdesk/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pwdesk;

TEST_CASE("gamma-only mesh") {
  KMesh m = monkhorst_pack(1, 1, 1);
  REQUIRE(m.points.size() == 1);
  CHECK(m.points[0].norm() == 0.0);
  CHECK(m.weights[0] == 1.0);
}

TEST_CASE("2x2x1 mesh from the closed formula") {
  KMesh m = monkhorst_pack(2, 2, 1);
  REQUIRE(m.points.size() == 4);
  for (const auto& p : m.points) {
    CHECK(std::abs(std::abs(p[0]) - 0.25) < 1e-15);
    CHECK(std::abs(std::abs(p[1]) - 0.25) < 1e-15);
    CHECK(p[2] == 0.0);
  }
  for (double w : m.weights) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("10x10x1 production mesh") {
  KMesh m = monkhorst_pack(10, 10, 1);
  CHECK(m.points.size() == 100);
  double s = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
  CHECK(std::abs(s - 1.0) < 1e-12);
  // every coordinate is (2r-11)/20 folded
  for (const auto& p : m.points)
    for (int i = 0; i < 2; ++i) {
      bool ok = false;
      for (int r = 1; r <= 10; ++r) {
        double u = (2.0 * r - 11.0) / 20.0;
        u -= std::round(u);
        if (u <= -0.5) u += 1.0;
        if (std::abs(p[i] - u) < 1e-15) ok = true;
      }
      CHECK(ok);
    }
}

TEST_CASE("mesh is inversion symmetric") {
  for (auto [q1, q2, q3] : {std::array{3, 4, 1}, std::array{10, 10, 1},
                            std::array{2, 5, 3}}) {
    KMesh m = monkhorst_pack(q1, q2, q3);
    CHECK(int(m.points.size()) == q1 * q2 * q3);
    for (const auto& p : m.points) {
      Eigen::Vector3d neg = -p;
      for (int i = 0; i < 3; ++i) {
        neg[i] -= std::round(neg[i]);
        if (neg[i] <= -0.5) neg[i] += 1.0;
      }
      bool found = std::any_of(m.points.begin(), m.points.end(),
                               [&](const Eigen::Vector3d& q) {
                                 return (q - neg).norm() < 1e-13;
                               });
      CHECK(found);
    }
  }
}

TEST_CASE("invalid mesh sizes") {
  CHECK_THROWS_AS(monkhorst_pack(0, 1, 1), InputError);
  CHECK_THROWS_AS(monkhorst_pack(2, -3, 1), InputError);
}

TEST_CASE("G-K-M-G path with 20 points per segment") {
  Cell cell = build_hexagonal_cell(3.89, 20.0);
  KPath p = kpath(hexagonal_gkmg(), 20, reciprocal_lattice(cell));
  CHECK(p.points.size() == 61);
  REQUIRE(p.node_indices.size() == 4);
  CHECK(p.node_indices[0] == 0);
  CHECK(p.node_indices[1] == 20);
  CHECK(p.node_indices[2] == 40);
  CHECK(p.node_indices[3] == 60);
  for (std::size_t i = 1; i < p.points.size(); ++i)
    CHECK(p.cumulative_distance[i] >= p.cumulative_distance[i - 1]);
  // Gamma-K arc length = 4 pi / (3 a)
  CHECK(p.cumulative_distance[20] ==
        doctest::Approx(4.0 * units::pi / (3.0 * 3.89)).epsilon(1e-12));
}

TEST_CASE("minimal two-node path") {
  Cell cell = build_hexagonal_cell(1.0, 1.0);
  KPath p = kpath({{"G", {0, 0, 0}}, {"M", {0, 0.5, 0}}}, 1,
                  reciprocal_lattice(cell));
  CHECK(p.points.size() == 2);
  CHECK((p.points[0] - Eigen::Vector3d(0, 0, 0)).norm() == 0.0);
  CHECK((p.points[1] - Eigen::Vector3d(0, 0.5, 0)).norm() == 0.0);
}

TEST_CASE("path arc length ignores labels") {
  Cell cell = build_hexagonal_cell(3.89, 20.0);
  auto nodes = hexagonal_gkmg();
  KPath a = kpath(nodes, 7, reciprocal_lattice(cell));
  for (auto& n : nodes) n.label = "X";
  KPath b = kpath(nodes, 7, reciprocal_lattice(cell));
  CHECK(a.cumulative_distance == b.cumulative_distance);
}

TEST_CASE("degenerate segments rejected") {
  Cell cell = build_hexagonal_cell(1.0, 1.0);
  CHECK_THROWS_AS(kpath({{"G", {0, 0, 0}}, {"G", {0, 0, 0}}}, 5,
                        reciprocal_lattice(cell)),
                  InputError);
}
