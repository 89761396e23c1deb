#include <cmath>
#include <random>

#include "doctest.h"
#include "tiga/estimator.hpp"

using namespace tiga;

namespace {

std::vector<double> uniform_breaks(int cells) {
  std::vector<double> br(cells + 1);
  for (int k = 0; k <= cells; ++k) br[k] = static_cast<double>(k) / cells;
  return br;
}

HierarchicalSpace make_space(int p, int cells) {
  return HierarchicalSpace::build(KnotVector::from_breakpoints(p, uniform_breaks(cells)),
                                  KnotVector::from_breakpoints(p, uniform_breaks(cells)), BasisKind::THB, p);
}

// Root of t + log t by plain bisection, written out independently of the library.
double eta_oracle() {
  double a = 0.1, b = 1.0;
  while (b - a > 1e-16) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    (m + std::log(m) > 0 ? b : a) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("eta constant") {
  const double eta = eta_constant();
  CHECK(std::abs(eta + std::log(eta)) < 1e-14);
  CHECK(std::abs(eta - 0.5671432904097838) < 1e-14);
  CHECK(std::abs(eta - eta_oracle()) < 1e-14);
}

TEST_CASE("scalings") {
  CHECK(delta_cell(CellStatus::Interior, 0.25, 0.0625) == 0.25);
  CHECK(delta_cell(CellStatus::Cut, 0.25, 1e-10) == doctest::Approx(4.79853e-5).epsilon(1e-5));
  CHECK(scaling_constant(1e-10) == doctest::Approx(std::sqrt(23.025850929940457)));
  const double c = std::sqrt(eta_constant());
  CHECK(c == doctest::Approx(0.753089).epsilon(1e-6));
  CHECK(delta_cell(CellStatus::Cut, 1.0, 0.8) == doctest::Approx(c * std::sqrt(0.8)));
  CHECK(delta_cell(CellStatus::Exterior, 1.0, 0.0) == 0.0);
  CHECK(delta_face(true, 0.09, 0.09) == doctest::Approx(0.3));
  CHECK(delta_face(false, 0.25, 1e-6) == doctest::Approx(std::sqrt(-std::log(1e-6)) * 1e-3));
  CHECK(scaling_constant(1.0, 3) == 1.0);
  CHECK_THROWS_AS(scaling_constant(0.0), InvalidInput);
  // Bounded by the unclipped measure.
  for (double m : {1e-12, 1e-6, 0.01, 0.3}) CHECK(delta_cell(CellStatus::Cut, 1, m) <= scaling_constant(m) * 1.0);
}

TEST_CASE("single cell with constant load") {
  const auto hs = make_space(2, 1);
  const IdentityMap id;
  Problem pb;
  pb.f = [](Vec2) { return 1.0; };
  pb.dirichlet = {true, true, true, true};
  ClassifyOptions co;
  co.dirichlet = pb.dirichlet;
  const auto cl = classify_cells(hs, TrimmedRegion{}, id, co);
  const auto est = estimate(hs, std::vector<double>(hs.num_functions(), 0.0), cl, id, pb);
  // h_K is the diameter of the unit square.
  CHECK(cl.cells[0].h == doctest::Approx(std::sqrt(2.0)));
  CHECK(est.estimator() == doctest::Approx(cl.cells[0].h));
  CHECK(est.cells[0].neumann == 0.0);
  CHECK(est.cells[0].trimming == 0.0);
}

TEST_CASE("estimator vanishes on an exactly reproduced solution") {
  const auto hs = make_space(2, 4);
  Mat2 a;
  a.m = {{{1.5, 0.2}, {-0.1, 0.8}}};
  const AffineMap map(a, {0.3, -0.2});
  Problem pb;
  pb.f = [](Vec2) { return 0.0; };
  pb.dirichlet[kBottom] = true;
  pb.dirichlet_value = [](Vec2 x) { return x.x + 2 * x.y; };
  pb.neumann = [](Vec2, Vec2 n) { return n.x + 2 * n.y; };
  ClassifyOptions co;
  co.dirichlet = pb.dirichlet;
  const auto region = TrimmedRegion::of(Disk{{0.6, 0.6}, 0.17});
  const auto cl = classify_cells(hs, region, map, co);
  const auto sol = solve_poisson(hs, cl, map, pb);
  const auto est = estimate(hs, sol.coeffs, cl, map, pb);
  CHECK(est.estimator() < 1e-8);
}

TEST_CASE("exterior cells contribute nothing and contributions add up") {
  const auto hs = make_space(2, 8);
  const IdentityMap id;
  Problem pb;
  pb.f = [](Vec2 x) { return std::sin(x.x) + x.y; };
  pb.neumann = [](Vec2 x, Vec2 n) { return x.x * n.y; };
  pb.dirichlet[kBottom] = true;
  pb.dirichlet_value = [](Vec2) { return 0.0; };
  ClassifyOptions co;
  co.dirichlet = pb.dirichlet;
  const auto region = TrimmedRegion::of(Disk{{0.5, 0.6}, 0.3});
  const auto cl = classify_cells(hs, region, id, co);
  const auto sol = solve_poisson(hs, cl, id, pb);
  const auto est = estimate(hs, sol.coeffs, cl, id, pb);
  double sum = 0;
  for (std::size_t c = 0; c < cl.cells.size(); ++c) {
    sum += est.cells[c].total();
    if (cl.cells[c].status == CellStatus::Exterior) CHECK(est.cells[c].total() == 0.0);
    if (cl.cells[c].status == CellStatus::Cut) CHECK(est.cells[c].trimming > 0.0);
  }
  CHECK(sum == doctest::Approx(est.total_sq).epsilon(1e-13));

  SUBCASE("locality") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
      const int f = std::uniform_int_distribution<int>(0, hs.num_functions() - 1)(rng);
      auto c2 = sol.coeffs;
      c2[f] += 0.37;
      const auto e2 = estimate(hs, c2, cl, id, pb);
      std::vector<char> touched(cl.cells.size(), 0);
      for (int c : hs.function_cells(f)) touched[c] = 1;
      for (std::size_t c = 0; c < cl.cells.size(); ++c)
        if (!touched[c]) CHECK(e2.cells[c].total() == est.cells[c].total());
    }
  }
}
