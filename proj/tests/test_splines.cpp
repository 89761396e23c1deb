#include <cmath>
#include <random>

#include "doctest.h"
#include "tiga/splines.hpp"

using namespace tiga;

namespace {

// Textbook recursive Cox-de Boor with the left-limit convention at the right end.
double naive_bspline(const std::vector<double>& U, int i, int p, double x) {
  if (p == 0) {
    const double last = U.back();
    if (x == last) return (U[i] < last && U[i + 1] == last) ? 1.0 : 0.0;
    return (U[i] <= x && x < U[i + 1]) ? 1.0 : 0.0;
  }
  double v = 0.0;
  if (U[i + p] > U[i]) v += (x - U[i]) / (U[i + p] - U[i]) * naive_bspline(U, i, p - 1, x);
  if (U[i + p + 1] > U[i + 1])
    v += (U[i + p + 1] - x) / (U[i + p + 1] - U[i + 1]) * naive_bspline(U, i + 1, p - 1, x);
  return v;
}

KnotVector uniform(int p, int cells) {
  std::vector<double> br(cells + 1);
  for (int k = 0; k <= cells; ++k) br[k] = static_cast<double>(k) / cells;
  br.back() = 1.0;
  return KnotVector::from_breakpoints(p, br);
}

}  // namespace

TEST_CASE("knot vector construction") {
  const auto k1 = KnotVector::from_breakpoints(1, {0, 1});
  CHECK(k1.knots() == std::vector<double>{0, 0, 1, 1});
  CHECK(k1.num_functions() == 2);
  const auto k2 = KnotVector::from_breakpoints(2, {0, 0.5, 1});
  CHECK(k2.knots() == std::vector<double>{0, 0, 0, 0.5, 1, 1, 1});
  CHECK(k2.num_functions() == 4);
  const auto k3 = KnotVector::from_breakpoints(2, {0, 0.25, 0.5, 0.75, 1});
  CHECK(k3.knots().size() == 9);
  CHECK(k3.num_functions() == 6);

  CHECK_THROWS_AS(KnotVector::from_breakpoints(2, {0, 0.6, 0.5, 1}), InvalidInput);
  CHECK_THROWS_AS(KnotVector::from_breakpoints(2, {0.1, 1}), InvalidInput);
  CHECK_THROWS_AS(KnotVector::from_breakpoints(2, {0, 0.9}), InvalidInput);
  CHECK_THROWS_AS(KnotVector::from_breakpoints(0, {0, 1}), InvalidInput);
}

TEST_CASE("basis values against the recursive definition") {
  const auto k1 = KnotVector::from_breakpoints(1, {0, 1});
  const auto b1 = eval_basis(k1, 0.5, 0);
  CHECK(b1.ders[0][0] == doctest::Approx(0.5));
  CHECK(b1.ders[0][1] == doctest::Approx(0.5));

  const auto k2 = KnotVector::from_breakpoints(2, {0, 0.5, 1});
  double all[4];
  for (int f = 0; f < 4; ++f) all[f] = naive_bspline(k2.knots(), f, 2, 0.5);
  CHECK(all[1] == doctest::Approx(0.5));
  CHECK(all[2] == doctest::Approx(0.5));
  CHECK(all[0] + all[1] + all[2] + all[3] == doctest::Approx(1.0));
  const auto b2 = eval_basis(k2, 0.5, 0);
  for (int j = 0; j <= 2; ++j) CHECK(b2.ders[0][j] == doctest::Approx(all[b2.first + j]));

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int p = 1; p <= 4; ++p) {
    const auto kv = KnotVector::from_breakpoints(p, {0, 0.1, 0.35, 0.4, 0.8, 1});
    for (int t = 0; t < 200; ++t) {
      const double x = t == 0 ? 1.0 : (t == 1 ? 0.0 : U(rng));
      const auto b = eval_basis(kv, x, 2);
      double sum = 0.0;
      double dsum = 0.0;
      for (int j = 0; j <= p; ++j) {
        CHECK(b.ders[0][j] == doctest::Approx(naive_bspline(kv.knots(), b.first + j, p, x)).epsilon(1e-12));
        sum += b.ders[0][j];
        dsum += b.ders[1][j];
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(std::abs(dsum) < 1e-9);
    }
  }
  CHECK_THROWS_AS(eval_basis(k2, 1.5, 0), DomainError);
  CHECK_THROWS_AS(eval_basis(k2, -0.1, 0), DomainError);
}

TEST_CASE("derivatives match finite differences") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.02, 0.98);
  for (int p = 2; p <= 4; ++p) {
    const auto kv = uniform(p, 5);
    for (int t = 0; t < 100; ++t) {
      const double x = U(rng);
      const double h = 1e-6;
      const int cell = kv.find_cell(x);
      // Keep the stencil inside the cell so the piecewise polynomial is smooth.
      const auto [lo, hi] = kv.cell_bounds(cell);
      if (x - lo < 1e-4 || hi - x < 1e-4) continue;
      BasisValues1D b, bp, bm;
      eval_basis_in_cell(kv, cell, x, 2, b);
      eval_basis_in_cell(kv, cell, x + h, 2, bp);
      eval_basis_in_cell(kv, cell, x - h, 2, bm);
      for (int j = 0; j <= p; ++j) {
        const double fd1 = (bp.ders[0][j] - bm.ders[0][j]) / (2 * h);
        const double fd2 = (bp.ders[1][j] - bm.ders[1][j]) / (2 * h);
        CHECK(fd1 == doctest::Approx(b.ders[1][j]).epsilon(1e-6).scale(1.0));
        CHECK(fd2 == doctest::Approx(b.ders[2][j]).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("global evaluation is zero outside the support") {
  const auto kv = uniform(2, 4);
  CHECK(eval_function(kv, 0, 0.6) == 0.0);
  CHECK(eval_function(kv, 5, 0.1) == 0.0);
  CHECK(eval_function(kv, 2, 0.5) > 0.0);
}

TEST_CASE("support extension") {
  const auto kv = KnotVector::from_breakpoints(1, {0, 0.5, 1});
  const auto [a, b] = kv.support_extension(0);
  CHECK(a == 0.0);
  CHECK(b == 1.0);
  for (int p = 1; p <= 3; ++p) {
    const auto single = KnotVector::from_breakpoints(p, {0, 1});
    CHECK(single.support_extension(0) == std::pair<double, double>{0.0, 1.0});
    const auto fine = uniform(p, 16);
    const auto [lo, hi] = fine.support_extension(8);
    CHECK(hi - lo == doctest::Approx((2 * p + 1) / 16.0));
  }
  CHECK_THROWS_AS(kv.support_extension(2), InvalidInput);
  TensorSpace ts{{uniform(2, 4), uniform(2, 4)}, 0};
  const Rect r = ts.support_extension({0, 3});
  CHECK(r.x0 == 0.0);
  CHECK(r.x1 == doctest::Approx(0.75));
  CHECK(r.y0 == doctest::Approx(0.25));
  CHECK(r.y1 == 1.0);
}

TEST_CASE("dyadic refinement reproduces coarse functions") {
  const auto k1 = KnotVector::from_breakpoints(1, {0, 1});
  const auto t1 = dyadic_refine(k1);
  CHECK(t1.fine.breakpoints() == std::vector<double>{0, 0.5, 1});
  REQUIRE(t1.coarse[0].size() == 2);
  CHECK(t1.coarse[0][0] == std::pair<int, double>{0, 1.0});
  CHECK(t1.coarse[0][1] == std::pair<int, double>{1, 0.5});
  REQUIRE(t1.coarse[1].size() == 2);
  CHECK(t1.coarse[1][0] == std::pair<int, double>{1, 0.5});
  CHECK(t1.coarse[1][1] == std::pair<int, double>{2, 1.0});

  const auto t2 = dyadic_refine(uniform(2, 8));
  const auto& mask = t2.coarse[4];
  REQUIRE(mask.size() == 4);
  const double expect[4] = {0.25, 0.75, 0.75, 0.25};
  for (int k = 0; k < 4; ++k) CHECK(mask[k].second == doctest::Approx(expect[k]).epsilon(1e-15));

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int p = 1; p <= 4; ++p) {
    const auto kv = KnotVector::from_breakpoints(p, {0, 0.2, 0.3, 0.7, 1});
    const auto ts = dyadic_refine(kv);
    for (int fn = 0; fn < kv.num_functions(); ++fn) {
      for (const auto& [j, c] : ts.coarse[fn]) CHECK(c > 0.0);
      for (int t = 0; t < 100; ++t) {
        const double x = U(rng);
        double s = 0.0;
        for (const auto& [j, c] : ts.coarse[fn]) s += c * naive_bspline(ts.fine.knots(), j, p, x);
        CHECK(std::abs(s - naive_bspline(kv.knots(), fn, p, x)) < 1e-12);
      }
    }
  }
}
