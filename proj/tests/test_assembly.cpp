#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "tiga/assembly.hpp"

using namespace tiga;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> uniform_breaks(int cells) {
  std::vector<double> br(cells + 1);
  for (int k = 0; k <= cells; ++k) br[k] = static_cast<double>(k) / cells;
  return br;
}

HierarchicalSpace make_space(int p, const std::vector<double>& bx, const std::vector<double>& by) {
  return HierarchicalSpace::build(KnotVector::from_breakpoints(p, bx), KnotVector::from_breakpoints(p, by),
                                  BasisKind::THB, p);
}

TrimmedRegion two_disks() {
  return TrimmedRegion::of(Disk{{0.25, 0.25}, 0.1}) | TrimmedRegion::of(Disk{{0.75, 0.75}, 0.1});
}

}  // namespace

TEST_CASE("tiny systems") {
  CsrMatrix a;
  a.rows = 1;
  a.row_ptr = {0, 1};
  a.col = {0};
  a.val = {2.0};
  for (const char* m : {"cg", "direct"}) {
    SolverOptions o;
    o.method = m;
    const auto x = solve_spd(a, {4.0}, o);
    CHECK(x[0] == doctest::Approx(2.0));
  }
  SolveStats st;
  solve_spd(a, {0.0}, {}, &st);
  CHECK(st.iterations == 0);
  SolverOptions bad;
  bad.method = "lu";
  CHECK_THROWS_AS(solve_spd(a, {1.0}, bad), InvalidInput);
}

TEST_CASE("constant Dirichlet data gives a constant solution") {
  const auto hs = make_space(2, uniform_breaks(4), uniform_breaks(4));
  const IdentityMap id;
  Problem pb;
  pb.dirichlet[kBottom] = true;
  pb.dirichlet_value = [](Vec2) { return 3.5; };
  ClassifyOptions co;
  co.dirichlet = pb.dirichlet;
  const auto cl = classify_cells(hs, two_disks(), id, co);
  const auto sol = solve_poisson(hs, cl, id, pb);
  CHECK(sol.num_dofs == 36);
  const auto sys = assemble(hs, cl, id, pb);
  CHECK(sys.dofs.num_dirichlet() == 6);
  for (int f = 0; f < hs.num_functions(); ++f) CHECK(sol.coeffs[f] == doctest::Approx(3.5).epsilon(1e-10));
  const auto e = eval_solution(hs, sol.coeffs, id, {0.6, 0.3}, 2);
  CHECK(e.value == doctest::Approx(3.5));
  CHECK(std::abs(e.grad.x) < 1e-9);
  CHECK(std::abs(e.laplacian) < 1e-7);
}

TEST_CASE("H_Omega matches a brute-force support count") {
  const auto hs = make_space(2, uniform_breaks(4), uniform_breaks(4));
  const IdentityMap id;
  const auto region = TrimmedRegion::of(Rect{0.3, 2, 0.3, 2});
  const auto cl = classify_cells(hs, region, id, {});
  const auto dm = build_dof_map(hs, cl, {});
  // A function is kept iff its support is not contained in the closed region; sample the support.
  int expected = 0;
  for (const auto& f : hs.functions()) {
    const Rect s = hs.level(0).function_support(f.a, f.b);
    bool meets = false;
    for (int j = 0; j <= 40 && !meets; ++j)
      for (int i = 0; i <= 40 && !meets; ++i) {
        const Vec2 x{s.x0 + s.width() * i / 40.0, s.y0 + s.height() * j / 40.0};
        meets = x.x < 0.3 || x.y < 0.3;
      }
    expected += meets;
  }
  CHECK(dm.size() == expected);
  CHECK(dm.size() == hs.num_functions() - 4);
}

TEST_CASE("patch test on a trimmed domain") {
  const IdentityMap id;
  // Linear functions of x are in the space only for affine maps.
  const AffineMap affine(Mat2{{{{2.0, 0.5}, {-0.3, 1.5}}}}, {1, -1});
  for (const GeoMap* map : {static_cast<const GeoMap*>(&id), static_cast<const GeoMap*>(&affine)}) {
    const auto hs = make_space(2, uniform_breaks(5), uniform_breaks(5));
    Problem pb;
    pb.f = [](Vec2) { return 0.0; };
    pb.neumann = [](Vec2, Vec2 n) { return n.x + n.y; };
    pb.dirichlet_value = [](Vec2 x) { return x.x + x.y; };
    pb.dirichlet[kBottom] = true;
    ClassifyOptions co;
    co.dirichlet = pb.dirichlet;
    const auto cl = classify_cells(hs, two_disks(), *map, co);
    const auto sol = solve_poisson(hs, cl, *map, pb);
    CHECK(sol.stats.relative_residual < 1e-10);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      const Vec2 xi{U(rng), U(rng)};
      const auto e = eval_solution(hs, sol.coeffs, *map, xi, 1);
      const Vec2 x = (*map)(xi);
      CHECK(e.value == doctest::Approx(x.x + x.y).epsilon(1e-9));
      CHECK(e.grad.x == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(e.grad.y == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("stiffness is symmetric with positive diagonal") {
  const auto hs = make_space(3, uniform_breaks(6), uniform_breaks(6));
  const IdentityMap id;
  Problem pb;
  const auto cl = classify_cells(hs, two_disks(), id, {});
  const auto sys = assemble(hs, cl, id, pb);
  const auto& m = sys.matrix;
  for (int i = 0; i < m.rows; ++i) {
    CHECK(m.at(i, i) > 0.0);
    for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      const double aij = m.val[k];
      const double aji = m.at(m.col[k], i);
      CHECK(std::abs(aij - aji) <= 1e-12 * std::abs(aij) + 1e-16);
    }
  }
}

TEST_CASE("Dirichlet fit") {
  const IdentityMap id;
  // Reproduces the trace of a space function.
  {
    const auto hs = make_space(2, uniform_breaks(4), uniform_breaks(4));
    std::vector<double> c(hs.num_functions());
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (double& v : c) v = U(rng);
    Problem pb;
    pb.dirichlet[kBottom] = true;
    pb.dirichlet[kLeft] = true;
    pb.dirichlet_value = [&](Vec2 x) { return eval_solution(hs, c, id, x, 0).value; };
    ClassifyOptions co;
    co.dirichlet = pb.dirichlet;
    const auto cl = classify_cells(hs, TrimmedRegion{}, id, co);
    const auto dm = build_dof_map(hs, cl, pb.dirichlet);
    const auto vals = fit_dirichlet(hs, cl, id, dm, pb);
    CHECK(dm.num_dirichlet() == 11);
    for (int k = 0; k < dm.size(); ++k)
      if (dm.on_dirichlet[k]) CHECK(vals[k] == doctest::Approx(c[dm.functions[k]]).epsilon(1e-12));
  }
  // Converges at rate h^{p+1} in the boundary L2 norm.
  std::vector<double> errs;
  for (int n : {4, 8, 16}) {
    const auto hs = make_space(2, uniform_breaks(n), uniform_breaks(n));
    Problem pb;
    pb.dirichlet[kBottom] = true;
    pb.dirichlet_value = [](Vec2 x) { return std::sin(3 * kPi * x.x); };
    ClassifyOptions co;
    co.dirichlet = pb.dirichlet;
    const auto cl = classify_cells(hs, TrimmedRegion{}, id, co);
    const auto dm = build_dof_map(hs, cl, pb.dirichlet);
    const auto vals = fit_dirichlet(hs, cl, id, dm, pb);
    std::vector<double> c(hs.num_functions(), 0.0);
    for (int k = 0; k < dm.size(); ++k) c[dm.functions[k]] = vals[k];
    double e2 = 0.0;
    const auto& g = gauss_legendre(10);
    for (int cell = 0; cell < n; ++cell)
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        const double x = (cell + g.x[i]) / n;
        const double d = eval_solution(hs, c, id, {x, 0.0}, 0).value - std::sin(3 * kPi * x);
        e2 += g.w[i] / n * d * d;
      }
    errs.push_back(std::sqrt(e2));
  }
  CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("small cut supports still converge") {
  const IdentityMap id;
  const double eps = 1e-7;
  const double n = 1.0 / std::sqrt(2.0);
  const auto hs = make_space(3, {0, 0.25 + eps, 0.5 + eps, 0.75 + eps, 1}, {0, 0.25 - eps, 0.5 - eps, 0.75 - eps, 1});
  Problem pb;
  pb.f = [](Vec2 x) {
    const double s = 15 * (x.x - x.y + 0.25);
    return 900 * s / ((1 + s * s) * (1 + s * s));
  };
  pb.neumann = [](Vec2 x, Vec2 nn) {
    const double s = 15 * (x.x - x.y + 0.25);
    return 15 / (1 + s * s) * (nn.x - nn.y);
  };
  pb.dirichlet_value = [](Vec2 x) { return std::atan(15 * (x.x - x.y + 0.25)); };
  pb.dirichlet[kBottom] = true;
  pb.dirichlet[kRight] = true;
  ClassifyOptions co;
  co.dirichlet = pb.dirichlet;
  const auto cl = classify_cells(hs, TrimmedRegion::of(HalfPlane{{0, 0.25}, {n, -n}}), id, co);
  for (const char* m : {"cg", "direct"}) {
    SolverOptions o;
    o.method = m;
    const auto sol = solve_poisson(hs, cl, id, pb, o);
    CHECK(sol.stats.relative_residual < 1e-10);
  }
}

TEST_CASE("solution derivatives match finite differences") {
  const auto hs = make_space(3, uniform_breaks(5), uniform_breaks(5));
  const PolarAnnulusMap polar({2, 0}, 1, 3, 7 * kPi / 8, 9 * kPi / 8);
  std::vector<double> c(hs.num_functions());
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (double& v : c) v = U(rng);
  std::uniform_real_distribution<double> P(0.05, 0.95);
  for (int t = 0; t < 100; ++t) {
    const Vec2 xi{P(rng), P(rng)};
    const auto e = eval_solution(hs, c, polar, xi, 2);
    // Parametric finite differences transformed by the Jacobian.
    const double h = 1e-6;
    const double ux = (eval_solution(hs, c, polar, {xi.x + h, xi.y}, 0).value -
                       eval_solution(hs, c, polar, {xi.x - h, xi.y}, 0).value) / (2 * h);
    const double uy = (eval_solution(hs, c, polar, {xi.x, xi.y + h}, 0).value -
                       eval_solution(hs, c, polar, {xi.x, xi.y - h}, 0).value) / (2 * h);
    const Mat2 j = polar.eval(xi).jac;
    const Vec2 gh = j.apply_transpose(e.grad);
    CHECK(gh.x == doctest::Approx(ux).epsilon(1e-6).scale(1.0));
    CHECK(gh.y == doctest::Approx(uy).epsilon(1e-6).scale(1.0));
  }
}
