#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "tiga/hierarchy.hpp"

using namespace tiga;

namespace {

KnotVector uniform(int p, int cells) {
  std::vector<double> br(cells + 1);
  for (int k = 0; k <= cells; ++k) br[k] = static_cast<double>(k) / cells;
  return KnotVector::from_breakpoints(p, br);
}

// Direct set recursion: a level-l function is in the basis iff its support lies in the level-l
// subdomain but not in the level-(l+1) subdomain.
std::set<FunctionId> brute_force_functions(const HierarchicalSpace& hs) {
  std::set<FunctionId> out;
  const auto& h = hs.hierarchy();
  for (int l = 0; l < hs.num_levels(); ++l) {
    const TensorSpace& ts = hs.level(l);
    for (int b = 0; b < ts.num_functions(1); ++b)
      for (int a = 0; a < ts.num_functions(0); ++a) {
        const auto [i0, i1] = ts.dirs[0].support_cells(a);
        const auto [j0, j1] = ts.dirs[1].support_cells(b);
        bool inside = true;
        bool inside_next = true;
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i) {
            inside = inside && h.in_domain({l, i, j});
            inside_next = inside_next && h.is_refined({l, i, j});
          }
        if (inside && !inside_next) out.insert({l, a, b});
      }
  }
  return out;
}

double tensor_value(const HierarchicalSpace& hs, const FunctionId& f, Vec2 x) {
  const TensorSpace& ts = hs.level(f.level);
  return eval_function(ts.dirs[0], f.a, x.x) * eval_function(ts.dirs[1], f.b, x.y);
}

}  // namespace

TEST_CASE("unrefined space equals the tensor basis") {
  const auto u = uniform(2, 3);
  const auto hs = HierarchicalSpace::build(u, u, BasisKind::THB, 2);
  CHECK(hs.num_levels() == 1);
  CHECK(hs.num_functions() == 25);
  CHECK(hs.active_cells().size() == 9);
  const Vec2 x{0.4, 0.7};
  const auto e = hs.eval(x, 2);
  double s = 0.0;
  for (std::size_t k = 0; k < e.dofs.size(); ++k) {
    CHECK(e.value[k] == doctest::Approx(tensor_value(hs, hs.functions()[e.dofs[k]], x)));
    s += e.value[k];
  }
  CHECK(s == doctest::Approx(1.0));
  CHECK(hs.check_admissibility().admissible);
}

TEST_CASE("corner refinement matches brute-force recursion") {
  const auto u = uniform(2, 4);
  DomainHierarchy h(4, 4);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) h.subdivide({0, i, j});
  for (BasisKind kind : {BasisKind::HB, BasisKind::THB}) {
    const auto hs = HierarchicalSpace::build(u, u, h, kind, 2);
    const auto oracle = brute_force_functions(hs);
    CHECK(hs.num_functions() == 48);
    CHECK(oracle.size() == 48);
    for (const auto& f : hs.functions()) CHECK(oracle.count(f) == 1);
    CHECK(hs.active_cells().size() == 12 + 16);
  }

  // HB functions are plain tensor B-splines of their level.
  const auto hb = HierarchicalSpace::build(u, u, h, BasisKind::HB, 2);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Vec2 x{U(rng), U(rng)};
    const auto e = hb.eval(x, 0);
    for (std::size_t k = 0; k < e.dofs.size(); ++k)
      CHECK(e.value[k] == doctest::Approx(tensor_value(hb, hb.functions()[e.dofs[k]], x)).epsilon(1e-12));
  }
}

TEST_CASE("non-nested hierarchy is rejected") {
  const auto u = uniform(2, 4);
  DomainHierarchy h(4, 4);
  h.subdivide({1, 3, 3});
  CHECK_THROWS_AS(HierarchicalSpace::build(u, u, h, BasisKind::THB, 2), InvalidInput);
}

TEST_CASE("support extensions and neighborhoods") {
  const auto u = uniform(2, 4);
  DomainHierarchy h(4, 4);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) h.subdivide({0, i, j});
  const auto hs = HierarchicalSpace::build(u, u, h, BasisKind::THB, 2);

  const CellId c{1, 3, 3};
  const Rect own = hs.multilevel_support_extension(c, 1);
  CHECK(own.x0 == doctest::Approx(0.125));
  CHECK(own.x1 == doctest::Approx(0.75));
  const Rect coarse = hs.multilevel_support_extension(c, 0);
  CHECK(coarse.x0 == 0.0);
  CHECK(coarse.x1 == 1.0);
  CHECK(coarse.y1 == 1.0);
  CHECK_THROWS_AS(hs.multilevel_support_extension(c, 2), InvalidInput);

  const auto single = HierarchicalSpace::build(uniform(2, 1), uniform(2, 1), BasisKind::THB, 2);
  const Rect whole = single.multilevel_support_extension({0, 0, 0}, 0);
  CHECK(whole.x0 == 0.0);
  CHECK(whole.x1 == 1.0);

  CHECK(hs.neighborhood({0, 3, 3}, 2).empty());
  CHECK(hs.neighborhood(c, 3).empty());

  std::set<CellId> expected;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      const CellId k{0, i, j};
      if (h.is_active(k) && hs.cell_rect(k).overlaps(own)) expected.insert(k);
    }
  const auto n = hs.neighborhood(c, 2);
  CHECK(std::set<CellId>(n.begin(), n.end()) == expected);
  CHECK(expected.size() == 5);
}

TEST_CASE("refinement") {
  const auto u = uniform(2, 4);
  const auto hs = HierarchicalSpace::build(u, u, BasisKind::THB, 2);
  const auto same = hs.refine({});
  CHECK(same.active_cells() == hs.active_cells());

  const CellId m{0, 1, 2};
  const std::vector<CellId> marked{m};
  const auto once = hs.refine(marked);
  CHECK(once.num_levels() == 2);
  CHECK(once.cell_index(m) == -1);
  CHECK(once.active_cells().size() == 19);

  // Repeatedly marking the finest cell forces coarse neighbors to refine first.
  auto cur = once;
  for (int step = 0; step < 3; ++step) {
    CellId pick{-1, 0, 0};
    for (const auto& c : cur.active_cells())
      if (c.level == cur.num_levels() - 1 && (pick.level < 0 || c < pick)) pick = c;
    const std::vector<CellId> mk{pick};
    cur = cur.refine(mk);
    CHECK(cur.check_admissibility().admissible);
  }
}

TEST_CASE("bypassing the closure produces a violation") {
  const auto u = uniform(2, 4);
  DomainHierarchy h(4, 4);
  h.subdivide({0, 0, 0});
  h.subdivide({1, 0, 0});
  h.subdivide({2, 0, 0});
  const auto hs = HierarchicalSpace::build(u, u, h, BasisKind::THB, 2);
  const auto rep = hs.check_admissibility();
  CHECK_FALSE(rep.admissible);
  const CellId deep{3, 0, 0};
  CHECK(std::find(rep.violating.begin(), rep.violating.end(), deep) != rep.violating.end());

  // Levels of the functions that are nonzero at the center of the deep cell.
  const auto e = hs.eval(hs.cell_rect(deep).center(), 0);
  int lo = 99, hi = -1;
  for (std::size_t k = 0; k < e.dofs.size(); ++k)
    if (std::abs(e.value[k]) > 0.0) {
      lo = std::min(lo, hs.functions()[e.dofs[k]].level);
      hi = std::max(hi, hs.functions()[e.dofs[k]].level);
    }
  CHECK(hi - lo + 1 > 2);
  CHECK_FALSE(hs.with_kind(BasisKind::HB).check_admissibility().admissible);
}

TEST_CASE("random refinement keeps partition of unity and admissibility") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int p = 2; p <= 3; ++p) {
    for (int mu = 2; mu <= 3; ++mu) {
      const auto u = uniform(p, 3);
      auto hs = HierarchicalSpace::build(u, u, BasisKind::THB, mu);
      for (int step = 0; step < 6; ++step) {
        std::vector<CellId> marked;
        const auto& cells = hs.active_cells();
        for (int k = 0; k < 3; ++k) {
          const CellId c = cells[rng() % cells.size()];
          if (c.level < 5) marked.push_back(c);
        }
        hs = hs.refine(marked);
        CHECK(hs.check_admissibility().admissible);
        double area = 0.0;
        for (const auto& c : hs.active_cells()) area += hs.cell_rect(c).area();
        CHECK(std::abs(area - 1.0) < 1e-12);
        for (int t = 0; t < 50; ++t) {
          const auto e = hs.eval({U(rng), U(rng)}, 1);
          double s = 0.0, sx = 0.0;
          for (std::size_t k = 0; k < e.dofs.size(); ++k) {
            s += e.value[k];
            sx += e.dx[k];
          }
          CHECK(std::abs(s - 1.0) < 1e-12);
          CHECK(std::abs(sx) < 1e-8);
        }
      }
    }
  }
}
