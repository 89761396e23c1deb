#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "tiga/adapt.hpp"

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

std::vector<CellId> ids(int n) {
  std::vector<CellId> out;
  for (int k = 0; k < n; ++k) out.push_back({0, k, 0});
  return out;
}

TrimmedRegion two_disks() {
  return TrimmedRegion::of(Disk{{0.25, 0.25}, 0.1}) | TrimmedRegion::of(Disk{{0.75, 0.75}, 0.1});
}

// Ghost set from nonzero function values sampled on each cell.
std::vector<int> ghosts_brute(const HierarchicalSpace& hs, const Classification& cl, const std::vector<int>& marked) {
  const int nc = static_cast<int>(hs.active_cells().size());
  std::vector<std::set<int>> nonzero(nc);
  HierEval ev;
  for (int c = 0; c < nc; ++c) {
    const Rect r = hs.cell_rect(hs.active_cells()[c]);
    for (int a = 1; a <= 3; ++a)
      for (int b = 1; b <= 3; ++b) {
        hs.eval_in_cell(c, {r.x0 + 0.25 * a * r.width(), r.y0 + 0.25 * b * r.height()}, 0, ev);
        for (std::size_t k = 0; k < ev.dofs.size(); ++k)
          if (std::abs(ev.value[k]) > 1e-14) nonzero[c].insert(ev.dofs[k]);
      }
  }
  std::set<int> out;
  for (int k : marked) {
    if (cl.cells[k].status != CellStatus::Cut) continue;
    for (int c = 0; c < nc; ++c) {
      if (cl.cells[c].status != CellStatus::Exterior) continue;
      if (hs.active_cells()[c].level != hs.active_cells()[k].level) continue;
      for (int f : nonzero[k])
        if (nonzero[c].count(f)) {
          out.insert(c);
          break;
        }
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace

TEST_CASE("Doerfler marking examples") {
  auto m = doerfler_mark({9, 16}, ids(2), std::sqrt(0.6));
  REQUIRE(m.marked.size() == 1);
  CHECK(m.marked[0] == 1);
  CHECK(m.fraction == doctest::Approx(0.64));

  m = doerfler_mark({1, 0, 2, 3}, ids(4), 1.0);
  CHECK(m.marked == std::vector<int>{3, 2, 0});

  for (int mcount : {1, 7, 40}) {
    for (double theta : {0.3, 0.5, 0.9, 0.95}) {
      const auto r = doerfler_mark(std::vector<double>(mcount, 2.5), ids(mcount), theta);
      CHECK(static_cast<int>(r.marked.size()) == static_cast<int>(std::ceil(theta * theta * mcount - 1e-9)));
      // Ties resolve by cell id.
      for (std::size_t k = 0; k < r.marked.size(); ++k) CHECK(r.marked[k] == static_cast<int>(k));
    }
  }
  CHECK(doerfler_mark({0, 0}, ids(2), 0.5).marked.empty());
  CHECK_THROWS_AS(doerfler_mark({1}, ids(1), 0.0), InvalidInput);
  CHECK_THROWS_AS(doerfler_mark({1}, ids(1), 1.5), InvalidInput);
}

TEST_CASE("Doerfler fraction on random vectors") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 50;
    std::vector<double> c(n);
    double total = 0;
    for (double& x : c) total += (x = std::pow(u(rng), 4));
    const double theta = 0.05 + 0.95 * u(rng);
    const auto r = doerfler_mark(c, ids(n), theta);
    double sum = 0;
    for (int k : r.marked) sum += c[k];
    CHECK(sum >= theta * theta * total * (1 - 1e-12));
    // Dropping the last marked cell breaks the inequality.
    if (!r.marked.empty()) CHECK(sum - c[r.marked.back()] < theta * theta * total);
  }
}

TEST_CASE("ghost cells match a brute-force enumeration") {
  const auto hs0 = make_space(2, 8);
  const IdentityMap id;
  ClassifyOptions co;
  co.dirichlet[kBottom] = true;
  const auto region = two_disks() | TrimmedRegion::of(Disk{{0.5, 0.45}, 0.2});
  // Refine a corner so that levels differ.
  const auto hs = hs0.refine(std::vector<CellId>{{0, 1, 1}, {0, 2, 2}, {0, 4, 3}});
  const auto cl = classify_cells(hs, region, id, co);
  std::vector<int> cut, interior;
  for (int c = 0; c < static_cast<int>(cl.cells.size()); ++c) {
    if (cl.cells[c].status == CellStatus::Cut) cut.push_back(c);
    if (cl.cells[c].status == CellStatus::Interior) interior.push_back(c);
  }
  REQUIRE(cut.size() > 4);
  for (int k : cut) CHECK(ghost_cells(hs, cl, {k}) == ghosts_brute(hs, cl, {k}));
  CHECK(ghost_cells(hs, cl, cut) == ghosts_brute(hs, cl, cut));
  CHECK(ghost_cells(hs, cl, interior).empty());
  CHECK(!ghost_cells(hs, cl, cut).empty());
}

TEST_CASE("adaptive loop") {
  AdaptiveProblem prob;
  prob.map = std::make_shared<IdentityMap>();
  prob.region = two_disks();
  prob.problem.f = [](Vec2 x) { return 1.0 + 0 * x.x; };
  prob.problem.neumann = [](Vec2, Vec2) { return 0.0; };
  prob.problem.dirichlet[kBottom] = true;
  prob.problem.dirichlet_value = [](Vec2) { return 0.0; };
  prob.classify.dirichlet = prob.problem.dirichlet;
  const auto hs = make_space(2, 4);

  SUBCASE("budget below the initial size gives one record") {
    AdaptOptions o;
    o.max_dof = 10;
    std::vector<IterationRecord> recs;
    adapt_loop(hs, prob, o, recs);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].n_marked == 0);
    CHECK(recs[0].n_dof == 36);
  }
  SUBCASE("adaptive dofs increase and the mesh stays admissible") {
    AdaptOptions o;
    o.max_dof = 400;
    std::vector<IterationRecord> recs;
    std::vector<HierarchicalSpace> spaces;
    adapt_loop(hs, prob, o, recs,
               [&](const IterationRecord&, const HierarchicalSpace& s, const Classification& cl,
                   const EstimatorBreakdown& est) {
                 spaces.push_back(s);
                 for (std::size_t c = 0; c < cl.cells.size(); ++c)
                   if (cl.cells[c].status == CellStatus::Exterior) CHECK(est.cells[c].total() == 0.0);
               });
    REQUIRE(recs.size() >= 3);
    CHECK(recs.back().n_dof > 400);
    for (std::size_t k = 1; k < recs.size(); ++k) CHECK(recs[k].n_dof > recs[k - 1].n_dof);
    for (const auto& s : spaces) CHECK(s.check_admissibility().admissible);
  }
  SUBCASE("uniform refinement roughly quadruples") {
    AdaptOptions o;
    o.mode = RefineMode::Uniform;
    o.max_dof = 2000;
    std::vector<IterationRecord> recs;
    adapt_loop(hs, prob, o, recs);
    REQUIRE(recs.size() >= 3);
    const double ratio = static_cast<double>(recs.back().n_dof) / recs[recs.size() - 2].n_dof;
    CHECK(ratio > 3.0);
    CHECK(ratio < 4.5);
  }
}
