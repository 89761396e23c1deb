#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "tiga/adapt.hpp"
#include "tiga/verify.hpp"

namespace tiga::verify {

namespace {

constexpr double kPi = std::numbers::pi;

class Checker {
 public:
  explicit Checker(std::string name) { res_.name = std::move(name); }
  void expect(bool ok, const std::string& what) {
    ++res_.checks;
    if (!ok && res_.passed) {
      res_.passed = false;
      res_.detail = what;
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (std::abs(got - want) <= tol) {
      ++res_.checks;
      return;
    }
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", expected " << want;
    expect(false, os.str());
  }
  SuiteResult done() { return res_; }

 private:
  SuiteResult res_;
};

KnotVector random_knots(std::mt19937& rng, int p, int cells) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> br{0.0, 1.0};
  while (static_cast<int>(br.size()) < cells + 1) {
    const double x = u(rng);
    bool far = true;
    for (double b : br) far = far && std::abs(b - x) > 1e-3;
    if (far) br.push_back(x);
  }
  std::sort(br.begin(), br.end());
  return KnotVector::from_breakpoints(p, br);
}

std::vector<double> uniform_breaks(int cells) {
  std::vector<double> br(cells + 1);
  for (int k = 0; k <= cells; ++k) br[k] = static_cast<double>(k) / cells;
  return br;
}

// Coarsest functions nonzero on violating cells get their whole support refined until nothing
// violates. Returns the number of sweeps, or -1 when it fails to settle.
int fixed_point_closure(const KnotVector& u, const KnotVector& v, DomainHierarchy& h, int mu) {
  for (int sweep = 0; sweep < 64; ++sweep) {
    const auto s = HierarchicalSpace::build(u, v, h, BasisKind::THB, mu);
    const auto rep = s.check_admissibility();
    if (rep.admissible) return sweep;
    std::set<CellId> todo;
    for (const CellId& k : rep.violating) {
      const auto e = s.eval(s.cell_rect(k).center(), 0);
      for (std::size_t d = 0; d < e.dofs.size(); ++d) {
        const FunctionId f = s.functions()[e.dofs[d]];
        if (e.value[d] == 0.0 || f.level >= k.level - mu + 1) continue;
        const TensorSpace& ts = s.level(f.level);
        const auto [i0, i1] = ts.dirs[0].support_cells(f.a);
        const auto [j0, j1] = ts.dirs[1].support_cells(f.b);
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i)
            if (h.is_active({f.level, i, j})) todo.insert({f.level, i, j});
      }
    }
    if (todo.empty()) return -1;
    for (const CellId& c : todo) h.subdivide(c);
  }
  return -1;
}

}  // namespace

SuiteResult spline_basis() {
  Checker ck("spline partition of unity and derivatives");
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int p = 1; p <= 5; ++p)
    for (int trial = 0; trial < 20; ++trial) {
      const auto kv = random_knots(rng, p, 1 + trial % 9);
      for (int t = 0; t < 50; ++t) {
        const double x = u(rng);
        const auto b = eval_basis(kv, x, 2);
        double s = 0, s1 = 0, s2 = 0;
        for (int j = 0; j <= p; ++j) {
          s += b.ders[0][j];
          s1 += b.ders[1][j];
          s2 += b.ders[2][j];
          ck.expect(b.ders[0][j] >= -1e-15, "negative basis value");
        }
        ck.near(s, 1.0, 1e-13, "sum of values");
        ck.near(s1, 0.0, 1e-9, "sum of first derivatives");
        ck.near(s2, 0.0, 1e-6, "sum of second derivatives");
        // Central differences inside the cell.
        const int cell = kv.find_cell(x);
        const auto [a, c] = kv.cell_bounds(cell);
        const double hstep = 1e-6 * (c - a);
        if (x - a < 2 * hstep || c - x < 2 * hstep) continue;
        for (int j = 0; j <= p; ++j) {
          const int fn = b.first + j;
          const double fd1 = (eval_function(kv, fn, x + hstep) - eval_function(kv, fn, x - hstep)) / (2 * hstep);
          const double scale = 1.0 / (c - a);
          ck.near(b.ders[1][j], fd1, 1e-5 * scale * (1 + std::abs(fd1)), "first derivative vs central difference");
          if (p >= 2) {
            const double fd2 = (eval_function(kv, fn, x + hstep, 1) - eval_function(kv, fn, x - hstep, 1)) /
                               (2 * hstep);
            ck.near(b.ders[2][j], fd2, 1e-4 * scale * scale * (1 + std::abs(fd2)),
                    "second derivative vs central difference");
          }
        }
      }
    }
  return ck.done();
}

SuiteResult two_scale() {
  Checker ck("two-scale exactness");
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int p = 1; p <= 5; ++p)
    for (int trial = 0; trial < 10; ++trial) {
      const auto kv = random_knots(rng, p, 1 + trial % 7);
      const auto ts = dyadic_refine(kv);
      ck.expect(ts.fine.num_cells() == 2 * kv.num_cells(), "fine mesh size");
      for (int fn = 0; fn < kv.num_functions(); ++fn) {
        for (const auto& [j, c] : ts.coarse[fn]) ck.expect(c > 0.0, "non-positive two-scale coefficient");
        for (int t = 0; t < 30; ++t) {
          const double x = u(rng);
          for (int d = 0; d <= std::min(p, 2); ++d) {
            double s = 0;
            for (const auto& [j, c] : ts.coarse[fn]) s += c * eval_function(ts.fine, j, x, d);
            const double want = eval_function(kv, fn, x, d);
            ck.near(s, want, 1e-10 * (1 + std::abs(want)), "refined expansion");
          }
        }
      }
    }
  return ck.done();
}

SuiteResult thb_partition_of_unity() {
  Checker ck("THB partition of unity under 200 random refinement steps");
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int p : {2, 3}) {
    const auto kv = KnotVector::from_breakpoints(p, uniform_breaks(4));
    auto hs = HierarchicalSpace::build(kv, kv, BasisKind::THB, p);
    for (int step = 0; step < 100; ++step) {
      const auto& cells = hs.active_cells();
      const CellId c = cells[rng() % cells.size()];
      if (c.level < 6) hs = hs.refine(std::vector<CellId>{c});
      for (int t = 0; t < 10; ++t) {
        const auto e = hs.eval({u(rng), u(rng)}, 1);
        double s = 0, sx = 0, sy = 0;
        for (std::size_t k = 0; k < e.dofs.size(); ++k) {
          s += e.value[k];
          sx += e.dx[k];
          sy += e.dy[k];
          ck.expect(e.value[k] >= -1e-14, "negative THB value");
        }
        ck.near(s, 1.0, 1e-12, "sum of THB values");
        ck.near(sx + sy, 0.0, 1e-8 * (1 << hs.num_levels()), "sum of THB derivatives");
      }
    }
  }
  return ck.done();
}

SuiteResult admissible_refinement() {
  Checker ck("admissibility preservation vs fixed-point oracle (50 sequences)");
  std::mt19937 rng(4);
  for (int seq = 0; seq < 50; ++seq) {
    const int p = 2 + seq % 2;
    const int mu = 2 + (seq / 2) % 2;
    const auto kv = KnotVector::from_breakpoints(p, uniform_breaks(3));
    auto hs = HierarchicalSpace::build(kv, kv, BasisKind::THB, mu);
    for (int step = 0; step < 6; ++step) {
      std::vector<CellId> marked;
      const auto& cells = hs.active_cells();
      const int count = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < count; ++k) {
        const CellId c = cells[rng() % cells.size()];
        if (c.level < 6) marked.push_back(c);
      }
      // Oracle: subdivide only the marked cells, then close by repeated violator repair.
      DomainHierarchy naive = hs.hierarchy();
      for (const CellId& c : marked)
        if (naive.is_active(c)) naive.subdivide(c);
      ck.expect(fixed_point_closure(kv, kv, naive, mu) >= 0, "oracle closure did not settle");

      hs = hs.refine(marked);
      ck.expect(hs.check_admissibility().admissible, "refined mesh violates admissibility");
      for (const CellId& c : marked) ck.expect(hs.hierarchy().is_refined(c), "marked cell still active");
      DomainHierarchy again = hs.hierarchy();
      ck.expect(fixed_point_closure(kv, kv, again, mu) == 0, "oracle finds a violator after refine");
      // The HB basis on the same mesh obeys the same class.
      ck.expect(hs.with_kind(BasisKind::HB).check_admissibility().admissible, "HB variant not admissible");
    }
  }
  return ck.done();
}

SuiteResult cut_quadrature() {
  Checker ck("cut quadrature vs analytic areas and lengths");
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const IdentityMap id;
  for (int trial = 0; trial < 12; ++trial) {
    const int p = 2 + trial % 2;
    const int n = 3 + trial % 6;
    const auto kv = KnotVector::from_breakpoints(p, uniform_breaks(n));
    const auto hs = HierarchicalSpace::build(kv, kv, BasisKind::THB, p);
    ClassifyOptions co;

    const Vec2 c{0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng)};
    const double r = 0.05 + 0.2 * u(rng);
    const auto cl = classify_cells(hs, TrimmedRegion::of(Disk{c, r}), id, co);
    double len = 0;
    for (const auto& cg : cl.cells) len += gamma_quadrature(cg, id, p + 1).total_weight();
    ck.near(cl.total_area(), 1.0 - kPi * r * r, 1e-10, "area outside a disk");
    ck.near(len, 2 * kPi * r, 1e-10, "circle length");

    // Line y = a x + b from the left side to the right side; D lies above it.
    const double b = 0.1 + 0.4 * u(rng);
    const double a = (0.1 + 0.8 * u(rng)) - b;
    const double nn = std::hypot(a, 1.0);
    const auto half = TrimmedRegion::of(HalfPlane{{0, b}, {a / nn, -1 / nn}});
    const auto cl2 = classify_cells(hs, half, id, co);
    double len2 = 0;
    for (const auto& cg : cl2.cells) len2 += gamma_quadrature(cg, id, p + 1).total_weight();
    ck.near(cl2.total_area(), b + 0.5 * a, 1e-10, "area below a line");
    ck.near(len2, std::hypot(1.0, a), 1e-10, "line length");

    // Union of a disk and a rectangle that do not touch the square's boundary.
    const Rect box{0.05, 0.25, 0.6, 0.9};
    const auto both = TrimmedRegion::of(Disk{{0.7, 0.3}, 0.15}) | TrimmedRegion::of(box);
    const auto cl3 = classify_cells(hs, both, id, co);
    double len3 = 0;
    for (const auto& cg : cl3.cells) len3 += gamma_quadrature(cg, id, p + 1).total_weight();
    ck.near(cl3.total_area(), 1.0 - kPi * 0.0225 - box.area(), 1e-10, "area outside a disk and a box");
    ck.near(len3, 2 * kPi * 0.15 + 2 * (box.width() + box.height()), 1e-10, "disk and box perimeter");
  }
  return ck.done();
}

SuiteResult estimator_scalings() {
  Checker ck("delta and c_S spot values");
  const double eta = eta_constant();
  ck.expect(std::abs(eta + std::log(eta)) < 1e-14, "eta residual");
  ck.near(eta, 0.5671432904097838, 1e-14, "eta value");
  ck.near(delta_cell(CellStatus::Interior, 0.25, 0.0625), 0.25, 0, "interior delta");
  ck.near(scaling_constant(1e-10), 4.798525, 1e-6, "c_S at 1e-10");
  ck.near(delta_cell(CellStatus::Cut, 0.25, 1e-10), 4.798525e-5, 1e-11, "cut delta at 1e-10");
  ck.near(scaling_constant(0.8), 0.7530891, 1e-7, "c_S at 0.8");
  ck.near(delta_cell(CellStatus::Cut, 1.0, 0.8), 0.7530891 * std::sqrt(0.8), 1e-7, "cut delta at 0.8");
  ck.near(delta_face(true, 0.25, 0.25), 0.5, 1e-15, "full face delta");
  ck.near(delta_face(false, 0.25, 1e-4), std::sqrt(-std::log(1e-4)) * 1e-2, 1e-15, "cut face delta");
  return ck.done();
}

SuiteResult doerfler_fraction() {
  Checker ck("Doerfler fraction on random contributions");
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 200);
    std::vector<double> c(n);
    std::vector<CellId> ids(n);
    double total = 0;
    for (int k = 0; k < n; ++k) {
      c[k] = u(rng) < 0.1 ? 0.0 : std::pow(u(rng), 6);
      total += c[k];
      ids[k] = {0, k, 0};
    }
    const double theta = 0.01 + 0.99 * u(rng);
    const auto m = doerfler_mark(c, ids, theta);
    double sum = 0;
    for (int k : m.marked) {
      sum += c[k];
      ck.expect(c[k] > 0, "zero contribution marked");
    }
    ck.expect(sum >= theta * theta * total * (1 - 1e-12), "marked fraction below theta^2");
    if (!m.marked.empty())
      ck.expect(sum - c[m.marked.back()] < theta * theta * total, "marked prefix not minimal");
    for (std::size_t k = 1; k < m.marked.size(); ++k)
      ck.expect(c[m.marked[k - 1]] >= c[m.marked[k]], "marking order not descending");
  }
  return ck.done();
}

SuiteResult ghost_sets() {
  Checker ck("ghost sets vs brute-force support enumeration");
  std::mt19937 rng(7);
  const IdentityMap id;
  const auto region = TrimmedRegion::of(Disk{{0.25, 0.25}, 0.1}) | TrimmedRegion::of(Disk{{0.75, 0.75}, 0.1}) |
                      TrimmedRegion::of(Disk{{0.55, 0.4}, 0.18});
  for (int trial = 0; trial < 6; ++trial) {
    const int p = 2 + trial % 2;
    const auto kv = KnotVector::from_breakpoints(p, uniform_breaks(8));
    auto hs = HierarchicalSpace::build(kv, kv, BasisKind::THB, p);
    for (int k = 0; k < trial; ++k) {
      const auto& cells = hs.active_cells();
      hs = hs.refine(std::vector<CellId>{cells[rng() % cells.size()]});
    }
    const auto cl = classify_cells(hs, region, id, ClassifyOptions{});
    const int nc = static_cast<int>(cl.cells.size());
    // Functions nonzero on each cell from point samples, independent of the stored supports.
    std::vector<std::set<int>> nonzero(nc);
    HierEval ev;
    for (int c = 0; c < nc; ++c) {
      const Rect r = cl.cells[c].rect;
      for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
          hs.eval_in_cell(c, {r.x0 + 0.25 * a * r.width(), r.y0 + 0.25 * b * r.height()}, 0, ev);
          for (std::size_t d = 0; d < ev.dofs.size(); ++d)
            if (std::abs(ev.value[d]) > 1e-14) nonzero[c].insert(ev.dofs[d]);
        }
    }
    std::vector<int> cut;
    for (int c = 0; c < nc; ++c)
      if (cl.cells[c].status == CellStatus::Cut) cut.push_back(c);
    for (int k : cut) {
      std::vector<int> brute;
      for (int c = 0; c < nc; ++c) {
        if (cl.cells[c].status != CellStatus::Exterior) continue;
        if (hs.active_cells()[c].level != hs.active_cells()[k].level) continue;
        for (int f : nonzero[k])
          if (nonzero[c].count(f)) {
            brute.push_back(c);
            break;
          }
      }
      ck.expect(ghost_cells(hs, cl, {k}) == brute, "ghost set differs for one marked cell");
    }
    std::vector<int> interior;
    for (int c = 0; c < nc; ++c)
      if (cl.cells[c].status == CellStatus::Interior) interior.push_back(c);
    ck.expect(ghost_cells(hs, cl, interior).empty(), "interior cells produced ghosts");
  }
  return ck.done();
}

std::vector<SuiteResult> run_all(std::ostream* log) {
  const std::vector<std::function<SuiteResult()>> suites{spline_basis,       two_scale,      thb_partition_of_unity,
                                                         admissible_refinement, cut_quadrature, estimator_scalings,
                                                         doerfler_fraction,  ghost_sets};
  std::vector<SuiteResult> out;
  for (const auto& s : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r = s();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) {
      *log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.checks << " checks, " << r.seconds << " s)";
      if (!r.passed) *log << ": " << r.detail;
      *log << "\n";
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tiga::verify
