#include "tiga/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace tiga {

MarkingResult doerfler_mark(const std::vector<double>& contributions, const std::vector<CellId>& cells,
                            double theta) {
  if (!(theta > 0 && theta <= 1)) throw InvalidInput("marking parameter must lie in (0, 1]");
  if (contributions.size() != cells.size()) throw InvalidInput("contribution and cell lists differ in size");
  MarkingResult res;
  res.theta = theta;
  std::vector<int> order;
  double total = 0.0;
  for (int k = 0; k < static_cast<int>(contributions.size()); ++k) {
    if (contributions[k] > 0) {
      order.push_back(k);
      total += contributions[k];
    }
  }
  if (total == 0.0) return res;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (contributions[a] != contributions[b]) return contributions[a] > contributions[b];
    return cells[a] < cells[b];
  });
  const double target = theta * theta * total * (1.0 - 1e-12);
  double sum = 0.0;
  for (int k : order) {
    if (sum >= target) break;
    res.marked.push_back(k);
    sum += contributions[k];
  }
  res.fraction = sum / total;
  return res;
}

std::vector<int> ghost_cells(const HierarchicalSpace& hs, const Classification& cl, const std::vector<int>& marked) {
  std::vector<int> out;
  const auto& cells = hs.active_cells();
  for (int k : marked) {
    if (cl.cells[k].status != CellStatus::Cut) continue;
    for (int f : hs.cell_basis(k).dofs)
      for (int c : hs.function_cells(f))
        if (cl.cells[c].status == CellStatus::Exterior && cells[c].level == cells[k].level) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void adapt_loop(const HierarchicalSpace& initial, const AdaptiveProblem& prob, const AdaptOptions& opts,
                std::vector<IterationRecord>& records, const IterationHook& hook) {
  HierarchicalSpace hs = initial;
  records.clear();
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const Classification cl = classify_cells(hs, prob.region, *prob.map, prob.classify);
    const Solution sol = solve_poisson(hs, cl, *prob.map, prob.problem, opts.solver, opts.order);
    const EstimatorBreakdown est = estimate(hs, sol.coeffs, cl, *prob.map, prob.problem, 0, opts.trimming);

    IterationRecord rec;
    rec.iter = iter;
    rec.n_dof = sol.num_dofs;
    rec.n_levels = hs.num_levels();
    rec.energy_error = prob.energy_error ? prob.energy_error(hs, sol.coeffs, cl) : 0.0;
    rec.estimator = est.estimator();
    rec.effectivity = rec.energy_error > 0 ? rec.estimator / rec.energy_error : 0.0;

    const bool stop = rec.n_dof > opts.max_dof || rec.n_levels > opts.max_levels || rec.estimator == 0.0 ||
                      iter + 1 == opts.max_iterations;
    std::vector<CellId> marked;
    if (!stop) {
      const auto& cells = hs.active_cells();
      if (opts.mode == RefineMode::Uniform) {
        marked = cells;
      } else {
        const MarkingResult m = doerfler_mark(est.contributions(), cells, opts.theta);
        std::vector<int> all = m.marked;
        const std::vector<int> ghosts = ghost_cells(hs, cl, m.marked);
        all.insert(all.end(), ghosts.begin(), ghosts.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        for (int k : all) marked.push_back(cells[k]);
      }
      rec.n_marked = static_cast<int>(marked.size());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);
    if (hook) hook(rec, hs, cl, est);
    if (stop || marked.empty()) break;
    hs = hs.refine(marked);
  }
}

}  // namespace tiga
