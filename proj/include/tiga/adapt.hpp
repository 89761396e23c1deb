#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tiga/estimator.hpp"

namespace tiga {

struct MarkingResult {
  std::vector<int> marked;  ///< active-cell indices chosen by the bulk criterion
  std::vector<int> ghosts;  ///< exterior cells added for marked cut cells
  double theta = 0;
  double fraction = 0;  ///< sum of marked contributions over the total
};

/// Greedy bulk marking: cells with positive contribution sorted by decreasing contribution
/// (ties by cell id) until the marked sum reaches theta^2 of the total.
MarkingResult doerfler_mark(const std::vector<double>& contributions, const std::vector<CellId>& cells,
                            double theta);

/// Exterior active cells of the same level as a marked cut cell that share an active function
/// with it; sorted and without duplicates.
std::vector<int> ghost_cells(const HierarchicalSpace& hs, const Classification& cl, const std::vector<int>& marked);

struct IterationRecord {
  int iter = 0;
  int n_dof = 0;
  int n_levels = 0;
  double energy_error = 0;
  double estimator = 0;
  double effectivity = 0;
  int n_marked = 0;
  double seconds = 0;
};

enum class RefineMode { Uniform, Adaptive };

/// Everything the loop needs about one boundary value problem.
struct AdaptiveProblem {
  std::shared_ptr<const GeoMap> map;
  TrimmedRegion region;
  Problem problem;
  ClassifyOptions classify;
  /// Energy error of a discrete solution on the classified space.
  std::function<double(const HierarchicalSpace&, const std::vector<double>&, const Classification&)> energy_error;
};

struct AdaptOptions {
  RefineMode mode = RefineMode::Adaptive;
  double theta = 0.9;
  int max_dof = 10000;
  int max_levels = 1000;
  int max_iterations = 100;
  SolverOptions solver;
  int order = 0;
  TrimmingWeight trimming = TrimmingWeight::Diameter;
};

/// Per-iteration hook for dumps; receives the iteration's state before refinement.
using IterationHook = std::function<void(const IterationRecord&, const HierarchicalSpace&, const Classification&,
                                         const EstimatorBreakdown&)>;

/// SOLVE - ESTIMATE - MARK - REFINE until the dof or level budget is exceeded or the estimator
/// vanishes. Records gathered before a solver failure are returned through `records`.
void adapt_loop(const HierarchicalSpace& initial, const AdaptiveProblem& problem, const AdaptOptions& opts,
                std::vector<IterationRecord>& records, const IterationHook& hook = {});

}  // namespace tiga
