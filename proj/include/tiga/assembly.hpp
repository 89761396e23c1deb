#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "tiga/geometry.hpp"
#include "tiga/hierarchy.hpp"

namespace tiga {

/// Compressed sparse row matrix.
struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
  /// Entry (i, j), zero when not stored.
  double at(int i, int j) const;
  std::vector<double> diagonal() const;
};

/// Poisson data on the physical domain.
struct Problem {
  std::function<double(Vec2)> f;
  /// Neumann datum g_N(x, n) for the outward unit normal n.
  std::function<double(Vec2, Vec2)> neumann;
  std::function<double(Vec2)> dirichlet_value;
  std::array<bool, 4> dirichlet{};  ///< indexed by Side
};

/// Active functions that do not vanish on the trimmed domain, with Dirichlet flags.
struct DofMap {
  std::vector<int> index;      ///< per active function: compact dof id or -1
  std::vector<int> functions;  ///< compact dof id -> active function
  std::vector<char> on_dirichlet;
  int size() const { return static_cast<int>(functions.size()); }
  int num_dirichlet() const;
};

DofMap build_dof_map(const HierarchicalSpace& hs, const Classification& cl, const std::array<bool, 4>& dirichlet);

/// Stiffness and load over all dofs in the DofMap, before any constraint is applied.
struct LinearSystem {
  DofMap dofs;
  CsrMatrix matrix;
  std::vector<double> rhs;
};

/// Gauss points per direction; 0 selects degree + 1.
int resolve_order(const HierarchicalSpace& hs, int order);

LinearSystem assemble(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                      const Problem& problem, int order = 0);

/// Least-squares fit of g_D against the traces of the Dirichlet dofs. Returns one value per
/// dof of the map (zero off the Dirichlet boundary).
std::vector<double> fit_dirichlet(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                                  const DofMap& dofs, const Problem& problem, int order = 0);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0;
  std::vector<double> history;
};

struct SolverOptions {
  std::string method = "cg";  ///< "cg" (Jacobi-preconditioned) or "direct"
  double tolerance = 1e-10;
  int max_iterations = 0;  ///< 0 selects 20 n + 1000
};

/// Solves A x = b. Throws SolverError when the iteration cap is reached.
std::vector<double> solve_spd(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opts,
                              SolveStats* stats = nullptr);

struct Solution {
  std::vector<double> coeffs;  ///< one coefficient per active function of the space
  SolveStats stats;
  int num_dofs = 0;  ///< |H_Omega|, Dirichlet dofs included
};

/// Assembles, imposes Dirichlet values by elimination and solves.
Solution solve_poisson(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                       const Problem& problem, const SolverOptions& opts = {}, int order = 0);

struct SolutionEval {
  double value = 0;
  Vec2 grad;
  double laplacian = 0;
};

/// Discrete solution at a parametric point; physical derivatives.
SolutionEval eval_solution(const HierarchicalSpace& hs, const std::vector<double>& coeffs, const GeoMap& map,
                           Vec2 xi, int max_deriv);
/// Same on a known active cell with a reusable evaluation buffer.
SolutionEval eval_solution_in_cell(const HierarchicalSpace& hs, const std::vector<double>& coeffs,
                                   const PointGeometry& pg, int cell, Vec2 xi, int max_deriv, HierEval& buf);

}  // namespace tiga
