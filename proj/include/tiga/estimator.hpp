#pragma once

#include <vector>

#include "tiga/assembly.hpp"

namespace tiga {

/// Unique root of t = -log t, found by bisection of t + log t on (0.1, 1).
double eta_constant();

/// c_S = max(-log|S|, eta)^(1/2) in two dimensions and 1 in three.
double scaling_constant(double measure, int dim = 2);

/// delta_K: h_K on interior cells, c |K cap Omega|^(1/dim) on cut cells.
double delta_cell(CellStatus status, double h, double measure, int dim = 2);

/// delta_F: h_F^(1/2) on faces fully in Gamma_N, c |F cap Gamma_N|^(1/(2(dim-1))) otherwise.
double delta_face(bool full, double h_face, double measure, int dim = 2);

struct CellEstimate {
  double delta = 0;
  double interior = 0;  ///< delta_K^2 ||f + lap u_h||^2 on K cap Omega
  double neumann = 0;   ///< sum of delta_F^2 ||g_N - du_h/dn||^2 on F cap Gamma_N
  double trimming = 0;  ///< h_K ||g_N - du_h/dn||^2 on gamma_K (or delta_K, see TrimmingWeight)
  double total() const { return interior + neumann + trimming; }
};

struct EstimatorBreakdown {
  std::vector<CellEstimate> cells;
  double total_sq = 0;
  double estimator() const;
  std::vector<double> contributions() const;
};

/// Weight of the trimming-curve residual. `Diameter` is h_K; `Scaling` replaces it by delta_K,
/// which drops the term on cells with a vanishing active part.
enum class TrimmingWeight { Diameter, Scaling };

/// Residual estimator of a discrete solution (coefficients per active function). `order` is the
/// number of Gauss points per direction; 0 selects degree + 2.
EstimatorBreakdown estimate(const HierarchicalSpace& hs, const std::vector<double>& coeffs,
                            const Classification& cl, const GeoMap& map, const Problem& problem,
                            int order = 0, TrimmingWeight weight = TrimmingWeight::Diameter);

}  // namespace tiga
