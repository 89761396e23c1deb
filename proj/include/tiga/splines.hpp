#pragma once

#include <array>
#include <utility>
#include <vector>

#include "tiga/common.hpp"

namespace tiga {

/// Open knot vector with boundary multiplicity degree+1 and simple interior knots.
class KnotVector {
 public:
  KnotVector() = default;

  /// Builds the open knot vector over strictly increasing breakpoints 0 = z_0 < ... < z_m = 1.
  static KnotVector from_breakpoints(int degree, std::vector<double> breakpoints);

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  int num_functions() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  int num_cells() const { return static_cast<int>(breaks_.size()) - 1; }

  /// Cell containing x; the last cell owns x = 1.
  int find_cell(double x) const;
  std::pair<double, double> cell_bounds(int cell) const {
    return {breaks_[cell], breaks_[cell + 1]};
  }
  /// Inclusive range of cells covered by the support of function `fn`.
  std::pair<int, int> support_cells(int fn) const;
  std::pair<double, double> support(int fn) const {
    return {knots_[fn], knots_[fn + degree_ + 1]};
  }
  /// First function nonzero on `cell`; functions first..first+degree are nonzero there.
  int first_function(int cell) const { return cell; }

  /// Union of the supports of all functions nonzero on `cell`.
  std::pair<double, double> support_extension(int cell) const;

 private:
  KnotVector(int degree, std::vector<double> breaks);

  int degree_ = 0;
  std::vector<double> breaks_;
  std::vector<double> knots_;
};

/// Values and derivatives of the degree+1 univariate B-splines nonzero at a point.
struct BasisValues1D {
  int first = 0;                              ///< index of the first nonzero function
  std::array<std::vector<double>, 3> ders{};  ///< ders[k][j]: k-th derivative of function first+j
};

/// Cox-de Boor evaluation with derivatives up to `max_deriv` (0, 1 or 2).
BasisValues1D eval_basis(const KnotVector& kv, double x, int max_deriv);

/// Same as above for a known cell; x may lie on the cell's closure only.
void eval_basis_in_cell(const KnotVector& kv, int cell, double x, int max_deriv,
                        BasisValues1D& out);

/// Evaluates a single function through the global path; zero outside its support.
double eval_function(const KnotVector& kv, int fn, double x, int deriv = 0);

/// Two-scale relation between a knot vector and its dyadic refinement.
struct TwoScale {
  KnotVector fine;
  /// coarse[i] lists (fine index, coefficient) with B_i = sum c_j b_j.
  std::vector<std::vector<std::pair<int, double>>> coarse;
  /// fine[j] lists (coarse index, coefficient), the transpose of `coarse`.
  std::vector<std::vector<std::pair<int, double>>> fine_to_coarse;
};

/// Bisects every breakpoint interval and computes the subdivision coefficients.
TwoScale dyadic_refine(const KnotVector& kv);

/// Cell index in the tensor-product Bezier mesh.
struct CellIndex {
  int i = 0;
  int j = 0;
};

/// Tensor-product B-spline space of one hierarchical level.
struct TensorSpace {
  std::array<KnotVector, 2> dirs;
  int level = 0;

  int num_cells(int d) const { return dirs[d].num_cells(); }
  int num_functions(int d) const { return dirs[d].num_functions(); }
  Rect cell_rect(CellIndex c) const;
  /// Tensor product of the per-direction support extensions.
  Rect support_extension(CellIndex c) const;
  Rect function_support(int a, int b) const;
};

}  // namespace tiga
