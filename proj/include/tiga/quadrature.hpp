#pragma once

#include <vector>

#include "tiga/common.hpp"

namespace tiga {

/// Gauss-Legendre rule on [0,1].
struct GaussRule1D {
  std::vector<double> x;
  std::vector<double> w;
};

/// n-point rule, 1 <= n <= 64; rules are computed once and cached.
const GaussRule1D& gauss_legendre(int n);

/// Points with weights; boundary rules also carry unit outward normals. Points are parametric,
/// weights and normals are physical.
struct QuadRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  std::vector<Vec2> normals;

  std::size_t size() const { return points.size(); }
  double total_weight() const;
  void append(const QuadRule& o);
};

}  // namespace tiga
