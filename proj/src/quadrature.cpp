#include "tiga/quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace tiga {

namespace {

constexpr int kMaxGauss = 64;

GaussRule1D compute_gauss(int n) {
  GaussRule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = 0.5 * (1.0 - z);
    r.x[n - 1 - i] = 0.5 * (1.0 + z);
    r.w[i] = 0.5 * w;
    r.w[n - 1 - i] = 0.5 * w;
  }
  return r;
}

const std::array<GaussRule1D, kMaxGauss + 1>& gauss_table() {
  static const std::array<GaussRule1D, kMaxGauss + 1> table = [] {
    std::array<GaussRule1D, kMaxGauss + 1> t;
    for (int n = 1; n <= kMaxGauss; ++n) t[n] = compute_gauss(n);
    return t;
  }();
  return table;
}

}  // namespace

const GaussRule1D& gauss_legendre(int n) {
  if (n < 1 || n > kMaxGauss) throw InvalidInput("Gauss rule size must be in [1, 64]");
  return gauss_table()[n];
}

double QuadRule::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void QuadRule::append(const QuadRule& o) {
  points.insert(points.end(), o.points.begin(), o.points.end());
  weights.insert(weights.end(), o.weights.begin(), o.weights.end());
  normals.insert(normals.end(), o.normals.begin(), o.normals.end());
}

}  // namespace tiga
