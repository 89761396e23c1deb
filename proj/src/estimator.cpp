#include "tiga/estimator.hpp"

#include <cmath>

namespace tiga {

double eta_constant() {
  static const double eta = [] {
    double lo = 0.1;
    double hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (mid + std::log(mid) < 0.0) lo = mid;
      else hi = mid;
    }
    // Pick whichever bracket end has the smaller defining residual.
    return std::abs(lo + std::log(lo)) <= std::abs(hi + std::log(hi)) ? lo : hi;
  }();
  return eta;
}

double scaling_constant(double measure, int dim) {
  if (dim == 3) return 1.0;
  if (dim != 2) throw InvalidInput("dimension must be 2 or 3");
  if (!(measure > 0)) throw InvalidInput("scaling constant needs a positive measure");
  return std::sqrt(std::max(-std::log(measure), eta_constant()));
}

double delta_cell(CellStatus status, double h, double measure, int dim) {
  switch (status) {
    case CellStatus::Interior: return h;
    case CellStatus::Exterior: return 0.0;
    case CellStatus::Cut:
      if (!(measure > 0)) throw GeometryError("cut cell with zero clipped measure");
      return scaling_constant(measure, dim) * std::pow(measure, 1.0 / dim);
  }
  return 0.0;
}

double delta_face(bool full, double h_face, double measure, int dim) {
  if (full) return std::sqrt(h_face);
  if (!(measure > 0)) throw GeometryError("cut face with zero Neumann measure");
  return scaling_constant(measure, dim) * std::pow(measure, 1.0 / (2.0 * (dim - 1)));
}

double EstimatorBreakdown::estimator() const { return std::sqrt(total_sq); }

std::vector<double> EstimatorBreakdown::contributions() const {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.total());
  return out;
}

EstimatorBreakdown estimate(const HierarchicalSpace& hs, const std::vector<double>& coeffs,
                            const Classification& cl, const GeoMap& map, const Problem& problem, int order,
                            TrimmingWeight weight) {
  if (order <= 0) order = resolve_order(hs, 0) + 1;
  EstimatorBreakdown out;
  out.cells.resize(cl.cells.size());
  HierEval buf;
  for (int c = 0; c < static_cast<int>(cl.cells.size()); ++c) {
    const CellGeometry& cg = cl.cells[c];
    CellEstimate& e = out.cells[c];
    if (cg.status == CellStatus::Exterior) continue;
    e.delta = delta_cell(cg.status, cg.h, cg.area);

    const QuadRule q = cell_quadrature(cg, map, order);
    double r2 = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      const PointGeometry pg = pullback(map, q.points[k]);
      const SolutionEval s = eval_solution_in_cell(hs, coeffs, pg, c, q.points[k], 2, buf);
      const double r = (problem.f ? problem.f(pg.x) : 0.0) + s.laplacian;
      r2 += q.weights[k] * r * r;
    }
    e.interior = e.delta * e.delta * r2;

    auto jump2 = [&](const QuadRule& bq) {
      double s2 = 0.0;
      for (std::size_t k = 0; k < bq.size(); ++k) {
        const PointGeometry pg = pullback(map, bq.points[k]);
        const SolutionEval s = eval_solution_in_cell(hs, coeffs, pg, c, bq.points[k], 1, buf);
        const Vec2 n = bq.normals[k];
        const double j = (problem.neumann ? problem.neumann(pg.x, n) : 0.0) - s.grad.dot(n);
        s2 += bq.weights[k] * j * j;
      }
      return s2;
    };
    for (int f : cg.faces) {
      const BoundaryFace& face = cl.faces[f];
      const double df = delta_face(face.full(), face.length, face.neumann_length);
      e.neumann += df * df * jump2(face_quadrature(face, cg.rect, map, order));
    }
    if (!cg.gamma.empty()) {
      const double w = weight == TrimmingWeight::Diameter ? cg.h : e.delta;
      e.trimming = w * jump2(gamma_quadrature(cg, map, order));
    }
    out.total_sq += e.total();
  }
  return out;
}

}  // namespace tiga
