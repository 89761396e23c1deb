#include "tiga/assembly.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace tiga {

namespace {

bool edge_on_side(const Rect& r, int side) {
  switch (side) {
    case kBottom: return r.y0 == 0.0;
    case kRight: return r.x1 == 1.0;
    case kTop: return r.y1 == 1.0;
    default: return r.x0 == 0.0;
  }
}

// Parametric endpoints of the cell edge on `side`.
std::pair<Vec2, Vec2> side_edge(const Rect& r, int side) {
  switch (side) {
    case kBottom: return {{r.x0, r.y0}, {r.x1, r.y0}};
    case kRight: return {{r.x1, r.y0}, {r.x1, r.y1}};
    case kTop: return {{r.x0, r.y1}, {r.x1, r.y1}};
    default: return {{r.x0, r.y0}, {r.x0, r.y1}};
  }
}

// Calls fn(xi, physical weight) for Gauss points on the Dirichlet edges of a cell.
template <class Fn>
void for_dirichlet_edges(const Rect& r, const std::array<bool, 4>& dirichlet, const GeoMap& map, int order, Fn fn) {
  const auto& g = gauss_legendre(order);
  for (int side = 0; side < 4; ++side) {
    if (!dirichlet[side] || !edge_on_side(r, side)) continue;
    const auto [a, b] = side_edge(r, side);
    const double len = (b - a).norm();
    const Vec2 t = (b - a) * (1.0 / len);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      const Vec2 xi = a + g.x[i] * (b - a);
      fn(xi, g.w[i] * len * map.eval(xi).jac.apply(t).norm());
    }
  }
}

struct Pattern {
  std::vector<std::vector<int>> rows;
  explicit Pattern(int n) : rows(n) {}
  void add_block(const std::vector<int>& ids) {
    for (int i : ids) rows[i].insert(rows[i].end(), ids.begin(), ids.end());
  }
  CsrMatrix finish() {
    CsrMatrix m;
    m.rows = static_cast<int>(rows.size());
    m.row_ptr.assign(m.rows + 1, 0);
    for (int i = 0; i < m.rows; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      m.row_ptr[i + 1] = m.row_ptr[i] + static_cast<int>(r.size());
    }
    m.col.reserve(m.row_ptr.back());
    for (auto& r : rows) {
      m.col.insert(m.col.end(), r.begin(), r.end());
      std::vector<int>().swap(r);
    }
    m.val.assign(m.col.size(), 0.0);
    return m;
  }
};

double& entry(CsrMatrix& m, int i, int j) {
  const auto b = m.col.begin() + m.row_ptr[i];
  const auto e = m.col.begin() + m.row_ptr[i + 1];
  const auto it = std::lower_bound(b, e, j);
  return m.val[it - m.col.begin()];
}

std::vector<int> compact_dofs(const CellBasis& cb, const DofMap& dofs) {
  std::vector<int> out(cb.dofs.size());
  for (std::size_t k = 0; k < cb.dofs.size(); ++k) out[k] = dofs.index[cb.dofs[k]];
  return out;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> solve_cg(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opts,
                             SolveStats& stats) {
  const int n = a.rows;
  std::vector<double> x(n, 0.0);
  const double bnorm = norm2(b);
  stats.history.clear();
  if (bnorm == 0.0) {
    stats.iterations = 0;
    stats.relative_residual = 0.0;
    stats.history.push_back(0.0);
    return x;
  }
  std::vector<double> dinv = a.diagonal();
  for (double& d : dinv) {
    if (!(d > 0)) throw SolverError("nonpositive diagonal entry", {});
    d = 1.0 / d;
  }
  std::vector<double> r = b;
  std::vector<double> z(n), p(n), q(n);
  for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  const int cap = opts.max_iterations > 0 ? opts.max_iterations : 20 * n + 1000;
  double rel = 1.0;
  stats.history.push_back(rel);
  int it = 0;
  for (; it < cap && rel > opts.tolerance; ++it) {
    a.multiply(p, q);
    double pq = 0.0;
    for (int i = 0; i < n; ++i) pq += p[i] * q[i];
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    // Recompute the true residual periodically to avoid drift.
    if ((it + 1) % 200 == 0) {
      a.multiply(x, q);
      for (int i = 0; i < n; ++i) r[i] = b[i] - q[i];
    }
    rel = norm2(r) / bnorm;
    stats.history.push_back(rel);
    double rz_new = 0.0;
    for (int i = 0; i < n; ++i) {
      z[i] = dinv[i] * r[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  stats.iterations = it;
  stats.relative_residual = rel;
  if (rel > opts.tolerance) {
    std::ostringstream msg;
    msg << "conjugate gradient did not converge in " << it << " iterations (relative residual " << rel << ")";
    throw SolverError(msg.str(), stats.history);
  }
  return x;
}

std::vector<double> solve_direct(const CsrMatrix& a, const std::vector<double>& b, SolveStats& stats) {
  const int n = a.rows;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(a.val.size());
  for (int i = 0; i < n; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) trip.emplace_back(i, a.col[k], a.val[k]);
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw SolverError("sparse factorization failed", {});
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
  const Eigen::VectorXd sol = ldlt.solve(rhs);
  std::vector<double> x(sol.data(), sol.data() + n);
  std::vector<double> ax(n);
  a.multiply(x, ax);
  double rn = 0.0;
  for (int i = 0; i < n; ++i) rn += (b[i] - ax[i]) * (b[i] - ax[i]);
  const double bnorm = norm2(b);
  stats.iterations = 1;
  stats.relative_residual = bnorm > 0 ? std::sqrt(rn) / bnorm : 0.0;
  stats.history = {stats.relative_residual};
  return x;
}

}  // namespace

void CsrMatrix::multiply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

double CsrMatrix::at(int i, int j) const {
  const auto b = col.begin() + row_ptr[i];
  const auto e = col.begin() + row_ptr[i + 1];
  const auto it = std::lower_bound(b, e, j);
  return (it != e && *it == j) ? val[it - col.begin()] : 0.0;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(rows);
  for (int i = 0; i < rows; ++i) d[i] = at(i, i);
  return d;
}

int DofMap::num_dirichlet() const {
  return static_cast<int>(std::count(on_dirichlet.begin(), on_dirichlet.end(), 1));
}

int resolve_order(const HierarchicalSpace& hs, int order) {
  return order > 0 ? order : std::max(hs.degree(0), hs.degree(1)) + 1;
}

DofMap build_dof_map(const HierarchicalSpace& hs, const Classification& cl, const std::array<bool, 4>& dirichlet) {
  DofMap d;
  const int nf = hs.num_functions();
  std::vector<char> used(nf, 0);
  std::vector<char> on_d(nf, 0);
  const IdentityMap id;
  HierEval ev;
  for (int c = 0; c < static_cast<int>(cl.cells.size()); ++c) {
    if (cl.cells[c].status == CellStatus::Exterior) continue;
    for (int f : hs.cell_basis(c).dofs) used[f] = 1;
    for_dirichlet_edges(cl.cells[c].rect, dirichlet, id, std::max(hs.degree(0), hs.degree(1)) + 1,
                        [&](Vec2 xi, double) {
                          hs.eval_in_cell(c, xi, 0, ev);
                          for (std::size_t k = 0; k < ev.dofs.size(); ++k)
                            if (std::abs(ev.value[k]) > 1e-14) on_d[ev.dofs[k]] = 1;
                        });
  }
  d.index.assign(nf, -1);
  for (int f = 0; f < nf; ++f) {
    if (!used[f]) continue;
    d.index[f] = static_cast<int>(d.functions.size());
    d.functions.push_back(f);
    d.on_dirichlet.push_back(on_d[f]);
  }
  return d;
}

LinearSystem assemble(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                      const Problem& problem, int order) {
  order = resolve_order(hs, order);
  LinearSystem sys;
  sys.dofs = build_dof_map(hs, cl, problem.dirichlet);
  const int n = sys.dofs.size();
  const int ncells = static_cast<int>(cl.cells.size());

  Pattern pattern(n);
  std::vector<std::vector<int>> cell_ids(ncells);
  for (int c = 0; c < ncells; ++c) {
    if (cl.cells[c].status == CellStatus::Exterior) continue;
    cell_ids[c] = compact_dofs(hs.cell_basis(c), sys.dofs);
    pattern.add_block(cell_ids[c]);
  }
  sys.matrix = pattern.finish();
  sys.rhs.assign(n, 0.0);

  HierEval ev;
  std::vector<double> kloc;
  std::vector<double> floc;
  std::vector<Vec2> grads;
  for (int c = 0; c < ncells; ++c) {
    const CellGeometry& cg = cl.cells[c];
    if (cg.status == CellStatus::Exterior) continue;
    const auto& ids = cell_ids[c];
    const std::size_t m = ids.size();
    kloc.assign(m * m, 0.0);
    floc.assign(m, 0.0);
    grads.resize(m);

    const QuadRule q = cell_quadrature(cg, map, order);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const PointGeometry pg = pullback(map, q.points[k]);
      hs.eval_in_cell(c, q.points[k], 1, ev);
      const double w = q.weights[k];
      const double fv = problem.f ? problem.f(pg.x) : 0.0;
      for (std::size_t i = 0; i < m; ++i) grads[i] = pg.gradient({ev.dx[i], ev.dy[i]});
      for (std::size_t i = 0; i < m; ++i) {
        floc[i] += w * fv * ev.value[i];
        for (std::size_t j = i; j < m; ++j) kloc[i * m + j] += w * grads[i].dot(grads[j]);
      }
    }

    auto add_boundary = [&](const QuadRule& bq) {
      for (std::size_t k = 0; k < bq.size(); ++k) {
        hs.eval_in_cell(c, bq.points[k], 0, ev);
        const double g = problem.neumann ? problem.neumann(map(bq.points[k]), bq.normals[k]) : 0.0;
        for (std::size_t i = 0; i < m; ++i) floc[i] += bq.weights[k] * g * ev.value[i];
      }
    };
    for (int f : cg.faces) add_boundary(face_quadrature(cl.faces[f], cg.rect, map, order));
    if (!cg.gamma.empty()) add_boundary(gamma_quadrature(cg, map, order));

    for (std::size_t i = 0; i < m; ++i) {
      sys.rhs[ids[i]] += floc[i];
      for (std::size_t j = i; j < m; ++j) {
        entry(sys.matrix, ids[i], ids[j]) += kloc[i * m + j];
        if (j != i) entry(sys.matrix, ids[j], ids[i]) += kloc[i * m + j];
      }
    }
  }
  return sys;
}

std::vector<double> fit_dirichlet(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                                  const DofMap& dofs, const Problem& problem, int order) {
  order = resolve_order(hs, order) + 1;
  std::vector<int> bidx(dofs.size(), -1);
  int nb = 0;
  for (int k = 0; k < dofs.size(); ++k)
    if (dofs.on_dirichlet[k]) bidx[k] = nb++;
  std::vector<double> values(dofs.size(), 0.0);
  if (nb == 0) return values;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
  HierEval ev;
  std::vector<int> loc;
  for (int c = 0; c < static_cast<int>(cl.cells.size()); ++c) {
    for_dirichlet_edges(cl.cells[c].rect, problem.dirichlet, map, order, [&](Vec2 xi, double w) {
      hs.eval_in_cell(c, xi, 0, ev);
      const double g = problem.dirichlet_value ? problem.dirichlet_value(map(xi)) : 0.0;
      loc.clear();
      for (std::size_t k = 0; k < ev.dofs.size(); ++k) loc.push_back(bidx[dofs.index[ev.dofs[k]]]);
      for (std::size_t i = 0; i < loc.size(); ++i) {
        if (loc[i] < 0) continue;
        rhs[loc[i]] += w * g * ev.value[i];
        for (std::size_t j = 0; j < loc.size(); ++j)
          if (loc[j] >= 0) trip.emplace_back(loc[i], loc[j], w * ev.value[i] * ev.value[j]);
      }
    });
  }
  Eigen::SparseMatrix<double> mass(nb, nb);
  mass.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(mass);
  if (ldlt.info() != Eigen::Success) throw SolverError("boundary mass matrix factorization failed", {});
  const Eigen::VectorXd sol = ldlt.solve(rhs);
  for (int k = 0; k < dofs.size(); ++k)
    if (bidx[k] >= 0) values[k] = sol[bidx[k]];
  return values;
}

std::vector<double> solve_spd(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opts,
                              SolveStats* stats) {
  if (static_cast<int>(b.size()) != a.rows) throw InvalidInput("right-hand side size mismatch");
  SolveStats local;
  SolveStats& s = stats ? *stats : local;
  if (opts.method == "direct") return solve_direct(a, b, s);
  if (opts.method != "cg") throw InvalidInput("unknown solver '" + opts.method + "'");
  return solve_cg(a, b, opts, s);
}

Solution solve_poisson(const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map,
                       const Problem& problem, const SolverOptions& opts, int order) {
  const LinearSystem sys = assemble(hs, cl, map, problem, order);
  const std::vector<double> fixed = fit_dirichlet(hs, cl, map, sys.dofs, problem, order);
  const int n = sys.dofs.size();

  std::vector<int> free_id(n, -1);
  int nfree = 0;
  for (int k = 0; k < n; ++k)
    if (!sys.dofs.on_dirichlet[k]) free_id[k] = nfree++;

  CsrMatrix red;
  red.rows = nfree;
  red.row_ptr.assign(nfree + 1, 0);
  std::vector<double> rhs(nfree, 0.0);
  for (int i = 0; i < n; ++i) {
    const int fi = free_id[i];
    if (fi < 0) continue;
    rhs[fi] = sys.rhs[i];
    for (int k = sys.matrix.row_ptr[i]; k < sys.matrix.row_ptr[i + 1]; ++k) {
      const int j = sys.matrix.col[k];
      if (free_id[j] >= 0) {
        red.col.push_back(free_id[j]);
        red.val.push_back(sys.matrix.val[k]);
      } else {
        rhs[fi] -= sys.matrix.val[k] * fixed[j];
      }
    }
    red.row_ptr[fi + 1] = static_cast<int>(red.col.size());
  }

  Solution sol;
  sol.num_dofs = n;
  const std::vector<double> x = nfree > 0 ? solve_spd(red, rhs, opts, &sol.stats) : std::vector<double>{};
  sol.coeffs.assign(hs.num_functions(), 0.0);
  for (int k = 0; k < n; ++k) {
    const int f = sys.dofs.functions[k];
    sol.coeffs[f] = free_id[k] >= 0 ? x[free_id[k]] : fixed[k];
  }
  return sol;
}

SolutionEval eval_solution_in_cell(const HierarchicalSpace& hs, const std::vector<double>& coeffs,
                                   const PointGeometry& pg, int cell, Vec2 xi, int max_deriv, HierEval& buf) {
  hs.eval_in_cell(cell, xi, max_deriv, buf);
  SolutionEval out;
  Vec2 gh;
  double hxx = 0, hxy = 0, hyy = 0;
  for (std::size_t k = 0; k < buf.dofs.size(); ++k) {
    const double c = coeffs[buf.dofs[k]];
    out.value += c * buf.value[k];
    if (max_deriv >= 1) {
      gh.x += c * buf.dx[k];
      gh.y += c * buf.dy[k];
    }
    if (max_deriv >= 2) {
      hxx += c * buf.dxx[k];
      hxy += c * buf.dxy[k];
      hyy += c * buf.dyy[k];
    }
  }
  if (max_deriv >= 1) out.grad = pg.gradient(gh);
  if (max_deriv >= 2) out.laplacian = pg.laplacian(gh, hxx, hxy, hyy);
  return out;
}

SolutionEval eval_solution(const HierarchicalSpace& hs, const std::vector<double>& coeffs, const GeoMap& map,
                           Vec2 xi, int max_deriv) {
  if (static_cast<int>(coeffs.size()) != hs.num_functions()) throw InvalidInput("coefficient vector size mismatch");
  if (max_deriv < 0 || max_deriv > 2) throw InvalidInput("max_deriv must be 0, 1 or 2");
  HierEval buf;
  return eval_solution_in_cell(hs, coeffs, pullback(map, xi), hs.locate(xi), xi, max_deriv, buf);
}

}  // namespace tiga
