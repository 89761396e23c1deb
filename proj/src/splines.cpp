#include "tiga/splines.hpp"

#include <algorithm>
#include <sstream>

namespace tiga {

Mat2 Mat2::inverse() const {
  const double d = det();
  if (d == 0.0) throw GeometryError("singular 2x2 matrix");
  Mat2 r;
  r.m = {{{m[1][1] / d, -m[0][1] / d}, {-m[1][0] / d, m[0][0] / d}}};
  return r;
}

Mat2 Mat2::operator*(const Mat2& o) const {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j];
  return r;
}

KnotVector::KnotVector(int degree, std::vector<double> breaks)
    : degree_(degree), breaks_(std::move(breaks)) {
  knots_.reserve(breaks_.size() + 2 * degree_);
  knots_.insert(knots_.end(), degree_, breaks_.front());
  knots_.insert(knots_.end(), breaks_.begin(), breaks_.end());
  knots_.insert(knots_.end(), degree_, breaks_.back());
}

KnotVector KnotVector::from_breakpoints(int degree, std::vector<double> breakpoints) {
  if (degree < 1) throw InvalidInput("knot vector degree must be >= 1");
  if (breakpoints.size() < 2) throw InvalidInput("knot vector needs at least two breakpoints");
  if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0)
    throw InvalidInput("breakpoints must start at 0 and end at 1");
  for (std::size_t k = 1; k < breakpoints.size(); ++k) {
    if (!(breakpoints[k] > breakpoints[k - 1])) {
      std::ostringstream msg;
      msg << "breakpoints not strictly increasing at position " << k;
      throw InvalidInput(msg.str());
    }
  }
  return KnotVector(degree, std::move(breakpoints));
}

int KnotVector::find_cell(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("evaluation point outside [0,1]");
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  int c = static_cast<int>(it - breaks_.begin()) - 1;
  return std::clamp(c, 0, num_cells() - 1);
}

std::pair<int, int> KnotVector::support_cells(int fn) const {
  return {std::max(0, fn - degree_), std::min(fn, num_cells() - 1)};
}

std::pair<double, double> KnotVector::support_extension(int cell) const {
  if (cell < 0 || cell >= num_cells()) throw InvalidInput("cell index out of range");
  return {knots_[cell], knots_[cell + 2 * degree_ + 1]};
}

void eval_basis_in_cell(const KnotVector& kv, int cell, double x, int max_deriv,
                        BasisValues1D& out) {
  const int p = kv.degree();
  const auto& U = kv.knots();
  const int span = cell + p;
  const int n = std::min(max_deriv, p);

  // Triangular table of the Cox-de Boor recursion (basis values in the upper part, knot
  // differences in the lower part).
  double ndu[8][8];
  double left[8];
  double right[8];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  out.first = cell;
  for (int k = 0; k <= max_deriv; ++k) out.ders[k].assign(p + 1, 0.0);
  for (int j = 0; j <= p; ++j) out.ders[0][j] = ndu[j][p];

  double a[2][8];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out.ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) out.ders[k][j] *= factor;
    factor *= (p - k);
  }
}

BasisValues1D eval_basis(const KnotVector& kv, double x, int max_deriv) {
  if (max_deriv < 0 || max_deriv > 2) throw InvalidInput("max_deriv must be 0, 1 or 2");
  if (kv.degree() > 6) throw InvalidInput("degree above 6 is not supported");
  BasisValues1D out;
  eval_basis_in_cell(kv, kv.find_cell(x), x, max_deriv, out);
  return out;
}

double eval_function(const KnotVector& kv, int fn, double x, int deriv) {
  if (fn < 0 || fn >= kv.num_functions()) throw InvalidInput("function index out of range");
  const auto [lo, hi] = kv.support(fn);
  if (x < lo || x > hi) return 0.0;
  const BasisValues1D b = eval_basis(kv, x, deriv);
  const int local = fn - b.first;
  if (local < 0 || local > kv.degree()) return 0.0;
  return b.ders[deriv][local];
}

namespace {

// Boehm insertion of `t` into `knots`, updating the coefficient vector of a single function.
void insert_knot(std::vector<double>& knots, std::vector<double>& coefs, int degree, double t) {
  const int p = degree;
  const int k = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
  const int n = static_cast<int>(coefs.size());
  std::vector<double> next(n + 1, 0.0);
  for (int j = 0; j <= n; ++j) {
    double alpha;
    if (j <= k - p) {
      alpha = 1.0;
    } else if (j >= k + 1) {
      alpha = 0.0;
    } else {
      alpha = (t - knots[j]) / (knots[j + p] - knots[j]);
    }
    const double pj = j < n ? coefs[j] : 0.0;
    const double pjm = j > 0 ? coefs[j - 1] : 0.0;
    next[j] = alpha * pj + (1.0 - alpha) * pjm;
  }
  knots.insert(knots.begin() + k + 1, t);
  coefs = std::move(next);
}

}  // namespace

TwoScale dyadic_refine(const KnotVector& kv) {
  const int p = kv.degree();
  const auto& br = kv.breakpoints();
  std::vector<double> fine_breaks;
  fine_breaks.reserve(2 * br.size());
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    fine_breaks.push_back(br[k]);
    fine_breaks.push_back(0.5 * (br[k] + br[k + 1]));
  }
  fine_breaks.push_back(br.back());

  TwoScale ts{KnotVector::from_breakpoints(p, std::move(fine_breaks)), {}, {}};
  const int m = kv.num_cells();
  const auto& U = kv.knots();

  // Fine knot index of coarse knot index i (interior breakpoint k lands at fine breakpoint 2k).
  auto fine_index = [&](int i) {
    if (i <= p) return i;
    if (i < p + m) return p + 2 * (i - p);
    return p + 2 * m + (i - p - m);
  };

  ts.coarse.resize(kv.num_functions());
  ts.fine_to_coarse.resize(ts.fine.num_functions());
  for (int fn = 0; fn < kv.num_functions(); ++fn) {
    std::vector<double> local(U.begin() + fn, U.begin() + fn + p + 2);
    std::vector<double> coefs{1.0};
    std::vector<double> mids;
    for (int k = 0; k + 1 < static_cast<int>(local.size()); ++k)
      if (local[k + 1] > local[k]) mids.push_back(0.5 * (local[k] + local[k + 1]));
    for (double t : mids) insert_knot(local, coefs, p, t);
    const int first = fine_index(fn);
    for (int k = 0; k < static_cast<int>(coefs.size()); ++k) {
      if (coefs[k] == 0.0) continue;
      ts.coarse[fn].emplace_back(first + k, coefs[k]);
      ts.fine_to_coarse[first + k].emplace_back(fn, coefs[k]);
    }
  }
  return ts;
}

Rect TensorSpace::cell_rect(CellIndex c) const {
  const auto [x0, x1] = dirs[0].cell_bounds(c.i);
  const auto [y0, y1] = dirs[1].cell_bounds(c.j);
  return {x0, x1, y0, y1};
}

Rect TensorSpace::support_extension(CellIndex c) const {
  const auto [x0, x1] = dirs[0].support_extension(c.i);
  const auto [y0, y1] = dirs[1].support_extension(c.j);
  return {x0, x1, y0, y1};
}

Rect TensorSpace::function_support(int a, int b) const {
  const auto [x0, x1] = dirs[0].support(a);
  const auto [y0, y1] = dirs[1].support(b);
  return {x0, x1, y0, y1};
}

}  // namespace tiga
