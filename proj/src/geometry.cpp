#include "tiga/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tiga/hierarchy.hpp"

namespace tiga {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxArcStep = kPi / 8.0;
constexpr int kCurvedExtra = 3;
constexpr int kGammaGrading = 20;
constexpr int kMeasureOrder = 4;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

double normalize_angle(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t < 0) t += 2.0 * kPi;
  return t;
}

void add_tensor(QuadRule& q, const Rect& r, int n) {
  if (!(r.width() > 0 && r.height() > 0)) return;
  const auto& g = gauss_legendre(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      q.points.push_back({r.x0 + g.x[i] * r.width(), r.y0 + g.x[j] * r.height()});
      q.weights.push_back(g.w[i] * g.w[j] * r.area());
    }
}

// Collapsed Gauss rule: x = A + s (B - A) + s t (C - B), Jacobian 2 |ABC| s.
void add_triangle(QuadRule& q, Vec2 a, Vec2 b, Vec2 c, int n) {
  const double twice_area = std::abs((b - a).cross(c - a));
  if (!(twice_area > 0)) return;
  const auto& gs = gauss_legendre(n + 1);
  const auto& gt = gauss_legendre(n);
  for (int i = 0; i < n + 1; ++i) {
    const double s = gs.x[i];
    for (int j = 0; j < n; ++j) {
      const double t = gt.x[j];
      q.points.push_back(a + s * (b - a) + (s * t) * (c - b));
      q.weights.push_back(gs.w[i] * gt.w[j] * twice_area * s);
    }
  }
}

// Sutherland-Hodgman clip against {f(x) = (x - p) . n * sign <= 0}.
std::vector<Vec2> clip_polygon(const std::vector<Vec2>& poly, Vec2 p, Vec2 n, double sign) {
  std::vector<Vec2> out;
  const std::size_t m = poly.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 cur = poly[k];
    const Vec2 nxt = poly[(k + 1) % m];
    const double fc = sign * (cur - p).dot(n);
    const double fn = sign * (nxt - p).dot(n);
    if (fc <= 0) out.push_back(cur);
    if ((fc < 0 && fn > 0) || (fc > 0 && fn < 0)) {
      const double t = fc / (fc - fn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

void add_polygon(QuadRule& q, const std::vector<Vec2>& poly, int n) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) add_triangle(q, poly[0], poly[k], poly[k + 1], n);
}

enum class YBound { Bottom, Top, CircleLow, CircleHigh };

// Vertical strips of the box between breakpoints of the circle; inside the disk's x-range the
// abscissa is parametrized by x = cx + r sin(phi) so both circle branches become smooth.
void add_disk_strips(QuadRule& q, const Rect& box, const Disk& d, bool keep_inside, int n) {
  const double cx = d.center.x;
  const double cy = d.center.y;
  const double r = d.radius;
  std::vector<double> xs{box.x0, box.x1};
  auto add_break = [&](double x) {
    if (x > box.x0 && x < box.x1) xs.push_back(x);
  };
  add_break(cx - r);
  add_break(cx + r);
  for (double yb : {box.y0, box.y1}) {
    const double dy = yb - cy;
    if (std::abs(dy) < r) {
      const double s = std::sqrt(r * r - dy * dy);
      add_break(cx - s);
      add_break(cx + s);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  const auto& gy = gauss_legendre(n);
  const auto& gp = gauss_legendre(n + kCurvedExtra);
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double a = xs[k];
    const double b = xs[k + 1];
    if (b <= cx - r || a >= cx + r) {
      if (!keep_inside) add_tensor(q, {a, b, box.y0, box.y1}, n);
      continue;
    }
    const double pa = std::asin(clamp_unit((a - cx) / r));
    const double pb = std::asin(clamp_unit((b - cx) / r));
    const double cm = std::cos(0.5 * (pa + pb));
    const double low_m = cy - r * cm;
    const double high_m = cy + r * cm;

    std::vector<std::pair<YBound, YBound>> spans;
    if (keep_inside) {
      spans.push_back({low_m > box.y0 ? YBound::CircleLow : YBound::Bottom,
                       high_m < box.y1 ? YBound::CircleHigh : YBound::Top});
    } else {
      if (low_m > box.y0) spans.push_back({YBound::Bottom, low_m < box.y1 ? YBound::CircleLow : YBound::Top});
      if (high_m < box.y1)
        spans.push_back({high_m > box.y0 ? YBound::CircleHigh : YBound::Bottom, YBound::Top});
    }

    const int pieces = std::max(1, static_cast<int>(std::ceil((pb - pa) / kMaxArcStep)));
    const double dphi = (pb - pa) / pieces;
    for (int m = 0; m < pieces; ++m) {
      for (std::size_t i = 0; i < gp.x.size(); ++i) {
        const double phi = pa + (m + gp.x[i]) * dphi;
        const double c = std::cos(phi);
        const double x = cx + r * std::sin(phi);
        const double dxdphi = r * c;
        auto value = [&](YBound bnd) {
          switch (bnd) {
            case YBound::Bottom: return box.y0;
            case YBound::Top: return box.y1;
            case YBound::CircleLow: return cy - r * c;
            case YBound::CircleHigh: return cy + r * c;
          }
          return 0.0;
        };
        for (const auto& [lo_b, hi_b] : spans) {
          const double lo = value(lo_b);
          const double hi = value(hi_b);
          if (!(hi > lo)) continue;
          for (std::size_t j = 0; j < gy.x.size(); ++j) {
            q.points.push_back({x, lo + gy.x[j] * (hi - lo)});
            q.weights.push_back(gp.w[i] * dphi * dxdphi * gy.w[j] * (hi - lo));
          }
        }
      }
    }
  }
}

// Segment of the line {(x - p) . n = 0} inside the closed box.
std::optional<std::pair<Vec2, Vec2>> clip_line(const HalfPlane& hp, const Rect& box) {
  const Vec2 d{-hp.normal.y, hp.normal.x};
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  const double p[2] = {hp.point.x, hp.point.y};
  const double dir[2] = {d.x, d.y};
  const double lo[2] = {box.x0, box.y0};
  const double hi[2] = {box.x1, box.y1};
  for (int k = 0; k < 2; ++k) {
    if (dir[k] == 0.0) {
      if (p[k] < lo[k] || p[k] > hi[k]) return std::nullopt;
      continue;
    }
    double a = (lo[k] - p[k]) / dir[k];
    double b = (hi[k] - p[k]) / dir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  Vec2 a = hp.point + t0 * d;
  Vec2 b = hp.point + t1 * d;
  // Snap axis-aligned lines exactly onto their coordinate.
  if (d.x == 0.0) a.x = b.x = hp.point.x;
  if (d.y == 0.0) a.y = b.y = hp.point.y;
  return std::make_pair(a, b);
}

bool on_box_boundary(const GammaSegment& s, const Rect& box) {
  if (s.kind != GammaSegment::Kind::Line) return false;
  return (s.a.x == s.b.x && (s.a.x == box.x0 || s.a.x == box.x1)) ||
         (s.a.y == s.b.y && (s.a.y == box.y0 || s.a.y == box.y1));
}

// Keeps a straight trimming segment when the point just off its midpoint on the domain side lies
// in the open box. Segments on a shared cell edge go to the cell on the domain side, and
// segments on the unit-square boundary are dropped.
void push_line(std::vector<GammaSegment>& out, Vec2 a, Vec2 b, Vec2 normal_out, const Rect& box) {
  const double len = (b - a).norm();
  if (!(len > 0)) return;
  const double tau = 1e-9 * std::max(box.width(), box.height());
  const Vec2 q = 0.5 * (a + b) - tau * normal_out;
  if (!box.contains_open(q)) return;
  GammaSegment s;
  s.kind = GammaSegment::Kind::Line;
  s.a = a;
  s.b = b;
  s.normal = normal_out;
  out.push_back(s);
}

void gamma_segments(const Primitive& prim, bool keep_inside, const Rect& box,
                    std::vector<GammaSegment>& out) {
  std::visit(Overloaded{
                 [&](const HalfPlane& hp) {
                   const auto seg = clip_line(hp, box);
                   if (!seg) return;
                   push_line(out, seg->first, seg->second, keep_inside ? hp.normal : -hp.normal, box);
                 },
                 [&](const Rect& r) {
                   const double sgn = keep_inside ? 1.0 : -1.0;
                   const double ylo = std::max(r.y0, box.y0);
                   const double yhi = std::min(r.y1, box.y1);
                   const double xlo = std::max(r.x0, box.x0);
                   const double xhi = std::min(r.x1, box.x1);
                   if (yhi > ylo) {
                     if (r.x0 >= box.x0 && r.x0 <= box.x1)
                       push_line(out, {r.x0, ylo}, {r.x0, yhi}, Vec2{-sgn, 0}, box);
                     if (r.x1 >= box.x0 && r.x1 <= box.x1)
                       push_line(out, {r.x1, ylo}, {r.x1, yhi}, Vec2{sgn, 0}, box);
                   }
                   if (xhi > xlo) {
                     if (r.y0 >= box.y0 && r.y0 <= box.y1)
                       push_line(out, {xlo, r.y0}, {xhi, r.y0}, Vec2{0, -sgn}, box);
                     if (r.y1 >= box.y0 && r.y1 <= box.y1)
                       push_line(out, {xlo, r.y1}, {xhi, r.y1}, Vec2{0, sgn}, box);
                   }
                 },
                 [&](const Disk& d) {
                   const double cx = d.center.x;
                   const double cy = d.center.y;
                   const double r = d.radius;
                   std::vector<double> th{0.0};
                   for (double xb : {box.x0, box.x1}) {
                     if (std::abs(xb - cx) < r) {
                       const double t = std::acos(clamp_unit((xb - cx) / r));
                       th.push_back(normalize_angle(t));
                       th.push_back(normalize_angle(-t));
                     }
                   }
                   for (double yb : {box.y0, box.y1}) {
                     if (std::abs(yb - cy) < r) {
                       const double t = std::asin(clamp_unit((yb - cy) / r));
                       th.push_back(normalize_angle(t));
                       th.push_back(normalize_angle(kPi - t));
                     }
                   }
                   std::sort(th.begin(), th.end());
                   th.push_back(2.0 * kPi);
                   for (std::size_t k = 0; k + 1 < th.size(); ++k) {
                     const double t0 = th[k];
                     const double t1 = th[k + 1];
                     if (!(t1 - t0 > 1e-15)) continue;
                     const double tm = 0.5 * (t0 + t1);
                     const Vec2 m{cx + r * std::cos(tm), cy + r * std::sin(tm)};
                     if (!box.contains_open(m)) continue;
                     GammaSegment s;
                     s.kind = GammaSegment::Kind::Arc;
                     s.center = d.center;
                     s.radius = r;
                     s.theta0 = t0;
                     s.theta1 = t1;
                     s.orientation = keep_inside ? 1.0 : -1.0;
                     // Merge with the previous arc when contiguous.
                     if (!out.empty() && out.back().kind == GammaSegment::Kind::Arc &&
                         out.back().center.x == cx && out.back().center.y == cy &&
                         out.back().theta1 == t0 && out.back().orientation == s.orientation) {
                       out.back().theta1 = t1;
                     } else {
                       out.push_back(s);
                     }
                   }
                 },
             },
             prim);
}

struct ClipResult {
  std::vector<CellPiece> pieces;
  std::vector<GammaSegment> gamma;
  bool flagged = false;
};

void clip_box(const Rect& box, const TrimmedRegion& region, int depth, int max_depth, ClipResult& res) {
  const auto& prims = region.primitives();
  std::vector<int> touching;
  for (int k = 0; k < static_cast<int>(prims.size()); ++k)
    if (primitive_touches(prims[k], box)) touching.push_back(k);
  const Vec2 c = box.center();
  if (touching.empty()) {
    if (!region.contains(c)) res.pieces.push_back({box, std::nullopt, false});
    return;
  }
  if (touching.size() == 1) {
    const int k = touching[0];
    const bool d_if_in = region.eval(c, k, true);
    const bool d_if_out = region.eval(c, k, false);
    if (d_if_in == d_if_out) {
      if (!d_if_in) res.pieces.push_back({box, std::nullopt, false});
      return;
    }
    const bool keep_inside = !d_if_in;
    res.pieces.push_back({box, prims[k], keep_inside});
    const std::size_t before = res.gamma.size();
    gamma_segments(prims[k], keep_inside, box, res.gamma);
    for (std::size_t s = before; s < res.gamma.size(); ++s)
      if (on_box_boundary(res.gamma[s], box)) res.flagged = true;
    return;
  }
  if (depth >= max_depth) {
    // Unresolved: approximate the box by its center membership.
    res.flagged = true;
    if (!region.contains(c)) res.pieces.push_back({box, std::nullopt, false});
    return;
  }
  const double xm = 0.5 * (box.x0 + box.x1);
  const double ym = 0.5 * (box.y0 + box.y1);
  clip_box({box.x0, xm, box.y0, ym}, region, depth + 1, max_depth, res);
  clip_box({xm, box.x1, box.y0, ym}, region, depth + 1, max_depth, res);
  clip_box({box.x0, xm, ym, box.y1}, region, depth + 1, max_depth, res);
  clip_box({xm, box.x1, ym, box.y1}, region, depth + 1, max_depth, res);
}

// Sub-boxes of `box` graded geometrically toward the point p.
void graded_partition(const Rect& box, Vec2 p, int levels, std::vector<Rect>& out) {
  if (levels <= 0 || !box.contains_closed(p)) {
    out.push_back(box);
    return;
  }
  const double xm = 0.5 * (box.x0 + box.x1);
  const double ym = 0.5 * (box.y0 + box.y1);
  graded_partition({box.x0, xm, box.y0, ym}, p, levels - 1, out);
  graded_partition({xm, box.x1, box.y0, ym}, p, levels - 1, out);
  graded_partition({box.x0, xm, ym, box.y1}, p, levels - 1, out);
  graded_partition({xm, box.x1, ym, box.y1}, p, levels - 1, out);
}

// Physical measure of a parametric straight segment.
double segment_length(const GeoMap& map, Vec2 a, Vec2 b) {
  const double len = (b - a).norm();
  if (!(len > 0)) return 0.0;
  const Vec2 t = (b - a) * (1.0 / len);
  const auto& g = gauss_legendre(kMeasureOrder);
  double s = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i)
    s += g.w[i] * len * map.eval(a + g.x[i] * (b - a)).jac.apply(t).norm();
  return s;
}

struct EdgeInfo {
  Vec2 a, b;           // parametric endpoints, increasing along the free coordinate
  Vec2 inward;         // inward normal of the unit square
  Vec2 outward_hat;    // outward normal of the unit square
};

EdgeInfo edge_info(const Rect& r, int side) {
  switch (side) {
    case kBottom: return {{r.x0, r.y0}, {r.x1, r.y0}, {0, 1}, {0, -1}};
    case kRight: return {{r.x1, r.y0}, {r.x1, r.y1}, {-1, 0}, {1, 0}};
    case kTop: return {{r.x0, r.y1}, {r.x1, r.y1}, {0, -1}, {0, 1}};
    default: return {{r.x0, r.y0}, {r.x0, r.y1}, {1, 0}, {-1, 0}};
  }
}

bool edge_on_side(const Rect& r, int side) {
  switch (side) {
    case kBottom: return r.y0 == 0.0;
    case kRight: return r.x1 == 1.0;
    case kTop: return r.y1 == 1.0;
    default: return r.x0 == 0.0;
  }
}

// Intervals of the edge (in the free coordinate) whose adjacent interior is outside D.
std::vector<std::pair<double, double>> free_intervals(const EdgeInfo& e, const TrimmedRegion& region) {
  const bool horizontal = e.a.y == e.b.y;
  const double s0 = horizontal ? e.a.x : e.a.y;
  const double s1 = horizontal ? e.b.x : e.b.y;
  const double fixed = horizontal ? e.a.y : e.a.x;
  auto point = [&](double s) { return horizontal ? Vec2{s, fixed} : Vec2{fixed, s}; };
  std::vector<double> br{s0, s1};
  auto add = [&](double s) {
    if (s > s0 && s < s1) br.push_back(s);
  };
  for (const auto& prim : region.primitives()) {
    std::visit(Overloaded{
                   [&](const Disk& d) {
                     const double off = fixed - (horizontal ? d.center.y : d.center.x);
                     if (std::abs(off) < d.radius) {
                       const double h = std::sqrt(d.radius * d.radius - off * off);
                       const double c = horizontal ? d.center.x : d.center.y;
                       add(c - h);
                       add(c + h);
                     }
                   },
                   [&](const HalfPlane& hp) {
                     // (point(s) - p) . n = 0 is affine in s.
                     const double f0 = (point(0.0) - hp.point).dot(hp.normal);
                     const double slope = horizontal ? hp.normal.x : hp.normal.y;
                     if (slope != 0.0) add(-f0 / slope);
                   },
                   [&](const Rect& r) {
                     add(horizontal ? r.x0 : r.y0);
                     add(horizontal ? r.x1 : r.y1);
                   },
               },
               prim);
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  std::vector<std::pair<double, double>> out;
  const double tau = 1e-9 * (s1 - s0);
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const Vec2 m = point(0.5 * (br[k] + br[k + 1])) + tau * e.inward;
    if (region.contains(m)) continue;
    if (!out.empty() && out.back().second == br[k]) {
      out.back().second = br[k + 1];
    } else {
      out.emplace_back(br[k], br[k + 1]);
    }
  }
  return out;
}

void add_boundary_point(QuadRule& q, const GeoMap& map, Vec2 xi, double param_weight, Vec2 tangent,
                        Vec2 normal_hat) {
  const MapEval m = map.eval(xi);
  const Mat2 jinv_t = m.jac.inverse().transpose();
  Vec2 n = jinv_t.apply(normal_hat);
  n = n * (1.0 / n.norm());
  q.points.push_back(xi);
  q.weights.push_back(param_weight * m.jac.apply(tangent).norm());
  q.normals.push_back(n);
}

}  // namespace

MapEval IdentityMap::eval(Vec2 xi) const {
  MapEval e;
  e.x = xi;
  e.jac.m = {{{1, 0}, {0, 1}}};
  return e;
}

MapEval AffineMap::eval(Vec2 xi) const {
  MapEval e;
  e.x = a_.apply(xi) + b_;
  e.jac = a_;
  return e;
}

PolarAnnulusMap::PolarAnnulusMap(Vec2 center, double r_inner, double r_outer, double phi_start,
                                 double phi_end)
    : c_(center), r0_(r_inner), r1_(r_outer), phi0_(phi_start), phi1_(phi_end) {
  if (!(r_inner > 0 && r_outer > r_inner)) throw InvalidInput("annulus radii must satisfy 0 < r_inner < r_outer");
  if (phi_end == phi_start) throw InvalidInput("annulus angular span must be nonzero");
}

MapEval PolarAnnulusMap::eval(Vec2 xi) const {
  const double rho = r0_ + (r1_ - r0_) * xi.y;
  const double drho = r1_ - r0_;
  const double th = phi0_ + (phi1_ - phi0_) * xi.x;
  const double dth = phi1_ - phi0_;
  const double c = std::cos(th);
  const double s = std::sin(th);
  MapEval e;
  e.x = c_ + rho * Vec2{c, s};
  e.jac.m = {{{-rho * dth * s, drho * c}, {rho * dth * c, drho * s}}};
  e.hess[0].m = {{{-rho * dth * dth * c, -drho * dth * s}, {-drho * dth * s, 0.0}}};
  e.hess[1].m = {{{-rho * dth * dth * s, drho * dth * c}, {drho * dth * c, 0.0}}};
  return e;
}

PointGeometry pullback(const GeoMap& map, Vec2 xi) {
  const MapEval m = map.eval(xi);
  const double det = m.jac.det();
  double scale = 0.0;
  for (const auto& row : m.jac.m)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (!(std::abs(det) > 1e-14 * scale * scale)) throw GeometryError("singular map Jacobian");
  PointGeometry pg;
  pg.x = m.x;
  const Mat2 jinv = m.jac.inverse();
  pg.jinv_t = jinv.transpose();
  pg.abs_det = std::abs(det);
  const Mat2 g = jinv * pg.jinv_t;
  pg.g00 = g.m[0][0];
  pg.g01 = g.m[0][1];
  pg.g11 = g.m[1][1];
  for (int k = 0; k < 2; ++k) {
    const Mat2& h = m.hess[k];
    const double v = g.m[0][0] * h.m[0][0] + 2.0 * g.m[0][1] * h.m[0][1] + g.m[1][1] * h.m[1][1];
    if (k == 0) pg.curv.x = v;
    else pg.curv.y = v;
  }
  return pg;
}

bool primitive_contains(const Primitive& p, Vec2 x) {
  return std::visit(Overloaded{
                        [&](const Disk& d) { return (x - d.center).norm() < d.radius; },
                        [&](const HalfPlane& h) { return (x - h.point).dot(h.normal) < 0.0; },
                        [&](const Rect& r) { return r.contains_open(x); },
                    },
                    p);
}

bool primitive_touches(const Primitive& p, const Rect& box) {
  return std::visit(
      Overloaded{
          [&](const Disk& d) {
            const double qx = std::clamp(d.center.x, box.x0, box.x1);
            const double qy = std::clamp(d.center.y, box.y0, box.y1);
            const double dmin = (Vec2{qx, qy} - d.center).norm();
            const double fx = std::max(std::abs(d.center.x - box.x0), std::abs(d.center.x - box.x1));
            const double fy = std::max(std::abs(d.center.y - box.y0), std::abs(d.center.y - box.y1));
            const double dmax = std::hypot(fx, fy);
            return dmin < d.radius && d.radius < dmax;
          },
          [&](const HalfPlane& h) {
            const Vec2 corners[4] = {{box.x0, box.y0}, {box.x1, box.y0}, {box.x1, box.y1}, {box.x0, box.y1}};
            double mn = std::numeric_limits<double>::infinity();
            double mx = -mn;
            int zeros = 0;
            for (const Vec2& c : corners) {
              const double v = (c - h.point).dot(h.normal);
              mn = std::min(mn, v);
              mx = std::max(mx, v);
              if (v == 0.0) ++zeros;
            }
            return (mn < 0.0 && mx > 0.0) || zeros >= 2;
          },
          [&](const Rect& r) {
            const bool yover = std::min(r.y1, box.y1) - std::max(r.y0, box.y0) > 0;
            const bool xover = std::min(r.x1, box.x1) - std::max(r.x0, box.x0) > 0;
            auto within = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
            return (yover && (within(r.x0, box.x0, box.x1) || within(r.x1, box.x0, box.x1))) ||
                   (xover && (within(r.y0, box.y0, box.y1) || within(r.y1, box.y0, box.y1)));
          },
      },
      p);
}

TrimmedRegion TrimmedRegion::of(Primitive p) {
  TrimmedRegion r;
  r.prims_.push_back(std::move(p));
  r.nodes_.push_back({Op::Leaf, 0, -1, -1});
  r.root_ = 0;
  return r;
}

TrimmedRegion TrimmedRegion::combine(const TrimmedRegion& a, const TrimmedRegion& b, Op op) {
  TrimmedRegion r = a;
  const int prim_off = static_cast<int>(r.prims_.size());
  const int node_off = static_cast<int>(r.nodes_.size());
  r.prims_.insert(r.prims_.end(), b.prims_.begin(), b.prims_.end());
  for (Node n : b.nodes_) {
    if (n.op == Op::Leaf) {
      n.prim += prim_off;
    } else {
      n.left += node_off;
      n.right += node_off;
    }
    r.nodes_.push_back(n);
  }
  r.nodes_.push_back({op, -1, a.root_, b.root_ + node_off});
  r.root_ = static_cast<int>(r.nodes_.size()) - 1;
  return r;
}

TrimmedRegion operator|(const TrimmedRegion& a, const TrimmedRegion& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return TrimmedRegion::combine(a, b, TrimmedRegion::Op::Union);
}

TrimmedRegion operator&(const TrimmedRegion& a, const TrimmedRegion& b) {
  if (a.empty() || b.empty()) return {};
  return TrimmedRegion::combine(a, b, TrimmedRegion::Op::Intersect);
}

TrimmedRegion operator-(const TrimmedRegion& a, const TrimmedRegion& b) {
  if (a.empty() || b.empty()) return a;
  return TrimmedRegion::combine(a, b, TrimmedRegion::Op::Difference);
}

bool TrimmedRegion::eval(Vec2 x, int forced, bool forced_value) const {
  if (root_ < 0) return false;
  return eval_node(root_, x, forced, forced_value);
}

bool TrimmedRegion::eval_node(int n, Vec2 x, int forced, bool forced_value) const {
  const Node& node = nodes_[n];
  switch (node.op) {
    case Op::Leaf:
      return node.prim == forced ? forced_value : primitive_contains(prims_[node.prim], x);
    case Op::Union:
      return eval_node(node.left, x, forced, forced_value) || eval_node(node.right, x, forced, forced_value);
    case Op::Intersect:
      return eval_node(node.left, x, forced, forced_value) && eval_node(node.right, x, forced, forced_value);
    case Op::Difference:
      return eval_node(node.left, x, forced, forced_value) && !eval_node(node.right, x, forced, forced_value);
  }
  return false;
}

const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Interior: return "interior";
    case CellStatus::Cut: return "cut";
    case CellStatus::Exterior: return "exterior";
  }
  return "?";
}

double GammaSegment::param_length() const {
  return kind == Kind::Line ? (b - a).norm() : radius * (theta1 - theta0);
}

double Classification::total_area() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.area;
  return s;
}

QuadRule piece_quadrature(const CellPiece& piece, int order) {
  if (order < 1) throw InvalidInput("quadrature order must be >= 1");
  QuadRule q;
  const Rect& box = piece.box;
  if (!piece.prim) {
    add_tensor(q, box, order);
    return q;
  }
  std::visit(Overloaded{
                 [&](const HalfPlane& hp) {
                   const std::vector<Vec2> poly{{box.x0, box.y0}, {box.x1, box.y0}, {box.x1, box.y1}, {box.x0, box.y1}};
                   add_polygon(q, clip_polygon(poly, hp.point, hp.normal, piece.keep_inside ? 1.0 : -1.0), order);
                 },
                 [&](const Rect& r) {
                   const double ix0 = std::clamp(r.x0, box.x0, box.x1);
                   const double ix1 = std::clamp(r.x1, box.x0, box.x1);
                   const double iy0 = std::clamp(r.y0, box.y0, box.y1);
                   const double iy1 = std::clamp(r.y1, box.y0, box.y1);
                   const bool meets = ix1 > ix0 && iy1 > iy0;
                   if (piece.keep_inside) {
                     if (meets) add_tensor(q, {ix0, ix1, iy0, iy1}, order);
                   } else if (!meets) {
                     add_tensor(q, box, order);
                   } else {
                     add_tensor(q, {box.x0, ix0, box.y0, box.y1}, order);
                     add_tensor(q, {ix1, box.x1, box.y0, box.y1}, order);
                     add_tensor(q, {ix0, ix1, box.y0, iy0}, order);
                     add_tensor(q, {ix0, ix1, iy1, box.y1}, order);
                   }
                 },
                 [&](const Disk& d) { add_disk_strips(q, box, d, piece.keep_inside, order); },
             },
             *piece.prim);
  return q;
}

QuadRule cell_quadrature(const CellGeometry& cell, const GeoMap& map, int order) {
  QuadRule q;
  if (cell.status == CellStatus::Exterior) return q;
  for (const auto& piece : cell.pieces) {
    QuadRule p = piece_quadrature(piece, order);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double det = std::abs(map.eval(p.points[k]).jac.det());
      p.weights[k] *= det;
    }
    q.append(p);
  }
  return q;
}

QuadRule gamma_quadrature(const CellGeometry& cell, const GeoMap& map, int order) {
  QuadRule q;
  const auto& g = gauss_legendre(order);
  const auto& gc = gauss_legendre(order + kCurvedExtra);
  for (const auto& s : cell.gamma) {
    if (s.kind == GammaSegment::Kind::Line) {
      const double len = (s.b - s.a).norm();
      const Vec2 t = (s.b - s.a) * (1.0 / len);
      // Geometric subintervals toward an end lying next to the singular point; the innermost one
      // uses u = s^3 measured from that end, which makes r^(-2/3) integrands smooth.
      struct Part {
        double u0, u1;
        int cubic_end;  // -1 none, 0 at u0, 1 at u1
      };
      std::vector<Part> parts{{0.0, 1.0, -1}};
      if (cell.singular) {
        const double da = (s.a - cell.grading_target).norm();
        const double db = (s.b - cell.grading_target).norm();
        if (std::min(da, db) < 1e-3 * len) {
          parts.clear();
          double lo = 0.0, hi = 1.0;
          for (int k = 0; k < kGammaGrading; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (da < db) {
              parts.push_back({mid, hi, -1});
              hi = mid;
            } else {
              parts.push_back({lo, mid, -1});
              lo = mid;
            }
          }
          parts.push_back({lo, hi, da < db ? 0 : 1});
        }
      }
      for (const Part& pt : parts)
        for (std::size_t i = 0; i < g.x.size(); ++i) {
          double u = pt.u0 + g.x[i] * (pt.u1 - pt.u0);
          double w = g.w[i] * (pt.u1 - pt.u0);
          if (pt.cubic_end >= 0) {
            const double sx = g.x[i];
            const double span = pt.u1 - pt.u0;
            u = pt.cubic_end == 0 ? pt.u0 + span * sx * sx * sx : pt.u1 - span * sx * sx * sx;
            w = g.w[i] * 3.0 * span * sx * sx;
          }
          add_boundary_point(q, map, s.a + u * (s.b - s.a), w * len, t, s.normal);
        }
    } else {
      const int pieces = std::max(1, static_cast<int>(std::ceil((s.theta1 - s.theta0) / kMaxArcStep)));
      const double dth = (s.theta1 - s.theta0) / pieces;
      for (int m = 0; m < pieces; ++m)
        for (std::size_t i = 0; i < gc.x.size(); ++i) {
          const double th = s.theta0 + (m + gc.x[i]) * dth;
          const Vec2 radial{std::cos(th), std::sin(th)};
          add_boundary_point(q, map, s.center + s.radius * radial, gc.w[i] * dth * s.radius,
                             {-radial.y, radial.x}, s.orientation * radial);
        }
    }
  }
  return q;
}

QuadRule face_quadrature(const BoundaryFace& face, const Rect& cell_rect, const GeoMap& map, int order) {
  QuadRule q;
  const EdgeInfo e = edge_info(cell_rect, face.side);
  const bool horizontal = e.a.y == e.b.y;
  const Vec2 t = horizontal ? Vec2{1, 0} : Vec2{0, 1};
  const auto& g = gauss_legendre(order);
  for (const auto& [s0, s1] : face.intervals) {
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      const double s = s0 + g.x[i] * (s1 - s0);
      const Vec2 xi = horizontal ? Vec2{s, e.a.y} : Vec2{e.a.x, s};
      add_boundary_point(q, map, xi, g.w[i] * (s1 - s0), t, e.outward_hat);
    }
  }
  return q;
}

double physical_diameter(const Rect& r, const GeoMap& map) {
  const double xm = 0.5 * (r.x0 + r.x1);
  const double ym = 0.5 * (r.y0 + r.y1);
  const Vec2 pts[8] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1},
                       {xm, r.y0},   {r.x1, ym},   {xm, r.y1},   {r.x0, ym}};
  Vec2 phys[8];
  for (int k = 0; k < 8; ++k) phys[k] = map(pts[k]);
  double h = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) h = std::max(h, (phys[a] - phys[b]).norm());
  return h;
}

CellGeometry classify_box(const Rect& rect, const TrimmedRegion& region, const GeoMap& map,
                          const ClassifyOptions& opts, std::vector<BoundaryFace>* faces, int cell_index) {
  CellGeometry g;
  g.rect = rect;
  g.h = physical_diameter(rect, map);

  std::vector<Rect> boxes{rect};
  for (const Vec2& p : opts.singular_points) {
    const Vec2 q{std::clamp(p.x, rect.x0, rect.x1), std::clamp(p.y, rect.y0, rect.y1)};
    if ((p - q).norm() > opts.grading_reach * std::min(rect.width(), rect.height())) continue;
    g.singular = true;
    g.grading_target = q;
    std::vector<Rect> next;
    for (const Rect& b : boxes) graded_partition(b, q, opts.grading_levels, next);
    boxes = std::move(next);
  }

  ClipResult clip;
  for (const Rect& b : boxes) clip_box(b, region, 0, opts.max_clip_depth, clip);
  g.flagged = clip.flagged;
  g.pieces = std::move(clip.pieces);
  g.gamma = std::move(clip.gamma);

  for (const auto& piece : g.pieces) g.param_area += piece_quadrature(piece, kMeasureOrder).total_weight();
  const double cell_param = rect.area();
  if (g.param_area < 1e-16 * cell_param) {
    g.status = CellStatus::Exterior;
    g.pieces.clear();
    g.gamma.clear();
  } else if (g.param_area >= cell_param * (1.0 - 1e-13)) {
    g.status = CellStatus::Interior;
    g.param_area = cell_param;
    g.pieces.clear();
    for (const Rect& b : boxes) g.pieces.push_back({b, std::nullopt, false});
  } else {
    g.status = CellStatus::Cut;
  }

  CellGeometry full = g;
  full.status = CellStatus::Interior;
  full.pieces = {{rect, std::nullopt, false}};
  g.full_area = cell_quadrature(full, map, kMeasureOrder).total_weight();
  g.area = g.status == CellStatus::Interior ? g.full_area
                                             : cell_quadrature(g, map, kMeasureOrder).total_weight();

  for (int side = 0; side < 4; ++side) {
    if (!edge_on_side(rect, side)) continue;
    const EdgeInfo e = edge_info(rect, side);
    auto intervals = free_intervals(e, region);
    const double s0 = side == kBottom || side == kTop ? rect.x0 : rect.y0;
    const double s1 = side == kBottom || side == kTop ? rect.x1 : rect.y1;
    if (opts.dirichlet[side]) {
      if (intervals.size() != 1 || intervals[0].first != s0 || intervals[0].second != s1)
        throw GeometryError("Dirichlet boundary meets the trimmed region");
      continue;
    }
    if (g.status == CellStatus::Exterior || intervals.empty() || faces == nullptr) continue;
    BoundaryFace f;
    f.cell = cell_index;
    f.side = side;
    f.length = segment_length(map, e.a, e.b);
    const bool horizontal = side == kBottom || side == kTop;
    for (const auto& [a, b] : intervals) {
      const Vec2 pa = horizontal ? Vec2{a, e.a.y} : Vec2{e.a.x, a};
      const Vec2 pb = horizontal ? Vec2{b, e.a.y} : Vec2{e.a.x, b};
      f.neumann_length += segment_length(map, pa, pb);
    }
    f.intervals = std::move(intervals);
    g.faces.push_back(static_cast<int>(faces->size()));
    faces->push_back(std::move(f));
  }
  return g;
}

Classification classify_cells(const HierarchicalSpace& hs, const TrimmedRegion& region, const GeoMap& map,
                              const ClassifyOptions& opts) {
  Classification out;
  const auto& cells = hs.active_cells();
  out.cells.reserve(cells.size());
  for (int k = 0; k < static_cast<int>(cells.size()); ++k)
    out.cells.push_back(classify_box(hs.cell_rect(cells[k]), region, map, opts, &out.faces, k));
  return out;
}

}  // namespace tiga
