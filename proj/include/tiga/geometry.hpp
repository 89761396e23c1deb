#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tiga/common.hpp"
#include "tiga/quadrature.hpp"

namespace tiga {

class HierarchicalSpace;

/// Value, Jacobian and component Hessians of a map at a parametric point.
struct MapEval {
  Vec2 x;
  Mat2 jac;
  std::array<Mat2, 2> hess;  ///< hess[k] is the Hessian of the k-th component
};

class GeoMap {
 public:
  virtual ~GeoMap() = default;
  virtual MapEval eval(Vec2 xi) const = 0;
  virtual std::string name() const = 0;
  Vec2 operator()(Vec2 xi) const { return eval(xi).x; }
};

class IdentityMap final : public GeoMap {
 public:
  MapEval eval(Vec2 xi) const override;
  std::string name() const override { return "identity"; }
};

/// x = A xi + b.
class AffineMap final : public GeoMap {
 public:
  AffineMap(Mat2 a, Vec2 b) : a_(a), b_(b) {}
  MapEval eval(Vec2 xi) const override;
  std::string name() const override { return "affine"; }

 private:
  Mat2 a_;
  Vec2 b_;
};

/// x = c + rho(eta) (cos theta(xi), sin theta(xi)) with rho and theta affine in the parameters.
class PolarAnnulusMap final : public GeoMap {
 public:
  PolarAnnulusMap(Vec2 center, double r_inner, double r_outer, double phi_start, double phi_end);
  MapEval eval(Vec2 xi) const override;
  std::string name() const override { return "polar-annulus"; }
  Vec2 center() const { return c_; }

 private:
  Vec2 c_;
  double r0_, r1_, phi0_, phi1_;
};

/// Pullback data of a map at one point. The map may reverse orientation; measures use |det J|.
struct PointGeometry {
  Vec2 x;
  Mat2 jinv_t;         ///< J^{-T}
  double abs_det = 0;  ///< |det J|
  double g00 = 0, g01 = 0, g11 = 0;  ///< entries of J^{-1} J^{-T}
  Vec2 curv;           ///< v_k = (J^{-1} J^{-T}) : Hess F_k

  Vec2 gradient(Vec2 grad_hat) const { return jinv_t.apply(grad_hat); }
  /// Physical Laplacian from parametric first and second derivatives.
  double laplacian(Vec2 grad_hat, double hxx, double hxy, double hyy) const {
    return g00 * hxx + 2.0 * g01 * hxy + g11 * hyy - curv.dot(gradient(grad_hat));
  }
};

/// Throws GeometryError when the Jacobian is singular.
PointGeometry pullback(const GeoMap& map, Vec2 xi);

struct Disk {
  Vec2 center;
  double radius = 0;
};

/// Open half-plane {(x - point) . normal < 0}; `normal` is its outward unit normal.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;
};

using Primitive = std::variant<Disk, HalfPlane, Rect>;

/// Open membership of a primitive.
bool primitive_contains(const Primitive& p, Vec2 x);
/// True when the primitive's boundary crosses the open box or covers part of the box boundary
/// with positive length.
bool primitive_touches(const Primitive& p, const Rect& box);

/// Open parametric region D removed from the unit square, as a boolean tree over primitives.
class TrimmedRegion {
 public:
  TrimmedRegion() = default;
  static TrimmedRegion of(Primitive p);

  friend TrimmedRegion operator|(const TrimmedRegion& a, const TrimmedRegion& b);
  friend TrimmedRegion operator&(const TrimmedRegion& a, const TrimmedRegion& b);
  friend TrimmedRegion operator-(const TrimmedRegion& a, const TrimmedRegion& b);

  bool empty() const { return root_ < 0; }
  const std::vector<Primitive>& primitives() const { return prims_; }
  /// x in D.
  bool contains(Vec2 x) const { return eval(x, -1, false); }
  /// Membership of D with primitive `forced` replaced by the constant `forced_value`.
  bool eval(Vec2 x, int forced, bool forced_value) const;

 private:
  enum class Op { Leaf, Union, Intersect, Difference };
  struct Node {
    Op op = Op::Leaf;
    int prim = -1;
    int left = -1;
    int right = -1;
  };
  static TrimmedRegion combine(const TrimmedRegion& a, const TrimmedRegion& b, Op op);
  bool eval_node(int n, Vec2 x, int forced, bool forced_value) const;

  std::vector<Primitive> prims_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

enum class CellStatus { Interior, Cut, Exterior };
const char* to_string(CellStatus s);

/// A parametric box kept whole (no primitive) or restricted to the inside or outside of one
/// primitive.
struct CellPiece {
  Rect box;
  std::optional<Primitive> prim;
  bool keep_inside = false;
};

/// Part of the trimming curve inside a cell. Lines carry the parametric outward normal of the
/// trimmed domain; arcs carry the sign of the radial direction that points out of it.
struct GammaSegment {
  enum class Kind { Line, Arc };
  Kind kind = Kind::Line;
  Vec2 a, b;
  Vec2 normal;
  Vec2 center;
  double radius = 0;
  double theta0 = 0, theta1 = 0;
  double orientation = 1;
  double param_length() const;
};

enum Side { kBottom = 0, kRight = 1, kTop = 2, kLeft = 3 };

/// Cell edge on a Neumann side of the unit square.
struct BoundaryFace {
  int cell = -1;
  int side = 0;
  double length = 0;          ///< physical |F|
  double neumann_length = 0;  ///< physical |F cap Gamma_N|
  /// Parametric intervals along the edge (x for bottom/top, y for left/right) not covered by D.
  std::vector<std::pair<double, double>> intervals;
  bool full() const { return intervals.size() == 1 && neumann_length >= length * (1 - 1e-12); }
};

struct CellGeometry {
  CellStatus status = CellStatus::Interior;
  Rect rect;
  double param_area = 0;  ///< |K^ cap Omega^|
  double area = 0;        ///< physical |K cap Omega|
  double full_area = 0;   ///< physical |K|
  double h = 0;           ///< physical diameter
  std::vector<CellPiece> pieces;
  std::vector<GammaSegment> gamma;
  std::vector<int> faces;
  bool flagged = false;   ///< coincident or unresolved trimming boundary
  bool singular = false;  ///< quadrature graded toward a singular point
  Vec2 grading_target;    ///< point of the closed cell nearest to that singular point
};

struct ClassifyOptions {
  std::array<bool, 4> dirichlet{};  ///< indexed by Side
  std::vector<Vec2> singular_points;
  /// Cells closer to a singular point than this fraction of their shorter side are graded too.
  double grading_reach = 0.5;
  int grading_levels = 10;
  int max_clip_depth = 16;
};

struct Classification {
  std::vector<CellGeometry> cells;
  std::vector<BoundaryFace> faces;
  double total_area() const;
};

/// Classifies one parametric cell. `cell_index` is stored in the faces it creates.
CellGeometry classify_box(const Rect& rect, const TrimmedRegion& region, const GeoMap& map,
                          const ClassifyOptions& opts, std::vector<BoundaryFace>* faces = nullptr,
                          int cell_index = -1);

/// Classifies all active cells of a hierarchical space. Throws GeometryError when a Dirichlet
/// side meets the trimmed region.
Classification classify_cells(const HierarchicalSpace& hs, const TrimmedRegion& region,
                              const GeoMap& map, const ClassifyOptions& opts);

/// Rule on one piece with parametric weights; `order` Gauss points per direction, more along
/// curved edges.
QuadRule piece_quadrature(const CellPiece& piece, int order);

/// Rule on K cap Omega with physical weights; empty for exterior cells.
QuadRule cell_quadrature(const CellGeometry& cell, const GeoMap& map, int order);

/// Rule on gamma_K with physical weights and outward unit normals.
QuadRule gamma_quadrature(const CellGeometry& cell, const GeoMap& map, int order);

/// Rule on F cap Gamma_N with physical weights and outward unit normals.
QuadRule face_quadrature(const BoundaryFace& face, const Rect& cell_rect, const GeoMap& map,
                         int order);

/// Physical diameter estimate from the mapped corners and edge midpoints.
double physical_diameter(const Rect& rect, const GeoMap& map);

}  // namespace tiga
