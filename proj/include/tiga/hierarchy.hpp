#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tiga/splines.hpp"

namespace tiga {

/// Cell of a hierarchical level, addressed by integer grid coordinates.
struct CellId {
  int level = 0;
  int i = 0;
  int j = 0;

  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(level) << 58) | (static_cast<std::uint64_t>(i) << 29) |
           static_cast<std::uint64_t>(j);
  }
  CellId parent() const { return {level - 1, i / 2, j / 2}; }
  CellId ancestor(int k) const {
    const int shift = level - k;
    return {k, i >> shift, j >> shift};
  }
  auto operator<=>(const CellId&) const = default;
};

/// B-spline of a given level, addressed by its tensor index.
struct FunctionId {
  int level = 0;
  int a = 0;
  int b = 0;
  auto operator<=>(const FunctionId&) const = default;
};

enum class BasisKind { HB, THB };

/// Nested subdomains of the parametric square stored as the set of subdivided cells per level.
/// The subdomain of level l+1 is the union of the level-l cells in `refined(l)`.
class DomainHierarchy {
 public:
  DomainHierarchy() = default;
  DomainHierarchy(int cells_x, int cells_y) : nx0_(cells_x), ny0_(cells_y) {}

  int cells_x(int level) const { return nx0_ << level; }
  int cells_y(int level) const { return ny0_ << level; }
  bool valid_cell(CellId c) const {
    return c.level >= 0 && c.i >= 0 && c.j >= 0 && c.i < cells_x(c.level) && c.j < cells_y(c.level);
  }
  bool is_refined(CellId c) const;
  /// True when the cell lies inside the subdomain of its own level.
  bool in_domain(CellId c) const { return c.level == 0 || is_refined(c.parent()); }
  bool is_active(CellId c) const { return in_domain(c) && !is_refined(c); }
  void subdivide(CellId c);
  /// Number of levels that own at least one active cell.
  int depth() const;
  const std::vector<std::unordered_set<std::uint64_t>>& refined_sets() const { return refined_; }
  /// Throws InvalidInput unless every subdivided cell of level l >= 1 lies in a subdivided parent.
  void validate() const;

 private:
  int nx0_ = 0;
  int ny0_ = 0;
  std::vector<std::unordered_set<std::uint64_t>> refined_;
};

/// Tensor spaces and two-scale tables of all levels; grows on demand and is shared between
/// copies of a space.
class LevelStack {
 public:
  LevelStack(KnotVector u0, KnotVector v0);
  const TensorSpace& level(int l);
  /// Two-scale table from level l to level l+1 in direction d.
  const TwoScale& transition(int l, int d);
  int degree(int d) const { return spaces_.front().dirs[d].degree(); }

 private:
  void grow_to(int l);
  std::deque<TensorSpace> spaces_;
  std::deque<std::array<TwoScale, 2>> transitions_;
};

/// Expansion of the hierarchical functions that are nonzero on one active cell in terms of the
/// tensor B-splines of the cell's level. coeffs is row-major: dofs.size() x local_size, and local
/// B-spline (a, b) of the cell (i, j) has index (b - j) * (p0 + 1) + (a - i).
struct CellBasis {
  std::vector<int> dofs;
  std::vector<double> coeffs;
};

/// Values and parametric derivatives of the hierarchical functions nonzero at a point.
struct HierEval {
  std::span<const int> dofs;
  std::vector<double> value;
  std::vector<double> dx, dy;
  std::vector<double> dxx, dxy, dyy;
};

struct AdmissibilityReport {
  bool admissible = true;
  std::vector<CellId> violating;
};

/// Hierarchical B-spline space (HB or THB) on the unit square.
class HierarchicalSpace {
 public:
  /// Builds the space on the given hierarchy; throws InvalidInput for non-nested hierarchies.
  static HierarchicalSpace build(const KnotVector& u0, const KnotVector& v0, DomainHierarchy hierarchy,
                                 BasisKind kind, int mu);
  /// Unrefined single-level space.
  static HierarchicalSpace build(const KnotVector& u0, const KnotVector& v0, BasisKind kind, int mu);

  BasisKind kind() const { return kind_; }
  int mu() const { return mu_; }
  int degree(int d) const { return degree_[d]; }
  int num_levels() const { return hierarchy_.depth(); }
  const DomainHierarchy& hierarchy() const { return hierarchy_; }
  const TensorSpace& level(int l) const { return levels_->level(l); }
  Rect cell_rect(CellId c) const { return level(c.level).cell_rect({c.i, c.j}); }

  const std::vector<CellId>& active_cells() const { return cells_; }
  /// Index into active_cells(), or -1 if the cell is not active.
  int cell_index(CellId c) const;
  const std::vector<FunctionId>& functions() const { return functions_; }
  int num_functions() const { return static_cast<int>(functions_.size()); }
  const CellBasis& cell_basis(int cell) const { return cell_bases_[cell]; }
  /// Active cells on which function `f` does not vanish identically.
  const std::vector<int>& function_cells(int f) const { return function_cells_[f]; }

  /// Active cell whose closure contains x (left-limit convention at the upper ends).
  int locate(Vec2 x) const;
  void eval_in_cell(int cell, Vec2 x, int max_deriv, HierEval& out) const;
  HierEval eval(Vec2 x, int max_deriv) const;

  Rect multilevel_support_extension(CellId cell, int k) const;
  /// Active cells of level lev(cell)-mu+1 meeting the support extension of the level
  /// lev(cell)-mu+2 ancestor; empty when that level is negative.
  std::vector<CellId> neighborhood(CellId cell, int mu) const;

  /// Subdivides every marked active cell after recursively refining its neighborhood.
  HierarchicalSpace refine(std::span<const CellId> marked) const;
  /// Levels of the truncated functions nonzero on each active cell span at most mu levels.
  AdmissibilityReport check_admissibility() const;

  /// Same hierarchy with a different basis kind.
  HierarchicalSpace with_kind(BasisKind kind) const;

 private:
  HierarchicalSpace(std::shared_ptr<LevelStack> levels, DomainHierarchy hierarchy, BasisKind kind, int mu);
  void rebuild();

  std::shared_ptr<LevelStack> levels_;
  DomainHierarchy hierarchy_;
  BasisKind kind_ = BasisKind::THB;
  int mu_ = 2;
  std::array<int, 2> degree_{};

  std::vector<CellId> cells_;
  std::unordered_map<std::uint64_t, int> cell_lookup_;
  std::vector<FunctionId> functions_;
  std::vector<CellBasis> cell_bases_;
  std::vector<std::vector<int>> function_cells_;
};

}  // namespace tiga
