#include "tiga/hierarchy.hpp"

#include <algorithm>
#include <sstream>

namespace tiga {

namespace {

using Row = std::vector<std::pair<int, double>>;

std::uint64_t fn_key(int a, int b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

// Sums duplicate entries; entries are products and sums of positive two-scale coefficients, so
// the result never cancels to zero.
void compress(Row& row) {
  std::sort(row.begin(), row.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  std::size_t out = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (out > 0 && row[out - 1].first == row[k].first) {
      row[out - 1].second += row[k].second;
    } else {
      row[out++] = row[k];
    }
  }
  row.resize(out);
}

std::vector<CellId> neighborhood_of(const DomainHierarchy& h, std::array<int, 2> degree, CellId cell,
                                    int mu) {
  if (mu < 2) throw InvalidInput("admissibility class must be >= 2");
  const int target = cell.level - mu + 1;
  if (target < 0) return {};
  // Support extension of the level target+1 ancestor covers its cells c-p..c+p per direction.
  const CellId anc = cell.ancestor(target + 1);
  const int nx = h.cells_x(target + 1);
  const int ny = h.cells_y(target + 1);
  const int ilo = std::max(0, anc.i - degree[0]) / 2;
  const int ihi = std::min(nx - 1, anc.i + degree[0]) / 2;
  const int jlo = std::max(0, anc.j - degree[1]) / 2;
  const int jhi = std::min(ny - 1, anc.j + degree[1]) / 2;
  std::vector<CellId> out;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = ilo; i <= ihi; ++i) {
      const CellId c{target, i, j};
      if (h.is_active(c)) out.push_back(c);
    }
  return out;
}

}  // namespace

bool DomainHierarchy::is_refined(CellId c) const {
  if (c.level < 0 || c.level >= static_cast<int>(refined_.size())) return false;
  return refined_[c.level].count(c.key()) > 0;
}

void DomainHierarchy::subdivide(CellId c) {
  if (!valid_cell(c)) throw InvalidInput("subdivide: invalid cell");
  if (static_cast<int>(refined_.size()) <= c.level) refined_.resize(c.level + 1);
  refined_[c.level].insert(c.key());
}

int DomainHierarchy::depth() const {
  for (int l = static_cast<int>(refined_.size()) - 1; l >= 0; --l)
    if (!refined_[l].empty()) return l + 2;
  return 1;
}

void DomainHierarchy::validate() const {
  for (std::size_t l = 0; l < refined_.size(); ++l) {
    for (std::uint64_t key : refined_[l]) {
      const CellId c{static_cast<int>(key >> 58), static_cast<int>((key >> 29) & ((1u << 29) - 1)),
                     static_cast<int>(key & ((1u << 29) - 1))};
      if (!valid_cell(c)) throw InvalidInput("hierarchy contains a cell outside the grid");
      if (l > 0 && !is_refined(c.parent())) {
        std::ostringstream msg;
        msg << "hierarchy not nested: cell (" << l << "," << c.i << "," << c.j
            << ") refined without its parent";
        throw InvalidInput(msg.str());
      }
    }
  }
}

LevelStack::LevelStack(KnotVector u0, KnotVector v0) {
  spaces_.push_back(TensorSpace{{std::move(u0), std::move(v0)}, 0});
}

void LevelStack::grow_to(int l) {
  while (static_cast<int>(spaces_.size()) <= l) {
    const TensorSpace& last = spaces_.back();
    std::array<TwoScale, 2> ts{dyadic_refine(last.dirs[0]), dyadic_refine(last.dirs[1])};
    TensorSpace next{{ts[0].fine, ts[1].fine}, last.level + 1};
    transitions_.push_back(std::move(ts));
    spaces_.push_back(std::move(next));
  }
}

const TensorSpace& LevelStack::level(int l) {
  if (l >= static_cast<int>(spaces_.size())) grow_to(l);
  return spaces_[l];
}

const TwoScale& LevelStack::transition(int l, int d) {
  if (l + 1 >= static_cast<int>(spaces_.size())) grow_to(l + 1);
  return transitions_[l][d];
}

HierarchicalSpace::HierarchicalSpace(std::shared_ptr<LevelStack> levels, DomainHierarchy hierarchy,
                                     BasisKind kind, int mu)
    : levels_(std::move(levels)), hierarchy_(std::move(hierarchy)), kind_(kind), mu_(mu) {
  degree_ = {levels_->degree(0), levels_->degree(1)};
}

HierarchicalSpace HierarchicalSpace::build(const KnotVector& u0, const KnotVector& v0,
                                           DomainHierarchy hierarchy, BasisKind kind, int mu) {
  if (mu < 2) throw InvalidInput("admissibility class must be >= 2");
  if (hierarchy.cells_x(0) != u0.num_cells() || hierarchy.cells_y(0) != v0.num_cells())
    throw InvalidInput("hierarchy grid does not match the level-0 knot vectors");
  hierarchy.validate();
  HierarchicalSpace hs(std::make_shared<LevelStack>(u0, v0), std::move(hierarchy), kind, mu);
  hs.rebuild();
  return hs;
}

HierarchicalSpace HierarchicalSpace::build(const KnotVector& u0, const KnotVector& v0, BasisKind kind,
                                           int mu) {
  return build(u0, v0, DomainHierarchy(u0.num_cells(), v0.num_cells()), kind, mu);
}

HierarchicalSpace HierarchicalSpace::with_kind(BasisKind kind) const {
  HierarchicalSpace hs(levels_, hierarchy_, kind, mu_);
  hs.rebuild();
  return hs;
}

int HierarchicalSpace::cell_index(CellId c) const {
  const auto it = cell_lookup_.find(c.key());
  return it == cell_lookup_.end() ? -1 : it->second;
}

void HierarchicalSpace::rebuild() {
  const int depth = hierarchy_.depth();
  levels_->level(depth);  // materialize every level used by queries

  // Active cells.
  cells_.clear();
  std::vector<CellId> stack;
  for (int j = 0; j < hierarchy_.cells_y(0); ++j)
    for (int i = 0; i < hierarchy_.cells_x(0); ++i) stack.push_back({0, i, j});
  while (!stack.empty()) {
    const CellId c = stack.back();
    stack.pop_back();
    if (hierarchy_.is_refined(c)) {
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) stack.push_back({c.level + 1, 2 * c.i + di, 2 * c.j + dj});
    } else {
      cells_.push_back(c);
    }
  }
  std::sort(cells_.begin(), cells_.end());
  cell_lookup_.clear();
  for (int k = 0; k < static_cast<int>(cells_.size()); ++k) cell_lookup_[cells_[k].key()] = k;

  const int p0 = degree_[0];
  const int p1 = degree_[1];

  auto support_in_domain = [&](int l, int a, int b) {
    const TensorSpace& ts = levels_->level(l);
    const auto [i0, i1] = ts.dirs[0].support_cells(a);
    const auto [j0, j1] = ts.dirs[1].support_cells(b);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        if (!hierarchy_.in_domain({l, i, j})) return false;
    return true;
  };

  // Active functions: cover an active cell of their level and have support inside that level's
  // subdomain.
  functions_.clear();
  std::vector<std::unordered_map<std::uint64_t, int>> fn_index(depth);
  {
    auto cell_it = cells_.begin();
    for (int l = 0; l < depth; ++l) {
      std::vector<std::pair<int, int>> cand;
      for (; cell_it != cells_.end() && cell_it->level == l; ++cell_it)
        for (int b = cell_it->j; b <= cell_it->j + p1; ++b)
          for (int a = cell_it->i; a <= cell_it->i + p0; ++a) cand.emplace_back(b, a);
      std::sort(cand.begin(), cand.end());
      cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
      for (const auto& [b, a] : cand) {
        if (!support_in_domain(l, a, b)) continue;
        fn_index[l][fn_key(a, b)] = static_cast<int>(functions_.size());
        functions_.push_back({l, a, b});
      }
    }
  }

  // Level-by-level expansion of every active function in the B-splines touching the subdomain.
  cell_bases_.assign(cells_.size(), {});
  std::unordered_map<std::uint64_t, Row> prev_rows;
  std::unordered_map<std::uint64_t, Row> rows;
  auto cell_it = cells_.begin();
  for (int l = 0; l < depth; ++l) {
    const TensorSpace& ts = levels_->level(l);
    rows.clear();
    std::vector<std::pair<int, int>> cand;
    if (l == 0) {
      for (int b = 0; b < ts.num_functions(1); ++b)
        for (int a = 0; a < ts.num_functions(0); ++a) cand.emplace_back(a, b);
    } else {
      for (std::uint64_t key : hierarchy_.refined_sets()[l - 1]) {
        const int pi = static_cast<int>((key >> 29) & ((1u << 29) - 1));
        const int pj = static_cast<int>(key & ((1u << 29) - 1));
        for (int cj = 2 * pj; cj <= 2 * pj + 1; ++cj)
          for (int ci = 2 * pi; ci <= 2 * pi + 1; ++ci)
            for (int b = cj; b <= cj + p1; ++b)
              for (int a = ci; a <= ci + p0; ++a) cand.emplace_back(a, b);
      }
      std::sort(cand.begin(), cand.end());
      cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    }
    const auto& active_here = fn_index[l];
    for (const auto& [a, b] : cand) {
      Row row;
      const bool truncated = kind_ == BasisKind::THB && l > 0 && support_in_domain(l, a, b);
      if (l > 0 && !truncated) {
        const auto& tx = levels_->transition(l - 1, 0).fine_to_coarse[a];
        const auto& ty = levels_->transition(l - 1, 1).fine_to_coarse[b];
        for (const auto& [cb, wy] : ty)
          for (const auto& [ca, wx] : tx) {
            const auto it = prev_rows.find(fn_key(ca, cb));
            if (it == prev_rows.end()) continue;
            for (const auto& [dof, c] : it->second) row.emplace_back(dof, c * wx * wy);
          }
      }
      if (const auto it = active_here.find(fn_key(a, b)); it != active_here.end())
        row.emplace_back(it->second, 1.0);
      compress(row);
      if (!row.empty()) rows.emplace(fn_key(a, b), std::move(row));
    }

    const int nloc = (p0 + 1) * (p1 + 1);
    for (; cell_it != cells_.end() && cell_it->level == l; ++cell_it) {
      const int cidx = static_cast<int>(cell_it - cells_.begin());
      CellBasis& cb = cell_bases_[cidx];
      std::vector<std::tuple<int, int, double>> entries;
      for (int b = cell_it->j; b <= cell_it->j + p1; ++b)
        for (int a = cell_it->i; a <= cell_it->i + p0; ++a) {
          const auto it = rows.find(fn_key(a, b));
          if (it == rows.end()) continue;
          const int loc = (b - cell_it->j) * (p0 + 1) + (a - cell_it->i);
          for (const auto& [dof, c] : it->second) entries.emplace_back(dof, loc, c);
        }
      for (const auto& e : entries) cb.dofs.push_back(std::get<0>(e));
      std::sort(cb.dofs.begin(), cb.dofs.end());
      cb.dofs.erase(std::unique(cb.dofs.begin(), cb.dofs.end()), cb.dofs.end());
      cb.coeffs.assign(cb.dofs.size() * nloc, 0.0);
      for (const auto& [dof, loc, c] : entries) {
        const auto pos = std::lower_bound(cb.dofs.begin(), cb.dofs.end(), dof) - cb.dofs.begin();
        cb.coeffs[pos * nloc + loc] += c;
      }
    }
    std::swap(prev_rows, rows);
  }

  function_cells_.assign(functions_.size(), {});
  for (int c = 0; c < static_cast<int>(cells_.size()); ++c)
    for (int dof : cell_bases_[c].dofs) function_cells_[dof].push_back(c);
}

int HierarchicalSpace::locate(Vec2 x) const {
  if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0))
    throw DomainError("point outside the parametric square");
  const TensorSpace& l0 = level(0);
  CellId c{0, l0.dirs[0].find_cell(x.x), l0.dirs[1].find_cell(x.y)};
  while (hierarchy_.is_refined(c)) {
    const TensorSpace& next = level(c.level + 1);
    int i = next.dirs[0].find_cell(x.x);
    int j = next.dirs[1].find_cell(x.y);
    // Stay inside the children of c even when x sits on a shared knot.
    i = std::clamp(i, 2 * c.i, 2 * c.i + 1);
    j = std::clamp(j, 2 * c.j, 2 * c.j + 1);
    c = {c.level + 1, i, j};
  }
  return cell_index(c);
}

void HierarchicalSpace::eval_in_cell(int cell, Vec2 x, int max_deriv, HierEval& out) const {
  const CellId c = cells_[cell];
  const TensorSpace& ts = level(c.level);
  BasisValues1D bx;
  BasisValues1D by;
  eval_basis_in_cell(ts.dirs[0], c.i, x.x, max_deriv, bx);
  eval_basis_in_cell(ts.dirs[1], c.j, x.y, max_deriv, by);
  const int p0 = degree_[0];
  const int p1 = degree_[1];
  const int nloc = (p0 + 1) * (p1 + 1);

  double loc[6][64];
  for (int b = 0; b <= p1; ++b)
    for (int a = 0; a <= p0; ++a) {
      const int k = b * (p0 + 1) + a;
      loc[0][k] = bx.ders[0][a] * by.ders[0][b];
      if (max_deriv >= 1) {
        loc[1][k] = bx.ders[1][a] * by.ders[0][b];
        loc[2][k] = bx.ders[0][a] * by.ders[1][b];
      }
      if (max_deriv >= 2) {
        loc[3][k] = bx.ders[2][a] * by.ders[0][b];
        loc[4][k] = bx.ders[1][a] * by.ders[1][b];
        loc[5][k] = bx.ders[0][a] * by.ders[2][b];
      }
    }

  const CellBasis& cb = cell_bases_[cell];
  const std::size_t n = cb.dofs.size();
  out.dofs = cb.dofs;
  std::vector<double>* targets[6] = {&out.value, &out.dx, &out.dy, &out.dxx, &out.dxy, &out.dyy};
  const int nders = max_deriv == 0 ? 1 : (max_deriv == 1 ? 3 : 6);
  for (int d = 0; d < nders; ++d) targets[d]->assign(n, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    const double* row = &cb.coeffs[f * nloc];
    for (int d = 0; d < nders; ++d) {
      double s = 0.0;
      for (int k = 0; k < nloc; ++k) s += row[k] * loc[d][k];
      (*targets[d])[f] = s;
    }
  }
}

HierEval HierarchicalSpace::eval(Vec2 x, int max_deriv) const {
  if (max_deriv < 0 || max_deriv > 2) throw InvalidInput("max_deriv must be 0, 1 or 2");
  HierEval out;
  eval_in_cell(locate(x), x, max_deriv, out);
  return out;
}

Rect HierarchicalSpace::multilevel_support_extension(CellId cell, int k) const {
  if (k < 0 || k > cell.level) throw InvalidInput("support extension level exceeds the cell level");
  const CellId anc = cell.ancestor(k);
  return level(k).support_extension({anc.i, anc.j});
}

std::vector<CellId> HierarchicalSpace::neighborhood(CellId cell, int mu) const {
  return neighborhood_of(hierarchy_, degree_, cell, mu);
}

HierarchicalSpace HierarchicalSpace::refine(std::span<const CellId> marked) const {
  DomainHierarchy h = hierarchy_;

  struct Frame {
    CellId cell;
    std::vector<CellId> neighbors;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  for (const CellId& m : marked) {
    if (!h.is_active(m)) continue;
    stack.push_back({m, neighborhood_of(h, degree_, m, mu_)});
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next < top.neighbors.size()) {
        const CellId n = top.neighbors[top.next++];
        stack.push_back({n, neighborhood_of(h, degree_, n, mu_)});
        continue;
      }
      const CellId c = top.cell;
      stack.pop_back();
      if (h.is_active(c)) h.subdivide(c);
    }
  }

  HierarchicalSpace out(levels_, std::move(h), kind_, mu_);
  out.rebuild();
  return out;
}

AdmissibilityReport HierarchicalSpace::check_admissibility() const {
  if (kind_ != BasisKind::THB) return with_kind(BasisKind::THB).check_admissibility();
  AdmissibilityReport report;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    int lo = 1 << 20;
    int hi = -1;
    for (int dof : cell_bases_[c].dofs) {
      lo = std::min(lo, functions_[dof].level);
      hi = std::max(hi, functions_[dof].level);
    }
    if (hi >= 0 && hi - lo + 1 > mu_) {
      report.admissible = false;
      report.violating.push_back(cells_[c]);
    }
  }
  return report;
}

}  // namespace tiga
