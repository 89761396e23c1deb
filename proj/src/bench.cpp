#include "tiga/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tiga {

namespace {

constexpr double kPi = std::numbers::pi;

// r^(2/3) sin(2 phi / 3) around `corner`, with the angle unwrapped onto (-pi/4, 7pi/4) so the cut
// runs through the removed quadrant.
ExactSolution corner_solution(Vec2 corner) {
  auto polar = [corner](Vec2 x) {
    const Vec2 d = x - corner;
    double phi = std::atan2(d.y, d.x);
    if (phi < -0.25 * kPi) phi += 2 * kPi;
    return std::pair{d.norm(), phi};
  };
  ExactSolution s;
  s.u = [polar](Vec2 x) {
    const auto [r, phi] = polar(x);
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * phi / 3.0);
  };
  s.grad = [polar](Vec2 x) {
    const auto [r, phi] = polar(x);
    if (r == 0) return Vec2{};
    const double c = (2.0 / 3.0) * std::pow(r, -1.0 / 3.0);
    return Vec2{-c * std::sin(phi / 3.0), c * std::cos(phi / 3.0)};
  };
  s.f = [](Vec2) { return 0.0; };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int out = 0;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("invalid integer for '" + key + "': " + v, key);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("invalid number for '" + key + "': " + v, key);
  return out;
}

}  // namespace

const std::vector<std::string>& case_ids() {
  static const std::vector<std::string> ids{"two-disks", "pentagon", "lshape", "lshape-mapped"};
  return ids;
}

BenchmarkCase default_case(const std::string& id) {
  BenchmarkCase bc;
  bc.id = id;
  if (id == "two-disks") {
    bc.degree = 2;
    bc.theta = 0.8;
    bc.dirichlet[kBottom] = true;
  } else if (id == "pentagon") {
    bc.degree = 3;
    bc.theta = 0.9;
    bc.epsilons = {1e-5, 1e-6, 1e-7};
    bc.dirichlet[kBottom] = bc.dirichlet[kRight] = true;
  } else if (id == "lshape" || id == "lshape-mapped") {
    bc.degree = id == "lshape" ? 2 : 3;
    bc.theta = 0.9;
    bc.epsilons = {1e-5, 1e-6, 1e-7};
    bc.max_levels = 12;
    bc.dirichlet[kTop] = bc.dirichlet[kLeft] = true;
    if (id == "lshape-mapped") bc.map_id = "polar-annulus";
  } else {
    throw InvalidInput("unknown case id '" + id + "'");
  }
  bc.mu = bc.degree;
  return bc;
}

void validate(const BenchmarkCase& bc) {
  default_case(bc.id);
  if (bc.degree < 2) throw InvalidInput("degree must be at least 2");
  if (!(bc.theta > 0 && bc.theta <= 1)) throw InvalidInput("theta must lie in (0, 1]");
  if (bc.mu < 2) throw InvalidInput("mu must be at least 2");
  if (bc.epsilons.empty()) throw InvalidInput("epsilon list is empty");
  for (double e : bc.epsilons)
    if (!(e >= 0 && e < 0.125)) throw InvalidInput("epsilon must lie in [0, 1/8)");
  if (bc.max_dof < 1 || bc.max_levels < 1 || bc.max_iterations < 1) throw InvalidInput("budgets must be positive");
  if (bc.solver != "cg" && bc.solver != "direct") throw InvalidInput("solver must be cg or direct");
  if (bc.map_id != "identity" && bc.map_id != "polar-annulus") throw InvalidInput("unknown map '" + bc.map_id + "'");
}

std::string describe(const BenchmarkCase& bc) {
  static const char* side_names[4] = {"bottom", "right", "top", "left"};
  std::ostringstream os;
  os << "[case]\n";
  os << "id = " << bc.id << "\n";
  os << "degree = " << bc.degree << "\n";
  os << "theta = " << fmt(bc.theta) << "\n";
  os << "epsilon = ";
  for (std::size_t k = 0; k < bc.epsilons.size(); ++k) os << (k ? ", " : "") << fmt(bc.epsilons[k]);
  os << "\n";
  os << "mode = " << (bc.mode == RefineMode::Uniform ? "uniform" : "adaptive") << "\n";
  os << "mu = " << bc.mu << "\n";
  os << "max_dof = " << bc.max_dof << "\n";
  os << "max_levels = " << bc.max_levels << "\n";
  os << "max_iterations = " << bc.max_iterations << "\n";
  os << "solver = " << bc.solver << "\n";
  os << "basis = " << (bc.basis == BasisKind::HB ? "hb" : "thb") << "\n";
  os << "order = " << bc.order << "\n";
  os << "trimming_weight = " << (bc.trimming == TrimmingWeight::Diameter ? "diameter" : "delta") << "\n";
  os << "# map: " << bc.map_id << "\n";
  os << "# dirichlet sides:";
  for (int s = 0; s < 4; ++s)
    if (bc.dirichlet[s]) os << " " << side_names[s];
  os << "\n";
  return os.str();
}

ExactSolution exact_solution(const std::string& id) {
  ExactSolution s;
  if (id == "two-disks") {
    s.u = [](Vec2 x) { return std::sin(3 * kPi * x.x) + std::cos(5 * kPi * x.y); };
    s.grad = [](Vec2 x) {
      return Vec2{3 * kPi * std::cos(3 * kPi * x.x), -5 * kPi * std::sin(5 * kPi * x.y)};
    };
    s.f = [](Vec2 x) {
      return 9 * kPi * kPi * std::sin(3 * kPi * x.x) + 25 * kPi * kPi * std::cos(5 * kPi * x.y);
    };
  } else if (id == "pentagon") {
    s.u = [](Vec2 x) { return std::atan(15 * (x.x - x.y + 0.25)); };
    s.grad = [](Vec2 x) {
      const double t = 15 * (x.x - x.y + 0.25);
      const double d = 15 / (1 + t * t);
      return Vec2{d, -d};
    };
    s.f = [](Vec2 x) {
      const double t = 15 * (x.x - x.y + 0.25);
      return 900 * t / ((1 + t * t) * (1 + t * t));
    };
  } else if (id == "lshape") {
    s = corner_solution({0.5, 0.5});
  } else if (id == "lshape-mapped") {
    // The image of the parametric corner (1/2, 1/2).
    s = corner_solution({0.0, 0.0});
  } else {
    throw InvalidInput("unknown case id '" + id + "'");
  }
  return s;
}

TrimmedRegion case_region(const std::string& id) {
  if (id == "two-disks")
    return TrimmedRegion::of(Disk{{0.25, 0.25}, 0.1}) | TrimmedRegion::of(Disk{{0.75, 0.75}, 0.1});
  if (id == "pentagon") {
    const double n = 1.0 / std::sqrt(2.0);
    return TrimmedRegion::of(HalfPlane{{0.0, 0.25}, {n, -n}});
  }
  if (id == "lshape" || id == "lshape-mapped") return TrimmedRegion::of(Rect{0.5, 1.0, 0.0, 0.5});
  throw InvalidInput("unknown case id '" + id + "'");
}

std::shared_ptr<const GeoMap> case_map(const std::string& map_id) {
  if (map_id == "identity") return std::make_shared<IdentityMap>();
  if (map_id == "polar-annulus")
    return std::make_shared<PolarAnnulusMap>(Vec2{2.0, 0.0}, 1.0, 3.0, 7 * kPi / 8, 9 * kPi / 8);
  throw InvalidInput("unknown map '" + map_id + "'");
}

std::array<std::vector<double>, 2> initial_breakpoints(const std::string& id, double eps) {
  double sx = 0, sy = 0;
  if (id == "pentagon") {
    sx = eps;
    sy = -eps;
  } else if (id == "lshape" || id == "lshape-mapped") {
    sx = -eps;
    sy = eps;
  }
  std::array<std::vector<double>, 2> br;
  for (int k = 0; k <= 4; ++k) {
    const bool inner = k > 0 && k < 4;
    br[0].push_back(k / 4.0 + (inner ? sx : 0.0));
    br[1].push_back(k / 4.0 + (inner ? sy : 0.0));
  }
  return br;
}

CaseInstance instantiate(const BenchmarkCase& bc, double eps) {
  validate(bc);
  const auto br = initial_breakpoints(bc.id, eps);
  CaseInstance ci{HierarchicalSpace::build(KnotVector::from_breakpoints(bc.degree, br[0]),
                                           KnotVector::from_breakpoints(bc.degree, br[1]), bc.basis, bc.mu),
                  {}, exact_solution(bc.id), {}};
  ci.problem.map = case_map(bc.map_id);
  ci.problem.region = case_region(bc.id);
  ci.problem.problem.f = ci.exact.f;
  const auto grad = ci.exact.grad;
  ci.problem.problem.neumann = [grad](Vec2 x, Vec2 n) { return grad(x).dot(n); };
  ci.problem.problem.dirichlet_value = ci.exact.u;
  ci.problem.problem.dirichlet = bc.dirichlet;
  ci.problem.classify.dirichlet = bc.dirichlet;
  if (bc.id == "lshape" || bc.id == "lshape-mapped") ci.problem.classify.singular_points = {{0.5, 0.5}};
  const auto map = ci.problem.map;
  ci.problem.energy_error = [map, grad](const HierarchicalSpace& hs, const std::vector<double>& coeffs,
                                        const Classification& cl) {
    return energy_error(hs, coeffs, cl, *map, grad);
  };
  ci.options.mode = bc.mode;
  ci.options.theta = bc.theta;
  ci.options.max_dof = bc.max_dof;
  ci.options.max_levels = bc.max_levels;
  ci.options.max_iterations = bc.max_iterations;
  ci.options.solver.method = bc.solver;
  ci.options.order = bc.order;
  ci.options.trimming = bc.trimming;
  return ci;
}

double energy_error(const HierarchicalSpace& hs, const std::vector<double>& coeffs, const Classification& cl,
                    const GeoMap& map, const std::function<Vec2(Vec2)>& grad_u, int order) {
  if (order <= 0) order = std::max(hs.degree(0), hs.degree(1)) + 3;
  HierEval buf;
  double sum = 0.0;
  for (int c = 0; c < static_cast<int>(cl.cells.size()); ++c) {
    if (cl.cells[c].status == CellStatus::Exterior) continue;
    const QuadRule q = cell_quadrature(cl.cells[c], map, order);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const PointGeometry pg = pullback(map, q.points[k]);
      const SolutionEval s = eval_solution_in_cell(hs, coeffs, pg, c, q.points[k], 1, buf);
      const Vec2 d = grad_u(pg.x) - s.grad;
      sum += q.weights[k] * d.dot(d);
    }
  }
  return std::sqrt(sum);
}

std::vector<IterationRecord> run_case(const BenchmarkCase& bc, double eps, const IterationHook& hook) {
  const CaseInstance ci = instantiate(bc, eps);
  std::vector<IterationRecord> records;
  adapt_loop(ci.initial, ci.problem, ci.options, records, hook);
  return records;
}

BenchmarkCase parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  bool in_case = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[case]") throw ConfigError("unknown section " + line, line);
      in_case = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value", trim(line));
    const std::string key = trim(line.substr(0, eq));
    if (!in_case) throw ConfigError("key '" + key + "' outside the [case] section", key);
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  static const std::vector<std::string> known{"id",         "degree",     "theta",          "epsilon",
                                              "mode",       "mu",         "max_dof",        "max_levels",
                                              "max_iterations", "solver", "basis",          "order",
                                              "trimming_weight"};
  std::string id;
  for (const auto& [k, v] : entries) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown key '" + k + "'", k);
    if (k == "id") id = v;
  }
  if (id.empty()) throw ConfigError("missing key 'id'", "id");
  BenchmarkCase bc;
  try {
    bc = default_case(id);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what(), "id");
  }
  bool mu_set = false;
  for (const auto& [k, v] : entries) {
    if (k == "degree") bc.degree = parse_int(k, v);
    else if (k == "theta") bc.theta = parse_double(k, v);
    else if (k == "epsilon") {
      bc.epsilons.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) bc.epsilons.push_back(parse_double(k, trim(item)));
    } else if (k == "mode") {
      if (v == "uniform") bc.mode = RefineMode::Uniform;
      else if (v == "adaptive") bc.mode = RefineMode::Adaptive;
      else throw ConfigError("mode must be uniform or adaptive", k);
    } else if (k == "mu") {
      bc.mu = parse_int(k, v);
      mu_set = true;
    } else if (k == "max_dof") bc.max_dof = parse_int(k, v);
    else if (k == "max_levels") bc.max_levels = parse_int(k, v);
    else if (k == "max_iterations") bc.max_iterations = parse_int(k, v);
    else if (k == "solver") bc.solver = v;
    else if (k == "basis") {
      if (v == "hb" || v == "HB") bc.basis = BasisKind::HB;
      else if (v == "thb" || v == "THB") bc.basis = BasisKind::THB;
      else throw ConfigError("basis must be hb or thb", k);
    } else if (k == "order") bc.order = parse_int(k, v);
    else if (k == "trimming_weight") {
      if (v == "diameter") bc.trimming = TrimmingWeight::Diameter;
      else if (v == "delta") bc.trimming = TrimmingWeight::Scaling;
      else throw ConfigError("trimming_weight must be diameter or delta", k);
    }
  }
  if (!mu_set) bc.mu = bc.degree;
  try {
    validate(bc);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what(), "");
  }
  return bc;
}

BenchmarkCase parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return parse_config(in);
}

void write_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
  out << "iter,n_dof,n_levels,energy_error,estimator,effectivity,n_marked\n";
  for (const auto& r : records)
    out << r.iter << ',' << r.n_dof << ',' << r.n_levels << ',' << fmt(r.energy_error) << ',' << fmt(r.estimator)
        << ',' << fmt(r.effectivity) << ',' << r.n_marked << '\n';
}

void write_mesh_svg(std::ostream& out, const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map) {
  constexpr int kSub = 6;
  std::vector<std::vector<Vec2>> polys;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const CellId& c : hs.active_cells()) {
    const Rect r = hs.cell_rect(c);
    const Vec2 corners[5] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}, {r.x0, r.y0}};
    std::vector<Vec2> poly;
    for (int e = 0; e < 4; ++e)
      for (int s = 0; s < kSub; ++s) {
        const double t = static_cast<double>(s) / kSub;
        const Vec2 x = map(corners[e] * (1 - t) + corners[e + 1] * t);
        xmin = std::min(xmin, x.x);
        xmax = std::max(xmax, x.x);
        ymin = std::min(ymin, x.y);
        ymax = std::max(ymax, x.y);
        poly.push_back(x);
      }
    polys.push_back(std::move(poly));
  }
  const double size = 800.0;
  const double scale = size / std::max(xmax - xmin, ymax - ymin);
  auto px = [&](Vec2 x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f,%.3f", (x.x - xmin) * scale + 10, (ymax - x.y) * scale + 10);
    return std::string(buf);
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt((xmax - xmin) * scale + 20) << "\" height=\""
      << fmt((ymax - ymin) * scale + 20) << "\">\n";
  for (std::size_t c = 0; c < polys.size(); ++c) {
    const char* fill = cl.cells[c].status == CellStatus::Interior ? "#dce9f5"
                       : cl.cells[c].status == CellStatus::Cut    ? "#f5d6a8"
                                                                  : "#e6e6e6";
    out << "<polygon fill=\"" << fill << "\" stroke=\"#333\" stroke-width=\"0.5\" points=\"";
    for (const Vec2& v : polys[c]) out << px(v) << ' ';
    out << "\"/>\n";
  }
  for (const auto& cg : cl.cells)
    for (const auto& g : cg.gamma) {
      out << "<polyline fill=\"none\" stroke=\"#c00\" stroke-width=\"1.5\" points=\"";
      for (int s = 0; s <= 16; ++s) {
        const double t = s / 16.0;
        Vec2 xi;
        if (g.kind == GammaSegment::Kind::Line) {
          xi = g.a * (1 - t) + g.b * t;
        } else {
          const double th = g.theta0 + t * (g.theta1 - g.theta0);
          xi = g.center + Vec2{std::cos(th), std::sin(th)} * g.radius;
        }
        out << px(map(xi)) << ' ';
      }
      out << "\"/>\n";
    }
  out << "</svg>\n";
}

void write_cells_csv(std::ostream& out, const HierarchicalSpace& hs, const Classification& cl,
                     const EstimatorBreakdown& est) {
  out << "level,x0,x1,y0,y1,status,e2,interior,neumann,trimming\n";
  for (std::size_t c = 0; c < cl.cells.size(); ++c) {
    const Rect r = cl.cells[c].rect;
    const CellEstimate& e = est.cells[c];
    out << hs.active_cells()[c].level << ',' << fmt(r.x0) << ',' << fmt(r.x1) << ',' << fmt(r.y0) << ','
        << fmt(r.y1) << ',' << to_string(cl.cells[c].status) << ',' << fmt(e.total()) << ',' << fmt(e.interior)
        << ',' << fmt(e.neumann) << ',' << fmt(e.trimming) << '\n';
  }
}

double fit_slope(const std::vector<IterationRecord>& records, double IterationRecord::*field) {
  const int n = static_cast<int>(records.size());
  const int m = std::min(n, std::max(3, (n + 1) / 2));
  if (m < 2) return std::nan("");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = n - m; k < n; ++k) {
    const double x = std::log(static_cast<double>(records[k].n_dof));
    const double y = std::log(records[k].*field);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0) return std::nan("");
  return (m * sxy - sx * sy) / den;
}

double asymptotic_effectivity(const std::vector<IterationRecord>& records) {
  const int n = static_cast<int>(records.size());
  if (n == 0) return std::nan("");
  const int m = std::min(n, 3);
  double s = 0;
  for (int k = n - m; k < n; ++k) s += records[k].effectivity;
  return s / m;
}

}  // namespace tiga
