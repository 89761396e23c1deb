#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tiga/adapt.hpp"

namespace tiga {

/// Manufactured solution in physical coordinates; f = -lap u.
struct ExactSolution {
  std::function<double(Vec2)> u;
  std::function<Vec2(Vec2)> grad;
  std::function<double(Vec2)> f;
};

/// Resolved settings of one benchmark.
struct BenchmarkCase {
  std::string id;
  int degree = 2;
  double theta = 0.9;
  std::vector<double> epsilons{0.0};  ///< knot-line shifts; one run per entry
  RefineMode mode = RefineMode::Adaptive;
  int mu = 2;
  int max_dof = 10000;
  int max_levels = 1000;
  int max_iterations = 100;
  std::string solver = "cg";
  BasisKind basis = BasisKind::THB;
  int order = 0;  ///< Gauss points per direction for assembly; 0 selects degree + 1
  TrimmingWeight trimming = TrimmingWeight::Diameter;
  std::string map_id = "identity";
  std::array<bool, 4> dirichlet{};
};

const std::vector<std::string>& case_ids();

/// Defaults of a known case; throws InvalidInput otherwise.
BenchmarkCase default_case(const std::string& id);

/// Throws InvalidInput for settings the solver cannot honour (degree < 2, theta outside (0, 1], ...).
void validate(const BenchmarkCase& bc);

/// Resolved settings in configuration-file syntax.
std::string describe(const BenchmarkCase& bc);

ExactSolution exact_solution(const std::string& id);
TrimmedRegion case_region(const std::string& id);
std::shared_ptr<const GeoMap> case_map(const std::string& map_id);
/// Interior knot lines of the initial 4 x 4 mesh for a given shift.
std::array<std::vector<double>, 2> initial_breakpoints(const std::string& id, double eps);

/// Everything needed to run one benchmark for a given shift.
struct CaseInstance {
  HierarchicalSpace initial;
  AdaptiveProblem problem;
  ExactSolution exact;
  AdaptOptions options;
};

CaseInstance instantiate(const BenchmarkCase& bc, double eps);

/// ||grad(u - u_h)|| over the trimmed domain; `order` 0 selects degree + 3.
double energy_error(const HierarchicalSpace& hs, const std::vector<double>& coeffs, const Classification& cl,
                    const GeoMap& map, const std::function<Vec2(Vec2)>& grad_u, int order = 0);

std::vector<IterationRecord> run_case(const BenchmarkCase& bc, double eps, const IterationHook& hook = {});

/// Configuration file errors; `key()` names the offending entry.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& what, std::string key) : InvalidInput(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Parses `key = value` lines under a `[case]` header. `id` selects the defaults the other keys
/// override.
BenchmarkCase parse_config(std::istream& in);
BenchmarkCase parse_config_file(const std::string& path);

void write_csv(std::ostream& out, const std::vector<IterationRecord>& records);
/// Active cells drawn in physical coordinates, shaded by status, with the trimming curve.
void write_mesh_svg(std::ostream& out, const HierarchicalSpace& hs, const Classification& cl, const GeoMap& map);
/// One row per active cell: level, parametric box, status, E_K^2 and its three parts.
void write_cells_csv(std::ostream& out, const HierarchicalSpace& hs, const Classification& cl,
                     const EstimatorBreakdown& est);

/// Least-squares slope of log(value) against log(n_dof) over the last max(3, ceil(n/2)) records.
double fit_slope(const std::vector<IterationRecord>& records, double IterationRecord::*field);
/// Mean effectivity over the last three records.
double asymptotic_effectivity(const std::vector<IterationRecord>& records);

}  // namespace tiga
