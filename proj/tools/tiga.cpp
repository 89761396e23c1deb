#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tiga/bench.hpp"
#include "tiga/verify.hpp"

namespace fs = std::filesystem;

namespace {

std::string run_name(const tiga::BenchmarkCase& bc, double eps) {
  std::string name = bc.id + (bc.mode == tiga::RefineMode::Uniform ? "-uniform" : "-adaptive");
  if (bc.epsilons.size() > 1 || eps != 0.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "-eps%g", eps);
    name += buf;
  }
  return name;
}

int run(const std::string& config, const std::string& out_dir, bool dump_mesh, bool dump_cells) {
  const tiga::BenchmarkCase bc = tiga::parse_config_file(config);
  fs::create_directories(out_dir);
  int status = 0;
  for (double eps : bc.epsilons) {
    const std::string name = run_name(bc, eps);
    const fs::path dump_dir = fs::path(out_dir) / name;
    if (dump_mesh || dump_cells) fs::create_directories(dump_dir);
    const auto map = tiga::case_map(bc.map_id);
    tiga::IterationHook hook = [&](const tiga::IterationRecord& r, const tiga::HierarchicalSpace& hs,
                                   const tiga::Classification& cl, const tiga::EstimatorBreakdown& est) {
      std::printf("%-28s iter %3d  ndof %6d  levels %2d  error %.6e  estimator %.6e  eff %.4f  (%.1f s)\n",
                  name.c_str(), r.iter, r.n_dof, r.n_levels, r.energy_error, r.estimator, r.effectivity, r.seconds);
      std::fflush(stdout);
      const std::string k = std::to_string(r.iter);
      if (dump_mesh) {
        std::ofstream svg(dump_dir / ("mesh_iter_" + k + ".svg"));
        tiga::write_mesh_svg(svg, hs, cl, *map);
      }
      if (dump_cells) {
        std::ofstream cells(dump_dir / ("cells_iter_" + k + ".csv"));
        tiga::write_cells_csv(cells, hs, cl, est);
      }
    };
    const tiga::CaseInstance ci = tiga::instantiate(bc, eps);
    std::vector<tiga::IterationRecord> records;
    try {
      tiga::adapt_loop(ci.initial, ci.problem, ci.options, records, hook);
    } catch (const tiga::SolverError& e) {
      std::cerr << name << ": " << e.what() << " (partial results kept)\n";
      status = 1;
    }
    const fs::path csv_path = fs::path(out_dir) / (name + ".csv");
    std::ofstream csv(csv_path);
    tiga::write_csv(csv, records);
    std::printf("%s: slope(error) %.3f  slope(estimator) %.3f  asymptotic effectivity %.3f  -> %s\n", name.c_str(),
                tiga::fit_slope(records, &tiga::IterationRecord::energy_error),
                tiga::fit_slope(records, &tiga::IterationRecord::estimator), tiga::asymptotic_effectivity(records),
                csv_path.string().c_str());
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive trimmed isogeometric Poisson solver"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a benchmark from a configuration file");
  std::string config, out_dir = ".";
  bool dump_mesh = false, dump_cells = false;
  run_cmd->add_option("--config", config, "Configuration file")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--dump-mesh", dump_mesh, "Write mesh_iter_<k>.svg per iteration");
  run_cmd->add_flag("--dump-cells", dump_cells, "Write per-cell estimator CSV per iteration");

  auto* verify_cmd = app.add_subcommand("verify", "Run the property suites");

  auto* case_cmd = app.add_subcommand("case", "Show the defaults of a benchmark case");
  std::string case_id;
  bool print = false;
  case_cmd->add_option("--id", case_id, "Case id")->required();
  case_cmd->add_flag("--print", print, "Print the resolved settings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config, out_dir, dump_mesh, dump_cells);
    if (*verify_cmd) {
      const auto results = tiga::verify::run_all(&std::cout);
      for (const auto& r : results)
        if (!r.passed) return 1;
      return 0;
    }
    if (*case_cmd) {
      const auto bc = tiga::default_case(case_id);
      if (print) std::cout << tiga::describe(bc);
      return 0;
    }
  } catch (const tiga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tiga::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
