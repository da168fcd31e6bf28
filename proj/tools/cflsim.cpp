// cflsim: simulate | compare | report

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cflsim/artifacts.hpp"
#include "cflsim/config.hpp"
#include "cflsim/report.hpp"

namespace fs = std::filesystem;
using namespace cflsim;

namespace {

fs::path output_root() {
  const char* env = std::getenv("CFLSIM_OUT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

// "3", "1..5"
std::vector<std::uint64_t> expand_seeds(const std::vector<std::string>& args) {
  std::vector<std::uint64_t> out;
  for (const auto& a : args) {
    const auto dots = a.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(std::stoull(a));
        continue;
      }
      const auto lo = std::stoull(a.substr(0, dots));
      const auto hi = std::stoull(a.substr(dots + 2));
      if (hi < lo) throw std::invalid_argument("empty range");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad seed '" + a + "' (expected N or A..B)");
    }
  }
  return out;
}

ExperimentConfig config_from(const std::string& path) {
  return path.empty() ? parse_config("") : load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered federated learning over a simulated wireless edge network"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool export_data = false;
  auto* simulate = app.add_subcommand("simulate", "Run one experiment into a run directory");
  simulate->add_option("--config", config_path, "Config file (flat key: value)");
  auto* seed_opt = simulate->add_option("--seed", seed, "Master seed (overrides the config)");
  simulate->add_option("--out", out_dir, "Run directory");
  simulate->add_flag("--export-data", export_data, "Also write per-client dataset CSVs");

  std::vector<std::string> seed_args{"1..5"};
  int jobs = 1;
  auto* cmp = app.add_subcommand("compare", "Proposed vs random scheduling over several seeds");
  cmp->add_option("--config", config_path, "Config file (flat key: value)");
  cmp->add_option("--seeds", seed_args, "Seeds, e.g. 1 2 3 or 1..5")->expected(1, -1);
  cmp->add_option("--out", out_dir, "Comparison directory");
  cmp->add_option("--jobs", jobs, "Experiments run at once")->check(CLI::PositiveNumber);

  std::vector<std::string> runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Summarise run or comparison directories");
  report->add_option("--runs", runs, "Run or comparison directories")->required()->expected(1, -1);
  report->add_option("--output", report_out, "Also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) {
      auto config = config_from(config_path);
      if (*seed_opt) config.seed = seed;
      fs::path dir = !out_dir.empty()        ? fs::path(out_dir)
                     : !config.out.empty()   ? fs::path(config.out)
                                             : output_root() / fmt::format("run_seed{}", config.seed);
      config.out = dir.string();
      const auto result = simulate_to_dir(config, dir, export_data);
      const auto& t = result.trace;
      fmt::print("{}: {} rounds, {:.6g} s simulated, {} clusters, stop {}\n", dir.string(),
                 t.rounds.size(), t.rounds.empty() ? 0.0 : t.rounds.back().clock_end,
                 result.state.tree.size(), stop_reason_name(t.stop));
      return t.stop == StopReason::non_finite ? 1 : 0;
    }
    if (*cmp) {
      const auto config = config_from(config_path);
      const fs::path dir = out_dir.empty() ? output_root() / "compare" : fs::path(out_dir);
      const auto summaries = compare(config, expand_seeds(seed_args), dir, jobs);
      fmt::print("{}: {} runs, comparison.csv written\n", dir.string(), summaries.size());
      return 0;
    }
    if (*report) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      const auto text = render_report(dirs);
      std::cout << text;
      if (!report_out.empty()) {
        std::ofstream f(report_out);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + report_out);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "cflsim: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
