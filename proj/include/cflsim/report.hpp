#pragma once

// Proposed-vs-random comparisons over seed batches and text summaries of run
// directories.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cflsim/config.hpp"

namespace cflsim {

struct RunSummary {
  std::uint64_t seed = 0;
  std::string policy;
  std::optional<int> first_split_round;
  std::optional<double> first_split_time;
  int final_clusters = 1;
  double rand_index = 0.0;  // final partition vs ground truth
  double mean_max_acc = 0.0;
  double mean_feel_acc = 0.0;
  int rounds = 0;
  double clock = 0.0;
  std::string stop_reason;
};

// Reads back the CSVs and manifest of one run directory.
RunSummary summarize_run(const std::filesystem::path& dir);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * stderr
  std::size_t n = 0;
};

Interval mean_ci(const std::vector<double>& values);

// Writes <out>/<policy>_seed<S>/ for both policies and every seed, then
// comparison.csv (one row per run), comparison_summary.csv and curves.csv.
// Runs up to `jobs` experiments at once.
std::vector<RunSummary> compare(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out, int jobs = 1);

// Accuracy tables (models x clients plus a Max Acc row) for run directories;
// a comparison directory expands to its runs followed by the summary.
std::string render_report(const std::vector<std::filesystem::path>& dirs);

}  // namespace cflsim
