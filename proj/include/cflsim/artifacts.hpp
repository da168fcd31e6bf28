#pragma once

// Run directory layout:
//   config.txt      rendered config
//   rounds.csv      one row per executed round
//   clusters.csv    one row per (round, cluster)
//   splits.csv      one row per cluster whose split gate passed
//   schedule.csv    one row per (round, selected client)
//   accuracy.csv    final (client, model) accuracies plus max_acc rows
//   partition.csv   final cluster and ground-truth latent id per client
//   models/*.bin    final FEEL and cluster models
//   manifest.json   seed, config hash, kernel variant, stop reason, file hashes;
//                   "complete" stays false until every file is written
//   data/           per-client CSVs, only with export_data

#include <cstdint>
#include <filesystem>
#include <string>

#include "cflsim/config.hpp"
#include "cflsim/csv.hpp"
#include "cflsim/engine.hpp"

namespace cflsim {

CsvWriter rounds_csv(const ExperimentTrace& trace);
CsvWriter clusters_csv(const ExperimentTrace& trace);
CsvWriter splits_csv(const ExperimentTrace& trace);
CsvWriter schedule_csv(const ExperimentTrace& trace, Policy policy);
CsvWriter accuracy_csv(const AccuracyTable& table);
CsvWriter partition_csv(const SimulationContext& ctx, const ExperimentState& state);

std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t file_hash(const std::filesystem::path& path);

// Runs one experiment and writes its run directory (created if needed).
ExperimentResult simulate_to_dir(const ExperimentConfig& config, const std::filesystem::path& dir,
                                 bool export_data = false);

}  // namespace cflsim
