#pragma once

// Round loop of latency-aware clustered federated learning: schedule, train,
// simulate uploads, aggregate per cluster, split, track convergence.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cflsim/clusterer.hpp"
#include "cflsim/config.hpp"
#include "cflsim/dataset.hpp"
#include "cflsim/learner.hpp"
#include "cflsim/radio.hpp"
#include "cflsim/scheduler.hpp"

namespace cflsim {

enum class StopReason { running, converged, max_rounds, budget, non_finite, unreachable };

std::string_view stop_reason_name(StopReason r);

// Immutable inputs of one experiment.
struct SimulationContext {
  ExperimentConfig config;
  FederatedDataset data;
  std::vector<ClientProfile> profiles;
  ModelShape shape;
  double model_bits = 0.0;

  static SimulationContext build(const ExperimentConfig& config);
};

struct Evidence {
  int round = 0;
  std::vector<double> delta;
  int num_samples = 1;
};

struct ExperimentState {
  int round = 0;  // rounds executed so far
  double clock = 0.0;
  ClusterTree tree;
  std::map<int, ModelParams> cluster_models;
  ModelParams root;
  std::map<int, Evidence> evidence;              // latest aggregated update per client
  std::map<int, std::vector<double>> loss_history;  // per cluster, one entry per round it trained
  StopReason stop = StopReason::running;

  static ExperimentState initial(const SimulationContext& ctx);
  void check_invariants() const;
};

struct RoundRecord {
  int round = 0;
  double clock_start = 0.0;
  double deadline = 0.0;
  double wall_clock = 0.0;  // what the clock advanced by
  double clock_end = 0.0;
  int clusters = 0;
  int selected = 0;
  int aggregated = 0;
  int dropped = 0;
  int splits = 0;
  double root_loss = 0.0;  // weighted mean pre-training loss of aggregated clients
};

struct ClusterRecord {
  int round = 0;
  int cluster_id = 0;
  int size = 0;
  int selected = 0;
  int aggregated = 0;
  double mean_norm = 0.0;
  double max_norm = 0.0;
  double loss = 0.0;
  bool eligible = false;
  bool converged = false;
};

struct ScheduleRow {
  int round = 0;
  int client_id = 0;
  int rank = 0;
  int group = 0;
  int cluster_id = 0;
  double est_total = 0.0;
  double actual_finish = 0.0;
  bool dropped = false;
};

struct RoundResult {
  ExperimentState state;
  RoundRecord record;
  std::vector<ClusterRecord> clusters;
  std::vector<ScheduleRow> schedule;
  std::vector<SplitDecision> decisions;  // clusters whose gate passed
  bool executed = false;                 // false when the round was not started
  std::string error;
};

// One round. Does not start it (executed = false, stop = budget or
// unreachable) when it cannot fit in the remaining time budget. Numerical
// failure sets stop = non_finite and leaves models as they were.
RoundResult run_round(const SimulationContext& ctx, const ExperimentState& state);

struct AccuracyEntry {
  int client_id = 0;
  std::string model;  // "feel" or "cluster_<id>"
  bool member = false;
  double accuracy = 0.0;
};

struct AccuracyTable {
  std::vector<int> clients;
  std::vector<std::string> models;  // "feel" first, then clusters by id
  std::vector<AccuracyEntry> entries;  // client-major, models in `models` order
  std::vector<double> max_acc;         // per client, best cluster model
  std::vector<double> feel_acc;        // per client

  double at(int client_id, std::string_view model) const;
};

AccuracyTable final_evaluation(const SimulationContext& ctx, const ExperimentState& state);

struct ExperimentTrace {
  std::vector<RoundRecord> rounds;
  std::vector<ClusterRecord> clusters;
  std::vector<ScheduleRow> schedule;
  std::vector<SplitDecision> splits;
  AccuracyTable accuracy;
  StopReason stop = StopReason::running;
  int failed_round = 0;
  std::string error;

  // First accepted split, if any.
  std::optional<int> first_split_round() const;
  std::optional<double> first_split_time() const;
};

struct ExperimentResult {
  ExperimentState state;
  ExperimentTrace trace;
};

ExperimentResult run_experiment(const SimulationContext& ctx);
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace cflsim
