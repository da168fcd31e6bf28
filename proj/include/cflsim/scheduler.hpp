#pragma once

// Per-round client selection and upload timing on N shared sub-channels.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cflsim/radio.hpp"

namespace cflsim {

// full schedules every active client every round.
enum class Policy { proposed, random, full };

Policy parse_policy(std::string_view name);
std::string_view policy_name(Policy p);

struct LatencyEntry {
  int client_id = 0;
  Latency estimate;
};

// Ascending estimated total latency, ties by client id.
std::vector<LatencyEntry> sort_by_latency(std::vector<LatencyEntry> table);

// gains[i] is the channel amplitude of profiles[i] this round.
std::vector<LatencyEntry> estimate_and_sort(std::span<const ClientProfile> profiles,
                                            std::span<const double> gains,
                                            const RadioConfig& cfg, double model_bits,
                                            int epochs);

// ceil(count / N) contiguous chunks of ranks: group j holds [jN, min((j+1)N, count)).
using Groups = std::vector<std::vector<std::size_t>>;
Groups build_groups(std::size_t count, int subchannels);

struct RoundSchedule {
  int round = 0;
  Policy policy = Policy::proposed;
  std::vector<int> selected;          // rank order, ascending estimated latency
  std::vector<Latency> estimates;     // aligned with selected
  Groups groups;                      // ranks into selected
  double deadline = kInfinity;
};

struct ClusterSlot {
  int cluster_id = 0;
  std::vector<int> members;
  bool converged = false;
};

// Sub-channels apportioned to clusters in proportion to their size: floor of the
// quota, then one extra channel each to the largest clusters until N is used.
std::vector<int> channel_shares(std::span<const ClusterSlot> clusters, int subchannels);

// One cluster: every active client. Several: converged clusters get their
// fastest members up to their channel share, the others every member.
// `table` must already be sorted by sort_by_latency.
RoundSchedule select_proposed(int round, std::span<const ClusterSlot> clusters,
                              std::span<const LatencyEntry> table, int subchannels);

// min(N, |active|) clients uniformly without replacement, keyed by (seed, round).
RoundSchedule select_random(int round, std::span<const int> active,
                            std::span<const LatencyEntry> table, int subchannels,
                            std::uint64_t seed);

RoundSchedule select_full(int round, std::span<const int> active,
                          std::span<const LatencyEntry> table, int subchannels);

struct DeadlinePolicy {
  enum class Kind { max_estimate, quantile };
  Kind kind = Kind::max_estimate;
  double q = 0.9;

  static DeadlinePolicy parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const DeadlinePolicy&) const = default;
};

// max_estimate: the slowest estimate. quantile: linear interpolation between
// order statistics at position (n - 1) q.
double set_deadline(std::span<const double> estimates, DeadlinePolicy policy);

struct RoundOutcome {
  // All aligned with schedule.selected.
  std::vector<double> compute_done;
  std::vector<double> upload_start;
  std::vector<double> finish;
  std::vector<bool> dropped_flag;
  std::vector<int> aggregated;  // rank order
  std::vector<int> dropped;     // rank order
  double wall_clock = 0.0;
  bool all_dropped = false;
};

// Everyone starts computing at t = 0. Rank i uploads on channel i mod N once
// both its computation and the previous upload on that channel are done.
// Finishing after the schedule deadline, or being unreachable, drops the
// client; unreachable clients never occupy a channel.
RoundOutcome simulate_round(const RoundSchedule& schedule, std::span<const Latency> actual,
                            int subchannels);

// Finish times of the queue simulation run on the schedule's own estimates.
std::vector<double> estimated_finish_times(const RoundSchedule& schedule, int subchannels);

}  // namespace cflsim
