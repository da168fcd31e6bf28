#include "cflsim/scheduler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "cflsim/rng.hpp"

namespace cflsim {

Policy parse_policy(std::string_view name) {
  if (name == "proposed") return Policy::proposed;
  if (name == "random") return Policy::random;
  if (name == "full") return Policy::full;
  throw std::invalid_argument("unknown scheduling policy: " + std::string(name));
}

std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::proposed: return "proposed";
    case Policy::random: return "random";
    case Policy::full: return "full";
  }
  return "?";
}

std::vector<LatencyEntry> sort_by_latency(std::vector<LatencyEntry> table) {
  std::sort(table.begin(), table.end(), [](const LatencyEntry& a, const LatencyEntry& b) {
    if (a.estimate.total != b.estimate.total) return a.estimate.total < b.estimate.total;
    return a.client_id < b.client_id;
  });
  return table;
}

std::vector<LatencyEntry> estimate_and_sort(std::span<const ClientProfile> profiles,
                                            std::span<const double> gains,
                                            const RadioConfig& cfg, double model_bits,
                                            int epochs) {
  if (profiles.empty()) throw std::invalid_argument("estimate_and_sort: no clients");
  if (gains.size() != profiles.size()) {
    throw std::invalid_argument("estimate_and_sort: one gain per profile required");
  }
  std::vector<LatencyEntry> table;
  table.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const double rate = data_rate(cfg, profiles[i].power_w, gains[i]);
    table.push_back({profiles[i].client_id, latencies(profiles[i], model_bits, epochs, rate)});
  }
  return sort_by_latency(std::move(table));
}

Groups build_groups(std::size_t count, int subchannels) {
  if (subchannels < 1) throw std::invalid_argument("build_groups: N must be >= 1");
  const auto n = static_cast<std::size_t>(subchannels);
  Groups groups;
  for (std::size_t start = 0; start < count; start += n) {
    std::vector<std::size_t> g(std::min(n, count - start));
    std::iota(g.begin(), g.end(), start);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<int> channel_shares(std::span<const ClusterSlot> clusters, int subchannels) {
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.members.size();
  std::vector<int> shares(clusters.size(), 0);
  if (total == 0) return shares;
  int used = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    shares[i] = static_cast<int>(static_cast<std::size_t>(subchannels) * clusters[i].members.size() /
                                 total);
    used += shares[i];
  }
  std::vector<std::size_t> by_size(clusters.size());
  std::iota(by_size.begin(), by_size.end(), std::size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
    return clusters[a].members.size() > clusters[b].members.size();
  });
  for (std::size_t i = 0; used < subchannels && !by_size.empty(); i = (i + 1) % by_size.size()) {
    ++shares[by_size[i]];
    ++used;
  }
  return shares;
}

namespace {

RoundSchedule finish_schedule(int round, Policy policy, const std::vector<int>& chosen,
                              std::span<const LatencyEntry> table, int subchannels) {
  std::unordered_map<int, bool> wanted;
  for (int id : chosen) wanted[id] = true;
  RoundSchedule s;
  s.round = round;
  s.policy = policy;
  for (const auto& e : table) {
    if (wanted.count(e.client_id) != 0) {
      s.selected.push_back(e.client_id);
      s.estimates.push_back(e.estimate);
    }
  }
  if (s.selected.size() != chosen.size()) {
    throw std::invalid_argument("schedule: selected client missing from latency table");
  }
  s.groups = build_groups(s.selected.size(), subchannels);
  return s;
}

}  // namespace

RoundSchedule select_proposed(int round, std::span<const ClusterSlot> clusters,
                              std::span<const LatencyEntry> table, int subchannels) {
  std::vector<int> chosen;
  if (clusters.size() <= 1) {
    for (const auto& c : clusters) chosen.insert(chosen.end(), c.members.begin(), c.members.end());
    return finish_schedule(round, Policy::proposed, chosen, table, subchannels);
  }
  std::unordered_map<int, std::size_t> rank;
  for (std::size_t i = 0; i < table.size(); ++i) rank[table[i].client_id] = i;
  const auto shares = channel_shares(clusters, subchannels);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (!c.converged) {
      chosen.insert(chosen.end(), c.members.begin(), c.members.end());
      continue;
    }
    std::vector<int> members = c.members;
    std::sort(members.begin(), members.end(),
              [&](int a, int b) { return rank.at(a) < rank.at(b); });
    const auto take = std::min(members.size(), static_cast<std::size_t>(shares[i]));
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return finish_schedule(round, Policy::proposed, chosen, table, subchannels);
}

RoundSchedule select_random(int round, std::span<const int> active,
                            std::span<const LatencyEntry> table, int subchannels,
                            std::uint64_t seed) {
  if (subchannels < 1) throw std::invalid_argument("select_random: N must be >= 1");
  Rng rng = make_rng(seed, Stream::selection, static_cast<std::uint64_t>(round));
  const auto count = std::min(active.size(), static_cast<std::size_t>(subchannels));
  std::vector<int> chosen;
  chosen.reserve(count);
  std::sample(active.begin(), active.end(), std::back_inserter(chosen), count, rng);
  return finish_schedule(round, Policy::random, chosen, table, subchannels);
}

RoundSchedule select_full(int round, std::span<const int> active,
                          std::span<const LatencyEntry> table, int subchannels) {
  return finish_schedule(round, Policy::full, std::vector<int>(active.begin(), active.end()), table,
                         subchannels);
}

DeadlinePolicy DeadlinePolicy::parse(std::string_view text) {
  if (text == "max" || text == "max_estimate") return {Kind::max_estimate, 0.9};
  constexpr std::string_view prefix = "quantile(";
  if (text.starts_with(prefix) && text.ends_with(")")) {
    const auto inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    double q = 0.0;
    const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), q);
    if (ec == std::errc{} && ptr == inner.data() + inner.size() && q >= 0.0 && q <= 1.0) {
      return {Kind::quantile, q};
    }
  }
  throw std::invalid_argument("deadline: expected 'max' or 'quantile(q)' with q in [0, 1], got '" +
                              std::string(text) + "'");
}

std::string DeadlinePolicy::to_string() const {
  if (kind == Kind::max_estimate) return "max";
  return fmt::format("quantile({:.17g})", q);
}

double set_deadline(std::span<const double> estimates, DeadlinePolicy policy) {
  if (estimates.empty()) throw std::invalid_argument("set_deadline: no estimates");
  std::vector<double> v(estimates.begin(), estimates.end());
  std::sort(v.begin(), v.end());
  if (policy.kind == DeadlinePolicy::Kind::max_estimate) return v.back();
  const double h = static_cast<double>(v.size() - 1) * policy.q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  if (lo == hi || v[lo] == v[hi]) return v[lo];
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RoundOutcome simulate_round(const RoundSchedule& schedule, std::span<const Latency> actual,
                            int subchannels) {
  if (subchannels < 1) throw std::invalid_argument("simulate_round: N must be >= 1");
  const std::size_t n = schedule.selected.size();
  if (actual.size() != n) throw std::invalid_argument("simulate_round: one latency per client");
  RoundOutcome out;
  out.compute_done.resize(n);
  out.upload_start.resize(n);
  out.finish.resize(n);
  out.dropped_flag.assign(n, false);
  std::vector<double> channel_free(static_cast<std::size_t>(subchannels), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ch = i % static_cast<std::size_t>(subchannels);
    out.compute_done[i] = actual[i].cmp;
    if (!std::isfinite(actual[i].trans) || !std::isfinite(actual[i].cmp)) {
      out.upload_start[i] = kInfinity;
      out.finish[i] = kInfinity;
    } else {
      out.upload_start[i] = std::max(actual[i].cmp, channel_free[ch]);
      out.finish[i] = out.upload_start[i] + actual[i].trans;
      channel_free[ch] = out.finish[i];
    }
    const bool late = !std::isfinite(out.finish[i]) || out.finish[i] > schedule.deadline;
    out.dropped_flag[i] = late;
    if (late) {
      out.dropped.push_back(schedule.selected[i]);
    } else {
      out.aggregated.push_back(schedule.selected[i]);
      out.wall_clock = std::max(out.wall_clock, out.finish[i]);
    }
  }
  out.all_dropped = out.aggregated.empty();
  return out;
}

std::vector<double> estimated_finish_times(const RoundSchedule& schedule, int subchannels) {
  RoundSchedule open = schedule;
  open.deadline = kInfinity;
  return simulate_round(open, schedule.estimates, subchannels).finish;
}

}  // namespace cflsim
