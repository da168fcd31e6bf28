#include "cflsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "cflsim/kernels.hpp"
#include "cflsim/rng.hpp"

namespace cflsim {

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::running: return "running";
    case StopReason::converged: return "converged";
    case StopReason::max_rounds: return "max_rounds";
    case StopReason::budget: return "budget";
    case StopReason::non_finite: return "non_finite";
    case StopReason::unreachable: return "unreachable";
  }
  return "?";
}

SimulationContext SimulationContext::build(const ExperimentConfig& config) {
  config.validate();
  SimulationContext ctx;
  ctx.config = config;
  ctx.data = build_dataset(config.dataset, config.seed);
  std::vector<int> counts;
  counts.reserve(ctx.data.clients.size());
  for (const auto& c : ctx.data.clients) counts.push_back(static_cast<int>(c.train.size()));
  ctx.profiles = draw_profiles(counts, config.profiles, config.seed);
  for (auto& p : ctx.profiles) p.cycles_per_sample = config.profiles.cycles_per_sample;
  ctx.shape = config.model_shape();
  ctx.model_bits = config.model_bits();
  return ctx;
}

ExperimentState ExperimentState::initial(const SimulationContext& ctx) {
  ExperimentState s;
  std::vector<int> ids;
  for (const auto& c : ctx.data.clients) ids.push_back(c.client_id);
  s.tree = ClusterTree(ids);
  s.root = init_model(ctx.shape, derive_seed(ctx.config.seed, Stream::model_init));
  s.cluster_models[0] = s.root;
  return s;
}

void ExperimentState::check_invariants() const {
  tree.check_invariants();
  if (cluster_models.size() != tree.size()) throw std::logic_error("one model per cluster expected");
  for (const auto& c : tree.clusters()) {
    if (cluster_models.count(c.id) == 0) {
      throw std::logic_error(fmt::format("cluster {} has no model", c.id));
    }
  }
}

namespace {

GateResult gate_stats(std::span<const ClientUpdateView> views, const SplitParams& p) {
  if (views.empty()) return {};
  return split_gate(views, p.eps1, p.eps2);
}

bool plateaued(const std::vector<double>& h, int patience, double tol) {
  const auto p = static_cast<std::size_t>(patience);
  if (h.size() < p + 1) return false;
  const double old = h[h.size() - 1 - p];
  const double now = h.back();
  return old - now <= tol * std::abs(old);
}

}  // namespace

RoundResult run_round(const SimulationContext& ctx, const ExperimentState& state) {
  const auto& cfg = ctx.config;
  const int r = state.round + 1;
  const int n_ch = cfg.radio.subchannels;
  RoundResult res;
  res.state = state;
  auto& s = res.state;

  const auto& clients = s.tree.clients();
  std::vector<double> est_gain(ctx.profiles.size());
  std::unordered_map<int, Latency> actual;
  for (std::size_t i = 0; i < ctx.profiles.size(); ++i) {
    const auto& p = ctx.profiles[i];
    const double h = draw_gain(p, cfg.radio, r, cfg.seed);
    est_gain[i] = cfg.csi == Csi::exact ? h : draw_gain(p, cfg.radio, r - 1, cfg.seed);
    actual[p.client_id] =
        latencies(p, ctx.model_bits, cfg.train.epochs, data_rate(cfg.radio, p.power_w, h));
  }
  const auto table = estimate_and_sort(ctx.profiles, est_gain, cfg.radio, ctx.model_bits,
                                       cfg.train.epochs);

  RoundSchedule schedule;
  switch (cfg.policy) {
    case Policy::proposed: {
      std::vector<ClusterSlot> slots;
      for (const auto& c : s.tree.clusters()) slots.push_back({c.id, c.members, c.converged});
      schedule = select_proposed(r, slots, table, n_ch);
      break;
    }
    case Policy::random:
      schedule = select_random(r, clients, table, n_ch, cfg.seed);
      break;
    case Policy::full:
      schedule = select_full(r, clients, table, n_ch);
      break;
  }

  std::vector<double> finite;
  for (double f : estimated_finish_times(schedule, n_ch)) {
    if (std::isfinite(f)) finite.push_back(f);
  }
  if (finite.empty()) {
    s.stop = StopReason::unreachable;
    return res;
  }
  schedule.deadline = set_deadline(finite, cfg.deadline);
  if (s.clock + schedule.deadline > cfg.time_budget_s) {
    s.stop = StopReason::budget;
    return res;
  }

  std::vector<Latency> observed;
  observed.reserve(schedule.selected.size());
  for (int id : schedule.selected) observed.push_back(actual.at(id));
  const auto outcome = simulate_round(schedule, observed, n_ch);

  std::unordered_map<int, int> owner;
  for (const auto& c : s.tree.clusters()) {
    for (int k : c.members) owner[k] = c.id;
  }

  std::vector<ModelUpdate> updates;  // rank order
  try {
    for (int id : outcome.aggregated) {
      const auto& model = s.cluster_models.at(owner.at(id));
      updates.push_back(local_train(model, ctx.data.clients.at(static_cast<std::size_t>(id)),
                                    cfg.train, derive_seed(cfg.seed, Stream::minibatch,
                                                           static_cast<std::uint64_t>(r),
                                                           static_cast<std::uint64_t>(id))));
    }
    if (!updates.empty()) {
      s.root = fedavg(s.root, updates);
      if (!all_finite(s.root.weights)) throw NumericalError("root model became non-finite");
    }
    for (const auto& c : s.tree.clusters()) {
      std::vector<ModelUpdate> mine;
      for (const auto& u : updates) {
        if (owner.at(u.client_id) == c.id) mine.push_back(u);
      }
      if (mine.empty()) continue;
      auto& m = s.cluster_models.at(c.id);
      m = fedavg(m, mine);
      if (!all_finite(m.weights)) {
        throw NumericalError(fmt::format("cluster {} model became non-finite", c.id));
      }
    }
  } catch (const NumericalError& e) {
    res.state = state;
    res.state.stop = StopReason::non_finite;
    res.error = e.what();
    return res;
  }
  res.executed = true;

  double loss_sum = 0.0, weight_sum = 0.0;
  std::unordered_map<int, const ModelUpdate*> fresh;
  for (const auto& u : updates) {
    s.evidence[u.client_id] = Evidence{r, u.delta, u.num_samples};
    fresh[u.client_id] = &u;
    loss_sum += u.loss_before * u.num_samples;
    weight_sum += u.num_samples;
  }

  std::unordered_map<int, int> selected_per_cluster;
  for (int id : schedule.selected) ++selected_per_cluster[owner.at(id)];

  const auto clusters_before = s.tree.clusters();
  for (const auto& c : clusters_before) {
    ClusterRecord rec;
    rec.round = r;
    rec.cluster_id = c.id;
    rec.size = static_cast<int>(c.members.size());
    rec.selected = selected_per_cluster[c.id];

    std::vector<ClientUpdateView> now;
    double c_loss = 0.0, c_weight = 0.0;
    for (int k : c.members) {
      auto it = fresh.find(k);
      if (it == fresh.end()) continue;
      const auto& u = *it->second;
      now.push_back({k, u.delta, static_cast<double>(u.num_samples)});
      c_loss += u.loss_before * u.num_samples;
      c_weight += u.num_samples;
    }
    rec.aggregated = static_cast<int>(now.size());
    const auto g = gate_stats(now, cfg.split);
    rec.mean_norm = g.mean_norm;
    rec.max_norm = g.max_norm;
    if (!now.empty()) {
      rec.loss = c_loss / c_weight;
      s.loss_history[c.id].push_back(rec.loss);
    }

    bool eligible = c.members.size() >= 2 && !now.empty();
    if (eligible && cfg.split_evidence == SplitEvidence::fresh) {
      eligible = now.size() == c.members.size();
    }
    std::vector<ClientUpdateView> views;
    if (eligible) {
      for (int k : c.members) {
        auto it = s.evidence.find(k);
        if (it == s.evidence.end() || it->second.round < c.created_round) {
          eligible = false;
          break;
        }
        views.push_back({k, it->second.delta, static_cast<double>(it->second.num_samples)});
      }
    }
    rec.eligible = eligible;

    bool did_split = false;
    if (eligible) {
      auto split = maybe_split(s.tree, c.id, views, cfg.split, r);
      if (split.decision.gate_passed) res.decisions.push_back(split.decision);
      if (split.decision.did_split) {
        did_split = true;
        const auto parent_model = s.cluster_models.at(c.id);
        s.tree = std::move(split.tree);
        s.cluster_models.erase(c.id);
        s.loss_history.erase(c.id);
        s.cluster_models[split.decision.first_child] = parent_model;
        s.cluster_models[split.decision.second_child] = parent_model;
        ++res.record.splits;
      }
    }
    if (!did_split && !now.empty()) {
      const bool stationary = g.mean_norm < cfg.split.eps1 && g.max_norm <= cfg.split.eps2;
      s.tree.cluster(c.id).converged =
          stationary && plateaued(s.loss_history[c.id], cfg.patience, cfg.convergence_tol);
    }
    rec.converged = !did_split && s.tree.cluster(c.id).converged;
    res.clusters.push_back(rec);
  }

  const double advance = outcome.all_dropped ? schedule.deadline : outcome.wall_clock;
  auto& rr = res.record;
  rr.round = r;
  rr.clock_start = s.clock;
  rr.deadline = schedule.deadline;
  rr.wall_clock = advance;
  s.clock += advance;
  rr.clock_end = s.clock;
  rr.clusters = static_cast<int>(s.tree.size());
  rr.selected = static_cast<int>(schedule.selected.size());
  rr.aggregated = static_cast<int>(outcome.aggregated.size());
  rr.dropped = static_cast<int>(outcome.dropped.size());
  rr.root_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;

  for (std::size_t i = 0; i < schedule.selected.size(); ++i) {
    const int id = schedule.selected[i];
    res.schedule.push_back(ScheduleRow{r, id, static_cast<int>(i), static_cast<int>(i) / n_ch,
                                       owner.at(id), schedule.estimates[i].total,
                                       outcome.finish[i], outcome.dropped_flag[i]});
  }

  s.round = r;
  const auto& cl = s.tree.clusters();
  if (std::all_of(cl.begin(), cl.end(), [](const auto& c) { return c.converged; })) {
    s.stop = StopReason::converged;
  }
  return res;
}

double AccuracyTable::at(int client_id, std::string_view model) const {
  for (const auto& e : entries) {
    if (e.client_id == client_id && e.model == model) return e.accuracy;
  }
  throw std::out_of_range(fmt::format("no accuracy for client {} on {}", client_id, model));
}

AccuracyTable final_evaluation(const SimulationContext& ctx, const ExperimentState& state) {
  AccuracyTable t;
  const auto& all = state.tree.clients();
  const std::size_t n = ctx.config.eval_clients == 0
                            ? all.size()
                            : std::min(all.size(), static_cast<std::size_t>(ctx.config.eval_clients));
  t.clients.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  t.models.push_back("feel");
  for (const auto& c : state.tree.clusters()) t.models.push_back(fmt::format("cluster_{}", c.id));

  for (int k : t.clients) {
    const auto& test = ctx.data.clients.at(static_cast<std::size_t>(k)).test;
    const int home = state.tree.cluster_of(k);
    const double feel = evaluate(state.root, test);
    t.entries.push_back({k, "feel", false, feel});
    t.feel_acc.push_back(feel);
    double best = 0.0;
    for (const auto& c : state.tree.clusters()) {
      const double acc = evaluate(state.cluster_models.at(c.id), test);
      best = std::max(best, acc);
      t.entries.push_back({k, fmt::format("cluster_{}", c.id), c.id == home, acc});
    }
    t.max_acc.push_back(best);
  }
  return t;
}

std::optional<int> ExperimentTrace::first_split_round() const {
  for (const auto& d : splits) {
    if (d.did_split) return d.round;
  }
  return std::nullopt;
}

std::optional<double> ExperimentTrace::first_split_time() const {
  const auto r = first_split_round();
  if (!r) return std::nullopt;
  for (const auto& rec : rounds) {
    if (rec.round == *r) return rec.clock_end;
  }
  return std::nullopt;
}

ExperimentResult run_experiment(const SimulationContext& ctx) {
  ExperimentResult out;
  auto& state = out.state;
  auto& trace = out.trace;
  state = ExperimentState::initial(ctx);
  while (true) {
    if (state.round >= ctx.config.rounds) {
      state.stop = StopReason::max_rounds;
      break;
    }
    auto res = run_round(ctx, state);
    if (!res.executed) {
      state.stop = res.state.stop;
      if (state.stop == StopReason::non_finite) {
        trace.failed_round = state.round + 1;
        trace.error = res.error;
      }
      break;
    }
    trace.rounds.push_back(res.record);
    trace.clusters.insert(trace.clusters.end(), res.clusters.begin(), res.clusters.end());
    trace.schedule.insert(trace.schedule.end(), res.schedule.begin(), res.schedule.end());
    trace.splits.insert(trace.splits.end(), res.decisions.begin(), res.decisions.end());
    state = std::move(res.state);
    if (state.stop == StopReason::converged) break;
  }
  trace.stop = state.stop;
  trace.accuracy = final_evaluation(ctx, state);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(SimulationContext::build(config));
}

}  // namespace cflsim
