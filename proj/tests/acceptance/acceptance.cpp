// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cflsim/artifacts.hpp"
#include "cflsim/clusterer.hpp"
#include "cflsim/engine.hpp"
#include "cflsim/learner.hpp"
#include "cflsim/radio.hpp"
#include "cflsim/scheduler.hpp"

using namespace cflsim;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 5;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ExperimentConfig desk_config(Policy policy, std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.dataset.clients = 16;
  c.dataset.latent_clusters = 4;
  c.radio.subchannels = 4;
  c.rounds = 100;
  c.policy = policy;
  return c;
}

struct Run {
  SimulationContext ctx;
  ExperimentResult result;
};

std::vector<Run> run_seeds(Policy policy) {
  std::vector<std::future<Run>> jobs;
  for (int s = 1; s <= kSeeds; ++s) {
    jobs.push_back(std::async(std::launch::async, [policy, s] {
      auto ctx = SimulationContext::build(desk_config(policy, static_cast<std::uint64_t>(s)));
      auto result = run_experiment(ctx);
      return Run{std::move(ctx), std::move(result)};
    }));
  }
  std::vector<Run> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string opt_str(double v) { return std::isfinite(v) ? fmt::format("{:.4g}", v) : "never"; }

Outcome split_acceleration(std::vector<Run>& proposed_out, double& proposed_seconds) {
  const auto t0 = Clock::now();
  auto proposed = run_seeds(Policy::proposed);
  proposed_seconds = seconds_since(t0);
  const auto random = run_seeds(Policy::random);
  int earlier = 0;
  std::vector<double> rp, rr;
  std::string per_seed;
  for (int i = 0; i < kSeeds; ++i) {
    const auto& a = proposed[static_cast<std::size_t>(i)].result.trace;
    const auto& b = random[static_cast<std::size_t>(i)].result.trace;
    const double ta = a.first_split_time().value_or(kInf), tb = b.first_split_time().value_or(kInf);
    earlier += ta < tb;
    rp.push_back(a.first_split_round() ? *a.first_split_round() : kInf);
    rr.push_back(b.first_split_round() ? *b.first_split_round() : kInf);
    per_seed += fmt::format(" s{}:{}/{}", i + 1, opt_str(ta), opt_str(tb));
  }
  const double mp = median(rp), mr = median(rr);
  const double elapsed = seconds_since(t0);
  proposed_out = std::move(proposed);
  const bool pass = earlier >= 4 && mp <= 0.7 * mr && elapsed < 120.0;
  return {pass, fmt::format("earlier in {}/5 seeds, median first-split round {} vs {} (ratio {:.3g}), "
                            "split time proposed/random{}, {:.1f}s",
                            earlier, opt_str(mp), opt_str(mr), mp / mr, per_seed, elapsed)};
}

Outcome ground_truth_clustering() {
  const auto t0 = Clock::now();
  const auto runs = run_seeds(Policy::full);
  int exact = 0;
  std::string per_seed;
  for (const auto& r : runs) {
    std::vector<int> labels;
    for (int k : r.result.state.tree.clients()) labels.push_back(r.result.state.tree.cluster_of(k));
    const double ri = rand_index(labels, r.ctx.data.ground_truth_cluster);
    exact += ri == 1.0;
    per_seed += fmt::format(" {:.3f}", ri);
  }
  const double elapsed = seconds_since(t0);
  return {exact >= 4 && elapsed < 60.0,
          fmt::format("Rand index 1.0 in {}/5 seeds (per seed:{}), {:.1f}s", exact, per_seed, elapsed)};
}

Outcome specialisation(const std::vector<Run>& runs, double extra_seconds) {
  const auto t0 = Clock::now();
  std::size_t clients = 0, dominated = 0;
  double gain = 0.0;
  int converged = 0;
  for (const auto& r : runs) {
    const auto& acc = r.result.trace.accuracy;
    converged += r.result.trace.stop == StopReason::converged;
    for (std::size_t i = 0; i < acc.clients.size(); ++i) {
      ++clients;
      dominated += acc.max_acc[i] >= acc.feel_acc[i];
      gain += acc.max_acc[i] - acc.feel_acc[i];
    }
  }
  const double share = static_cast<double>(dominated) / static_cast<double>(clients);
  const double mean_gain = 100.0 * gain / static_cast<double>(clients);
  const double elapsed = seconds_since(t0) + extra_seconds;
  return {share >= 0.9 && mean_gain > 5.0 && elapsed < 60.0,
          fmt::format("Max Acc >= FEEL for {}/{} test clients ({:.1f}%), mean improvement {:.1f} points, "
                      "{}/5 runs converged, {:.1f}s",
                      dominated, clients, 100.0 * share, mean_gain, converged, elapsed)};
}

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

Outcome latency_oracle() {
  std::mt19937_64 rng(4);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  RadioConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ClientProfile p;
    p.client_id = i;
    p.samples = std::uniform_int_distribution<int>(1, 2000)(rng);
    p.cpu_hz = u(1e9, 9e9);
    p.cycles_per_sample = u(1, 50);
    p.power_w = std::pow(10.0, u(-4, -1));
    p.distance_m = u(1, 100);
    const int epochs = std::uniform_int_distribution<int>(1, 20)(rng);
    const double bits = u(1e3, 1e7);
    const double xi = -std::log(1.0 - u(0, 1));
    const double h = std::sqrt(cfg.path_loss_g0 * std::pow(cfg.ref_distance_m / p.distance_m, 4) * xi);
    const double rate = data_rate(cfg, p.power_w, h);
    const double lambda_b = cfg.bandwidth_hz / cfg.subchannels;
    const double want_rate = lambda_b * std::log1p(p.power_w * h * h / cfg.noise_power_w);
    const double want_trans = bits / want_rate;
    const double want_cmp = epochs * p.cycles_per_sample * p.samples / p.cpu_hz;
    const auto l = latencies(p, bits, epochs, rate);
    worst = std::max({worst, rel_err(rate, want_rate), rel_err(l.trans, want_trans),
                      rel_err(l.cmp, want_cmp), rel_err(l.total, want_trans + want_cmp)});
  }
  int violations = 0;
  const int n = 100;
  std::vector<double> grid(n * n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double power = 1e-4 * std::pow(1e3, a / (n - 1.0));
      const double gain = 1e-4 * std::pow(1e2, b / (n - 1.0));
      grid[static_cast<std::size_t>(a * n + b)] = data_rate(cfg, power, gain);
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double v = grid[static_cast<std::size_t>(a * n + b)];
      if (a + 1 < n && !(grid[static_cast<std::size_t>((a + 1) * n + b)] > v)) ++violations;
      if (b + 1 < n && !(grid[static_cast<std::size_t>(a * n + b + 1)] > v)) ++violations;
    }
  }
  return {worst <= 1e-12 && violations == 0,
          fmt::format("1000 profiles, worst relative error {:.3g} (tolerance 1e-12); "
                      "100x100 grid monotonicity violations {}",
                      worst, violations)};
}

double brute_force_min_cross(const SimilarityMatrix& s) {
  const auto n = s.size();
  double best = kInf;
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double worst = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (!((mask >> i) & 1u)) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (!((mask >> j) & 1u)) worst = std::max(worst, s(i, j));
      }
    }
    best = std::min(best, worst);
  }
  return best;
}

Outcome bipartition_exactness() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 7;
    const int dim = std::uniform_int_distribution<int>(2, 10)(rng);
    const int blocks = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<std::vector<double>> centres(static_cast<std::size_t>(blocks));
    for (auto& c : centres) {
      for (int j = 0; j < dim; ++j) c.push_back(normal(rng));
    }
    const double noise = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    std::vector<std::vector<double>> deltas;
    std::vector<ClientUpdateView> views;
    for (int i = 0; i < n; ++i) {
      auto v = centres[static_cast<std::size_t>(i % blocks)];
      for (auto& x : v) x += noise * normal(rng);
      deltas.push_back(std::move(v));
    }
    for (int i = 0; i < n; ++i) views.push_back({i, deltas[static_cast<std::size_t>(i)], 1.0});
    const auto s = SimilarityMatrix::from_updates(views);
    const auto b = optimal_bipartition(s);
    if (b.cross_max != brute_force_min_cross(s) ||
        cross_max_similarity(s, b.first, b.second) != b.cross_max) {
      ++mismatches;
    }
  }
  return {mismatches == 0, fmt::format("200 matrices of size 2..8, {} differ from the exhaustive minimum",
                                       mismatches)};
}

Outcome bandwidth_reuse() {
  std::mt19937_64 rng(6);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  int dominance = 0, overlap = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 40)(rng);
    const int n = std::uniform_int_distribution<int>(1, 10)(rng);
    std::vector<LatencyEntry> table;
    std::vector<int> active;
    for (int i = 0; i < k; ++i) {
      const double trans = u(0.01, 5), cmp = u(0, 5);
      table.push_back({i, {trans, cmp, trans + cmp}});
      active.push_back(i);
    }
    table = sort_by_latency(table);
    auto many = select_full(0, active, table, n);
    auto one = select_full(0, active, table, 1);
    std::vector<Latency> actual;
    for (const auto& e : many.estimates) {
      const double t = e.trans * u(0.5, 1.5);
      actual.push_back({t, e.cmp, t + e.cmp});
    }
    const auto a = simulate_round(many, actual, n);
    const auto b = simulate_round(one, actual, 1);
    dominance += !(a.wall_clock <= b.wall_clock);
    for (std::size_t i = 0; i < actual.size(); ++i) {
      int live = 0;
      for (std::size_t j = 0; j < actual.size(); ++j) {
        live += a.upload_start[j] <= a.upload_start[i] && a.upload_start[i] < a.finish[j];
      }
      overlap += live > n;
    }
  }
  return {dominance == 0 && overlap == 0,
          fmt::format("100 schedules, {} with N-channel wall-clock above 1-channel, {} instants with more "
                      "than N uploads",
                      dominance, overlap)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  const double h = 1e-5;
  double worst = 0.0;
  const int pairs = 24;
  for (int trial = 0; trial < pairs; ++trial) {
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    const int c = std::uniform_int_distribution<int>(2, 5)(rng);
    ModelShape shape{trial % 2 ? ModelKind::mlp : ModelKind::logistic, d, c, trial % 2 ? 6 : 0};
    ModelParams m{shape, std::vector<double>(shape.num_params())};
    for (auto& w : m.weights) w = 0.5 * normal(rng);
    Samples batch;
    batch.features = d;
    const int rows = std::uniform_int_distribution<int>(1, 32)(rng);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < d; ++j) batch.x.push_back(normal(rng));
      batch.y.push_back(std::uniform_int_distribution<int>(0, c - 1)(rng));
    }
    const auto lg = loss_and_gradient(m, batch);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      const double w = m.weights[i];
      m.weights[i] = w + h;
      const double up = mean_loss(m, batch);
      m.weights[i] = w - h;
      const double down = mean_loss(m, batch);
      m.weights[i] = w;
      const double fd = (up - down) / (2 * h);
      diff += (fd - lg.grad[i]) * (fd - lg.grad[i]);
      scale = std::max(scale, std::max(fd * fd, lg.grad[i] * lg.grad[i]));
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(scale), 1e-300));
  }
  return {worst <= 1e-6,
          fmt::format("{} (model, batch) pairs, worst relative error {:.3g} (tolerance 1e-6)", pairs, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "cflsim_acceptance_determinism";
  fs::remove_all(root);
  int files = 0, differing = 0;
  for (const auto policy : {Policy::proposed, Policy::random}) {
    const auto cfg = desk_config(policy, 3);
    const auto a = root / fmt::format("{}_a", policy_name(policy));
    const auto b = root / fmt::format("{}_b", policy_name(policy));
    simulate_to_dir(cfg, a, false);
    simulate_to_dir(cfg, b, false);
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), a);
      ++files;
      differing += slurp(e.path()) != slurp(b / rel);
    }
  }
  fs::remove_all(root);
  return {files > 0 && differing == 0,
          fmt::format("{} artifacts compared across repeated runs, {} differ", files, differing)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  std::vector<Run> proposed;
  double proposed_cost = 0.0;
  report(1, "split acceleration", split_acceleration(proposed, proposed_cost));
  report(2, "ground-truth clustering", ground_truth_clustering());
  report(3, "specialisation dominance", specialisation(proposed, proposed_cost));
  report(4, "latency model oracle", latency_oracle());
  report(5, "bipartition exactness", bipartition_exactness());
  report(6, "bandwidth-reuse dominance", bandwidth_reuse());
  report(7, "gradient correctness", gradient_check());
  report(8, "determinism", determinism());
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
