#include "cflsim/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "cflsim/artifacts.hpp"
#include "cflsim/clusterer.hpp"
#include "cflsim/csv.hpp"

namespace cflsim {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_manifest(const fs::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("no manifest.json in " + dir.string());
  return nlohmann::json::parse(f);
}

std::string opt(const std::optional<int>& v) { return v ? std::to_string(*v) : "inf"; }
std::string opt(const std::optional<double>& v) { return v ? csv_real(*v) : "inf"; }

}  // namespace

RunSummary summarize_run(const fs::path& dir) {
  const auto m = read_manifest(dir);
  if (!m.value("complete", false)) throw std::runtime_error("incomplete run: " + dir.string());
  RunSummary s;
  s.seed = m.at("seed").get<std::uint64_t>();
  s.policy = m.at("policy").get<std::string>();
  if (!m.at("first_split_round").is_null()) {
    s.first_split_round = m.at("first_split_round").get<int>();
    s.first_split_time = m.at("first_split_time").get<double>();
  }
  s.stop_reason = m.at("stop_reason").get<std::string>();

  const auto rounds = read_csv(dir / "rounds.csv");
  s.rounds = static_cast<int>(rounds.rows.size());
  s.clock = rounds.rows.empty() ? 0.0 : rounds.real(rounds.rows.size() - 1, "clock_end");

  const auto part = read_csv(dir / "partition.csv");
  std::vector<int> found, truth;
  for (std::size_t i = 0; i < part.rows.size(); ++i) {
    found.push_back(static_cast<int>(part.integer(i, "cluster_id")));
    truth.push_back(static_cast<int>(part.integer(i, "ground_truth")));
  }
  auto distinct = found;
  std::sort(distinct.begin(), distinct.end());
  s.final_clusters =
      static_cast<int>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
  s.rand_index = rand_index(found, truth);

  const auto acc = read_csv(dir / "accuracy.csv");
  double max_sum = 0.0, feel_sum = 0.0;
  int max_n = 0, feel_n = 0;
  for (std::size_t i = 0; i < acc.rows.size(); ++i) {
    const auto& model = acc.get(i, "model");
    if (model == "max_acc") {
      max_sum += acc.real(i, "accuracy");
      ++max_n;
    } else if (model == "feel") {
      feel_sum += acc.real(i, "accuracy");
      ++feel_n;
    }
  }
  s.mean_max_acc = max_n ? max_sum / max_n : 0.0;
  s.mean_feel_acc = feel_n ? feel_sum / feel_n : 0.0;
  return s;
}

Interval mean_ci(const std::vector<double>& values) {
  Interval iv;
  iv.n = values.size();
  if (values.empty()) return iv;
  double sum = 0.0;
  for (double v : values) sum += v;
  iv.mean = sum / static_cast<double>(iv.n);
  if (iv.n < 2) return iv;
  double ss = 0.0;
  for (double v : values) ss += (v - iv.mean) * (v - iv.mean);
  const double sd = std::sqrt(ss / static_cast<double>(iv.n - 1));
  iv.half_width = 1.96 * sd / std::sqrt(static_cast<double>(iv.n));
  return iv;
}

std::vector<RunSummary> compare(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                                const fs::path& out, int jobs) {
  if (seeds.empty()) throw std::invalid_argument("compare: no seeds");
  struct Job {
    ExperimentConfig config;
    fs::path dir;
  };
  std::vector<Job> work;
  for (Policy p : {Policy::proposed, Policy::random}) {
    for (auto seed : seeds) {
      ExperimentConfig c = base;
      c.policy = p;
      c.seed = seed;
      const auto dir = out / fmt::format("{}_seed{}", policy_name(p), seed);
      c.out = dir.string();
      work.push_back({c, dir});
    }
  }
  fs::create_directories(out);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        simulate_to_dir(work[i].config, work[i].dir);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(work.size())));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<RunSummary> summaries;
  CsvWriter table({"seed", "policy", "first_split_round", "first_split_time", "final_clusters",
                   "rand_index", "mean_max_acc", "mean_feel_acc", "rounds", "clock",
                   "stop_reason"});
  for (const auto& job : work) {
    const auto s = summarize_run(job.dir);
    table.add({std::to_string(s.seed), s.policy, opt(s.first_split_round), opt(s.first_split_time),
               std::to_string(s.final_clusters), csv_real(s.rand_index), csv_real(s.mean_max_acc),
               csv_real(s.mean_feel_acc), std::to_string(s.rounds), csv_real(s.clock),
               s.stop_reason});
    summaries.push_back(s);
  }
  table.save(out / "comparison.csv");

  CsvWriter summary({"policy", "metric", "mean", "ci95", "n"});
  for (const char* policy : {"proposed", "random"}) {
    std::map<std::string, std::vector<double>> metrics;
    for (const auto& s : summaries) {
      if (s.policy != policy) continue;
      if (s.first_split_round) {
        metrics["first_split_round"].push_back(*s.first_split_round);
        metrics["first_split_time"].push_back(*s.first_split_time);
      }
      metrics["rand_index"].push_back(s.rand_index);
      metrics["mean_max_acc"].push_back(s.mean_max_acc);
      metrics["mean_feel_acc"].push_back(s.mean_feel_acc);
      metrics["final_clusters"].push_back(s.final_clusters);
    }
    for (const auto& [name, values] : metrics) {
      const auto iv = mean_ci(values);
      summary.add({policy, name, csv_real(iv.mean), csv_real(iv.half_width), std::to_string(iv.n)});
    }
  }
  summary.save(out / "comparison_summary.csv");

  CsvWriter curves({"policy", "round", "metric", "mean", "ci_low", "ci_high", "n"});
  for (const char* policy : {"proposed", "random"}) {
    std::map<int, std::map<std::string, std::vector<double>>> by_round;
    for (const auto& job : work) {
      if (policy_name(job.config.policy) != policy) continue;
      const auto r = read_csv(job.dir / "rounds.csv");
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        auto& slot = by_round[static_cast<int>(r.integer(i, "round"))];
        slot["clock_end"].push_back(r.real(i, "clock_end"));
        slot["root_loss"].push_back(r.real(i, "root_loss"));
        slot["clusters"].push_back(r.real(i, "clusters"));
      }
    }
    for (const auto& [round, metrics] : by_round) {
      for (const auto& [name, values] : metrics) {
        const auto iv = mean_ci(values);
        curves.add({policy, std::to_string(round), name, csv_real(iv.mean),
                    csv_real(iv.mean - iv.half_width), csv_real(iv.mean + iv.half_width),
                    std::to_string(iv.n)});
      }
    }
  }
  curves.save(out / "curves.csv");
  return summaries;
}

namespace {

std::string run_table(const fs::path& dir) {
  const auto acc = read_csv(dir / "accuracy.csv");
  std::vector<int> clients;
  std::vector<std::string> models;
  std::map<std::pair<std::string, int>, std::pair<double, bool>> cell;
  for (std::size_t i = 0; i < acc.rows.size(); ++i) {
    const int k = static_cast<int>(acc.integer(i, "client_id"));
    const auto& model = acc.get(i, "model");
    if (std::find(clients.begin(), clients.end(), k) == clients.end()) clients.push_back(k);
    if (model != "max_acc" && std::find(models.begin(), models.end(), model) == models.end()) {
      models.push_back(model);
    }
    cell[{model, k}] = {acc.real(i, "accuracy"), acc.get(i, "member") == "1"};
  }
  models.push_back("max_acc");

  std::string out = fmt::format("run {}\n", dir.string());
  try {
    const auto s = summarize_run(dir);
    out += fmt::format("policy {}  seed {}  rounds {}  clock {:.6g} s  clusters {}  stop {}\n",
                       s.policy, s.seed, s.rounds, s.clock, s.final_clusters, s.stop_reason);
    out += fmt::format("first split: round {}  time {}\n", opt(s.first_split_round),
                       s.first_split_time ? fmt::format("{:.6g} s", *s.first_split_time) : "inf");
  } catch (const std::exception& e) {
    out += fmt::format("({})\n", e.what());
  }
  out += fmt::format("{:<12}", "model");
  for (int k : clients) out += fmt::format(" {:>7}", fmt::format("c{}", k));
  out += "\n";
  for (const auto& model : models) {
    out += fmt::format("{:<12}", model == "feel" ? "FEEL Model" : model == "max_acc" ? "Max Acc" : model);
    for (int k : clients) {
      auto it = cell.find({model, k});
      if (it == cell.end()) {
        out += fmt::format(" {:>7}", "-");
      } else {
        const auto [a, member] = it->second;
        out += fmt::format(" {:>7}", fmt::format("{:.3f}{}", a, member ? "*" : ""));
      }
    }
    out += "\n";
  }
  out += "(* = client belongs to that cluster)\n";
  return out;
}

}  // namespace

std::string render_report(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw std::invalid_argument("report: no run directories");
  std::string out;
  for (const auto& dir : dirs) {
    if (fs::exists(dir / "comparison.csv")) {
      std::vector<fs::path> runs;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) runs.push_back(e.path());
      }
      std::sort(runs.begin(), runs.end());
      for (const auto& r : runs) out += run_table(r) + "\n";
      const auto t = read_csv(dir / "comparison.csv");
      out += fmt::format("comparison {}\n", dir.string());
      out += fmt::format("{:<9} {:>6} {:>11} {:>14} {:>8} {:>10} {:>8} {:>8}\n", "policy", "seed",
                         "split_round", "split_time_s", "clusters", "rand_index", "max_acc",
                         "feel_acc");
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& time = t.get(i, "first_split_time");
        out += fmt::format("{:<9} {:>6} {:>11} {:>14} {:>8} {:>10.4f} {:>8.4f} {:>8.4f}\n",
                           t.get(i, "policy"), t.get(i, "seed"), t.get(i, "first_split_round"),
                           time == "inf" ? time : fmt::format("{:.6g}", t.real(i, "first_split_time")),
                           t.get(i, "final_clusters"), t.real(i, "rand_index"),
                           t.real(i, "mean_max_acc"), t.real(i, "mean_feel_acc"));
      }
      if (fs::exists(dir / "comparison_summary.csv")) {
        const auto sm = read_csv(dir / "comparison_summary.csv");
        out += "summary (mean +- 1.96 stderr)\n";
        for (std::size_t i = 0; i < sm.rows.size(); ++i) {
          out += fmt::format("  {:<9} {:<18} {:.6g} +- {:.3g} (n={})\n", sm.get(i, "policy"),
                             sm.get(i, "metric"), sm.real(i, "mean"), sm.real(i, "ci95"),
                             sm.get(i, "n"));
        }
      }
      out += "\n";
    } else {
      out += run_table(dir) + "\n";
    }
  }
  return out;
}

}  // namespace cflsim
