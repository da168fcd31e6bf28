#include "cflsim/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cflsim/kernels.hpp"

namespace cflsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string str(int v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "1" : "0"; }

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

CsvWriter rounds_csv(const ExperimentTrace& trace) {
  CsvWriter w({"round", "clock_start", "deadline", "wall_clock", "clock_end", "clusters", "selected",
               "aggregated", "dropped", "splits", "root_loss"});
  for (const auto& r : trace.rounds) {
    w.add({str(r.round), csv_real(r.clock_start), csv_real(r.deadline), csv_real(r.wall_clock),
           csv_real(r.clock_end), str(r.clusters), str(r.selected), str(r.aggregated),
           str(r.dropped), str(r.splits), csv_real(r.root_loss)});
  }
  return w;
}

CsvWriter clusters_csv(const ExperimentTrace& trace) {
  CsvWriter w({"round", "cluster_id", "size", "selected", "aggregated", "mean_norm", "max_norm",
               "loss", "eligible", "converged"});
  for (const auto& c : trace.clusters) {
    w.add({str(c.round), str(c.cluster_id), str(c.size), str(c.selected), str(c.aggregated),
           csv_real(c.mean_norm), csv_real(c.max_norm), csv_real(c.loss), flag(c.eligible),
           flag(c.converged)});
  }
  return w;
}

CsvWriter splits_csv(const ExperimentTrace& trace) {
  CsvWriter w({"round", "parent_cluster", "child_sizes", "mean_norm", "max_norm", "sim_cross_max",
               "sim_within_min", "gap", "max_gamma", "gamma_threshold", "degenerate_side",
               "accepted", "first_child", "second_child", "skipped"});
  for (const auto& d : trace.splits) {
    w.add({str(d.round), str(d.cluster_id),
           fmt::format("{}|{}", d.first_members.size(), d.second_members.size()),
           csv_real(d.gate.mean_norm), csv_real(d.gate.max_norm), csv_real(d.cross_max),
           csv_real(d.within_min), csv_real(d.gap), csv_real(d.max_gamma),
           csv_real(d.gamma_threshold), flag(d.degenerate_side), flag(d.did_split),
           str(d.first_child), str(d.second_child), d.skipped.empty() ? "-" : d.skipped});
  }
  return w;
}

CsvWriter schedule_csv(const ExperimentTrace& trace, Policy policy) {
  CsvWriter w({"round", "policy", "client_id", "rank", "group", "cluster_id", "est_total",
               "actual_finish", "dropped"});
  for (const auto& s : trace.schedule) {
    w.add({str(s.round), std::string(policy_name(policy)), str(s.client_id), str(s.rank),
           str(s.group), str(s.cluster_id), csv_real(s.est_total), csv_real(s.actual_finish),
           flag(s.dropped)});
  }
  return w;
}

CsvWriter accuracy_csv(const AccuracyTable& table) {
  CsvWriter w({"client_id", "model", "member", "accuracy"});
  for (const auto& e : table.entries) {
    w.add({str(e.client_id), e.model, flag(e.member), csv_real(e.accuracy)});
  }
  for (std::size_t i = 0; i < table.clients.size(); ++i) {
    w.add({str(table.clients[i]), "max_acc", "0", csv_real(table.max_acc[i])});
  }
  return w;
}

CsvWriter partition_csv(const SimulationContext& ctx, const ExperimentState& state) {
  CsvWriter w({"client_id", "cluster_id", "ground_truth"});
  for (int k : state.tree.clients()) {
    w.add({str(k), str(state.tree.cluster_of(k)),
           str(ctx.data.ground_truth_cluster.at(static_cast<std::size_t>(k)))});
  }
  return w;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return fnv1a(ss.str());
}

namespace {

ordered_json base_manifest(const ExperimentConfig& config) {
  ordered_json m;
  m["seed"] = config.seed;
  m["config_hash"] = fmt::format("{:016x}", config_hash(config));
  m["policy"] = std::string(policy_name(config.policy));
  m["kernel"] = kernels::active().name;
  m["complete"] = false;
  return m;
}

void save_manifest(const fs::path& dir, const ordered_json& m) {
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

ExperimentResult simulate_to_dir(const ExperimentConfig& requested, const fs::path& dir,
                                 bool export_data) {
  auto config = requested;
  config.out.clear();
  fs::create_directories(dir);
  auto manifest = base_manifest(config);
  save_manifest(dir, manifest);
  try {
    write_text(dir / "config.txt", render_config(config));
    const auto ctx = SimulationContext::build(config);
    if (export_data) export_csv(ctx.data, dir / "data");
    auto result = run_experiment(ctx);
    const auto& t = result.trace;
    std::vector<std::pair<std::string, CsvWriter>> files;
    files.emplace_back("rounds.csv", rounds_csv(t));
    files.emplace_back("clusters.csv", clusters_csv(t));
    files.emplace_back("splits.csv", splits_csv(t));
    files.emplace_back("schedule.csv", schedule_csv(t, config.policy));
    files.emplace_back("accuracy.csv", accuracy_csv(t.accuracy));
    files.emplace_back("partition.csv", partition_csv(ctx, result.state));
    for (const auto& [name, w] : files) w.save(dir / name);

    fs::create_directories(dir / "models");
    std::vector<std::pair<std::string, const ModelParams*>> models = {{"feel", &result.state.root}};
    for (const auto& [id, m] : result.state.cluster_models) {
      models.emplace_back(fmt::format("cluster_{}", id), &m);
    }
    ordered_json hashes;
    hashes["config.txt"] = fmt::format("{:016x}", file_hash(dir / "config.txt"));
    for (const auto& [name, w] : files) {
      hashes[name] = fmt::format("{:016x}", fnv1a(w.str()));
    }
    for (const auto& [name, m] : models) {
      const auto bytes = serialize(*m);
      const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      write_text(dir / "models" / (name + ".bin"), view);
      hashes["models/" + name + ".bin"] = fmt::format("{:016x}", fnv1a(view));
    }

    manifest["stop_reason"] = std::string(stop_reason_name(t.stop));
    manifest["rounds"] = t.rounds.size();
    manifest["clock"] = t.rounds.empty() ? 0.0 : t.rounds.back().clock_end;
    manifest["clusters"] = result.state.tree.size();
    if (const auto r = t.first_split_round()) {
      manifest["first_split_round"] = *r;
      manifest["first_split_time"] = *t.first_split_time();
    } else {
      manifest["first_split_round"] = nullptr;
      manifest["first_split_time"] = nullptr;
    }
    if (t.stop == StopReason::non_finite) {
      manifest["failed_round"] = t.failed_round;
      manifest["error"] = t.error;
    }
    manifest["files"] = hashes;
    manifest["complete"] = true;
    save_manifest(dir, manifest);
    return result;
  } catch (const std::exception& e) {
    manifest["error"] = e.what();
    save_manifest(dir, manifest);
    throw;
  }
}

}  // namespace cflsim
