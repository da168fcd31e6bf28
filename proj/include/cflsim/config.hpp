#pragma once

// Experiment configuration: a flat YAML mapping of keys to scalars. Missing keys
// take the defaults below; physical quantities accept unit suffixes and are
// stored in linear SI units.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cflsim/clusterer.hpp"
#include "cflsim/dataset.hpp"
#include "cflsim/learner.hpp"
#include "cflsim/radio.hpp"
#include "cflsim/scheduler.hpp"

namespace cflsim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// exact: schedule on this round's channel gains. stale: estimate with the
// previous round's gains while the round itself runs on the current ones.
enum class Csi { exact, stale };

// When a cluster counts as having seen every member's distribution.
//   fresh: every member was aggregated this round.
//   cached: every member has an aggregated update since the cluster was
//     created, and at least one of them is from this round.
enum class SplitEvidence { cached, fresh };

Csi parse_csi(std::string_view name);
std::string_view csi_name(Csi c);
SplitEvidence parse_split_evidence(std::string_view name);
std::string_view split_evidence_name(SplitEvidence e);

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out;

  DatasetSpec dataset;
  RadioConfig radio;
  ProfileRanges profiles;
  Csi csi = Csi::exact;

  ModelKind model = ModelKind::logistic;
  int hidden = 16;
  TrainOptions train;

  Policy policy = Policy::proposed;
  DeadlinePolicy deadline;

  SplitParams split;
  SplitEvidence split_evidence = SplitEvidence::cached;

  int rounds = 200;
  double time_budget_s = kInfinity;
  double convergence_tol = 1e-2;
  int patience = 5;
  int eval_clients = 0;  // 0: every client

  ModelShape model_shape() const;
  // ζ in bits: radio.model_bits, or the serialized model size when that is 0.
  double model_bits() const;

  // Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key, values in SI units at full precision.
std::string render_config(const ExperimentConfig& config);

// "20dBm" -> 0.1, "-35dB" -> 3.16e-4, "10MHz" -> 1e7 ... throws ConfigError.
double parse_power(std::string_view text);
double parse_gain(std::string_view text);
double parse_frequency(std::string_view text);
double parse_distance(std::string_view text);
double parse_duration(std::string_view text);
double parse_bits(std::string_view text);

// FNV-1a over the rendered config.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace cflsim
