#include "cflsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace cflsim {

Csi parse_csi(std::string_view name) {
  if (name == "exact") return Csi::exact;
  if (name == "stale") return Csi::stale;
  throw ConfigError("csi: expected exact or stale, got '" + std::string(name) + "'");
}

std::string_view csi_name(Csi c) { return c == Csi::exact ? "exact" : "stale"; }

SplitEvidence parse_split_evidence(std::string_view name) {
  if (name == "cached") return SplitEvidence::cached;
  if (name == "fresh") return SplitEvidence::fresh;
  throw ConfigError("split_evidence: expected cached or fresh, got '" + std::string(name) + "'");
}

std::string_view split_evidence_name(SplitEvidence e) {
  return e == SplitEvidence::cached ? "cached" : "fresh";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Leading number and the (trimmed) unit suffix after it.
std::pair<double, std::string_view> split_number(std::string_view text) {
  text = trim(text);
  std::string_view body = text;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc() || ptr == body.data()) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return {value, trim(std::string_view(ptr, static_cast<std::size_t>(body.data() + body.size() - ptr)))};
}

double scaled(std::string_view text, std::initializer_list<std::pair<std::string_view, double>> units) {
  const auto [v, unit] = split_number(text);
  for (const auto& [name, factor] : units) {
    if (unit == name) return v * factor;
  }
  throw ConfigError(fmt::format("unknown unit '{}' in '{}'", unit, text));
}

}  // namespace

double parse_power(std::string_view text) {
  const auto [v, unit] = split_number(text);
  if (unit.empty() || unit == "W") return v;
  if (unit == "mW") return v * 1e-3;
  if (unit == "dBm") return dbm_to_watts(v);
  if (unit == "dBW") return db_to_linear(v);
  throw ConfigError(fmt::format("unknown power unit '{}' in '{}'", unit, text));
}

double parse_gain(std::string_view text) {
  const auto [v, unit] = split_number(text);
  if (unit.empty()) return v;
  if (unit == "dB") return db_to_linear(v);
  throw ConfigError(fmt::format("unknown gain unit '{}' in '{}'", unit, text));
}

double parse_frequency(std::string_view text) {
  return scaled(text, {{"", 1.0}, {"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}});
}

double parse_distance(std::string_view text) {
  return scaled(text, {{"", 1.0}, {"m", 1.0}, {"km", 1e3}});
}

double parse_duration(std::string_view text) {
  return scaled(text, {{"", 1.0}, {"s", 1.0}, {"ms", 1e-3}, {"min", 60.0}, {"h", 3600.0}});
}

double parse_bits(std::string_view text) {
  if (trim(text) == "auto") return 0.0;
  return scaled(text, {{"", 1.0}, {"bit", 1.0}, {"kbit", 1e3}, {"Mbit", 1e6}});
}

namespace {

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, text));
  }
  return value;
}

double parse_plain(std::string_view key, std::string_view text) {
  const auto [v, unit] = split_number(text);
  if (!unit.empty()) throw ConfigError(fmt::format("{}: unexpected unit '{}'", key, unit));
  return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string_view key;
  Setter set;
  Getter get;  // empty for write-only aliases
};

#define INT_FIELD(name, member)                                                       \
  Field {                                                                             \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = parse_integer<int>(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }           \
  }
#define REAL_FIELD(name, member, parser)                                              \
  Field {                                                                             \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = parser(v); },     \
        [](const ExperimentConfig& c) { return num(c.member); }                      \
  }
#define PLAIN_FIELD(name, member)                                                     \
  Field {                                                                             \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = parse_plain(name, v); }, \
        [](const ExperimentConfig& c) { return num(c.member); }                      \
  }

template <typename E>
E named(std::string_view key, std::string_view v, E (*parse)(std::string_view)) {
  try {
    return parse(trim(v));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", [](ExperimentConfig& c, std::string_view v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"out", [](ExperimentConfig& c, std::string_view v) { c.out = std::string(trim(v)); },
       [](const ExperimentConfig& c) { return c.out.empty() ? std::string("\"\"") : c.out; }},
      INT_FIELD("clients", dataset.clients),
      INT_FIELD("latent_clusters", dataset.latent_clusters),
      INT_FIELD("features", dataset.features),
      INT_FIELD("classes", dataset.classes),
      INT_FIELD("samples_min", dataset.samples_min),
      INT_FIELD("samples_max", dataset.samples_max),
      INT_FIELD("labels_per_client", dataset.labels_per_client),
      INT_FIELD("test_samples", dataset.test_samples),
      PLAIN_FIELD("class_separation", dataset.class_separation),
      PLAIN_FIELD("feature_noise", dataset.feature_noise),
      {"incongruence",
       [](ExperimentConfig& c, std::string_view v) {
         c.dataset.incongruence = named("incongruence", v, parse_incongruence);
       },
       [](const ExperimentConfig& c) { return std::string(incongruence_name(c.dataset.incongruence)); }},
      REAL_FIELD("bandwidth", radio.bandwidth_hz, parse_frequency),
      INT_FIELD("N", radio.subchannels),
      REAL_FIELD("noise_power", radio.noise_power_w, parse_power),
      REAL_FIELD("g0", radio.path_loss_g0, parse_gain),
      REAL_FIELD("d0", radio.ref_distance_m, parse_distance),
      REAL_FIELD("distance_min", profiles.distance_min_m, parse_distance),
      REAL_FIELD("distance_max", profiles.distance_max_m, parse_distance),
      REAL_FIELD("power_min", profiles.power_min_w, parse_power),
      REAL_FIELD("power_max", profiles.power_max_w, parse_power),
      {"power",
       [](ExperimentConfig& c, std::string_view v) {
         c.profiles.power_min_w = c.profiles.power_max_w = parse_power(v);
       },
       {}},
      REAL_FIELD("cpu_min", profiles.cpu_min_hz, parse_frequency),
      REAL_FIELD("cpu_max", profiles.cpu_max_hz, parse_frequency),
      PLAIN_FIELD("cycles_per_sample", profiles.cycles_per_sample),
      {"model_bits", [](ExperimentConfig& c, std::string_view v) { c.radio.model_bits = parse_bits(v); },
       [](const ExperimentConfig& c) {
         return c.radio.model_bits == 0.0 ? std::string("auto") : num(c.radio.model_bits);
       }},
      {"fading",
       [](ExperimentConfig& c, std::string_view v) { c.radio.fading = named("fading", v, parse_fading); },
       [](const ExperimentConfig& c) { return std::string(fading_name(c.radio.fading)); }},
      {"rate_log",
       [](ExperimentConfig& c, std::string_view v) { c.radio.rate_log = named("rate_log", v, parse_rate_log); },
       [](const ExperimentConfig& c) { return std::string(rate_log_name(c.radio.rate_log)); }},
      {"csi", [](ExperimentConfig& c, std::string_view v) { c.csi = parse_csi(trim(v)); },
       [](const ExperimentConfig& c) { return std::string(csi_name(c.csi)); }},
      {"model", [](ExperimentConfig& c, std::string_view v) { c.model = named("model", v, parse_model_kind); },
       [](const ExperimentConfig& c) { return std::string(model_kind_name(c.model)); }},
      INT_FIELD("hidden", hidden),
      INT_FIELD("epochs", train.epochs),
      INT_FIELD("batch_size", train.batch_size),
      PLAIN_FIELD("learning_rate", train.learning_rate),
      {"policy", [](ExperimentConfig& c, std::string_view v) { c.policy = named("policy", v, parse_policy); },
       [](const ExperimentConfig& c) { return std::string(policy_name(c.policy)); }},
      {"deadline",
       [](ExperimentConfig& c, std::string_view v) {
         try {
           c.deadline = DeadlinePolicy::parse(trim(v));
         } catch (const std::exception& e) {
           throw ConfigError(fmt::format("deadline: {}", e.what()));
         }
       },
       [](const ExperimentConfig& c) { return c.deadline.to_string(); }},
      PLAIN_FIELD("eps1", split.eps1),
      PLAIN_FIELD("eps2", split.eps2),
      {"exhaustive_limit",
       [](ExperimentConfig& c, std::string_view v) {
         c.split.exhaustive_limit = parse_integer<std::size_t>("exhaustive_limit", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.split.exhaustive_limit); }},
      {"gamma_reference",
       [](ExperimentConfig& c, std::string_view v) {
         c.split.gamma_reference = named("gamma_reference", v, parse_gamma_reference);
       },
       [](const ExperimentConfig& c) { return std::string(gamma_reference_name(c.split.gamma_reference)); }},
      {"split_evidence",
       [](ExperimentConfig& c, std::string_view v) { c.split_evidence = parse_split_evidence(trim(v)); },
       [](const ExperimentConfig& c) { return std::string(split_evidence_name(c.split_evidence)); }},
      INT_FIELD("rounds", rounds),
      REAL_FIELD("time_budget", time_budget_s, parse_duration),
      PLAIN_FIELD("convergence_tol", convergence_tol),
      INT_FIELD("patience", patience),
      INT_FIELD("eval_clients", eval_clients),
  };
  return table;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef PLAIN_FIELD

[[noreturn]] void range_error(std::string_view key, std::string_view what) {
  throw ConfigError(fmt::format("{}: {}", key, what));
}

}  // namespace

ModelShape ExperimentConfig::model_shape() const {
  ModelShape s;
  s.kind = model;
  s.features = dataset.features;
  s.classes = dataset.classes;
  s.hidden = model == ModelKind::mlp ? hidden : 0;
  return s;
}

double ExperimentConfig::model_bits() const {
  if (radio.model_bits > 0.0) return radio.model_bits;
  return static_cast<double>(serialized_size_bits(model_shape()));
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  if (d.clients < 2) range_error("clients", "must be >= 2");
  if (d.latent_clusters < 1) range_error("latent_clusters", "must be >= 1");
  if (d.clients < d.latent_clusters) range_error("clients", "must be >= latent_clusters");
  if (d.features < 1) range_error("features", "must be >= 1");
  if (d.classes < 2) range_error("classes", "must be >= 2");
  if (d.samples_min < 1) range_error("samples_min", "must be >= 1");
  if (d.samples_max < d.samples_min) range_error("samples_max", "must be >= samples_min");
  if (d.labels_per_client < 1 || d.labels_per_client > d.classes) {
    range_error("labels_per_client", "must be in [1, classes]");
  }
  if (d.test_samples < 1) range_error("test_samples", "must be >= 1");
  if (!(d.class_separation >= 0.0)) range_error("class_separation", "must be >= 0");
  if (!(d.feature_noise > 0.0)) range_error("feature_noise", "must be > 0");
  if (d.incongruence == Incongruence::label_permutation && d.latent_clusters > d.classes) {
    range_error("latent_clusters", "label_permutation needs latent_clusters <= classes");
  }
  if (d.incongruence == Incongruence::feature_rotation && d.features < 2 && d.latent_clusters > 2) {
    range_error("latent_clusters", "feature_rotation with one feature supports at most 2");
  }

  const auto& r = radio;
  if (!(r.bandwidth_hz > 0.0) || !std::isfinite(r.bandwidth_hz)) range_error("bandwidth", "must be > 0");
  if (r.subchannels < 1) {
    range_error("N", "must be >= 1 (sub-channel cap: at most N uploads share the band at once)");
  }
  if (!(r.noise_power_w > 0.0)) range_error("noise_power", "must be > 0");
  if (!(r.path_loss_g0 > 0.0)) range_error("g0", "must be > 0");
  if (!(r.ref_distance_m > 0.0)) range_error("d0", "must be > 0");
  if (!(r.model_bits >= 0.0)) range_error("model_bits", "must be > 0 or auto");

  const auto& p = profiles;
  if (!(p.distance_min_m > 0.0)) range_error("distance_min", "must be > 0");
  if (!(p.distance_max_m >= p.distance_min_m)) range_error("distance_max", "must be >= distance_min");
  if (!(p.power_min_w > 0.0)) range_error("power_min", "must be > 0");
  if (!(p.power_max_w >= p.power_min_w)) range_error("power_max", "must be >= power_min");
  if (!(p.cpu_min_hz > 0.0)) range_error("cpu_min", "must be > 0");
  if (!(p.cpu_max_hz >= p.cpu_min_hz)) range_error("cpu_max", "must be >= cpu_min");
  if (!(p.cycles_per_sample > 0.0)) range_error("cycles_per_sample", "must be > 0");

  if (model == ModelKind::mlp && hidden < 1) range_error("hidden", "must be >= 1");
  if (train.epochs < 1) range_error("epochs", "must be >= 1");
  if (train.batch_size < 1 || train.batch_size > d.samples_min) {
    range_error("batch_size", "must be in [1, samples_min]");
  }
  if (!(train.learning_rate > 0.0) || !std::isfinite(train.learning_rate)) {
    range_error("learning_rate", "must be > 0");
  }
  if (deadline.kind == DeadlinePolicy::Kind::quantile && !(deadline.q >= 0.0 && deadline.q <= 1.0)) {
    range_error("deadline", "quantile must be in [0, 1]");
  }
  if (!(split.eps1 > 0.0)) range_error("eps1", "must be > 0");
  if (!(split.eps2 > 0.0)) range_error("eps2", "must be > 0");
  if (split.exhaustive_limit < 2 || split.exhaustive_limit > 24) {
    range_error("exhaustive_limit", "must be in [2, 24]");
  }
  if (rounds < 0) range_error("rounds", "must be >= 0");
  if (!(time_budget_s > 0.0)) range_error("time_budget", "must be > 0");
  if (!(convergence_tol >= 0.0)) range_error("convergence_tol", "must be >= 0");
  if (patience < 1) range_error("patience", "must be >= 1");
  if (eval_clients < 0 || eval_clients > d.clients) range_error("eval_clients", "must be in [0, clients]");
}

ExperimentConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("malformed config: {}", e.what()));
  }
  ExperimentConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping of key: value");
  std::map<std::string_view, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(fmt::format("unknown key '{}'", key));
    if (!kv.second.IsScalar()) throw ConfigError(fmt::format("{}: expected a scalar", key));
    it->second->set(c, kv.second.Scalar());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    if (!f.get) continue;
    out += fmt::format("{}: {}\n", f.key, f.get(config));
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : render_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cflsim
