#include "cflsim/radio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cflsim/rng.hpp"

namespace cflsim {

Fading parse_fading(std::string_view name) {
  if (name == "rayleigh") return Fading::rayleigh;
  if (name == "none") return Fading::none;
  throw std::invalid_argument("unknown fading model: " + std::string(name));
}

std::string_view fading_name(Fading f) { return f == Fading::rayleigh ? "rayleigh" : "none"; }

RateLog parse_rate_log(std::string_view name) {
  if (name == "ln") return RateLog::natural;
  if (name == "log2") return RateLog::binary;
  throw std::invalid_argument("unknown rate log (expected ln or log2): " + std::string(name));
}

std::string_view rate_log_name(RateLog r) { return r == RateLog::natural ? "ln" : "log2"; }

void RadioConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(bandwidth_hz)) throw std::invalid_argument("bandwidth: must be > 0");
  if (subchannels < 1) {
    throw std::invalid_argument(
        "N: must be >= 1 (sub-channel cap: at most N uploads share the band at once)");
  }
  if (!positive(noise_power_w)) throw std::invalid_argument("noise_power: must be > 0");
  if (!positive(path_loss_g0)) throw std::invalid_argument("g0: must be > 0 (linear)");
  if (!positive(ref_distance_m)) throw std::invalid_argument("d0: must be > 0");
  if (!(model_bits >= 0.0) || !std::isfinite(model_bits)) {
    throw std::invalid_argument("model_bits: must be >= 0 (0 = derive from model)");
  }
}

void ProfileRanges::validate() const {
  auto range = [](double lo, double hi, const char* name) {
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
      throw std::invalid_argument(std::string(name) + ": range must satisfy 0 < min <= max");
    }
  };
  range(distance_min_m, distance_max_m, "distance");
  range(power_min_w, power_max_w, "power");
  range(cpu_min_hz, cpu_max_hz, "cpu");
  if (!(cycles_per_sample > 0.0) || !std::isfinite(cycles_per_sample)) {
    throw std::invalid_argument("cycles_per_sample: must be > 0");
  }
}

std::vector<ClientProfile> draw_profiles(std::span<const int> sample_counts,
                                         const ProfileRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  std::vector<ClientProfile> out;
  out.reserve(sample_counts.size());
  for (std::size_t k = 0; k < sample_counts.size(); ++k) {
    Rng rng = make_rng(seed, Stream::profile, k);
    ClientProfile p;
    p.client_id = static_cast<int>(k);
    p.samples = sample_counts[k];
    p.cycles_per_sample = ranges.cycles_per_sample;
    const double u_dist = uniform01(rng);
    const double u_cpu = uniform01(rng);
    const double u_pow = uniform01(rng);
    p.distance_m = ranges.distance_min_m + u_dist * (ranges.distance_max_m - ranges.distance_min_m);
    p.cpu_hz = ranges.cpu_min_hz + u_cpu * (ranges.cpu_max_hz - ranges.cpu_min_hz);
    p.power_w = ranges.power_min_w * std::pow(ranges.power_max_w / ranges.power_min_w, u_pow);
    p.power_w = std::clamp(p.power_w, ranges.power_min_w, ranges.power_max_w);
    out.push_back(p);
  }
  return out;
}

double path_loss(const RadioConfig& cfg, double distance_m) {
  const double ratio = cfg.ref_distance_m / distance_m;
  const double sq = ratio * ratio;
  return cfg.path_loss_g0 * sq * sq;
}

double fading_power(const RadioConfig& cfg, int round, int client_id, std::uint64_t seed) {
  if (cfg.fading == Fading::none) return 1.0;
  Rng rng = make_rng(seed, Stream::channel, static_cast<std::uint64_t>(round),
                     static_cast<std::uint64_t>(client_id));
  return unit_exponential(rng);
}

double draw_gain(const ClientProfile& profile, const RadioConfig& cfg, int round,
                 std::uint64_t seed) {
  return std::sqrt(path_loss(cfg, profile.distance_m) *
                   fading_power(cfg, round, profile.client_id, seed));
}

double data_rate(const RadioConfig& cfg, double power_w, double gain) {
  const double snr = power_w * gain * gain / cfg.noise_power_w;
  const double capacity = cfg.rate_log == RateLog::natural ? std::log1p(snr) : std::log2(1.0 + snr);
  return cfg.subchannel_bandwidth_hz() * capacity;
}

Latency latencies(const ClientProfile& profile, double model_bits, int epochs, double rate) {
  Latency l;
  l.trans = rate > 0.0 ? model_bits / rate : kInfinity;
  l.cmp = static_cast<double>(epochs) * profile.cycles_per_sample *
          static_cast<double>(profile.samples) / profile.cpu_hz;
  l.total = l.trans + l.cmp;
  return l;
}

double round_latency(std::span<const double> totals) {
  if (totals.empty()) throw std::invalid_argument("round_latency: empty selection");
  double worst = -kInfinity;
  for (double t : totals) {
    if (std::isfinite(t)) worst = std::max(worst, t);
  }
  if (worst == -kInfinity) throw std::runtime_error("round_latency: every client unreachable");
  return worst;
}

RoundLatency round_latency(std::span<const int> ids, std::span<const double> totals,
                           bool drop_infinite) {
  if (ids.size() != totals.size()) throw std::invalid_argument("round_latency: size mismatch");
  if (!drop_infinite) {
    const bool any_infinite =
        std::any_of(totals.begin(), totals.end(), [](double t) { return !std::isfinite(t); });
    const double finite_max = round_latency(totals);
    return {any_infinite ? kInfinity : finite_max, {}};
  }
  RoundLatency out;
  std::vector<double> finite;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (std::isfinite(totals[i])) {
      finite.push_back(totals[i]);
    } else {
      out.dropped.push_back(ids[i]);
    }
  }
  if (totals.empty()) throw std::invalid_argument("round_latency: empty selection");
  if (finite.empty()) throw std::runtime_error("round_latency: every client unreachable");
  out.value = *std::max_element(finite.begin(), finite.end());
  return out;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace cflsim
