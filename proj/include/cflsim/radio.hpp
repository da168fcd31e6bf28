#pragma once

// Wireless edge latency model. All quantities are linear SI units.

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace cflsim {

enum class Fading { rayleigh, none };
enum class RateLog { natural, binary };

Fading parse_fading(std::string_view name);
std::string_view fading_name(Fading f);
RateLog parse_rate_log(std::string_view name);
std::string_view rate_log_name(RateLog r);

struct RadioConfig {
  double bandwidth_hz = 10e6;
  int subchannels = 10;
  double noise_power_w = 1e-6;
  double path_loss_g0 = 3.1622776601683794e-4;  // -35 dB
  double ref_distance_m = 2.0;
  // Model size in bits; 0 means "derive from the serialized model".
  double model_bits = 0.0;
  Fading fading = Fading::rayleigh;
  RateLog rate_log = RateLog::natural;

  double subchannel_bandwidth_hz() const { return bandwidth_hz / subchannels; }
  void validate() const;
  bool operator==(const RadioConfig&) const = default;
};

// Ranges that per-client resources are drawn from.
struct ProfileRanges {
  double distance_min_m = 20.0;
  double distance_max_m = 100.0;
  double power_min_w = 1e-4;  // -10 dBm
  double power_max_w = 0.1;   // 20 dBm
  double cpu_min_hz = 1e9;
  double cpu_max_hz = 9e9;
  double cycles_per_sample = 20.0;

  void validate() const;
  bool operator==(const ProfileRanges&) const = default;
};

struct ClientProfile {
  int client_id = 0;
  int samples = 1;
  double cpu_hz = 1e9;
  double cycles_per_sample = 20.0;
  double power_w = 0.01;
  double distance_m = 50.0;
};

// Distances and CPU speeds are uniform on their ranges; transmit power is
// uniform in dBm, i.e. log-uniform in watts.
std::vector<ClientProfile> draw_profiles(std::span<const int> sample_counts,
                                         const ProfileRanges& ranges, std::uint64_t seed);

// g0 * (d0 / d)^4
double path_loss(const RadioConfig& cfg, double distance_m);

// Fading power xi: unit-mean exponential keyed by (seed, round, client), or 1.
double fading_power(const RadioConfig& cfg, int round, int client_id, std::uint64_t seed);

// Channel amplitude h with h^2 = path_loss * xi.
double draw_gain(const ClientProfile& profile, const RadioConfig& cfg, int round,
                 std::uint64_t seed);

// (B / N) * log(1 + P h^2 / N0), natural log unless cfg.rate_log is binary.
double data_rate(const RadioConfig& cfg, double power_w, double gain);

struct Latency {
  double trans = 0.0;
  double cmp = 0.0;
  double total = 0.0;
  bool operator==(const Latency&) const = default;
};

// T_trans = bits / rate (infinite when rate <= 0), T_cmp = E * phi * D / f.
Latency latencies(const ClientProfile& profile, double model_bits, int epochs, double rate);

struct RoundLatency {
  double value = 0.0;
  std::vector<int> dropped;  // ids with infinite latency, when dropping is enabled
};

// Slowest reachable selected client (infinite totals are skipped). Throws when
// every total is infinite.
double round_latency(std::span<const double> totals);
// Without drop_infinite an unreachable client makes the round infinite; with it
// those ids are reported in `dropped` and the finite maximum is returned.
RoundLatency round_latency(std::span<const int> ids, std::span<const double> totals,
                           bool drop_infinite);

double dbm_to_watts(double dbm);
double db_to_linear(double db);

constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace cflsim
