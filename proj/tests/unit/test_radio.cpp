#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cflsim/radio.hpp"
#include "helpers.hpp"

using namespace cflsim;
using testing_support::Gen;

namespace {

RadioConfig no_fading() {
  RadioConfig c;
  c.fading = Fading::none;
  return c;
}

ClientProfile profile_at(double distance) {
  ClientProfile p;
  p.distance_m = distance;
  return p;
}

}  // namespace

TEST(DrawGain, ReferenceDistanceGivesG0) {
  const auto cfg = no_fading();
  const double h = draw_gain(profile_at(2.0), cfg, 0, 1);
  EXPECT_NEAR(h * h, std::pow(10.0, -3.5), 1e-18);
  EXPECT_NEAR(h * h, 3.162e-4, 1e-7);
}

TEST(DrawGain, DoublingDistanceDropsSixteenfold) {
  const auto cfg = no_fading();
  for (double d : {2.0, 7.5, 40.0}) {
    const double a = draw_gain(profile_at(d), cfg, 0, 1), b = draw_gain(profile_at(2 * d), cfg, 0, 1);
    EXPECT_NEAR((a * a) / (b * b), 16.0, 1e-12);
  }
}

TEST(DrawGain, DeterministicInSeedRoundClient) {
  RadioConfig cfg;
  auto p = profile_at(30.0);
  p.client_id = 4;
  EXPECT_EQ(draw_gain(p, cfg, 7, 11), draw_gain(p, cfg, 7, 11));
  EXPECT_NE(draw_gain(p, cfg, 7, 11), draw_gain(p, cfg, 8, 11));
  EXPECT_NE(draw_gain(p, cfg, 7, 11), draw_gain(p, cfg, 7, 12));
  auto q = p;
  q.client_id = 5;
  EXPECT_NE(draw_gain(p, cfg, 7, 11), draw_gain(q, cfg, 7, 11));
}

TEST(DrawGain, RayleighPowerHasUnitMean) {
  RadioConfig cfg;
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double xi = fading_power(cfg, i / 100, i % 100, 3);
    ASSERT_GE(xi, 0.0);
    sum += xi;
    sq += xi * xi;
  }
  const double mean = sum / n;
  // Exponential(1): variance 1, so 5 sigma of the sample mean is 5/sqrt(n).
  EXPECT_NEAR(mean, 1.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.05);
  EXPECT_EQ(fading_power(no_fading(), 3, 3, 3), 1.0);
}

TEST(PathLoss, StrictlyDecreasingInDistance) {
  const auto cfg = no_fading();
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    const double a = g.uniform(0.1, 500), b = a * g.uniform(1.001, 3.0);
    EXPECT_GT(path_loss(cfg, a), path_loss(cfg, b));
  }
}

TEST(DataRate, ZeroPowerGivesZeroRate) {
  EXPECT_EQ(data_rate(RadioConfig{}, 0.0, 0.01), 0.0);
}

TEST(DataRate, HandComputedExample) {
  RadioConfig cfg;  // 10 MHz over 10 sub-channels: 1 MHz each
  cfg.noise_power_w = 1e-6;
  // P h^2 / N0 = 100 with P = 1e-2, h^2 = 1e-2
  const double rate = data_rate(cfg, 1e-2, 0.1);
  EXPECT_NEAR(rate, 1e6 * std::log(101.0), 1e-3);
  EXPECT_NEAR(rate, 4.6151e6, 1e2);
}

TEST(DataRate, BinaryLogScalesByLn2) {
  RadioConfig cfg;
  const double ln_rate = data_rate(cfg, 1e-2, 0.1);
  cfg.rate_log = RateLog::binary;
  EXPECT_NEAR(data_rate(cfg, 1e-2, 0.1), ln_rate / std::log(2.0), 1e-6);
}

TEST(DataRate, MonotoneInPowerAndGain) {
  RadioConfig cfg;
  Gen g(2);
  for (int i = 0; i < 400; ++i) {
    const double p = g.uniform(1e-5, 1.0), h = g.uniform(1e-5, 1.0);
    const double up = g.uniform(1.01, 4.0);
    EXPECT_GT(data_rate(cfg, p * up, h), data_rate(cfg, p, h));
    EXPECT_GT(data_rate(cfg, p, h * up), data_rate(cfg, p, h));
  }
}

TEST(Latencies, ComputeTimeExample) {
  ClientProfile p;
  p.cycles_per_sample = 20;
  p.samples = 1000;
  p.cpu_hz = 2e9;
  const auto l = latencies(p, 1e6, 10, 1e6 * std::log(101.0));
  EXPECT_NEAR(l.cmp, 1e-4, 1e-18);
  EXPECT_NEAR(l.trans, 0.21668, 1e-5);
  EXPECT_EQ(l.total, l.trans + l.cmp);
}

TEST(Latencies, ZeroRateIsUnreachable) {
  const auto l = latencies(ClientProfile{}, 1e6, 1, 0.0);
  EXPECT_TRUE(std::isinf(l.trans));
  EXPECT_TRUE(std::isinf(l.total));
}

TEST(Latencies, DecompositionIsExact) {
  Gen g(3);
  for (int i = 0; i < 500; ++i) {
    ClientProfile p;
    p.samples = g.integer(1, 5000);
    p.cpu_hz = g.uniform(1e8, 1e10);
    p.cycles_per_sample = g.uniform(1, 100);
    const auto l = latencies(p, g.uniform(1e3, 1e7), g.integer(1, 20), g.uniform(1e-3, 1e7));
    EXPECT_EQ(l.total, l.trans + l.cmp);
    EXPECT_LE(std::abs(l.total - l.trans - l.cmp), 2e-16 * l.total);
  }
}

TEST(RoundLatency, Examples) {
  EXPECT_EQ(round_latency(std::vector{0.3}), 0.3);
  EXPECT_EQ(round_latency(std::vector{0.1, 0.5, 0.2}), 0.5);
  const std::vector<int> ids{3, 8, 9};
  const std::vector<double> t{0.1, kInfinity, 0.4};
  const auto dropped = round_latency(ids, t, true);
  EXPECT_EQ(dropped.value, 0.4);
  EXPECT_EQ(dropped.dropped, std::vector<int>{8});
  const auto kept = round_latency(ids, t, false);
  EXPECT_TRUE(std::isinf(kept.value));
  EXPECT_TRUE(kept.dropped.empty());
}

TEST(RoundLatency, Errors) {
  EXPECT_THROW(round_latency(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(round_latency(std::vector{kInfinity, kInfinity}), std::runtime_error);
  const std::vector<int> ids{1, 2};
  EXPECT_THROW(round_latency(ids, std::vector{kInfinity, kInfinity}, true), std::runtime_error);
}

TEST(RoundLatency, EqualsMaxOfFinite) {
  Gen g(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(1, 12);
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<double> t;
    double worst = -1;
    std::vector<int> inf_ids;
    for (int i = 0; i < n; ++i) {
      if (g.coin(0.2)) {
        t.push_back(kInfinity);
        inf_ids.push_back(i);
      } else {
        t.push_back(g.uniform(0, 10));
        worst = std::max(worst, t.back());
      }
    }
    if (worst < 0) continue;
    const auto r = round_latency(ids, t, true);
    EXPECT_EQ(r.value, worst);
    EXPECT_EQ(r.dropped, inf_ids);
  }
}

TEST(Profiles, DrawnWithinRanges) {
  ProfileRanges r;
  std::vector<int> counts{10, 20, 30, 40, 500, 60, 70, 80};
  const auto ps = draw_profiles(counts, r, 5);
  ASSERT_EQ(ps.size(), counts.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(ps[i].client_id, static_cast<int>(i));
    EXPECT_EQ(ps[i].samples, counts[i]);
    EXPECT_GE(ps[i].distance_m, r.distance_min_m);
    EXPECT_LE(ps[i].distance_m, r.distance_max_m);
    EXPECT_GE(ps[i].power_w, r.power_min_w * (1 - 1e-12));
    EXPECT_LE(ps[i].power_w, r.power_max_w * (1 + 1e-12));
    EXPECT_GE(ps[i].cpu_hz, r.cpu_min_hz);
    EXPECT_LE(ps[i].cpu_hz, r.cpu_max_hz);
    EXPECT_EQ(ps[i].cycles_per_sample, r.cycles_per_sample);
  }
  const auto again = draw_profiles(counts, r, 5);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].distance_m, again[i].distance_m);
}

TEST(Profiles, RangeValidation) {
  ProfileRanges r;
  r.distance_min_m = 50;
  r.distance_max_m = 10;
  EXPECT_THROW(r.validate(), std::invalid_argument);
  RadioConfig c;
  c.subchannels = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RadioConfig{};
  c.noise_power_w = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Units, DecibelConversions) {
  EXPECT_NEAR(dbm_to_watts(20), 0.1, 1e-15);
  EXPECT_NEAR(dbm_to_watts(-10), 1e-4, 1e-18);
  EXPECT_NEAR(db_to_linear(-35), 3.1622776601683794e-4, 1e-18);
  EXPECT_EQ(parse_fading("none"), Fading::none);
  EXPECT_EQ(parse_rate_log("log2"), RateLog::binary);
  EXPECT_THROW(parse_fading("rician"), std::invalid_argument);
}
