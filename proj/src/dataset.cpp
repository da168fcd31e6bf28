#include "cflsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "cflsim/rng.hpp"

namespace cflsim {

Incongruence parse_incongruence(std::string_view name) {
  if (name == "none") return Incongruence::none;
  if (name == "label_permutation") return Incongruence::label_permutation;
  if (name == "feature_rotation") return Incongruence::feature_rotation;
  throw std::invalid_argument("unknown incongruence mode: " + std::string(name));
}

std::string_view incongruence_name(Incongruence mode) {
  switch (mode) {
    case Incongruence::none:
      return "none";
    case Incongruence::label_permutation:
      return "label_permutation";
    case Incongruence::feature_rotation:
      return "feature_rotation";
  }
  return "none";
}

std::size_t FederatedDataset::total_train_samples() const {
  std::size_t total = 0;
  for (const auto& c : clients) total += c.train.size();
  return total;
}

namespace {

void validate(const DatasetSpec& spec) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("dataset: " + msg); };
  if (spec.clients < 2) fail("clients must be >= 2");
  if (spec.latent_clusters < 1) fail("latent_clusters must be >= 1");
  if (spec.clients < spec.latent_clusters) fail("clients must be >= latent_clusters");
  if (spec.features < 1) fail("features must be >= 1");
  if (spec.classes < 2) fail("classes must be >= 2");
  if (spec.samples_min < 1) fail("samples_min must be >= 1");
  if (spec.samples_max < spec.samples_min) fail("samples_max must be >= samples_min");
  if (spec.labels_per_client < 1) fail("labels_per_client must be >= 1");
  if (spec.labels_per_client > spec.classes) fail("labels_per_client must be <= classes");
  if (spec.test_samples < 1) fail("test_samples must be >= 1");
  if (!(spec.class_separation >= 0.0) || !std::isfinite(spec.class_separation)) {
    fail("class_separation must be finite and >= 0");
  }
  if (!(spec.feature_noise > 0.0) || !std::isfinite(spec.feature_noise)) {
    fail("feature_noise must be finite and > 0");
  }
}

Samples draw_samples(int count, const std::vector<int>& labels,
                     const std::vector<std::vector<double>>& means, double noise, Rng& rng) {
  Samples s;
  s.features = static_cast<int>(means.front().size());
  s.x.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(s.features));
  s.y.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label =
        labels[static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(labels.size()))];
    s.y[static_cast<std::size_t>(i)] = label;
    auto row = s.row(static_cast<std::size_t>(i));
    const auto& mu = means[static_cast<std::size_t>(label)];
    for (int j = 0; j < s.features; ++j) {
      row[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)] + noise * standard_normal(rng);
    }
  }
  return s;
}

void rotate_rows(Samples& s, const std::vector<double>& transform) {
  const auto d = static_cast<std::size_t>(s.features);
  std::vector<double> tmp(d);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto row = s.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += transform[r * d + c] * row[c];
      tmp[r] = acc;
    }
    std::copy(tmp.begin(), tmp.end(), row.begin());
  }
}

}  // namespace

FederatedDataset generate(const DatasetSpec& spec, std::uint64_t seed) {
  validate(spec);
  FederatedDataset data;
  data.num_features = spec.features;
  data.num_classes = spec.classes;
  data.num_latent = spec.latent_clusters;

  Rng blob_rng = make_rng(seed, Stream::dataset);
  const double mean_scale = spec.class_separation / std::sqrt(static_cast<double>(spec.features));
  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.classes),
                                         std::vector<double>(static_cast<std::size_t>(spec.features)));
  for (auto& mu : means) {
    for (auto& v : mu) v = mean_scale * standard_normal(blob_rng);
  }

  data.clients.reserve(static_cast<std::size_t>(spec.clients));
  data.ground_truth_cluster.resize(static_cast<std::size_t>(spec.clients));
  for (int k = 0; k < spec.clients; ++k) {
    data.ground_truth_cluster[static_cast<std::size_t>(k)] = k % spec.latent_clusters;

    Rng label_rng = make_rng(seed, Stream::label_subset, static_cast<std::uint64_t>(k));
    std::vector<int> labels(static_cast<std::size_t>(spec.classes));
    std::iota(labels.begin(), labels.end(), 0);
    std::shuffle(labels.begin(), labels.end(), label_rng);
    labels.resize(static_cast<std::size_t>(spec.labels_per_client));
    std::sort(labels.begin(), labels.end());

    Rng sample_rng = make_rng(seed, Stream::client_samples, static_cast<std::uint64_t>(k));
    const auto span = static_cast<std::uint64_t>(spec.samples_max - spec.samples_min + 1);
    const int size = spec.samples_min + static_cast<int>(sample_rng() % span);

    ClientData client;
    client.client_id = k;
    client.train = draw_samples(size, labels, means, spec.feature_noise, sample_rng);
    client.test = draw_samples(spec.test_samples, labels, means, spec.feature_noise, sample_rng);
    data.clients.push_back(std::move(client));
  }
  return data;
}

std::vector<double> rotation_for_latent(int latent, int num_latent, int features) {
  const auto d = static_cast<std::size_t>(features);
  std::vector<double> m(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 1.0;
  if (latent == 0) return m;
  if (features == 1) {
    if (num_latent > 2) {
      throw std::invalid_argument("feature_rotation with one feature supports at most 2 latent ids");
    }
    m[0] = -1.0;
    return m;
  }
  const double angle = 2.0 * std::numbers::pi * latent / num_latent;
  // Exact values at quarter turns so 90/180/270 degree transforms are clean.
  double c = std::cos(angle), s = std::sin(angle);
  if (4 * latent % num_latent == 0) {
    const int quarter = (4 * latent / num_latent) % 4;
    constexpr double cs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    c = cs[quarter][0];
    s = cs[quarter][1];
  }
  m[0] = c;
  m[1] = -s;
  m[d] = s;
  m[d + 1] = c;
  return m;
}

FederatedDataset apply_incongruence(FederatedDataset data, Incongruence mode) {
  if (mode == Incongruence::none || data.num_latent == 1) return data;
  if (mode == Incongruence::label_permutation) {
    if (data.num_classes < 2) {
      throw std::invalid_argument("label_permutation requires at least 2 classes");
    }
    if (data.num_latent > data.num_classes) {
      throw std::invalid_argument("label_permutation requires latent_clusters <= classes");
    }
    for (auto& client : data.clients) {
      const int shift = data.ground_truth_cluster[static_cast<std::size_t>(client.client_id)];
      for (Samples* s : {&client.train, &client.test}) {
        for (auto& y : s->y) y = (y + shift) % data.num_classes;
      }
    }
    return data;
  }
  std::vector<std::vector<double>> transforms;
  for (int i = 0; i < data.num_latent; ++i) {
    transforms.push_back(rotation_for_latent(i, data.num_latent, data.num_features));
  }
  for (auto& client : data.clients) {
    const int latent = data.ground_truth_cluster[static_cast<std::size_t>(client.client_id)];
    if (latent == 0) continue;
    rotate_rows(client.train, transforms[static_cast<std::size_t>(latent)]);
    rotate_rows(client.test, transforms[static_cast<std::size_t>(latent)]);
  }
  return data;
}

FederatedDataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  return apply_incongruence(generate(spec, seed), spec.incongruence);
}

std::vector<Batch> minibatches(const ClientData& client, int batch_size, int epochs,
                               std::uint64_t seed) {
  const std::size_t n = client.train.size();
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > n) {
    throw std::invalid_argument(
        fmt::format("minibatches: batch size {} outside [1, {}]", batch_size, n));
  }
  if (epochs < 1) throw std::invalid_argument("minibatches: epochs must be >= 1");
  const auto b = static_cast<std::size_t>(batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng{seed};
  std::vector<Batch> batches;
  batches.reserve(static_cast<std::size_t>(epochs) * ((n + b - 1) / b));
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += b) {
      const std::size_t stop = std::min(n, start + b);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
  }
  return batches;
}

void export_csv(const FederatedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& client : data.clients) {
    std::ofstream features(dir / fmt::format("client_{:04d}_features.csv", client.client_id));
    std::ofstream labels(dir / fmt::format("client_{:04d}_labels.csv", client.client_id));
    features << "split";
    for (int j = 0; j < data.num_features; ++j) features << ",x" << j;
    features << '\n';
    labels << "split,label\n";
    const std::pair<const char*, const Samples*> splits[] = {{"train", &client.train},
                                                             {"test", &client.test}};
    for (const auto& [name, s] : splits) {
      for (std::size_t i = 0; i < s->size(); ++i) {
        features << name;
        for (double v : s->row(i)) features << ',' << fmt::format("{:.17g}", v);
        features << '\n';
        labels << name << ',' << s->y[i] << '\n';
      }
    }
    if (!features || !labels) {
      throw std::runtime_error("export_csv: failed writing client " +
                               std::to_string(client.client_id));
    }
  }
}

}  // namespace cflsim
