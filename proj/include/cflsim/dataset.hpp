#pragma once

// Synthetic federated datasets: Gaussian class blobs split across clients with
// imbalanced sizes, per-client label subsets and latent distribution ids.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace cflsim {

enum class Incongruence { none, label_permutation, feature_rotation };

Incongruence parse_incongruence(std::string_view name);
std::string_view incongruence_name(Incongruence mode);

struct DatasetSpec {
  int clients = 100;
  int latent_clusters = 4;
  int features = 16;
  int classes = 8;
  int samples_min = 50;
  int samples_max = 500;
  int labels_per_client = 8;
  int test_samples = 100;
  // Class means are drawn with norm close to class_separation; samples add
  // isotropic Gaussian noise of standard deviation feature_noise.
  double class_separation = 3.0;
  double feature_noise = 1.0;
  Incongruence incongruence = Incongruence::label_permutation;

  bool operator==(const DatasetSpec&) const = default;
};

// Row-major sample matrix with labels.
struct Samples {
  int features = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(features), static_cast<std::size_t>(features)};
  }
  std::span<double> row(std::size_t i) {
    return {x.data() + i * static_cast<std::size_t>(features), static_cast<std::size_t>(features)};
  }
  bool operator==(const Samples&) const = default;
};

struct ClientData {
  int client_id = 0;
  Samples train;
  Samples test;
  bool operator==(const ClientData&) const = default;
};

struct FederatedDataset {
  std::vector<ClientData> clients;
  int num_features = 0;
  int num_classes = 0;
  int num_latent = 1;
  // ground_truth_cluster[k] is the latent distribution id of client k.
  std::vector<int> ground_truth_cluster;

  std::size_t total_train_samples() const;
  bool operator==(const FederatedDataset&) const = default;
};

// Base data: every latent id shares the same blobs until apply_incongruence.
FederatedDataset generate(const DatasetSpec& spec, std::uint64_t seed);

// label_permutation: latent i maps label y to (y + i) mod C. Distinct latent ids
// differ by a cyclic shift with no fixed point, so no two of them agree on any
// label. Requires C >= 2 and M_true <= C.
// feature_rotation: latent i rotates the (x0, x1) plane by 2*pi*i/M_true
// (needs d >= 2, or d == 1 with M_true <= 2 where latent 1 reflects x0).
FederatedDataset apply_incongruence(FederatedDataset data, Incongruence mode);

// generate() followed by apply_incongruence(spec.incongruence).
FederatedDataset build_dataset(const DatasetSpec& spec, std::uint64_t seed);

// The orthogonal d x d transform (row-major) used for latent id `latent`.
std::vector<double> rotation_for_latent(int latent, int num_latent, int features);

// Indices into client.train, E reshuffled passes of ceil(D_k / b) batches.
// The last batch of each pass is short when b does not divide D_k.
using Batch = std::vector<std::size_t>;
std::vector<Batch> minibatches(const ClientData& client, int batch_size, int epochs,
                               std::uint64_t seed);

// One features and one labels CSV per client, columns prefixed by split.
void export_csv(const FederatedDataset& data, const std::filesystem::path& dir);

}  // namespace cflsim
