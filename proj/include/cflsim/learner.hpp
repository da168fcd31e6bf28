#pragma once

// Small softmax classifiers with analytic gradients, local minibatch SGD,
// evaluation and sample-weighted federated averaging.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cflsim/dataset.hpp"

namespace cflsim {

enum class ModelKind { logistic, mlp };

ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind kind);

// logistic: W (classes x features), then bias (classes).
// mlp: W1 (hidden x features), b1 (hidden), W2 (classes x hidden), b2 (classes),
//      tanh hidden activation.
struct ModelShape {
  ModelKind kind = ModelKind::logistic;
  int features = 0;
  int classes = 0;
  int hidden = 0;

  std::size_t num_params() const;
  std::vector<std::uint32_t> layer_dims() const;
  static ModelShape from_layer_dims(std::span<const std::uint32_t> dims);
  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

struct ModelParams {
  ModelShape shape;
  std::vector<double> weights;

  bool operator==(const ModelParams&) const = default;
};

struct ModelUpdate {
  int client_id = 0;
  std::vector<double> delta;
  int num_samples = 1;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 50;
  double learning_rate = 0.05;

  bool operator==(const TrainOptions&) const = default;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear models start at exact zeros; MLP weights are small seeded Gaussians.
ModelParams init_model(const ModelShape& shape, std::uint64_t seed);

// Mean cross-entropy over the selected rows (probabilities clamped at 1e-12 in
// the loss) and its gradient.
LossGradient loss_and_gradient(const ModelParams& model, const Samples& data,
                               std::span<const std::size_t> rows);
LossGradient loss_and_gradient(const ModelParams& model, const Samples& data);
double mean_loss(const ModelParams& model, const Samples& data);

ModelUpdate local_train(const ModelParams& model, const ClientData& client,
                        const TrainOptions& options, std::uint64_t seed);

int predict(const ModelParams& model, std::span<const double> x);
double evaluate(const ModelParams& model, const Samples& test);

// base + sum_k (D_k / sum_j D_j) delta_k, summed in list order.
ModelParams fedavg(const ModelParams& base, std::span<const ModelUpdate> updates);

// Shape header (u32 dim count, u32 dims...) followed by little-endian f64 weights.
std::vector<std::uint8_t> serialize(const ModelParams& model);
ModelParams deserialize(std::span<const std::uint8_t> bytes);
std::size_t serialized_size_bits(const ModelShape& shape);

bool all_finite(std::span<const double> v);

}  // namespace cflsim
