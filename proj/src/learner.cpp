#include "cflsim/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "cflsim/kernels.hpp"
#include "cflsim/rng.hpp"

namespace cflsim {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logistic") return ModelKind::logistic;
  if (name == "mlp") return ModelKind::mlp;
  throw std::invalid_argument("unknown model kind: " + std::string(name));
}

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::logistic ? "logistic" : "mlp";
}

std::size_t ModelShape::num_params() const {
  const auto d = static_cast<std::size_t>(features);
  const auto c = static_cast<std::size_t>(classes);
  const auto h = static_cast<std::size_t>(hidden);
  if (kind == ModelKind::logistic) return c * (d + 1);
  return h * (d + 1) + c * (h + 1);
}

std::vector<std::uint32_t> ModelShape::layer_dims() const {
  if (kind == ModelKind::logistic) {
    return {static_cast<std::uint32_t>(features), static_cast<std::uint32_t>(classes)};
  }
  return {static_cast<std::uint32_t>(features), static_cast<std::uint32_t>(hidden),
          static_cast<std::uint32_t>(classes)};
}

ModelShape ModelShape::from_layer_dims(std::span<const std::uint32_t> dims) {
  ModelShape s;
  if (dims.size() == 2) {
    s.kind = ModelKind::logistic;
    s.features = static_cast<int>(dims[0]);
    s.classes = static_cast<int>(dims[1]);
  } else if (dims.size() == 3) {
    s.kind = ModelKind::mlp;
    s.features = static_cast<int>(dims[0]);
    s.hidden = static_cast<int>(dims[1]);
    s.classes = static_cast<int>(dims[2]);
  } else {
    throw std::invalid_argument(fmt::format("model shape: {} layer dims", dims.size()));
  }
  s.validate();
  return s;
}

void ModelShape::validate() const {
  if (features < 1) throw std::invalid_argument("model shape: features must be >= 1");
  if (classes < 2) throw std::invalid_argument("model shape: classes must be >= 2");
  if (kind == ModelKind::mlp && hidden < 1) {
    throw std::invalid_argument("model shape: mlp needs hidden >= 1");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

ModelParams init_model(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  ModelParams m{shape, std::vector<double>(shape.num_params(), 0.0)};
  if (shape.kind == ModelKind::logistic) return m;
  Rng rng = make_rng(seed, Stream::model_init);
  const auto d = static_cast<std::size_t>(shape.features);
  const auto h = static_cast<std::size_t>(shape.hidden);
  const auto c = static_cast<std::size_t>(shape.classes);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t i = 0; i < h * d; ++i) m.weights[i] = s1 * standard_normal(rng);
  const std::size_t w2 = h * (d + 1);
  for (std::size_t i = 0; i < c * h; ++i) m.weights[w2 + i] = s2 * standard_normal(rng);
  return m;
}

namespace {

constexpr double kProbFloor = 1e-12;

// Softmax in place with max shift; returns -log(max(p[label], floor)).
double softmax_xent(std::span<double> logits, int label) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  for (auto& z : logits) z /= total;
  return -std::log(std::max(logits[static_cast<std::size_t>(label)], kProbFloor));
}

// Scratch buffers reused across samples of one pass.
struct Workspace {
  std::vector<double> logits;
  std::vector<double> hidden;
  std::vector<double> dhidden;
};

void check_width(const ModelParams& m, const Samples& data) {
  if (data.features != m.shape.features) {
    throw std::invalid_argument(fmt::format("feature width {} does not match model width {}",
                                            data.features, m.shape.features));
  }
  if (m.weights.size() != m.shape.num_params()) {
    throw std::invalid_argument("model weights do not match shape");
  }
}

// Forward pass into ws.logits (and ws.hidden for mlp).
void forward(const ModelParams& m, std::span<const double> x, Workspace& ws) {
  const auto d = static_cast<std::size_t>(m.shape.features);
  const auto c = static_cast<std::size_t>(m.shape.classes);
  const double* w = m.weights.data();
  ws.logits.resize(c);
  if (m.shape.kind == ModelKind::logistic) {
    const double* bias = w + c * d;
    for (std::size_t k = 0; k < c; ++k) {
      ws.logits[k] = kernels::dot({w + k * d, d}, x) + bias[k];
    }
    return;
  }
  const auto h = static_cast<std::size_t>(m.shape.hidden);
  const double* b1 = w + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  ws.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    ws.hidden[j] = std::tanh(kernels::dot({w + j * d, d}, x) + b1[j]);
  }
  for (std::size_t k = 0; k < c; ++k) {
    ws.logits[k] = kernels::dot({w2 + k * h, h}, ws.hidden) + b2[k];
  }
}

// Accumulates the un-normalised gradient of one sample into grad. ws.logits must
// hold softmax probabilities.
void backward(const ModelParams& m, std::span<const double> x, int label, Workspace& ws,
              std::span<double> grad) {
  const auto d = static_cast<std::size_t>(m.shape.features);
  const auto c = static_cast<std::size_t>(m.shape.classes);
  ws.logits[static_cast<std::size_t>(label)] -= 1.0;
  if (m.shape.kind == ModelKind::logistic) {
    double* gb = grad.data() + c * d;
    for (std::size_t k = 0; k < c; ++k) {
      kernels::axpy(ws.logits[k], x, grad.subspan(k * d, d));
      gb[k] += ws.logits[k];
    }
    return;
  }
  const auto h = static_cast<std::size_t>(m.shape.hidden);
  const double* w2 = m.weights.data() + h * (d + 1);
  double* gb1 = grad.data() + h * d;
  const std::size_t w2_off = h * (d + 1);
  double* gb2 = grad.data() + w2_off + c * h;
  ws.dhidden.assign(h, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    kernels::axpy(ws.logits[k], ws.hidden, grad.subspan(w2_off + k * h, h));
    gb2[k] += ws.logits[k];
    kernels::axpy(ws.logits[k], {w2 + k * h, h}, ws.dhidden);
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double da = ws.dhidden[j] * (1.0 - ws.hidden[j] * ws.hidden[j]);
    kernels::axpy(da, x, grad.subspan(j * d, d));
    gb1[j] += da;
  }
}

double accumulate(const ModelParams& m, const Samples& data, std::span<const std::size_t> rows,
                  std::span<double> grad, Workspace& ws) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i : rows) {
    const auto x = data.row(i);
    forward(m, x, ws);
    loss += softmax_xent(ws.logits, data.y[i]);
    backward(m, x, data.y[i], ws, grad);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  kernels::scale(inv, grad);
  return loss * inv;
}

std::vector<std::size_t> all_rows(const Samples& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

LossGradient loss_and_gradient(const ModelParams& model, const Samples& data,
                               std::span<const std::size_t> rows) {
  check_width(model, data);
  if (rows.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  LossGradient out;
  out.grad.resize(model.weights.size());
  Workspace ws;
  out.loss = accumulate(model, data, rows, out.grad, ws);
  return out;
}

LossGradient loss_and_gradient(const ModelParams& model, const Samples& data) {
  const auto rows = all_rows(data);
  return loss_and_gradient(model, data, rows);
}

double mean_loss(const ModelParams& model, const Samples& data) {
  check_width(model, data);
  if (data.size() == 0) throw std::invalid_argument("mean_loss: empty data");
  Workspace ws;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(model, data.row(i), ws);
    loss += softmax_xent(ws.logits, data.y[i]);
  }
  return loss / static_cast<double>(data.size());
}

ModelUpdate local_train(const ModelParams& model, const ClientData& client,
                        const TrainOptions& options, std::uint64_t seed) {
  if (!(options.learning_rate > 0.0) || !std::isfinite(options.learning_rate)) {
    throw std::invalid_argument("local_train: learning rate must be > 0");
  }
  check_width(model, client.train);
  const auto batches = minibatches(client, options.batch_size, options.epochs, seed);

  ModelUpdate update;
  update.client_id = client.client_id;
  update.num_samples = static_cast<int>(client.train.size());
  update.loss_before = mean_loss(model, client.train);

  ModelParams local = model;
  std::vector<double> grad(model.weights.size());
  Workspace ws;
  for (const auto& batch : batches) {
    accumulate(local, client.train, batch, grad, ws);
    kernels::axpy(-options.learning_rate, grad, local.weights);
  }
  if (!all_finite(local.weights)) {
    throw NumericalError(fmt::format("local_train: non-finite weights on client {}",
                                     client.client_id));
  }
  update.delta.resize(model.weights.size());
  kernels::sub(local.weights, model.weights, update.delta);
  update.loss_after = mean_loss(local, client.train);
  return update;
}

int predict(const ModelParams& model, std::span<const double> x) {
  Workspace ws;
  forward(model, x, ws);
  int best = 0;
  for (std::size_t k = 1; k < ws.logits.size(); ++k) {
    if (ws.logits[k] > ws.logits[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

double evaluate(const ModelParams& model, const Samples& test) {
  check_width(model, test);
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (predict(model, test.row(i)) == test.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

ModelParams fedavg(const ModelParams& base, std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg: no updates");
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.delta.size() != base.weights.size()) {
      throw std::invalid_argument("fedavg: update length does not match model");
    }
    if (u.num_samples < 1) throw std::invalid_argument("fedavg: update with no samples");
    total += static_cast<double>(u.num_samples);
  }
  ModelParams out = base;
  for (const auto& u : updates) {
    kernels::axpy(static_cast<double>(u.num_samples) / total, u.delta, out.weights);
  }
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes[at + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const ModelParams& model) {
  std::vector<std::uint8_t> out;
  const auto dims = model.shape.layer_dims();
  out.reserve(4 + 4 * dims.size() + 8 * model.weights.size());
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (double w : model.weights) put_u64(out, std::bit_cast<std::uint64_t>(w));
  return out;
}

ModelParams deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw std::invalid_argument("deserialize: truncated header");
  const auto count = static_cast<std::size_t>(get_le(bytes, 0, 4));
  if (count < 2 || count > 3 || bytes.size() < 4 + 4 * count) {
    throw std::invalid_argument("deserialize: bad shape header");
  }
  std::vector<std::uint32_t> dims(count);
  for (std::size_t i = 0; i < count; ++i) {
    dims[i] = static_cast<std::uint32_t>(get_le(bytes, 4 + 4 * i, 4));
  }
  ModelParams m;
  m.shape = ModelShape::from_layer_dims(dims);
  const std::size_t offset = 4 + 4 * count;
  const std::size_t n = m.shape.num_params();
  if (bytes.size() != offset + 8 * n) {
    throw std::invalid_argument("deserialize: payload size does not match shape");
  }
  m.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.weights[i] = std::bit_cast<double>(get_le(bytes, offset + 8 * i, 8));
  }
  return m;
}

std::size_t serialized_size_bits(const ModelShape& shape) {
  return 8 * (4 + 4 * shape.layer_dims().size() + 8 * shape.num_params());
}

}  // namespace cflsim
