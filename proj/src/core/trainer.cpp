#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rng.hpp"

namespace dressswap {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const ParameterSet<Real>& params) : config_(config) {
    for (const auto& e : params.entries()) {
      if (!e.trainable) continue;
      first_.emplace_back(e.value.size(), 0.0f);
      if (config.optimizer == OptimizerKind::adam) second_.emplace_back(e.value.size(), 0.0f);
    }
  }

  void step(ParameterSet<Real>& params, const ParameterSet<Real>& grads) {
    ++steps_;
    const double lr = config_.learning_rate;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    std::size_t slot = 0;
    for (auto& e : params.entries()) {
      if (!e.trainable) continue;
      const auto& g = grads.at(e.name);
      auto& m = first_[slot];
      if (config_.optimizer == OptimizerKind::sgd) {
        const auto mu = static_cast<Real>(config_.momentum);
        for (std::size_t i = 0; i < m.size(); ++i) {
          m[i] = mu * m[i] + g[i];
          e.value[i] -= static_cast<Real>(lr) * m[i];
        }
      } else {
        auto& v = second_[slot];
        const auto b1 = static_cast<Real>(config_.beta1);
        const auto b2 = static_cast<Real>(config_.beta2);
        const auto step_size = static_cast<Real>(lr / bc1);
        const auto v_scale = static_cast<Real>(1.0 / std::sqrt(bc2));
        const auto eps = static_cast<Real>(config_.adam_eps);
        for (std::size_t i = 0; i < m.size(); ++i) {
          m[i] = b1 * m[i] + (1 - b1) * g[i];
          v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
          e.value[i] -= step_size * m[i] / (std::sqrt(v[i]) * v_scale + eps);
        }
      }
      ++slot;
    }
  }

 private:
  TrainConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<Real>> first_;
  std::vector<std::vector<Real>> second_;
};

TensorF batch_slice(const TensorF& source, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
  Shape shape = source.shape();
  const std::size_t stride = source.size() / shape[0];
  shape[0] = end - begin;
  TensorF out(shape);
  for (std::size_t i = begin; i < end; ++i) {
    const Real* src = source.raw() + order[i] * stride;
    std::copy(src, src + stride, out.raw() + (i - begin) * stride);
  }
  return out;
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
  if (config.batch_size == 0) fail(ErrorCode::invalid_argument, "batch_size must be >= 1");
  if (config.epochs == 0) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0)) {
    fail(ErrorCode::invalid_argument, "split fraction must lie strictly between 0 and 1");
  }
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    fail(ErrorCode::invalid_argument, "learning rate must be positive");
  }
}

std::string report_csv(const TrainReport& report) {
  std::string out = "epoch,train_mse,val_mse\n";
  char line[96];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", e.epoch, e.train_mse, e.val_mse);
    out += line;
  }
  return out;
}

void write_report_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write report " + path.string());
  out << report_csv(report);
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

Split split_dataset(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::invalid_argument, "cannot split fewer than 2 samples");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(ErrorCode::invalid_argument, "split fraction must lie strictly between 0 and 1");
  }
  const auto train_size =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
  if (train_size == 0 || train_size == n) {
    fail(ErrorCode::invalid_argument, "split of " + std::to_string(n) + " at " +
                                          std::to_string(fraction) + " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
  return split;
}

PreparedSet prepare_manifest(const Manifest& manifest, const std::filesystem::path& manifest_dir,
                             std::size_t side) {
  if (manifest.samples.empty()) fail(ErrorCode::invalid_argument, "manifest is empty");
  const std::size_t n = manifest.samples.size();
  PreparedSet set{TensorF({n, 3, side, side}), TensorF({n, kOutputWidth})};
  const std::size_t stride = 3 * side * side;
  for (std::size_t i = 0; i < n; ++i) {
    const auto prepared = prepare_sample(manifest.samples[i], manifest_dir, side);
    for (std::size_t k = 0; k < stride; ++k) {
      set.images[i * stride + k] = static_cast<Real>(prepared.image[k]);
    }
    for (std::size_t k = 0; k < kOutputWidth; ++k) {
      set.targets[i * kOutputWidth + k] = static_cast<Real>(prepared.target[k]);
    }
  }
  return set;
}

PreparedSet gather(const PreparedSet& set, const std::vector<std::size_t>& indices) {
  if (indices.empty()) fail(ErrorCode::invalid_argument, "cannot gather an empty subset");
  return PreparedSet{batch_slice(set.images, indices, 0, indices.size()),
                     batch_slice(set.targets, indices, 0, indices.size())};
}

TrainResult train(const TrainConfig& config, const ModelConfig& model, const PreparedSet& data,
                  const EpochCallback& on_epoch) {
  validate_config(model);
  return train_from(config, model,
                    init_parameters<Real>(model, derive_seed(config.seed, kInitStream)), data,
                    on_epoch);
}

TrainResult train_from(const TrainConfig& config, const ModelConfig& model,
                       ParameterSet<Real> params, const PreparedSet& data,
                       const EpochCallback& on_epoch) {
  validate_train_config(config);
  validate_config(model);
  check_parameters(model, params);
  if (data.size() == 0) fail(ErrorCode::invalid_argument, "training data is empty");
  const auto start = std::chrono::steady_clock::now();

  const Split split =
      split_dataset(data.size(), config.split_fraction, derive_seed(config.seed, kSplitStream));
  const PreparedSet train_set = gather(data, split.train);
  const PreparedSet val_set = gather(data, split.validation);

  TrainResult result;
  result.report.parameter_count = trainable_parameter_count(model);
  result.report.train_size = train_set.size();
  result.report.val_size = val_set.size();
  result.report.initial_val_mse = evaluate(params, model, val_set, config.batch_size).mse;

  Optimizer optimizer(config, params);
  Rng shuffler(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const TensorF images = batch_slice(train_set.images, order, begin, end);
      const TensorF targets = batch_slice(train_set.targets, order, begin, end);
      ModelCache<Real> cache;
      const TensorF pred = model_forward(model, params, images, Mode::train, &cache);
      const double loss = mse_loss(pred, targets);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::numeric, "non-finite training loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index));
      }
      loss_sum += loss * static_cast<double>(end - begin);
      const auto grads = model_backward(model, params, cache, mse_grad(pred, targets));
      optimizer.step(params, grads.params);
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(order.size()),
                     evaluate(params, model, val_set, config.batch_size).mse};
    if (!std::isfinite(stats.val_mse)) {
      fail(ErrorCode::numeric, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.params = std::move(params);
  return result;
}

template <typename T>
EvalResult score_predictions(const BasicTensor<T>& predictions, const BasicTensor<T>& targets) {
  require_shape(predictions.shape(), targets.shape(), "evaluation predictions");
  if (predictions.rank() != 2 || predictions.dim(1) != kOutputWidth) {
    fail(ErrorCode::shape_mismatch, "predictions must be [N,16], got " +
                                        shape_to_string(predictions.shape()));
  }
  const std::size_t n = predictions.dim(0);
  EvalResult result;
  result.mse = mse_loss(predictions, targets);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      const double dx = static_cast<double>(predictions(i, 2 * k)) - targets(i, 2 * k);
      const double dy = static_cast<double>(predictions(i, 2 * k + 1)) - targets(i, 2 * k + 1);
      result.landmark_error[k] += std::sqrt(dx * dx + dy * dy);
    }
  }
  for (auto& e : result.landmark_error) e /= static_cast<double>(n);
  return result;
}

EvalResult evaluate(const ParameterSet<Real>& params, const ModelConfig& model,
                    const PreparedSet& data, std::size_t batch_size) {
  if (data.size() == 0) fail(ErrorCode::invalid_argument, "evaluation data is empty");
  if (batch_size == 0) fail(ErrorCode::invalid_argument, "batch size must be >= 1");
  const std::size_t n = data.size();
  TensorF predictions({n, kOutputWidth});
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    const TensorF out = model_predict(model, params, batch_slice(data.images, order, begin, end));
    std::copy(out.raw(), out.raw() + out.size(), predictions.raw() + begin * kOutputWidth);
  }
  return score_predictions(predictions, data.targets);
}

Detection detect_landmarks(const ModelConfig& model, const ParameterSet<Real>& params,
                           const ImageRGB& image) {
  const auto& in = model.input_shape;
  if (in.size() != 3 || in[0] != 3) {
    fail(ErrorCode::shape_mismatch, "model input must be [3,H,W], got " + shape_to_string(in));
  }
  const Tensor resized = resize_bilinear(to_tensor(image), in[2], in[1]);
  const TensorF batch = resized.cast<Real>().reshaped({1, 3, in[1], in[2]});
  const TensorF out = model_predict(model, params, batch);
  Detection d;
  const double side_x = static_cast<double>(in[2]), side_y = static_cast<double>(in[1]);
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    const double x = std::clamp(static_cast<double>(out[2 * k]), 0.0, std::nextafter(side_x, 0.0));
    const double y =
        std::clamp(static_cast<double>(out[2 * k + 1]), 0.0, std::nextafter(side_y, 0.0));
    if (!std::isfinite(out[2 * k]) || !std::isfinite(out[2 * k + 1])) {
      fail(ErrorCode::numeric, "non-finite prediction for landmark " + std::to_string(k));
    }
    d.model_space.push_back({x, y});
    d.image_space.push_back({x * static_cast<double>(image.width()) / side_x,
                             y * static_cast<double>(image.height()) / side_y});
  }
  return d;
}

template EvalResult score_predictions<float>(const TensorF&, const TensorF&);
template EvalResult score_predictions<double>(const Tensor&, const Tensor&);

}  // namespace dressswap
