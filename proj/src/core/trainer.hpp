#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"

namespace dressswap {

// Training runs in 32-bit floats; gradient checks use the 64-bit path.
using Real = float;

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  std::size_t batch_size = 20;
  std::size_t epochs = 50;
  double split_fraction = 0.85;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

void validate_train_config(const TrainConfig& config);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainReport {
  double initial_val_mse = 0.0;  // before the first update
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::size_t parameter_count = 0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

// "epoch,train_mse,val_mse" with one row per epoch.
std::string report_csv(const TrainReport& report);
void write_report_csv(const std::filesystem::path& path, const TrainReport& report);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded shuffle, then the first floor(n * fraction) indices train.
Split split_dataset(std::size_t n, double fraction, std::uint64_t seed);

// Images [N,3,side,side] and targets [N,16] in model space.
struct PreparedSet {
  TensorF images;
  TensorF targets;
  std::size_t size() const { return images.dim(0); }
};

PreparedSet prepare_manifest(const Manifest& manifest,
                             const std::filesystem::path& manifest_dir,
                             std::size_t side = kModelSide);

PreparedSet gather(const PreparedSet& set, const std::vector<std::size_t>& indices);

struct TrainResult {
  ParameterSet<Real> params;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const TrainConfig& config, const ModelConfig& model, const PreparedSet& data,
                  const EpochCallback& on_epoch = {});

// Same loop starting from given parameters; used when the caller owns init.
TrainResult train_from(const TrainConfig& config, const ModelConfig& model,
                       ParameterSet<Real> params, const PreparedSet& data,
                       const EpochCallback& on_epoch = {});

struct EvalResult {
  double mse = 0.0;
  std::array<double, kLandmarkCount> landmark_error{};  // mean Euclidean px
};

// Batched inference-mode evaluation.
EvalResult evaluate(const ParameterSet<Real>& params, const ModelConfig& model,
                    const PreparedSet& data, std::size_t batch_size = 20);

struct Detection {
  std::vector<Point> model_space;  // clamped to [0, side)
  std::vector<Point> image_space;
};

// Resizes the image to the model input, predicts, and maps back.
Detection detect_landmarks(const ModelConfig& model, const ParameterSet<Real>& params,
                           const ImageRGB& image);

// MSE and per-landmark error of predictions against targets, both [N,16].
template <typename T>
EvalResult score_predictions(const BasicTensor<T>& predictions, const BasicTensor<T>& targets);

}  // namespace dressswap
