#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "kernels.hpp"
#include "layers.hpp"
#include "tensor.hpp"

namespace dressswap {

inline constexpr std::size_t kLandmarkCount = 8;
inline constexpr std::size_t kOutputWidth = 2 * kLandmarkCount;
inline constexpr std::size_t kModelSide = 100;

struct BatchNormSpec {
  std::size_t channels = 0;
  friend bool operator==(const BatchNormSpec&, const BatchNormSpec&) = default;
};
struct Conv2dSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  friend bool operator==(const Conv2dSpec&, const Conv2dSpec&) = default;
};
struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};
struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct DenseSpec {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

using LayerSpec = std::variant<BatchNormSpec, Conv2dSpec, ReluSpec, FlattenSpec, DenseSpec>;

const char* layer_kind(const LayerSpec& spec);

// Per-sample output shape of one layer, or shape_mismatch.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input);

struct ModelConfig {
  Shape input_shape{3, kModelSide, kModelSide};  // per sample, [C,H,W]
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Shapes after each layer (per sample). Throws naming the failing layer index.
std::vector<Shape> shape_trace(const ModelConfig& config);

// Checks the composition ends in [16].
void validate_config(const ModelConfig& config);

std::size_t trainable_parameter_count(const ModelConfig& config);
std::size_t count_layers(const ModelConfig& config, const char* kind);

// BN(3) then five 3x3 convs with ReLU (strides 1,2,1,2,1, padding 1), flatten,
// dense to 16. `widths` are the conv output channels.
ModelConfig make_regressor(const std::array<std::size_t, 5>& widths,
                           std::size_t input_side);

// The reconstructed landmark regressor: widths 32/64/64/128/128 on 3x100x100.
ModelConfig default_model();

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    BasicTensor<T> value;
    bool trainable = true;
  };

  void add(std::string name, BasicTensor<T> value, bool trainable);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  BasicTensor<T>& at(const std::string& name);
  const BasicTensor<T>& at(const std::string& name) const;

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::size_t trainable_count() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Name of parameter `role` (weight, bias, gamma, beta, running_mean,
// running_var) for layer `index`.
std::string parameter_name(std::size_t index, const char* role);

// Declared parameter layout for a config, in storage order.
struct ParameterSlot {
  std::string name;
  Shape shape;
  bool trainable;
};
std::vector<ParameterSlot> parameter_layout(const ModelConfig& config);

// Kaiming-uniform (fan-in) weights, zero biases, gamma 1, beta 0, running
// mean 0, running var 1.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

// Throws unless `params` holds every slot of the layout with matching shape.
template <typename T>
void check_parameters(const ModelConfig& config, const ParameterSet<T>& params);

template <typename T>
struct LayerCache {
  std::optional<BatchNormCache<T>> batchnorm;
  std::optional<Conv2dCache<T>> conv;
  BasicTensor<T> saved;  // relu output or dense input
  Shape input_shape;
};

template <typename T>
struct ModelCache {
  std::vector<LayerCache<T>> layers;
  bool train_mode = false;
};

// Input [N, C, H, W] matching config.input_shape. Train mode updates the BN
// running buffers inside `params`.
template <typename T>
BasicTensor<T> model_forward(const ModelConfig& config, ParameterSet<T>& params,
                             const BasicTensor<T>& input, Mode mode,
                             ModelCache<T>* cache = nullptr);

// Inference only; never touches `params`.
template <typename T>
BasicTensor<T> model_predict(const ModelConfig& config, const ParameterSet<T>& params,
                             const BasicTensor<T>& input);

template <typename T>
struct ModelGrads {
  ParameterSet<T> params;  // trainable entries only, same names
  BasicTensor<T> input;
};

// Requires a cache from a train-mode forward.
template <typename T>
ModelGrads<T> model_backward(const ModelConfig& config, const ParameterSet<T>& params,
                             const ModelCache<T>& cache, const BasicTensor<T>& grad_out);

}  // namespace dressswap
