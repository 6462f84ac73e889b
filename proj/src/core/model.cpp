#include "model.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "rng.hpp"

namespace dressswap {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

[[noreturn]] void rethrow_at_layer(std::size_t index, const LayerSpec& spec,
                                   const Error& e) {
  throw Error(e.code(), "layer " + std::to_string(index) + " (" + layer_kind(spec) +
                            "): " + e.what());
}

}  // namespace

const char* layer_kind(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const BatchNormSpec&) { return "batchnorm"; },
                        [](const Conv2dSpec&) { return "conv2d"; },
                        [](const ReluSpec&) { return "relu"; },
                        [](const FlattenSpec&) { return "flatten"; },
                        [](const DenseSpec&) { return "dense"; },
                    },
                    spec);
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& input) {
  return std::visit(
      Overloaded{
          [&](const BatchNormSpec& bn) -> Shape {
            if (input.size() != 3 || input[0] != bn.channels) {
              fail(ErrorCode::shape_mismatch,
                   "batchnorm over " + std::to_string(bn.channels) +
                       " channels cannot take input " + shape_to_string(input));
            }
            return input;
          },
          [&](const Conv2dSpec& conv) -> Shape {
            if (input.size() != 3 || input[0] != conv.in_channels) {
              fail(ErrorCode::shape_mismatch,
                   "conv2d expecting " + std::to_string(conv.in_channels) +
                       " input channels cannot take input " + shape_to_string(input));
            }
            if (conv.stride == 0 || conv.out_channels == 0) {
              fail(ErrorCode::invalid_argument, "conv2d needs stride >= 1 and out_channels >= 1");
            }
            const Conv2dGeometry g{conv.stride, conv.padding};
            return {conv.out_channels, conv_output_extent(input[1], conv.kernel, g, "height"),
                    conv_output_extent(input[2], conv.kernel, g, "width")};
          },
          [&](const ReluSpec&) -> Shape { return input; },
          [&](const FlattenSpec&) -> Shape { return {shape_product(input)}; },
          [&](const DenseSpec& dense) -> Shape {
            if (input.size() != 1 || input[0] != dense.in_features) {
              fail(ErrorCode::shape_mismatch,
                   "dense expecting " + std::to_string(dense.in_features) +
                       " features cannot take input " + shape_to_string(input));
            }
            if (dense.out_features == 0) {
              fail(ErrorCode::invalid_argument, "dense needs out_features >= 1");
            }
            return {dense.out_features};
          },
      },
      spec);
}

std::vector<Shape> shape_trace(const ModelConfig& config) {
  std::vector<Shape> trace;
  Shape current = config.input_shape;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    try {
      current = layer_output_shape(config.layers[i], current);
    } catch (const Error& e) {
      rethrow_at_layer(i, config.layers[i], e);
    }
    trace.push_back(current);
  }
  return trace;
}

void validate_config(const ModelConfig& config) {
  if (config.layers.empty()) fail(ErrorCode::invalid_argument, "model has no layers");
  const auto trace = shape_trace(config);
  if (trace.back() != Shape{kOutputWidth}) {
    fail(ErrorCode::shape_mismatch, "model output shape " + shape_to_string(trace.back()) +
                                        " is not [16]");
  }
}

std::vector<ParameterSlot> parameter_layout(const ModelConfig& config) {
  std::vector<ParameterSlot> slots;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    std::visit(Overloaded{
                   [&](const BatchNormSpec& bn) {
                     slots.push_back({parameter_name(i, "gamma"), {bn.channels}, true});
                     slots.push_back({parameter_name(i, "beta"), {bn.channels}, true});
                     slots.push_back({parameter_name(i, "running_mean"), {bn.channels}, false});
                     slots.push_back({parameter_name(i, "running_var"), {bn.channels}, false});
                   },
                   [&](const Conv2dSpec& conv) {
                     slots.push_back({parameter_name(i, "weight"),
                                      {conv.out_channels, conv.in_channels, conv.kernel, conv.kernel},
                                      true});
                     slots.push_back({parameter_name(i, "bias"), {conv.out_channels}, true});
                   },
                   [](const ReluSpec&) {},
                   [](const FlattenSpec&) {},
                   [&](const DenseSpec& dense) {
                     slots.push_back({parameter_name(i, "weight"),
                                      {dense.out_features, dense.in_features}, true});
                     slots.push_back({parameter_name(i, "bias"), {dense.out_features}, true});
                   },
               },
               config.layers[i]);
  }
  return slots;
}

std::size_t trainable_parameter_count(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& slot : parameter_layout(config)) {
    if (slot.trainable) total += shape_product(slot.shape);
  }
  return total;
}

std::size_t count_layers(const ModelConfig& config, const char* kind) {
  std::size_t n = 0;
  for (const auto& spec : config.layers) n += std::strcmp(layer_kind(spec), kind) == 0;
  return n;
}

ModelConfig make_regressor(const std::array<std::size_t, 5>& widths,
                           std::size_t input_side) {
  ModelConfig config;
  config.input_shape = {3, input_side, input_side};
  config.layers.push_back(BatchNormSpec{3});
  constexpr std::array<std::size_t, 5> strides{1, 2, 1, 2, 1};
  std::size_t channels = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    config.layers.push_back(Conv2dSpec{channels, widths[i], 3, strides[i], 1});
    config.layers.push_back(ReluSpec{});
    channels = widths[i];
  }
  config.layers.push_back(FlattenSpec{});
  const auto trace = shape_trace(config);
  config.layers.push_back(DenseSpec{trace.back()[0], kOutputWidth});
  validate_config(config);
  return config;
}

ModelConfig default_model() { return make_regressor({32, 64, 64, 128, 128}, kModelSide); }

std::string config_to_json(const ModelConfig& config) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& spec : config.layers) {
    nlohmann::json j;
    j["kind"] = layer_kind(spec);
    std::visit(Overloaded{
                   [&](const BatchNormSpec& bn) { j["channels"] = bn.channels; },
                   [&](const Conv2dSpec& c) {
                     j["in_channels"] = c.in_channels;
                     j["out_channels"] = c.out_channels;
                     j["kernel"] = c.kernel;
                     j["stride"] = c.stride;
                     j["padding"] = c.padding;
                   },
                   [](const ReluSpec&) {},
                   [](const FlattenSpec&) {},
                   [&](const DenseSpec& d) {
                     j["in_features"] = d.in_features;
                     j["out_features"] = d.out_features;
                   },
               },
               spec);
    layers.push_back(std::move(j));
  }
  nlohmann::json root;
  root["input_shape"] = config.input_shape;
  root["layers"] = std::move(layers);
  return root.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig config;
  try {
    const auto root = nlohmann::json::parse(text);
    config.input_shape = root.at("input_shape").get<Shape>();
    for (const auto& j : root.at("layers")) {
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "batchnorm") {
        config.layers.push_back(BatchNormSpec{j.at("channels").get<std::size_t>()});
      } else if (kind == "conv2d") {
        config.layers.push_back(Conv2dSpec{
            j.at("in_channels").get<std::size_t>(), j.at("out_channels").get<std::size_t>(),
            j.at("kernel").get<std::size_t>(), j.at("stride").get<std::size_t>(),
            j.at("padding").get<std::size_t>()});
      } else if (kind == "relu") {
        config.layers.push_back(ReluSpec{});
      } else if (kind == "flatten") {
        config.layers.push_back(FlattenSpec{});
      } else if (kind == "dense") {
        config.layers.push_back(DenseSpec{j.at("in_features").get<std::size_t>(),
                                          j.at("out_features").get<std::size_t>()});
      } else {
        fail(ErrorCode::format, "unknown layer kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("malformed model config: ") + e.what());
  }
  validate_config(config);
  return config;
}

std::string parameter_name(std::size_t index, const char* role) {
  return "layer" + std::to_string(index) + "." + role;
}

template <typename T>
void ParameterSet<T>::add(std::string name, BasicTensor<T> value, bool trainable) {
  if (contains(name)) fail(ErrorCode::invalid_argument, "duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value), trainable});
}

template <typename T>
BasicTensor<T>& ParameterSet<T>::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::invalid_argument, "missing parameter " + name);
  return entries_[it->second].value;
}

template <typename T>
const BasicTensor<T>& ParameterSet<T>::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::invalid_argument, "missing parameter " + name);
  return entries_[it->second].value;
}

template <typename T>
std::size_t ParameterSet<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.value.size();
  }
  return n;
}

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  validate_config(config);
  Rng rng(seed);
  ParameterSet<T> params;
  for (auto& slot : parameter_layout(config)) {
    BasicTensor<T> value(slot.shape);
    const std::string role = slot.name.substr(slot.name.find('.') + 1);
    if (role == "weight") {
      const std::size_t fan_in = value.size() / slot.shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& v : value.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    } else if (role == "gamma" || role == "running_var") {
      value.fill(T{1});
    }
    params.add(slot.name, std::move(value), slot.trainable);
  }
  return params;
}

template <typename T>
void check_parameters(const ModelConfig& config, const ParameterSet<T>& params) {
  for (const auto& slot : parameter_layout(config)) {
    if (!params.contains(slot.name)) {
      fail(ErrorCode::shape_mismatch, "parameter set lacks " + slot.name);
    }
    require_shape(params.at(slot.name).shape(), slot.shape, "parameter " + slot.name);
  }
}

namespace {

template <typename T>
BasicTensor<T> run_forward(const ModelConfig& config, const ParameterSet<T>& params,
                           ParameterSet<T>* mutable_params, const BasicTensor<T>& input,
                           Mode mode, ModelCache<T>* cache) {
  check_parameters(config, params);
  Shape expected{input.rank() > 0 ? input.dim(0) : 0};
  expected.insert(expected.end(), config.input_shape.begin(), config.input_shape.end());
  require_shape(input.shape(), expected, "model input");
  const std::size_t batch = input.dim(0);
  if (cache != nullptr) {
    cache->layers.assign(config.layers.size(), LayerCache<T>{});
    cache->train_mode = mode == Mode::train;
  }

  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& spec = config.layers[i];
    LayerCache<T>* lc = cache != nullptr ? &cache->layers[i] : nullptr;
    if (lc != nullptr) lc->input_shape = x.shape();
    try {
      x = std::visit(
          Overloaded{
              [&](const BatchNormSpec&) -> BasicTensor<T> {
                const auto& gamma = params.at(parameter_name(i, "gamma"));
                const auto& beta = params.at(parameter_name(i, "beta"));
                if (mode == Mode::infer) {
                  return batchnorm_infer(x, gamma, beta,
                                         params.at(parameter_name(i, "running_mean")),
                                         params.at(parameter_name(i, "running_var")));
                }
                BatchNormState<T> state{mutable_params->at(parameter_name(i, "running_mean")),
                                        mutable_params->at(parameter_name(i, "running_var"))};
                return batchnorm_forward(x, gamma, beta, state, Mode::train, kBatchNormEps,
                                         kBatchNormMomentum,
                                         lc != nullptr ? &lc->batchnorm : nullptr);
              },
              [&](const Conv2dSpec& conv) -> BasicTensor<T> {
                return conv2d_forward(x, params.at(parameter_name(i, "weight")),
                                      params.at(parameter_name(i, "bias")),
                                      Conv2dGeometry{conv.stride, conv.padding},
                                      lc != nullptr ? &lc->conv : nullptr);
              },
              [&](const ReluSpec&) -> BasicTensor<T> {
                auto y = relu_forward(x);
                if (lc != nullptr) lc->saved = y;
                return y;
              },
              [&](const FlattenSpec&) -> BasicTensor<T> {
                return x.reshaped({batch, x.size() / batch});
              },
              [&](const DenseSpec&) -> BasicTensor<T> {
                if (lc != nullptr) lc->saved = x;
                return dense_forward(x, params.at(parameter_name(i, "weight")),
                                     params.at(parameter_name(i, "bias")));
              },
          },
          spec);
    } catch (const Error& e) {
      rethrow_at_layer(i, spec, e);
    }
  }
  return x;
}

}  // namespace

template <typename T>
BasicTensor<T> model_forward(const ModelConfig& config, ParameterSet<T>& params,
                             const BasicTensor<T>& input, Mode mode, ModelCache<T>* cache) {
  return run_forward(config, params, &params, input, mode, cache);
}

template <typename T>
BasicTensor<T> model_predict(const ModelConfig& config, const ParameterSet<T>& params,
                             const BasicTensor<T>& input) {
  return run_forward<T>(config, params, nullptr, input, Mode::infer, nullptr);
}

template <typename T>
ModelGrads<T> model_backward(const ModelConfig& config, const ParameterSet<T>& params,
                             const ModelCache<T>& cache, const BasicTensor<T>& grad_out) {
  if (!cache.train_mode || cache.layers.size() != config.layers.size()) {
    fail(ErrorCode::state, "model_backward needs the cache of a train-mode forward pass");
  }
  std::vector<std::pair<std::string, BasicTensor<T>>> collected;
  BasicTensor<T> g = grad_out;
  for (std::size_t i = config.layers.size(); i-- > 0;) {
    const auto& spec = config.layers[i];
    const auto& lc = cache.layers[i];
    try {
      g = std::visit(
          Overloaded{
              [&](const BatchNormSpec&) -> BasicTensor<T> {
                auto grads =
                    batchnorm_backward(lc.batchnorm, params.at(parameter_name(i, "gamma")), g);
                collected.emplace_back(parameter_name(i, "gamma"), std::move(grads.gamma));
                collected.emplace_back(parameter_name(i, "beta"), std::move(grads.beta));
                return std::move(grads.input);
              },
              [&](const Conv2dSpec&) -> BasicTensor<T> {
                auto grads = conv2d_backward(lc.conv, g);
                collected.emplace_back(parameter_name(i, "weight"), std::move(grads.kernel));
                collected.emplace_back(parameter_name(i, "bias"), std::move(grads.bias));
                return std::move(grads.input);
              },
              [&](const ReluSpec&) -> BasicTensor<T> { return relu_backward(lc.saved, g); },
              [&](const FlattenSpec&) -> BasicTensor<T> { return g.reshaped(lc.input_shape); },
              [&](const DenseSpec&) -> BasicTensor<T> {
                auto grads = dense_backward(lc.saved, params.at(parameter_name(i, "weight")), g);
                collected.emplace_back(parameter_name(i, "weight"), std::move(grads.weight));
                collected.emplace_back(parameter_name(i, "bias"), std::move(grads.bias));
                return std::move(grads.input);
              },
          },
          spec);
    } catch (const Error& e) {
      rethrow_at_layer(i, spec, e);
    }
  }

  // Emit in declared (forward) order.
  ModelGrads<T> out;
  for (auto it = collected.rbegin(); it != collected.rend(); ++it) {
    out.params.add(it->first, std::move(it->second), true);
  }
  out.input = std::move(g);
  return out;
}

#define DRESSSWAP_INSTANTIATE_MODEL(T)                                                     \
  template class ParameterSet<T>;                                                          \
  template ParameterSet<T> init_parameters<T>(const ModelConfig&, std::uint64_t);          \
  template void check_parameters<T>(const ModelConfig&, const ParameterSet<T>&);           \
  template BasicTensor<T> model_forward<T>(const ModelConfig&, ParameterSet<T>&,           \
                                           const BasicTensor<T>&, Mode, ModelCache<T>*);   \
  template BasicTensor<T> model_predict<T>(const ModelConfig&, const ParameterSet<T>&,     \
                                           const BasicTensor<T>&);                         \
  template ModelGrads<T> model_backward<T>(const ModelConfig&, const ParameterSet<T>&,     \
                                           const ModelCache<T>&, const BasicTensor<T>&);

DRESSSWAP_INSTANTIATE_MODEL(float)
DRESSSWAP_INSTANTIATE_MODEL(double)

#undef DRESSSWAP_INSTANTIATE_MODEL

}  // namespace dressswap
