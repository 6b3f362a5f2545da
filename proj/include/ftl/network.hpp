#ifndef FTL_NETWORK_HPP
#define FTL_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftl/errors.hpp"
#include "ftl/family_json.hpp"
#include "ftl/ops.hpp"
#include "ftl/tensor.hpp"
#include "ftl/transform.hpp"

namespace ftl {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class LayerKind { Dense, Conv, UpConv, Reshape };

/// One layer of an encoder or decoder stack. `batchnorm` and `activation`
/// apply after the layer's linear map.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int width = 0;     // dense output width
  int channels = 0;  // conv/upconv output channels
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int factor = 2;     // upconv upsampling factor
  Shape target;       // reshape target {C,H,W}
  bool batchnorm = false;
  bool activation = false;
};

/// Encoder/decoder/classifier description. The code produced by the last
/// encoder layer feeds the feature transform directly, so that layer and the
/// first decoder consumption are linear by construction.
struct ModelConfig {
  std::string preset;
  Shape input_shape;  // {C,H,W}
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  TransformFamily family;
  double leaky_slope = 0.1;
  bool sigmoid_output = true;
  std::vector<int> head_hidden = {64, 32};
  int class_count = 0;  // 0 disables the invariant-signature head

  long input_size() const { return numel(input_shape); }

  void validate() const {
    family.validate();
    if (input_shape.size() != 3)
      throw ConfigError("config: input_shape must be {C,H,W}, got " +
                        shape_str(input_shape));
    if (encoder.empty() || decoder.empty())
      throw ConfigError("config: encoder and decoder must be non-empty");
    const LayerSpec& code_layer = encoder.back();
    if (code_layer.kind != LayerKind::Dense ||
        code_layer.width != family.feature_dim)
      throw ConfigError("config: final encoder layer must be dense of width " +
                        std::to_string(family.feature_dim));
    // The feature transform's input and output stay linear.
    if (code_layer.batchnorm || code_layer.activation)
      throw ConfigError(
          "config: no activation or batchnorm next to the feature transform");
    if (decoder.back().batchnorm || decoder.back().activation)
      throw ConfigError("config: final decoder layer must be linear");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
      throw ConfigError("config: leaky_slope must lie in (0,1)");
    if (class_count < 0) throw ConfigError("config: negative class_count");
  }
};

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j;
  switch (l.kind) {
    case LayerKind::Dense:
      j["kind"] = "dense";
      j["width"] = l.width;
      break;
    case LayerKind::Conv:
      j["kind"] = "conv";
      j["channels"] = l.channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["padding"] = l.padding;
      break;
    case LayerKind::UpConv:
      j["kind"] = "upconv";
      j["channels"] = l.channels;
      j["kernel"] = l.kernel;
      j["factor"] = l.factor;
      j["padding"] = l.padding;
      break;
    case LayerKind::Reshape:
      j["kind"] = "reshape";
      j["target"] = l.target;
      break;
  }
  if (l.kind != LayerKind::Reshape) {
    j["batchnorm"] = l.batchnorm;
    j["activation"] = l.activation;
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") {
    l.kind = LayerKind::Dense;
    l.width = j.at("width").get<int>();
  } else if (kind == "conv") {
    l.kind = LayerKind::Conv;
    l.channels = j.at("channels").get<int>();
    l.kernel = j.at("kernel").get<int>();
    l.stride = j.at("stride").get<int>();
    l.padding = j.at("padding").get<int>();
  } else if (kind == "upconv") {
    l.kind = LayerKind::UpConv;
    l.channels = j.at("channels").get<int>();
    l.kernel = j.at("kernel").get<int>();
    l.factor = j.at("factor").get<int>();
    l.padding = j.at("padding").get<int>();
  } else if (kind == "reshape") {
    l.kind = LayerKind::Reshape;
    l.target = j.at("target").get<Shape>();
  } else {
    throw DataError("config: unknown layer kind '" + kind + "'");
  }
  if (l.kind != LayerKind::Reshape) {
    l.batchnorm = j.at("batchnorm").get<bool>();
    l.activation = j.at("activation").get<bool>();
  }
  return l;
}

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
  nlohmann::json enc = nlohmann::json::array();
  for (const LayerSpec& l : cfg.encoder) enc.push_back(layer_to_json(l));
  nlohmann::json dec = nlohmann::json::array();
  for (const LayerSpec& l : cfg.decoder) dec.push_back(layer_to_json(l));
  return {{"preset", cfg.preset},
          {"input_shape", cfg.input_shape},
          {"encoder", enc},
          {"decoder", dec},
          {"family", family_to_json(cfg.family)},
          {"leaky_slope", cfg.leaky_slope},
          {"sigmoid_output", cfg.sigmoid_output},
          {"head_hidden", cfg.head_hidden},
          {"class_count", cfg.class_count}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.preset = j.at("preset").get<std::string>();
    cfg.input_shape = j.at("input_shape").get<Shape>();
    for (const nlohmann::json& l : j.at("encoder"))
      cfg.encoder.push_back(layer_from_json(l));
    for (const nlohmann::json& l : j.at("decoder"))
      cfg.decoder.push_back(layer_from_json(l));
    cfg.family = family_from_json(j.at("family"));
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.sigmoid_output = j.at("sigmoid_output").get<bool>();
    cfg.head_hidden = j.at("head_hidden").get<std::vector<int>>();
    cfg.class_count = j.at("class_count").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("config: malformed JSON: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace detail {

struct LayerState {
  LayerSpec spec;
  Tensor weight;  // dense [in,out]; conv [K,C,k,k]
  Tensor bias;
  Tensor bn_gamma, bn_beta;
  RunningStats bn_stats;
  Shape in_shape;   // per-sample shape entering the layer ({D} or {C,H,W})
  Shape out_shape;  // per-sample shape leaving it
};

inline Tensor glorot_uniform(Shape shape, long fan_in, long fan_out,
                             std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), -bound, bound, rng, true);
}

}  // namespace detail

/// Encoder-decoder with a block-rotation feature transform between them, plus
/// an optional classifier head over invariant signatures. Parameters live in
/// a fixed declared order for optimizers and checkpoints.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    Shape shape = cfg_.input_shape;
    for (size_t i = 0; i < cfg_.encoder.size(); ++i)
      encoder_.push_back(build_layer(cfg_.encoder[i], shape, "enc" + std::to_string(i), rng));
    if (shape != Shape{cfg_.family.feature_dim})
      throw ConfigError("config: encoder output " + shape_str(shape) +
                        " != feature_dim " + std::to_string(cfg_.family.feature_dim));
    for (size_t i = 0; i < cfg_.decoder.size(); ++i)
      decoder_.push_back(build_layer(cfg_.decoder[i], shape, "dec" + std::to_string(i), rng));
    if (numel(shape) != cfg_.input_size())
      throw ConfigError("config: decoder output " + shape_str(shape) +
                        " does not match input " + shape_str(cfg_.input_shape));
    if (cfg_.class_count > 0) {
      Shape hshape = {static_cast<int>(cfg_.family.signature_length())};
      for (size_t i = 0; i < cfg_.head_hidden.size(); ++i) {
        LayerSpec l;
        l.kind = LayerKind::Dense;
        l.width = cfg_.head_hidden[i];
        l.activation = true;
        head_.push_back(build_layer(l, hshape, "head" + std::to_string(i), rng));
      }
      LayerSpec out;
      out.kind = LayerKind::Dense;
      out.width = cfg_.class_count;
      head_.push_back(build_layer(out, hshape, "head_out", rng));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  /// Trainable parameters in declared order.
  std::vector<std::pair<std::string, Tensor>> parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    auto collect = [&](std::vector<detail::LayerState>& layers, const char* prefix) {
      for (size_t i = 0; i < layers.size(); ++i) {
        detail::LayerState& l = layers[i];
        if (l.spec.kind == LayerKind::Reshape) continue;
        const std::string base = name_of(prefix, i, layers.size());
        out.emplace_back(base + ".w", l.weight);
        out.emplace_back(base + ".b", l.bias);
        if (l.spec.batchnorm) {
          out.emplace_back(base + ".bn_g", l.bn_gamma);
          out.emplace_back(base + ".bn_b", l.bn_beta);
        }
      }
    };
    collect(encoder_, "enc");
    collect(decoder_, "dec");
    collect(head_, "head");
    return out;
  }

  /// Batchnorm running statistics in declared order (non-trainable state).
  std::vector<std::pair<std::string, RunningStats*>> running_stats() {
    std::vector<std::pair<std::string, RunningStats*>> out;
    auto collect = [&](std::vector<detail::LayerState>& layers, const char* prefix) {
      for (size_t i = 0; i < layers.size(); ++i) {
        detail::LayerState& l = layers[i];
        if (l.spec.kind == LayerKind::Reshape || !l.spec.batchnorm) continue;
        out.emplace_back(name_of(prefix, i, layers.size()), &l.bn_stats);
      }
    };
    collect(encoder_, "enc");
    collect(decoder_, "dec");
    collect(head_, "head");
    return out;
  }

  /// x: [N,C,H,W] (or [N,D] with D = C*H*W) -> code [N, feature_dim].
  Tensor encode(const Tensor& x, Mode mode = Mode::Eval) {
    Tensor h = check_input(x);
    for (detail::LayerState& l : encoder_) h = run_layer(l, h, mode);
    return h;
  }

  /// code [N, feature_dim] -> images [N,C,H,W].
  Tensor decode(const Tensor& code, Mode mode = Mode::Eval) {
    if (code.ndim() != 2 || code.dim(1) != cfg_.family.feature_dim)
      throw ShapeError("decode: expected [N," +
                       std::to_string(cfg_.family.feature_dim) + "], got " +
                       shape_str(code.shape()));
    Tensor h = code;
    for (detail::LayerState& l : decoder_) h = run_layer(l, h, mode);
    Shape out_shape = cfg_.input_shape;
    out_shape.insert(out_shape.begin(), code.dim(0));
    h = reshape(h, out_shape);
    return cfg_.sigmoid_output ? sigmoid(h) : h;
  }

  /// decode(F_params[encode(x)]): one parameter set for the whole batch.
  Tensor forward_transformed(const Tensor& x, const TransformParams& params,
                             Mode mode = Mode::Eval) {
    Tensor e = encode(x, mode);
    Tensor y = apply(build_block_transform(cfg_.family, params), e);
    return decode(y, mode);
  }

  /// Per-sample parameters, the minibatch form used in training.
  Tensor forward_transformed_rows(const Tensor& x,
                                  const std::vector<TransformParams>& params,
                                  Mode mode = Mode::Eval) {
    Tensor e = encode(x, mode);
    std::vector<BlockOperator> ops;
    ops.reserve(params.size());
    for (const TransformParams& p : params)
      ops.push_back(build_block_transform(cfg_.family, p));
    return decode(apply_rows(ops, e), mode);
  }

  /// Unnormalized class scores from an invariant signature batch.
  Tensor classify_invariants(const Tensor& signature, Mode mode = Mode::Eval) {
    if (head_.empty())
      throw ConfigError("classify_invariants: model has no classifier head");
    if (signature.ndim() != 2 ||
        signature.dim(1) != cfg_.family.signature_length())
      throw ShapeError("classify_invariants: expected [N," +
                       std::to_string(cfg_.family.signature_length()) +
                       "], got " + shape_str(signature.shape()));
    Tensor h = signature;
    for (detail::LayerState& l : head_) h = run_layer(l, h, mode);
    return h;
  }

  bool has_head() const { return !head_.empty(); }

  void zero_grad() {
    for (auto& [name, t] : parameters()) t.zero_grad();
  }

 private:
  static std::string name_of(const char* prefix, size_t i, size_t total) {
    if (std::string(prefix) == "head" && i + 1 == total) return "head_out";
    return std::string(prefix) + std::to_string(i);
  }

  detail::LayerState build_layer(const LayerSpec& spec, Shape& shape,
                                 const std::string& name, std::mt19937_64& rng) {
    (void)name;
    detail::LayerState l;
    l.spec = spec;
    l.in_shape = shape;
    switch (spec.kind) {
      case LayerKind::Dense: {
        const long in = numel(shape);
        l.weight = detail::glorot_uniform({static_cast<int>(in), spec.width}, in,
                                          spec.width, rng);
        l.bias = Tensor::zeros({spec.width}, true);
        shape = {spec.width};
        if (spec.batchnorm) init_bn(l, spec.width);
        break;
      }
      case LayerKind::Conv: {
        if (shape.size() != 3)
          throw ConfigError("config: conv layer needs {C,H,W} input, got " +
                            shape_str(shape));
        const int C = shape[0], H = shape[1], W = shape[2];
        const long fan_in = static_cast<long>(C) * spec.kernel * spec.kernel;
        const long fan_out = static_cast<long>(spec.channels) * spec.kernel * spec.kernel;
        l.weight = detail::glorot_uniform(
            {spec.channels, C, spec.kernel, spec.kernel}, fan_in, fan_out, rng);
        l.bias = Tensor::zeros({spec.channels}, true);
        const int Ho = (H + 2 * spec.padding - spec.kernel) / spec.stride + 1;
        const int Wo = (W + 2 * spec.padding - spec.kernel) / spec.stride + 1;
        shape = {spec.channels, Ho, Wo};
        if (spec.batchnorm) init_bn(l, spec.channels);
        break;
      }
      case LayerKind::UpConv: {
        if (shape.size() != 3)
          throw ConfigError("config: upconv layer needs {C,H,W} input, got " +
                            shape_str(shape));
        const int C = shape[0], H = shape[1] * spec.factor, W = shape[2] * spec.factor;
        const long fan_in = static_cast<long>(C) * spec.kernel * spec.kernel;
        const long fan_out = static_cast<long>(spec.channels) * spec.kernel * spec.kernel;
        l.weight = detail::glorot_uniform(
            {spec.channels, C, spec.kernel, spec.kernel}, fan_in, fan_out, rng);
        l.bias = Tensor::zeros({spec.channels}, true);
        const int Ho = (H + 2 * spec.padding - spec.kernel) / 1 + 1;
        const int Wo = (W + 2 * spec.padding - spec.kernel) / 1 + 1;
        shape = {spec.channels, Ho, Wo};
        if (spec.batchnorm) init_bn(l, spec.channels);
        break;
      }
      case LayerKind::Reshape: {
        if (numel(spec.target) != numel(shape))
          throw ConfigError("config: reshape " + shape_str(shape) + " -> " +
                            shape_str(spec.target) + " changes the size");
        shape = spec.target;
        break;
      }
    }
    l.out_shape = shape;
    return l;
  }

  void init_bn(detail::LayerState& l, int features) {
    l.bn_gamma = Tensor::filled({features}, 1.0, true);
    l.bn_beta = Tensor::zeros({features}, true);
    l.bn_stats = RunningStats(features);
  }

  Tensor check_input(const Tensor& x) {
    const long want = cfg_.input_size();
    if (x.ndim() == 2 && x.dim(1) == want) {
      Shape s = cfg_.input_shape;
      s.insert(s.begin(), x.dim(0));
      return reshape(x, s);
    }
    if (x.ndim() == 4 && Shape{x.dim(1), x.dim(2), x.dim(3)} == cfg_.input_shape)
      return x;
    throw ShapeError("encode: input " + shape_str(x.shape()) +
                     " does not match " + shape_str(cfg_.input_shape));
  }

  Tensor run_layer(detail::LayerState& l, const Tensor& in, Mode mode) {
    Tensor h = in;
    switch (l.spec.kind) {
      case LayerKind::Dense: {
        if (h.ndim() != 2) {
          const long flat = numel(h.shape()) / h.dim(0);
          h = reshape(h, {h.dim(0), static_cast<int>(flat)});
        }
        h = add_row_bias(matmul(h, l.weight), l.bias);
        if (l.spec.batchnorm) h = batchnorm(h, l.bn_gamma, l.bn_beta, mode, l.bn_stats);
        break;
      }
      case LayerKind::Conv: {
        h = conv2d(h, l.weight, l.spec.stride, l.spec.padding);
        h = add_channel_bias(h, l.bias);
        if (l.spec.batchnorm)
          h = batchnorm_nchw(h, l.bn_gamma, l.bn_beta, mode, l.bn_stats);
        break;
      }
      case LayerKind::UpConv: {
        h = upsample_nearest(h, l.spec.factor);
        h = conv2d(h, l.weight, 1, l.spec.padding);
        h = add_channel_bias(h, l.bias);
        if (l.spec.batchnorm)
          h = batchnorm_nchw(h, l.bn_gamma, l.bn_beta, mode, l.bn_stats);
        break;
      }
      case LayerKind::Reshape: {
        Shape s = l.spec.target;
        s.insert(s.begin(), h.dim(0));
        h = reshape(h, s);
        return h;
      }
    }
    if (l.spec.activation) h = leaky_relu(h, cfg_.leaky_slope);
    return h;
  }

  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<detail::LayerState> encoder_, decoder_, head_;
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline TransformFamily planar_family(int repetitions) {
  TransformFamily f;
  f.dofs = {
      {"rotation", DofDomain::Circle, 0.0, 0.0, 2, repetitions},
      {"scale-x", DofDomain::Interval, 0.7, 1.3, 2, repetitions},
      {"scale-y", DofDomain::Interval, 0.7, 1.3, 2, repetitions},
  };
  f.feature_dim = 6 * repetitions;
  return f;
}

inline TransformFamily rotation_family(int repetitions) {
  TransformFamily f;
  f.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, repetitions}};
  f.feature_dim = 2 * repetitions;
  return f;
}

namespace detail {

inline LayerSpec dense(int width, bool bn, bool act) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.width = width;
  l.batchnorm = bn;
  l.activation = act;
  return l;
}

}  // namespace detail

/// 28x28 MLP: three 510-wide layers on each side around a 510-dim code of
/// three planar dofs tied 85 times.
inline ModelConfig preset_mnist_mlp() {
  ModelConfig cfg;
  cfg.preset = "mnist-mlp";
  cfg.input_shape = {1, 28, 28};
  cfg.family = planar_family(85);
  cfg.encoder = {detail::dense(510, true, true), detail::dense(510, true, true),
                 detail::dense(510, false, false)};
  cfg.decoder = {detail::dense(510, true, true), detail::dense(510, true, true),
                 detail::dense(28 * 28, false, false)};
  cfg.head_hidden = {256, 128};
  cfg.class_count = 10;
  return cfg;
}

/// 16x16 desk-scale MLP with a 30-dim code (three dofs tied 5 times).
inline ModelConfig preset_desk_mlp() {
  ModelConfig cfg;
  cfg.preset = "desk-mlp";
  cfg.input_shape = {1, 16, 16};
  cfg.family = planar_family(5);
  cfg.encoder = {detail::dense(256, true, true), detail::dense(256, true, true),
                 detail::dense(30, false, false)};
  cfg.decoder = {detail::dense(256, true, true), detail::dense(256, true, true),
                 detail::dense(16 * 16, false, false)};
  cfg.head_hidden = {64, 32};
  cfg.class_count = 10;
  return cfg;
}

/// 16x16 strided-conv encoder and upsample-conv decoder around the same
/// 30-dim code.
inline ModelConfig preset_desk_conv() {
  ModelConfig cfg;
  cfg.preset = "desk-conv";
  cfg.input_shape = {1, 16, 16};
  cfg.family = planar_family(5);
  LayerSpec c1;
  c1.kind = LayerKind::Conv;
  c1.channels = 8;
  c1.kernel = 3;
  c1.stride = 2;
  c1.padding = 1;
  c1.batchnorm = true;
  c1.activation = true;
  LayerSpec c2 = c1;
  c2.channels = 16;
  cfg.encoder = {c1, c2, detail::dense(30, false, false)};

  LayerSpec rs;
  rs.kind = LayerKind::Reshape;
  rs.target = {16, 4, 4};
  LayerSpec u1;
  u1.kind = LayerKind::UpConv;
  u1.channels = 8;
  u1.kernel = 3;
  u1.factor = 2;
  u1.padding = 1;
  u1.batchnorm = true;
  u1.activation = true;
  LayerSpec u2 = u1;
  u2.channels = 1;
  u2.batchnorm = false;
  u2.activation = false;
  cfg.decoder = {detail::dense(256, true, true), rs, u1, u2};
  cfg.head_hidden = {64, 32};
  cfg.class_count = 10;
  return cfg;
}

/// Tiny 8x8 model with a 6-dim code, for end-to-end gradient checks.
inline ModelConfig preset_tiny() {
  ModelConfig cfg;
  cfg.preset = "tiny";
  cfg.input_shape = {1, 8, 8};
  cfg.family = planar_family(1);
  cfg.encoder = {detail::dense(16, true, true), detail::dense(6, false, false)};
  cfg.decoder = {detail::dense(16, true, true), detail::dense(64, false, false)};
  cfg.head_hidden = {8};
  cfg.class_count = 10;
  return cfg;
}

inline ModelConfig make_preset(const std::string& name) {
  if (name == "mnist-mlp") return preset_mnist_mlp();
  if (name == "desk-mlp") return preset_desk_mlp();
  if (name == "desk-conv") return preset_desk_conv();
  if (name == "tiny") return preset_tiny();
  throw ConfigError("unknown preset '" + name +
                    "' (expected mnist-mlp, desk-mlp, desk-conv, or tiny)");
}

}  // namespace ftl

#endif  // FTL_NETWORK_HPP
