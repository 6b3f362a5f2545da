#ifndef FTL_TRAIN_HPP
#define FTL_TRAIN_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ftl/dataset.hpp"
#include "ftl/losses.hpp"
#include "ftl/network.hpp"
#include "ftl/optimizer.hpp"

namespace ftl {

enum class LossKind { L1, Ssim, Face, Bce };

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "l1") return LossKind::L1;
  if (s == "ssim") return LossKind::Ssim;
  if (s == "face") return LossKind::Face;
  if (s == "bce") return LossKind::Bce;
  throw ConfigError("unknown loss '" + s + "' (expected l1, ssim, face, or bce)");
}

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::L1: return "l1";
    case LossKind::Ssim: return "ssim";
    case LossKind::Face: return "face";
    case LossKind::Bce: return "bce";
  }
  return "?";
}

struct TrainSettings {
  LrSchedule schedule;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  int batch_size = 128;
  int epochs = 10;
  LossKind loss = LossKind::L1;
  double alpha = 0.85;        // face-loss blend
  double gamma = 0.98;        // balanced BCE occupancy weight
  double reg_weight = 0.0;    // invariance regularizer coefficient
  double class_weight = 0.0;  // classification term weight (10 in the combined objective)
  bool use_ftl = true;        // false trains the same pipeline with F = identity
  long log_every = 50;
  std::uint64_t seed = 0;
};

struct LogRow {
  long step = 0;
  double total = 0, recon = 0, reg = 0, cls = 0;
  double wall_ms = 0;
};

struct TrainOutcome {
  std::vector<LogRow> history;
  long steps = 0;
  double final_loss = 0.0;  // eval-mode mean reconstruction loss on the data
};

inline Tensor images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ValueError("images_to_tensor: empty set");
  const int h = images.front().height, w = images.front().width;
  std::vector<double> data;
  data.reserve(images.size() * static_cast<size_t>(h) * w);
  for (const Image& img : images) {
    if (img.height != h || img.width != w)
      throw ShapeError("images_to_tensor: mixed image sizes");
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return Tensor::from_data({static_cast<int>(images.size()), 1, h, w},
                           std::move(data));
}

inline Tensor reconstruction_loss(const Tensor& out, const Tensor& target,
                                  LossKind kind, double alpha, double gamma) {
  switch (kind) {
    case LossKind::L1: return l1_loss(out, target);
    case LossKind::Ssim:
      return scale(add_scalar(scale(ssim(out, target), -1.0), 1.0), 0.5);
    case LossKind::Face: return face_loss(out, target, alpha);
    case LossKind::Bce: {
      BalancedBceConfig cfg;
      cfg.gamma = gamma;
      return balanced_bce(out, target, cfg);
    }
  }
  throw ValueError("reconstruction_loss: bad kind");
}

namespace detail {

struct Batch {
  Tensor x, xt;
  std::vector<TransformParams> params;
  std::vector<int> labels;
};

inline Batch gather_batch(const std::vector<TrainingTriple>& data,
                          const std::vector<size_t>& order, size_t begin,
                          size_t end) {
  Batch b;
  std::vector<Image> xs, xts;
  xs.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    const TrainingTriple& t = data[order[i]];
    xs.push_back(t.x);
    xts.push_back(t.x_t);
    b.params.push_back(t.params);
    b.labels.push_back(t.label);
  }
  b.x = images_to_tensor(xs);
  b.xt = images_to_tensor(xts);
  return b;
}

}  // namespace detail

/// Eval-mode mean reconstruction loss over a dataset, batched.
inline double dataset_loss(Model& model, const std::vector<TrainingTriple>& data,
                           const TrainSettings& s) {
  if (data.empty()) return 0.0;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  double acc = 0.0;
  for (size_t begin = 0; begin < data.size(); begin += static_cast<size_t>(s.batch_size)) {
    const size_t end = std::min(data.size(), begin + static_cast<size_t>(s.batch_size));
    detail::Batch b = detail::gather_batch(data, order, begin, end);
    Tensor out = s.use_ftl
                     ? model.forward_transformed_rows(b.x, b.params, Mode::Eval)
                     : model.decode(model.encode(b.x, Mode::Eval), Mode::Eval);
    acc += reconstruction_loss(out, b.xt, s.loss, s.alpha, s.gamma).item() *
           static_cast<double>(end - begin);
  }
  return acc / static_cast<double>(data.size());
}

/// Minibatch Adam over the summed objective: reconstruction of the
/// transformed target, plus the optional invariance regularizer and the
/// optional weighted classification term.
inline TrainOutcome train_model(Model& model, ModelOptimizer& opt,
                                const std::vector<TrainingTriple>& data,
                                const TrainSettings& s) {
  if (data.empty()) throw ValueError("train_model: empty dataset");
  TrainOutcome outcome;
  std::mt19937_64 rng(s.seed);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const TransformFamily& family = model.config().family;
  const auto t0 = std::chrono::steady_clock::now();
  long step = 0;

  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t begin = 0; begin < data.size();
         begin += static_cast<size_t>(s.batch_size)) {
      const size_t end =
          std::min(data.size(), begin + static_cast<size_t>(s.batch_size));
      detail::Batch b = detail::gather_batch(data, order, begin, end);
      const double bsize = static_cast<double>(end - begin);

      model.zero_grad();
      Tensor e = model.encode(b.x, Mode::Train);
      Tensor transformed = e;
      if (s.use_ftl) {
        std::vector<BlockOperator> ops;
        ops.reserve(b.params.size());
        for (const TransformParams& p : b.params)
          ops.push_back(build_block_transform(family, p));
        transformed = apply_rows(ops, e);
      }
      Tensor out = model.decode(transformed, Mode::Train);
      Tensor recon = reconstruction_loss(out, b.xt, s.loss, s.alpha, s.gamma);
      Tensor total = recon;

      double reg_value = 0.0;
      if (s.reg_weight > 0.0 && s.use_ftl) {
        Tensor et = model.encode(b.xt, Mode::Train);
        Tensor reg = scale(invariance_regularizer(family, e, et),
                           s.reg_weight / bsize);
        reg_value = reg.item();
        total = add(total, reg);
      }
      double cls_value = 0.0;
      if (s.class_weight > 0.0 && model.has_head()) {
        Tensor scores =
            model.classify_invariants(invariant_signature(family, e), Mode::Train);
        Tensor cls = scale(softmax_cross_entropy(scores, b.labels), s.class_weight);
        cls_value = cls.item();
        total = add(total, cls);
      }

      backward(total);
      opt.step(model);
      ++step;

      if (s.log_every > 0 && step % s.log_every == 0) {
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        outcome.history.push_back(
            {step, total.item(), recon.item(), reg_value, cls_value, ms});
      }
    }
  }
  outcome.steps = step;
  outcome.final_loss = dataset_loss(model, data, s);
  return outcome;
}

}  // namespace ftl

#endif  // FTL_TRAIN_HPP
