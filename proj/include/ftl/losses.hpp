#ifndef FTL_LOSSES_HPP
#define FTL_LOSSES_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "ftl/ops.hpp"
#include "ftl/tensor.hpp"
#include "ftl/transform.hpp"

namespace ftl {

/// Mean absolute difference over all elements.
inline Tensor l1_loss(const Tensor& x, const Tensor& y) {
  check_same_shape(x.shape(), y.shape(), "l1_loss");
  return mean(abs_val(sub(x, y)));
}

// ---------------------------------------------------------------------------
// SSIM
// ---------------------------------------------------------------------------

/// Gaussian-window SSIM configuration for a dynamic range of 1.0.
struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return k1 * k1; }
  double c2() const { return k2 * k2; }
};

namespace detail {

inline Tensor gaussian_window(const SsimConfig& cfg) {
  const int w = cfg.window;
  if (w < 1 || w % 2 == 0)
    throw ValueError("ssim: window size must be odd and positive");
  std::vector<double> k(static_cast<size_t>(w) * w);
  const double c = (w - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) {
      const double di = i - c, dj = j - c;
      const double v = std::exp(-(di * di + dj * dj) / (2.0 * cfg.sigma * cfg.sigma));
      k[static_cast<size_t>(i * w + j)] = v;
      total += v;
    }
  for (double& v : k) v /= total;  // weights sum to 1
  return Tensor::from_data({1, 1, w, w}, std::move(k));
}

}  // namespace detail

/// Mean structural similarity over all valid sliding windows, built from
/// differentiable convolution and elementwise graph ops. Operates per channel
/// on [N,C,H,W] batches (or a single [H,W] image) and averages.
inline Tensor ssim(const Tensor& x, const Tensor& y, const SsimConfig& cfg = {}) {
  check_same_shape(x.shape(), y.shape(), "ssim");
  Tensor xb = x, yb = y;
  if (x.ndim() == 2) {
    xb = reshape(x, {1, 1, x.dim(0), x.dim(1)});
    yb = reshape(y, {1, 1, y.dim(0), y.dim(1)});
  }
  if (xb.ndim() != 4)
    throw ShapeError("ssim: expected [N,C,H,W] or [H,W], got " +
                     shape_str(x.shape()));
  if (xb.dim(2) < cfg.window || xb.dim(3) < cfg.window)
    throw ShapeError("ssim: image " + shape_str(xb.shape()) +
                     " smaller than window " + std::to_string(cfg.window));
  // Per-channel windowing: fold channels into the batch axis.
  const int n = xb.dim(0) * xb.dim(1), h = xb.dim(2), w = xb.dim(3);
  xb = reshape(xb, {n, 1, h, w});
  yb = reshape(yb, {n, 1, h, w});

  const Tensor win = detail::gaussian_window(cfg);
  const double c1 = cfg.c1(), c2 = cfg.c2();

  Tensor mu_x = conv2d(xb, win, 1, 0);
  Tensor mu_y = conv2d(yb, win, 1, 0);
  Tensor xx = conv2d(mul(xb, xb), win, 1, 0);
  Tensor yy = conv2d(mul(yb, yb), win, 1, 0);
  Tensor xy = conv2d(mul(xb, yb), win, 1, 0);

  Tensor var_x = sub(xx, mul(mu_x, mu_x));
  Tensor var_y = sub(yy, mul(mu_y, mu_y));
  Tensor cov = sub(xy, mul(mu_x, mu_y));

  Tensor num = mul(add_scalar(scale(mul(mu_x, mu_y), 2.0), c1),
                   add_scalar(scale(cov, 2.0), c2));
  Tensor den = mul(add_scalar(add(mul(mu_x, mu_x), mul(mu_y, mu_y)), c1),
                   add_scalar(add(var_x, var_y), c2));
  return mean(div(num, den));
}

/// Convex blend of windowed structural dissimilarity and L1:
/// alpha * mean((1 - SSIM)/2) + (1 - alpha) * mean|x - y|.
inline Tensor face_loss(const Tensor& x, const Tensor& y, double alpha,
                        const SsimConfig& cfg = {}) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ValueError("face_loss: alpha must lie in [0,1], got " +
                     std::to_string(alpha));
  Tensor dssim = scale(add_scalar(scale(ssim(x, y, cfg), -1.0), 1.0), 0.5);
  return add(scale(dssim, alpha), scale(l1_loss(x, y), 1.0 - alpha));
}

// ---------------------------------------------------------------------------
// Balanced binary cross-entropy
// ---------------------------------------------------------------------------

/// Occupancy-weighted BCE summed over voxels:
///   sum_i  -gamma * t'_i * log(o'_i) - (1 - gamma) * (1 - t'_i) * log(1 - o'_i)
/// with targets affinely relabeled {0,1} -> [target_lo, target_hi] and outputs
/// affinely rescaled onto [output_lo, output_hi]. The output rescale keeps
/// every log argument positive; it also shifts the minimizer, so a switch
/// disables both rescales for the symmetric sanity form.
struct BalancedBceConfig {
  double gamma = 0.98;
  bool rescale = true;
  double target_lo = -1.0, target_hi = 2.0;
  double output_lo = 0.1, output_hi = 0.9999;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw ValueError("balanced_bce: gamma must lie in (0,1), got " +
                       std::to_string(gamma));
    if (rescale && !(output_lo > 0.0 && output_hi < 1.0 && output_lo < output_hi))
      throw ValueError(
          "balanced_bce: output rescale range must lie strictly inside (0,1)");
  }
};

/// Fused op, differentiable w.r.t. `output` only. Raw targets must be exactly
/// 0 or 1 and raw outputs must lie in [0,1]. Zero-coefficient terms are
/// dropped, so the unrescaled form stays finite at o == t.
inline Tensor balanced_bce(const Tensor& output, const Tensor& target,
                           const BalancedBceConfig& cfg = {}) {
  check_same_shape(output.shape(), target.shape(), "balanced_bce");
  cfg.validate();
  for (double t : target.data())
    if (t != 0.0 && t != 1.0)
      throw ValueError("balanced_bce: target " + std::to_string(t) +
                       " is not binary");
  for (double o : output.data())
    if (!(o >= 0.0 && o <= 1.0))
      throw ValueError("balanced_bce: output " + std::to_string(o) +
                       " outside [0,1]");

  const double gamma = cfg.gamma;
  const double os = cfg.rescale ? (cfg.output_hi - cfg.output_lo) : 1.0;
  const double ob = cfg.rescale ? cfg.output_lo : 0.0;
  const double ts = cfg.rescale ? (cfg.target_hi - cfg.target_lo) : 1.0;
  const double tb = cfg.rescale ? cfg.target_lo : 0.0;

  Tensor target_held = target;  // keeps values alive for the backward pass
  Tensor out = Tensor::make_op(
      {1}, {output},
      [output, target_held, gamma, os, ob, ts, tb](detail::Node& o) mutable {
        const double g = o.grad[0];
        const double* ov = output.data().data();
        const double* tv = target_held.data().data();
        double* gx = output.node()->grad_data();
        for (long i = 0; i < output.size(); ++i) {
          const double op = ob + os * ov[i];
          const double tp = tb + ts * tv[i];
          double d = 0.0;
          if (gamma * tp != 0.0) d += -gamma * tp / op;
          if ((1.0 - gamma) * (1.0 - tp) != 0.0)
            d += (1.0 - gamma) * (1.0 - tp) / (1.0 - op);
          gx[i] += g * d * os;
        }
      });
  double acc = 0.0;
  const double* ov = output.data().data();
  const double* tv = target.data().data();
  for (long i = 0; i < output.size(); ++i) {
    const double op = ob + os * ov[i];
    const double tp = tb + ts * tv[i];
    const double c1 = gamma * tp;
    const double c0 = (1.0 - gamma) * (1.0 - tp);
    if (c1 != 0.0) acc += -c1 * std::log(op);
    if (c0 != 0.0) acc += -c0 * std::log(1.0 - op);
  }
  out.data()[0] = acc;
  return out;
}

// ---------------------------------------------------------------------------
// Invariance regularizer and combined classification objective
// ---------------------------------------------------------------------------

/// Squared L2 distance between the invariant signatures of two code batches;
/// zero whenever the codes differ by a transform of the family.
inline Tensor invariance_regularizer(const TransformFamily& family,
                                     const Tensor& e_x, const Tensor& e_xt) {
  check_same_shape(e_x.shape(), e_xt.shape(), "invariance_regularizer");
  Tensor d = sub(invariant_signature(family, e_x),
                 invariant_signature(family, e_xt));
  return sum(square(d));
}

/// Reconstruction plus weighted softmax cross-entropy.
inline Tensor combined_classification_loss(const Tensor& recon_loss,
                                           const Tensor& class_scores,
                                           const std::vector<int>& labels,
                                           double weight = 10.0) {
  return add(recon_loss, scale(softmax_cross_entropy(class_scores, labels), weight));
}

}  // namespace ftl

#endif  // FTL_LOSSES_HPP
