#ifndef FTL_OPS_HPP
#define FTL_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "ftl/parallel.hpp"
#include "ftl/tensor.hpp"

namespace ftl {

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_eltwise(const Tensor& a, const Tensor& b, const char* name,
                      Fwd fwd, Bwd bwd) {
  check_same_shape(a.shape(), b.shape(), name);
  Tensor out = Tensor::make_op(
      a.shape(), {a, b}, [a, b, bwd](Node& o) mutable {
        const double* g = o.grad.data();
        const double* av = a.data().data();
        const double* bv = b.data().data();
        double* ga = a.node()->requires_grad ? a.node()->grad_data() : nullptr;
        double* gb = b.node()->requires_grad ? b.node()->grad_data() : nullptr;
        for (long i = 0; i < o.size(); ++i) {
          auto [da, db] = bwd(av[i], bv[i], g[i]);
          if (ga) ga[i] += da;
          if (gb) gb[i] += db;
        }
      });
  double* ov = out.data().data();
  const double* av = a.data().data();
  const double* bv = b.data().data();
  for (long i = 0; i < out.size(); ++i) ov[i] = fwd(av[i], bv[i]);
  return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_eltwise(const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor out = Tensor::make_op(x.shape(), {x}, [x, bwd](Node& o) mutable {
    const double* g = o.grad.data();
    const double* xv = x.data().data();
    const double* yv = o.data.data();
    double* gx = x.node()->grad_data();
    for (long i = 0; i < o.size(); ++i) gx[i] += bwd(xv[i], yv[i]) * g[i];
  });
  double* ov = out.data().data();
  const double* xv = x.data().data();
  for (long i = 0; i < out.size(); ++i) ov[i] = fwd(xv[i]);
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_eltwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return std::pair{g, g}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_eltwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return std::pair{g, -g}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_eltwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g) { return std::pair{g * y, g * x}; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_eltwise(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double x, double y, double g) {
        return std::pair{g / y, -g * x / (y * y)};
      });
}

inline Tensor scale(const Tensor& x, double c) {
  return detail::unary_eltwise(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(const Tensor& x, double c) {
  return detail::unary_eltwise(
      x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary_eltwise(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

/// |x| with subgradient 0 at x == 0.
inline Tensor abs_val(const Tensor& x) {
  return detail::unary_eltwise(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_eltwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

/// Elementwise max(x, slope*x); the subgradient at 0 uses the positive branch.
inline Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw ValueError("leaky_relu: slope must lie in (0,1), got " +
                     std::to_string(slope));
  return detail::unary_eltwise(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
  Tensor out = Tensor::make_op({1}, {x}, [x](detail::Node& o) mutable {
    const double g = o.grad[0];
    double* gx = x.node()->grad_data();
    for (long i = 0; i < x.size(); ++i) gx[i] += g;
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.data()[0] = acc;
  return out;
}

inline Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  Tensor out = Tensor::make_op({1}, {x}, [x, inv](detail::Node& o) mutable {
    const double g = o.grad[0] * inv;
    double* gx = x.node()->grad_data();
    for (long i = 0; i < x.size(); ++i) gx[i] += g;
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.data()[0] = acc * inv;
  return out;
}

/// Copy-reshape; gradient flows straight through.
inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  Tensor out = Tensor::make_op(std::move(shape), {x}, [x](detail::Node& o) mutable {
    double* gx = x.node()->grad_data();
    for (long i = 0; i < o.size(); ++i) gx[i] += o.grad[i];
  });
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Matrix multiply
// ---------------------------------------------------------------------------

namespace detail {

/// C[m,n] (+)= A[m,k] * B[k,n]. Row-partitioned; deterministic per element.
inline void matmul_kernel(const double* A, const double* B, double* C, long m,
                          long k, long n, bool accumulate) {
  parallel_for(m, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      double* c = C + i * n;
      if (!accumulate) std::fill(c, c + n, 0.0);
      const double* a = A + i * k;
      for (long p = 0; p < k; ++p) {
        const double av = a[p];
        const double* b = B + p * n;
        for (long j = 0; j < n; ++j) c[j] += av * b[j];
      }
    }
  });
}

/// C[m,n] += A[k,m]^T * B[k,n].
inline void matmul_tn_acc(const double* A, const double* B, double* C, long m,
                          long k, long n) {
  parallel_for(m, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      double* c = C + i * n;
      for (long p = 0; p < k; ++p) {
        const double av = A[p * m + i];
        const double* b = B + p * n;
        for (long j = 0; j < n; ++j) c[j] += av * b[j];
      }
    }
  });
}

/// C[m,k] += A[m,n] * B[k,n]^T.
inline void matmul_nt_acc(const double* A, const double* B, double* C, long m,
                          long n, long k) {
  parallel_for(m, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const double* a = A + i * n;
      double* c = C + i * k;
      for (long p = 0; p < k; ++p) {
        const double* b = B + p * n;
        double acc = 0.0;
        for (long j = 0; j < n; ++j) acc += a[j] * b[j];
        c[p] += acc;
      }
    }
  });
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  const long m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::make_op(
      {static_cast<int>(m), static_cast<int>(n)}, {a, b},
      [a, b, m, k, n](detail::Node& o) mutable {
        const double* g = o.grad.data();
        if (a.node()->requires_grad)  // dA = G * B^T
          detail::matmul_nt_acc(g, b.data().data(), a.node()->grad_data(), m, n, k);
        if (b.node()->requires_grad)  // dB = A^T * G
          detail::matmul_tn_acc(a.data().data(), g, b.node()->grad_data(), k, m, n);
      });
  detail::matmul_kernel(a.data().data(), b.data().data(), out.data().data(), m,
                        k, n, false);
  return out;
}

/// x[N,D] + row vector b[D].
inline Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  if (x.ndim() != 2 || b.ndim() != 1 || x.dim(1) != b.dim(0))
    throw ShapeError("add_row_bias: " + shape_str(x.shape()) + " + " +
                     shape_str(b.shape()));
  const long n = x.dim(0), d = x.dim(1);
  Tensor out = Tensor::make_op(x.shape(), {x, b}, [x, b, n, d](detail::Node& o) mutable {
    const double* g = o.grad.data();
    if (x.node()->requires_grad) {
      double* gx = x.node()->grad_data();
      for (long i = 0; i < n * d; ++i) gx[i] += g[i];
    }
    if (b.node()->requires_grad) {
      double* gb = b.node()->grad_data();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < d; ++j) gb[j] += g[i * d + j];
    }
  });
  double* ov = out.data().data();
  const double* xv = x.data().data();
  const double* bv = b.data().data();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) ov[i * d + j] = xv[i * d + j] + bv[j];
  return out;
}

/// x[N,K,H,W] + per-channel bias b[K].
inline Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.ndim() != 4 || b.ndim() != 1 || x.dim(1) != b.dim(0))
    throw ShapeError("add_channel_bias: " + shape_str(x.shape()) + " + " +
                     shape_str(b.shape()));
  const long n = x.dim(0), k = x.dim(1), hw = static_cast<long>(x.dim(2)) * x.dim(3);
  Tensor out = Tensor::make_op(x.shape(), {x, b}, [x, b, n, k, hw](detail::Node& o) mutable {
    const double* g = o.grad.data();
    if (x.node()->requires_grad) {
      double* gx = x.node()->grad_data();
      for (long i = 0; i < o.size(); ++i) gx[i] += g[i];
    }
    if (b.node()->requires_grad) {
      double* gb = b.node()->grad_data();
      for (long i = 0; i < n; ++i)
        for (long c = 0; c < k; ++c) {
          const double* gp = g + (i * k + c) * hw;
          double acc = 0.0;
          for (long j = 0; j < hw; ++j) acc += gp[j];
          gb[c] += acc;
        }
    }
  });
  double* ov = out.data().data();
  const double* xv = x.data().data();
  const double* bv = b.data().data();
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < k; ++c) {
      const long base = (i * k + c) * hw;
      for (long j = 0; j < hw; ++j) ov[base + j] = xv[base + j] + bv[c];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation) and nearest-neighbor upsampling
// ---------------------------------------------------------------------------

/// Zero-padded cross-correlation of input [N,C,H,W] with kernel [K,C,h,w].
/// Output spatial size is floor((H + 2*padding - h)/stride) + 1.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
                     int padding) {
  if (input.ndim() != 4 || kernel.ndim() != 4)
    throw ShapeError("conv2d: expected 4-d input and kernel, got " +
                     shape_str(input.shape()) + " and " +
                     shape_str(kernel.shape()));
  if (input.dim(1) != kernel.dim(1))
    throw ShapeError("conv2d: channel mismatch " + shape_str(input.shape()) +
                     " vs " + shape_str(kernel.shape()));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d: padding must be >= 0");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kh > H + 2 * padding || kw > W + 2 * padding)
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                     " larger than padded input " + shape_str(input.shape()) +
                     " (padding " + std::to_string(padding) + ")");
  const int Ho = (H + 2 * padding - kh) / stride + 1;
  const int Wo = (W + 2 * padding - kw) / stride + 1;

  auto in_at = [=](const double* x, int n, int c, int i, int j) {
    return x[((static_cast<long>(n) * C + c) * H + i) * W + j];
  };

  Tensor out = Tensor::make_op(
      {N, K, Ho, Wo}, {input, kernel},
      [=](detail::Node& o) mutable {
        const double* g = o.grad.data();
        const double* xv = input.data().data();
        const double* kv = kernel.data().data();
        double* gx = input.node()->requires_grad ? input.node()->grad_data() : nullptr;
        double* gk = kernel.node()->requires_grad ? kernel.node()->grad_data() : nullptr;
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k)
            for (int oi = 0; oi < Ho; ++oi)
              for (int oj = 0; oj < Wo; ++oj) {
                const double go =
                    g[((static_cast<long>(n) * K + k) * Ho + oi) * Wo + oj];
                if (go == 0.0) continue;
                for (int c = 0; c < C; ++c)
                  for (int u = 0; u < kh; ++u) {
                    const int i = oi * stride - padding + u;
                    if (i < 0 || i >= H) continue;
                    for (int v = 0; v < kw; ++v) {
                      const int j = oj * stride - padding + v;
                      if (j < 0 || j >= W) continue;
                      const long xi = ((static_cast<long>(n) * C + c) * H + i) * W + j;
                      const long ki = ((static_cast<long>(k) * C + c) * kh + u) * kw + v;
                      if (gx) gx[xi] += go * kv[ki];
                      if (gk) gk[ki] += go * xv[xi];
                    }
                  }
              }
      });

  double* ov = out.data().data();
  const double* xv = input.data().data();
  const double* kv = kernel.data().data();
  parallel_for(static_cast<long>(N) * K, [&](long lo, long hi) {
    for (long nk = lo; nk < hi; ++nk) {
      const int n = static_cast<int>(nk / K);
      const int k = static_cast<int>(nk % K);
      for (int oi = 0; oi < Ho; ++oi)
        for (int oj = 0; oj < Wo; ++oj) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < kh; ++u) {
              const int i = oi * stride - padding + u;
              if (i < 0 || i >= H) continue;
              for (int v = 0; v < kw; ++v) {
                const int j = oj * stride - padding + v;
                if (j < 0 || j >= W) continue;
                acc += in_at(xv, n, c, i, j) *
                       kv[((static_cast<long>(k) * C + c) * kh + u) * kw + v];
              }
            }
          ov[(nk * Ho + oi) * Wo + oj] = acc;
        }
    }
  });
  return out;
}

/// Replicates each pixel of [N,C,H,W] into an f x f block. The gradient of an
/// input pixel is the sum over its output block.
inline Tensor upsample_nearest(const Tensor& input, int factor) {
  if (factor < 1)
    throw ValueError("upsample_nearest: factor must be >= 1, got " +
                     std::to_string(factor));
  if (input.ndim() != 4)
    throw ShapeError("upsample_nearest: expected 4-d input, got " +
                     shape_str(input.shape()));
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Ho = H * factor, Wo = W * factor;
  Tensor out = Tensor::make_op(
      {N, C, Ho, Wo}, {input}, [=](detail::Node& o) mutable {
        const double* g = o.grad.data();
        double* gx = input.node()->grad_data();
        for (long nc = 0; nc < static_cast<long>(N) * C; ++nc)
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
              double acc = 0.0;
              for (int u = 0; u < factor; ++u)
                for (int v = 0; v < factor; ++v)
                  acc += g[(nc * Ho + i * factor + u) * Wo + j * factor + v];
              gx[(nc * H + i) * W + j] += acc;
            }
      });
  double* ov = out.data().data();
  const double* xv = input.data().data();
  for (long nc = 0; nc < static_cast<long>(N) * C; ++nc)
    for (int i = 0; i < Ho; ++i)
      for (int j = 0; j < Wo; ++j)
        ov[(nc * Ho + i) * Wo + j] = xv[(nc * H + i / factor) * W + j / factor];
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

enum class Mode { Train, Eval };

/// Exponential-moving-average statistics owned by a layer, updated in train
/// mode and read in eval mode.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
  double momentum = 0.9;

  explicit RunningStats(int features = 0)
      : mean(static_cast<size_t>(features), 0.0),
        var(static_cast<size_t>(features), 1.0) {}
};

namespace detail {

// Shared batchnorm core: x viewed as [rows, D] with `stride_row` describing
// how row r, feature d maps into the flat array.
template <typename Index>
Tensor batchnorm_core(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      Mode mode, RunningStats& stats, long rows, long D,
                      Index index) {
  constexpr double kEps = 1e-5;
  if (mode == Mode::Train && rows < 2)
    throw ValueError("batchnorm: degenerate batch of size " +
                     std::to_string(rows) + " in train mode");
  if (gamma.size() != D || beta.size() != D)
    throw ShapeError("batchnorm: gamma/beta must have " + std::to_string(D) +
                     " features, got " + shape_str(gamma.shape()) + " and " +
                     shape_str(beta.shape()));

  std::vector<double> mu(static_cast<size_t>(D), 0.0);
  std::vector<double> var(static_cast<size_t>(D), 0.0);
  const double* xv = x.data().data();
  if (mode == Mode::Train) {
    for (long d = 0; d < D; ++d) {
      double m = 0.0;
      for (long r = 0; r < rows; ++r) m += xv[index(r, d)];
      m /= static_cast<double>(rows);
      double v = 0.0;
      for (long r = 0; r < rows; ++r) {
        const double c = xv[index(r, d)] - m;
        v += c * c;
      }
      v /= static_cast<double>(rows);
      mu[static_cast<size_t>(d)] = m;
      var[static_cast<size_t>(d)] = v;
    }
    for (long d = 0; d < D; ++d) {
      stats.mean[static_cast<size_t>(d)] =
          stats.momentum * stats.mean[static_cast<size_t>(d)] +
          (1.0 - stats.momentum) * mu[static_cast<size_t>(d)];
      stats.var[static_cast<size_t>(d)] =
          stats.momentum * stats.var[static_cast<size_t>(d)] +
          (1.0 - stats.momentum) * var[static_cast<size_t>(d)];
    }
  } else {
    mu = stats.mean;
    var = stats.var;
  }

  auto xhat = std::make_shared<std::vector<double>>(x.data().begin(), x.data().end());
  std::vector<double> inv_sd(static_cast<size_t>(D));
  for (long d = 0; d < D; ++d)
    inv_sd[static_cast<size_t>(d)] = 1.0 / std::sqrt(var[static_cast<size_t>(d)] + kEps);
  for (long d = 0; d < D; ++d)
    for (long r = 0; r < rows; ++r) {
      double& h = (*xhat)[static_cast<size_t>(index(r, d))];
      h = (h - mu[static_cast<size_t>(d)]) * inv_sd[static_cast<size_t>(d)];
    }

  Tensor out = Tensor::make_op(
      x.shape(), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_sd, rows, D, index, mode](Node& o) mutable {
        const double* g = o.grad.data();
        const double* gam = gamma.data().data();
        double* ggamma = gamma.node()->requires_grad ? gamma.node()->grad_data() : nullptr;
        double* gbeta = beta.node()->requires_grad ? beta.node()->grad_data() : nullptr;
        double* gx = x.node()->requires_grad ? x.node()->grad_data() : nullptr;
        const double n = static_cast<double>(rows);
        for (long d = 0; d < D; ++d) {
          double sum_g = 0.0, sum_gh = 0.0;
          for (long r = 0; r < rows; ++r) {
            const long i = index(r, d);
            sum_g += g[i];
            sum_gh += g[i] * (*xhat)[static_cast<size_t>(i)];
          }
          if (ggamma) ggamma[d] += sum_gh;
          if (gbeta) gbeta[d] += sum_g;
          if (!gx) continue;
          const double isd = inv_sd[static_cast<size_t>(d)];
          if (mode == Mode::Train) {
            // d/dx of ((x - mu)/sd * gamma + beta) through mu and var.
            for (long r = 0; r < rows; ++r) {
              const long i = index(r, d);
              const double h = (*xhat)[static_cast<size_t>(i)];
              gx[i] += gam[d] * isd * (g[i] - sum_g / n - h * sum_gh / n);
            }
          } else {
            for (long r = 0; r < rows; ++r) {
              const long i = index(r, d);
              gx[i] += gam[d] * isd * g[i];
            }
          }
        }
      });

  double* ov = out.data().data();
  const double* gam = gamma.data().data();
  const double* bet = beta.data().data();
  for (long d = 0; d < D; ++d)
    for (long r = 0; r < rows; ++r) {
      const long i = index(r, d);
      ov[i] = gam[d] * (*xhat)[static_cast<size_t>(i)] + bet[d];
    }
  return out;
}

}  // namespace detail

/// Batch normalization over [N,D]: per-column statistics.
inline Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        Mode mode, RunningStats& stats) {
  if (x.ndim() != 2)
    throw ShapeError("batchnorm: expected [N,D] input, got " +
                     shape_str(x.shape()));
  const long N = x.dim(0), D = x.dim(1);
  return detail::batchnorm_core(x, gamma, beta, mode, stats, N, D,
                                [D](long r, long d) { return r * D + d; });
}

/// Batch normalization over [N,C,H,W]: per-channel statistics across N,H,W.
inline Tensor batchnorm_nchw(const Tensor& x, const Tensor& gamma,
                             const Tensor& beta, Mode mode, RunningStats& stats) {
  if (x.ndim() != 4)
    throw ShapeError("batchnorm_nchw: expected [N,C,H,W] input, got " +
                     shape_str(x.shape()));
  const long N = x.dim(0), C = x.dim(1), HW = static_cast<long>(x.dim(2)) * x.dim(3);
  return detail::batchnorm_core(
      x, gamma, beta, mode, stats, N * HW, C, [C, HW](long r, long c) {
        const long n = r / HW, p = r % HW;
        return (n * C + c) * HW + p;
      });
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

/// Mean softmax cross-entropy of unnormalized scores [N,K] against integer
/// labels. Fused forward/backward with the usual log-sum-exp stabilization.
inline Tensor softmax_cross_entropy(const Tensor& scores,
                                    const std::vector<int>& labels) {
  if (scores.ndim() != 2)
    throw ShapeError("softmax_cross_entropy: expected [N,K] scores, got " +
                     shape_str(scores.shape()));
  const long N = scores.dim(0), K = scores.dim(1);
  if (static_cast<long>(labels.size()) != N)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(N) + " rows");
  for (int y : labels)
    if (y < 0 || y >= K)
      throw ValueError("softmax_cross_entropy: label " + std::to_string(y) +
                       " out of range [0," + std::to_string(K) + ")");

  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(N * K));
  const double* s = scores.data().data();
  double loss = 0.0;
  for (long i = 0; i < N; ++i) {
    const double* row = s + i * K;
    double mx = row[0];
    for (long j = 1; j < K; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (long j = 0; j < K; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    for (long j = 0; j < K; ++j)
      (*probs)[static_cast<size_t>(i * K + j)] = std::exp(row[j] - logz);
    loss += logz - row[labels[static_cast<size_t>(i)]];
  }

  Tensor out = Tensor::make_op(
      {1}, {scores}, [scores, probs, labels, N, K](detail::Node& o) mutable {
        const double g = o.grad[0] / static_cast<double>(N);
        double* gs = scores.node()->grad_data();
        for (long i = 0; i < N; ++i)
          for (long j = 0; j < K; ++j) {
            double p = (*probs)[static_cast<size_t>(i * K + j)];
            if (j == labels[static_cast<size_t>(i)]) p -= 1.0;
            gs[i * K + j] += g * p;
          }
      });
  out.data()[0] = loss / static_cast<double>(N);
  return out;
}

}  // namespace ftl

#endif  // FTL_OPS_HPP
