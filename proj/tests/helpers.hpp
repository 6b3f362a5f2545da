#ifndef FTL_TESTS_HELPERS_HPP
#define FTL_TESTS_HELPERS_HPP

// Independent reference implementations used as test oracles. Everything here
// is deliberately written as plain nested loops, separate from the library's
// kernels and graph machinery.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ftl/tensor.hpp"
#include "ftl/transform.hpp"

namespace testutil {

/// Triple-loop matrix product reference.
inline std::vector<double> matmul_ref(const std::vector<double>& a,
                                      const std::vector<double>& b, int m,
                                      int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        c[static_cast<size_t>(i * n + j)] +=
            a[static_cast<size_t>(i * k + p)] * b[static_cast<size_t>(p * n + j)];
  return c;
}

/// Direct nested-loop zero-padded cross-correlation reference.
inline std::vector<double> conv2d_ref(const std::vector<double>& x,
                                      const std::vector<double>& w, int N, int C,
                                      int H, int W, int K, int kh, int kw,
                                      int stride, int pad, int& Ho, int& Wo) {
  Ho = (H + 2 * pad - kh) / stride + 1;
  Wo = (W + 2 * pad - kw) / stride + 1;
  std::vector<double> y(static_cast<size_t>(N) * K * Ho * Wo, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oi = 0; oi < Ho; ++oi)
        for (int oj = 0; oj < Wo; ++oj) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int i = oi * stride - pad + u;
                const int j = oj * stride - pad + v;
                if (i < 0 || i >= H || j < 0 || j >= W) continue;
                acc += x[static_cast<size_t>(((n * C + c) * H + i) * W + j)] *
                       w[static_cast<size_t>(((k * C + c) * kh + u) * kw + v)];
              }
          y[static_cast<size_t>(((n * K + k) * Ho + oi) * Wo + oj)] = acc;
        }
  return y;
}

/// Central finite differences against the analytic gradient of a rebuilt
/// graph. `make_loss` must construct a fresh scalar loss from the current
/// contents of `inputs`. Returns the worst relative error, with the usual
/// unit-scale floor in the denominator.
inline double max_grad_error(const std::function<ftl::Tensor()>& make_loss,
                             std::vector<ftl::Tensor> inputs, double h = 1e-6) {
  for (ftl::Tensor& t : inputs) t.zero_grad();
  ftl::Tensor loss = make_loss();
  ftl::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (ftl::Tensor& t : inputs) {
    if (!t.has_grad()) {
      analytic.emplace_back(static_cast<size_t>(t.size()), 0.0);
      continue;
    }
    analytic.emplace_back(t.grad().begin(), t.grad().end());
  }
  double worst = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    ftl::Tensor& t = inputs[ti];
    auto vals = t.data();
    for (long i = 0; i < t.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double fp = make_loss().item();
      vals[i] = keep - h;
      const double fm = make_loss().item();
      vals[i] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[ti][static_cast<size_t>(i)];
      const double denom = std::max({1.0, std::fabs(fd), std::fabs(an)});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

/// Dense feature_dim x feature_dim materialization of a block operator.
/// Exists only for oracle comparisons.
inline std::vector<double> dense_operator(const ftl::BlockOperator& op) {
  const int D = op.feature_dim;
  std::vector<double> m(static_cast<size_t>(D) * D, 0.0);
  int off = 0;
  for (size_t d = 0; d < op.blocks.size(); ++d) {
    const ftl::Mat& b = op.blocks[d];
    for (int r = 0; r < op.repetitions[d]; ++r) {
      for (int i = 0; i < b.n; ++i)
        for (int j = 0; j < b.n; ++j)
          m[static_cast<size_t>((off + i) * D + (off + j))] = b.at(i, j);
      off += b.n;
    }
  }
  return m;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline std::vector<double> random_vec(size_t n, double lo, double hi,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

/// The desk-scale three-dof family used across tests.
inline ftl::TransformFamily desk_family(int repetitions = 5) {
  ftl::TransformFamily f;
  f.dofs = {
      {"rotation", ftl::DofDomain::Circle, 0.0, 0.0, 2, repetitions},
      {"scale-x", ftl::DofDomain::Interval, 0.7, 1.3, 2, repetitions},
      {"scale-y", ftl::DofDomain::Interval, 0.7, 1.3, 2, repetitions},
  };
  f.feature_dim = 6 * repetitions;
  return f;
}

}  // namespace testutil

#endif  // FTL_TESTS_HELPERS_HPP
