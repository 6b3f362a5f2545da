#ifndef FTL_TRANSFORM_HPP
#define FTL_TRANSFORM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ftl/errors.hpp"
#include "ftl/tensor.hpp"

namespace ftl {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Small rotation blocks
// ---------------------------------------------------------------------------

/// Dense square matrix of dimension 2 or 3, row-major.
struct Mat {
  int n = 0;
  std::array<double, 9> a{};

  static Mat identity(int n) {
    Mat m;
    m.n = n;
    for (int i = 0; i < n; ++i) m.a[static_cast<size_t>(i * n + i)] = 1.0;
    return m;
  }
  double& at(int i, int j) { return a[static_cast<size_t>(i * n + j)]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i * n + j)]; }
};

inline Mat matmul(const Mat& x, const Mat& y) {
  Mat out;
  out.n = x.n;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < x.n; ++k) acc += x.at(i, k) * y.at(k, j);
      out.at(i, j) = acc;
    }
  return out;
}

inline Mat transpose(const Mat& x) {
  Mat out;
  out.n = x.n;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) out.at(i, j) = x.at(j, i);
  return out;
}

inline double max_abs_diff(const Mat& x, const Mat& y) {
  double m = 0.0;
  for (int i = 0; i < x.n * x.n; ++i)
    m = std::max(m, std::fabs(x.a[static_cast<size_t>(i)] - y.a[static_cast<size_t>(i)]));
  return m;
}

/// Planar rotation [[cos,-sin],[sin,cos]].
inline Mat rotation_2d(double angle) {
  if (!std::isfinite(angle))
    throw ValueError("rotation_2d: non-finite angle");
  Mat m;
  m.n = 2;
  const double c = std::cos(angle), s = std::sin(angle);
  m.at(0, 0) = c;
  m.at(0, 1) = -s;
  m.at(1, 0) = s;
  m.at(1, 1) = c;
  return m;
}

namespace detail {

inline Mat rot_y(double t) {
  Mat m = Mat::identity(3);
  const double c = std::cos(t), s = std::sin(t);
  m.at(0, 0) = c;
  m.at(0, 2) = s;
  m.at(2, 0) = -s;
  m.at(2, 2) = c;
  return m;
}

inline Mat rot_z(double t) {
  Mat m = Mat::identity(3);
  const double c = std::cos(t), s = std::sin(t);
  m.at(0, 0) = c;
  m.at(0, 1) = -s;
  m.at(1, 0) = s;
  m.at(1, 1) = c;
  return m;
}

}  // namespace detail

/// Elevation-then-azimuth rotation with no roll: R_el(elevation) * R_az(azimuth),
/// where R_az rotates about the third axis and R_el rotates in the 1-3 plane.
/// Both factors are proper rotations, so the product is orthogonal with det 1.
/// The optional roll term (R_y(roll) applied first) closes the family under
/// composition and inversion; plain two-angle calls leave it at zero.
inline Mat rotation_3d(double azimuth, double elevation, double roll = 0.0) {
  if (!std::isfinite(azimuth) || !std::isfinite(elevation) || !std::isfinite(roll))
    throw ValueError("rotation_3d: non-finite angle");
  Mat m = matmul(detail::rot_y(elevation), detail::rot_z(azimuth));
  if (roll != 0.0) m = matmul(m, detail::rot_y(roll));
  return m;
}

/// y-z-y Euler extraction: R == rot_y(el) * rot_z(az) * rot_y(roll), with the
/// azimuth in [0, pi]. The sum and difference of el and roll come from the
/// (1 +- cos az)-weighted entry pairs, which stay well conditioned at both
/// poles; near az = 0 the roll is folded into the elevation.
inline void euler_yzy(const Mat& r, double& azimuth, double& elevation,
                      double& roll) {
  const double sb = std::hypot(r.at(1, 0), r.at(1, 2));
  azimuth = std::atan2(sb, r.at(1, 1));
  // el + roll weighted by (1 + cos az), el - roll weighted by (1 - cos az).
  const double sum = std::atan2(r.at(0, 2) - r.at(2, 0), r.at(0, 0) + r.at(2, 2));
  const double diff = std::atan2(r.at(0, 2) + r.at(2, 0), r.at(2, 2) - r.at(0, 0));
  if (sb < 1e-13) {
    // At a pole only one combination matters; fold it into the elevation.
    if (r.at(1, 1) > 0.0) {
      azimuth = 0.0;
      elevation = sum;
    } else {
      azimuth = kPi;
      elevation = diff;
    }
    roll = 0.0;
    return;
  }
  // Per-angle estimates from the sin(az)-weighted entries, then enforce the
  // combination that is well conditioned on this side of az = pi/2. The
  // correction is split evenly so both angles stay near their estimates.
  elevation = std::atan2(r.at(2, 1), -r.at(0, 1));
  roll = std::atan2(r.at(1, 2), r.at(1, 0));
  if (r.at(1, 1) >= 0.0) {
    const double d = std::remainder(sum - (elevation + roll), kTwoPi);
    elevation += 0.5 * d;
    roll += 0.5 * d;
  } else {
    const double d = std::remainder(diff - (elevation - roll), kTwoPi);
    elevation += 0.5 * d;
    roll -= 0.5 * d;
  }
}

// ---------------------------------------------------------------------------
// Transform families
// ---------------------------------------------------------------------------

enum class DofDomain { Circle, Interval, Sphere };

inline const char* domain_name(DofDomain d) {
  switch (d) {
    case DofDomain::Circle: return "circle";
    case DofDomain::Interval: return "interval";
    case DofDomain::Sphere: return "sphere";
  }
  return "?";
}

/// One named degree of freedom: its parameter domain, the rotation block size
/// it acts with, and how many tied subvectors share that block.
struct DofSpec {
  std::string name;
  DofDomain domain = DofDomain::Circle;
  double lo = 0.0, hi = 0.0;  // interval domains only
  int block_dim = 2;
  int repetitions = 1;
};

/// Ordered degrees of freedom plus the total feature width. Subvector layout
/// is contiguous per dof: all blocks of dof 0 first, then dof 1, and so on.
struct TransformFamily {
  std::vector<DofSpec> dofs;
  int feature_dim = 0;

  void validate() const {
    int width = 0;
    for (const DofSpec& d : dofs) {
      if (d.name.empty()) throw ValueError("family: dof with empty name");
      if (d.repetitions < 1)
        throw ValueError("family: dof '" + d.name + "' needs repetitions >= 1");
      if (d.domain == DofDomain::Sphere) {
        if (d.block_dim != 3)
          throw ValueError("family: sphere dof '" + d.name +
                           "' requires block_dim 3");
      } else {
        if (d.block_dim != 2)
          throw ValueError("family: " + std::string(domain_name(d.domain)) +
                           " dof '" + d.name + "' requires block_dim 2");
      }
      if (d.domain == DofDomain::Interval && !(d.lo < d.hi))
        throw ValueError("family: interval dof '" + d.name +
                         "' needs lo < hi, got [" + std::to_string(d.lo) +
                         "," + std::to_string(d.hi) + "]");
      for (const DofSpec& other : dofs)
        if (&other != &d && other.name == d.name)
          throw ValueError("family: duplicate dof name '" + d.name + "'");
      width += d.block_dim * d.repetitions;
    }
    if (width != feature_dim)
      throw ValueError("family: feature_dim " + std::to_string(feature_dim) +
                       " != sum of blocks " + std::to_string(width));
  }

  int dof_offset(size_t i) const {
    int off = 0;
    for (size_t k = 0; k < i; ++k) off += dofs[k].block_dim * dofs[k].repetitions;
    return off;
  }

  int dof_index(const std::string& name) const {
    for (size_t i = 0; i < dofs.size(); ++i)
      if (dofs[i].name == name) return static_cast<int>(i);
    throw ValueError("family: unknown dof '" + name + "'");
  }

  /// Self plus unordered pairwise inner products per dof: r(r+1)/2 entries.
  long signature_length() const {
    long n = 0;
    for (const DofSpec& d : dofs)
      n += static_cast<long>(d.repetitions) * (d.repetitions + 1) / 2;
    return n;
  }
};

/// Concrete parameter values keyed by dof name: one angle for circle dofs,
/// one raw value for interval dofs, (azimuth, elevation) for sphere dofs.
/// Sphere values gain a third (roll) entry only as a result of compose/invert.
struct TransformParams {
  std::map<std::string, std::vector<double>> values;

  bool operator==(const TransformParams&) const = default;
};

inline TransformParams identity_params(const TransformFamily& family) {
  TransformParams p;
  for (const DofSpec& d : family.dofs) {
    switch (d.domain) {
      case DofDomain::Circle: p.values[d.name] = {0.0}; break;
      case DofDomain::Interval: p.values[d.name] = {d.lo}; break;
      case DofDomain::Sphere: p.values[d.name] = {0.0, 0.0}; break;
    }
  }
  return p;
}

/// Affine half-circle embedding of an interval: lo -> 0, hi -> pi.
/// Values outside [lo, hi] are rejected; no clamping.
inline double map_interval_to_angle(double value, double lo, double hi) {
  if (!(lo < hi))
    throw ValueError("map_interval_to_angle: need lo < hi, got lo=" +
                     std::to_string(lo) + " hi=" + std::to_string(hi));
  if (!(value >= lo && value <= hi))
    throw DomainError("map_interval_to_angle: value " + std::to_string(value) +
                      " outside [" + std::to_string(lo) + "," +
                      std::to_string(hi) + "]");
  return (value - lo) / (hi - lo) * kPi;
}

namespace detail {

// Extended affine maps used by the algebra: compose/invert may move interval
// values outside [lo, hi]; rotation blocks are well defined for any angle and
// range checks belong to the image-space entry points.
inline double interval_angle_unchecked(double value, const DofSpec& d) {
  return (value - d.lo) / (d.hi - d.lo) * kPi;
}

inline double interval_value_of_angle(double angle, const DofSpec& d) {
  return d.lo + angle / kPi * (d.hi - d.lo);
}

inline const std::vector<double>& dof_values(const TransformParams& p,
                                             const DofSpec& d) {
  auto it = p.values.find(d.name);
  if (it == p.values.end())
    throw ValueError("params: missing value for dof '" + d.name + "'");
  const size_t want_min = d.domain == DofDomain::Sphere ? 2 : 1;
  const size_t want_max = d.domain == DofDomain::Sphere ? 3 : 1;
  if (it->second.size() < want_min || it->second.size() > want_max)
    throw ValueError("params: dof '" + d.name + "' expects " +
                     std::to_string(want_min) + " value(s), got " +
                     std::to_string(it->second.size()));
  for (double v : it->second)
    if (!std::isfinite(v))
      throw ValueError("params: non-finite value for dof '" + d.name + "'");
  return it->second;
}

inline Mat dof_block(const DofSpec& d, const std::vector<double>& v) {
  switch (d.domain) {
    case DofDomain::Circle: return rotation_2d(v[0]);
    case DofDomain::Interval:
      return rotation_2d(interval_angle_unchecked(v[0], d));
    case DofDomain::Sphere:
      return rotation_3d(v[0], v[1], v.size() > 2 ? v[2] : 0.0);
  }
  throw ValueError("dof_block: bad domain");
}

}  // namespace detail

/// Params whose values all lie in the family's declared domains. compose and
/// invert can legitimately step outside (see those functions); image-space
/// consumers require this check to pass.
inline void check_params_in_domain(const TransformFamily& family,
                                   const TransformParams& p) {
  for (const DofSpec& d : family.dofs) {
    const std::vector<double>& v = detail::dof_values(p, d);
    if (d.domain == DofDomain::Interval && !(v[0] >= d.lo && v[0] <= d.hi))
      throw DomainError("params: dof '" + d.name + "' value " +
                        std::to_string(v[0]) + " outside [" +
                        std::to_string(d.lo) + "," + std::to_string(d.hi) + "]");
  }
}

// ---------------------------------------------------------------------------
// Block-diagonal operator
// ---------------------------------------------------------------------------

/// The feature-space transform: one small rotation per dof, applied to each of
/// that dof's tied subvectors. Never materialized densely outside test oracles.
struct BlockOperator {
  std::vector<Mat> blocks;       // one per dof
  std::vector<int> repetitions;  // per dof
  int feature_dim = 0;
};

inline BlockOperator build_block_transform(const TransformFamily& family,
                                           const TransformParams& params) {
  BlockOperator op;
  op.feature_dim = family.feature_dim;
  op.blocks.reserve(family.dofs.size());
  op.repetitions.reserve(family.dofs.size());
  for (const DofSpec& d : family.dofs) {
    op.blocks.push_back(detail::dof_block(d, detail::dof_values(params, d)));
    op.repetitions.push_back(d.repetitions);
  }
  return op;
}

inline BlockOperator transpose(const BlockOperator& op) {
  BlockOperator out = op;
  for (Mat& b : out.blocks) b = transpose(b);
  return out;
}

namespace detail {

inline void apply_blocks(const BlockOperator& op, const double* in, double* out) {
  int off = 0;
  for (size_t d = 0; d < op.blocks.size(); ++d) {
    const Mat& b = op.blocks[d];
    for (int r = 0; r < op.repetitions[d]; ++r) {
      const double* x = in + off;
      double* y = out + off;
      for (int i = 0; i < b.n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < b.n; ++j) acc += b.at(i, j) * x[j];
        y[i] = acc;
      }
      off += b.n;
    }
  }
}

}  // namespace detail

/// y = F e for a batch e of shape [N, feature_dim]. Orthogonal blocks make the
/// backward pass an application of the transposed operator.
inline Tensor apply(const BlockOperator& op, const Tensor& e) {
  if (e.ndim() != 2 || e.dim(1) != op.feature_dim)
    throw ShapeError("apply: expected [N," + std::to_string(op.feature_dim) +
                     "], got " + shape_str(e.shape()));
  const long N = e.dim(0), D = e.dim(1);
  BlockOperator opT = transpose(op);
  Tensor out = Tensor::make_op(e.shape(), {e}, [e, opT, N, D](detail::Node& o) mutable {
    double* ge = e.node()->grad_data();
    std::vector<double> tmp(static_cast<size_t>(D));
    for (long i = 0; i < N; ++i) {
      detail::apply_blocks(opT, o.grad.data() + i * D, tmp.data());
      for (long j = 0; j < D; ++j) ge[i * D + j] += tmp[static_cast<size_t>(j)];
    }
  });
  for (long i = 0; i < N; ++i)
    detail::apply_blocks(op, e.data().data() + i * D, out.data().data() + i * D);
  return out;
}

/// Per-row operators: row i is transformed by ops[i]. Minibatch counterpart of
/// apply, where every sample carries its own parameters.
inline Tensor apply_rows(const std::vector<BlockOperator>& ops, const Tensor& e) {
  if (e.ndim() != 2)
    throw ShapeError("apply_rows: expected [N,D], got " + shape_str(e.shape()));
  const long N = e.dim(0), D = e.dim(1);
  if (static_cast<long>(ops.size()) != N)
    throw ShapeError("apply_rows: " + std::to_string(ops.size()) +
                     " operators for " + std::to_string(N) + " rows");
  for (const BlockOperator& op : ops)
    if (op.feature_dim != D)
      throw ShapeError("apply_rows: operator dim " +
                       std::to_string(op.feature_dim) + " != " + std::to_string(D));
  std::vector<BlockOperator> opsT;
  opsT.reserve(ops.size());
  for (const BlockOperator& op : ops) opsT.push_back(transpose(op));
  Tensor out = Tensor::make_op(e.shape(), {e}, [e, opsT, N, D](detail::Node& o) mutable {
    double* ge = e.node()->grad_data();
    std::vector<double> tmp(static_cast<size_t>(D));
    for (long i = 0; i < N; ++i) {
      detail::apply_blocks(opsT[static_cast<size_t>(i)], o.grad.data() + i * D,
                           tmp.data());
      for (long j = 0; j < D; ++j) ge[i * D + j] += tmp[static_cast<size_t>(j)];
    }
  });
  for (long i = 0; i < N; ++i)
    detail::apply_blocks(ops[static_cast<size_t>(i)], e.data().data() + i * D,
                         out.data().data() + i * D);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter algebra
// ---------------------------------------------------------------------------

namespace detail {

inline double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

}  // namespace detail

/// Parameters of the composite transform "p1 then p2", dof by dof:
/// circle angles add mod 2pi; sphere blocks multiply and are re-expressed in
/// the (azimuth, elevation, roll) chart; interval dofs add in mapped-angle
/// space and are rejected if the resulting angle leaves [0, pi], since the
/// corresponding image-space transform would leave its own domain too.
inline TransformParams compose(const TransformFamily& family,
                               const TransformParams& p2,
                               const TransformParams& p1) {
  TransformParams out;
  for (const DofSpec& d : family.dofs) {
    const std::vector<double>& v1 = detail::dof_values(p1, d);
    const std::vector<double>& v2 = detail::dof_values(p2, d);
    switch (d.domain) {
      case DofDomain::Circle:
        out.values[d.name] = {detail::wrap_angle(v1[0] + v2[0])};
        break;
      case DofDomain::Interval: {
        const double angle = detail::interval_angle_unchecked(v1[0], d) +
                             detail::interval_angle_unchecked(v2[0], d);
        if (angle < -1e-12 || angle > kPi + 1e-12)
          throw DomainError("compose: dof '" + d.name +
                            "' leaves its interval (mapped angle " +
                            std::to_string(angle) + ")");
        out.values[d.name] = {detail::interval_value_of_angle(angle, d)};
        break;
      }
      case DofDomain::Sphere: {
        const Mat m = matmul(detail::dof_block(d, v2), detail::dof_block(d, v1));
        double az, el, roll;
        euler_yzy(m, az, el, roll);
        if (std::fabs(roll) <= 1e-12)
          out.values[d.name] = {az, el};
        else
          out.values[d.name] = {az, el, roll};
        break;
      }
    }
  }
  return out;
}

/// Parameters of the inverse transform: every block becomes its transpose.
/// Interval values may leave [lo, hi]; they remain valid for the feature-space
/// algebra (compose(invert(p), p) is the identity) but not for image warps.
inline TransformParams invert(const TransformFamily& family,
                              const TransformParams& p) {
  TransformParams out;
  for (const DofSpec& d : family.dofs) {
    const std::vector<double>& v = detail::dof_values(p, d);
    switch (d.domain) {
      case DofDomain::Circle:
        out.values[d.name] = {detail::wrap_angle(-v[0])};
        break;
      case DofDomain::Interval: {
        const double angle = -detail::interval_angle_unchecked(v[0], d);
        out.values[d.name] = {detail::interval_value_of_angle(angle, d)};
        break;
      }
      case DofDomain::Sphere: {
        const Mat m = transpose(detail::dof_block(d, v));
        double az, el, roll;
        euler_yzy(m, az, el, roll);
        if (std::fabs(roll) <= 1e-12)
          out.values[d.name] = {az, el};
        else
          out.values[d.name] = {az, el, roll};
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invariant signature
// ---------------------------------------------------------------------------

/// Subvector inner products, ordered by dof and then by pair index (i <= j,
/// lexicographic). Self products are squared subvector lengths; mixed products
/// are the relative phases within a tied group. All entries are unchanged by
/// apply() of any parameters of the family.
struct InvariantSignature {
  std::vector<double> entries;
};

/// Differentiable signature of a batch: [N, feature_dim] -> [N, signature_len].
inline Tensor invariant_signature(const TransformFamily& family, const Tensor& e) {
  if (e.ndim() != 2 || e.dim(1) != family.feature_dim)
    throw ShapeError("invariant_signature: expected [N," +
                     std::to_string(family.feature_dim) + "], got " +
                     shape_str(e.shape()));
  const long N = e.dim(0), D = e.dim(1);
  const long S = family.signature_length();

  struct PairIdx {
    int off_i, off_j, dim;
  };
  std::vector<PairIdx> pairs;
  pairs.reserve(static_cast<size_t>(S));
  int off = 0;
  for (const DofSpec& d : family.dofs) {
    for (int i = 0; i < d.repetitions; ++i)
      for (int j = i; j < d.repetitions; ++j)
        pairs.push_back({off + i * d.block_dim, off + j * d.block_dim, d.block_dim});
    off += d.block_dim * d.repetitions;
  }

  Tensor out = Tensor::make_op(
      {static_cast<int>(N), static_cast<int>(S)}, {e},
      [e, pairs, N, D, S](detail::Node& o) mutable {
        const double* g = o.grad.data();
        const double* ev = e.data().data();
        double* ge = e.node()->grad_data();
        for (long r = 0; r < N; ++r) {
          const double* row = ev + r * D;
          double* grow = ge + r * D;
          for (long s = 0; s < S; ++s) {
            const PairIdx& p = pairs[static_cast<size_t>(s)];
            const double gs = g[r * S + s];
            for (int k = 0; k < p.dim; ++k) {
              grow[p.off_i + k] += gs * row[p.off_j + k];
              grow[p.off_j + k] += gs * row[p.off_i + k];
            }
          }
        }
      });

  double* ov = out.data().data();
  const double* ev = e.data().data();
  for (long r = 0; r < N; ++r) {
    const double* row = ev + r * D;
    for (long s = 0; s < S; ++s) {
      const PairIdx& p = pairs[static_cast<size_t>(s)];
      double acc = 0.0;
      for (int k = 0; k < p.dim; ++k) acc += row[p.off_i + k] * row[p.off_j + k];
      ov[r * S + s] = acc;
    }
  }
  return out;
}

/// Signature of one plain vector, outside the graph.
inline InvariantSignature signature_of(const TransformFamily& family,
                                       std::span<const double> e) {
  if (static_cast<long>(e.size()) != family.feature_dim)
    throw ShapeError("signature_of: expected " + std::to_string(family.feature_dim) +
                     " values, got " + std::to_string(e.size()));
  InvariantSignature sig;
  sig.entries.reserve(static_cast<size_t>(family.signature_length()));
  int off = 0;
  for (const DofSpec& d : family.dofs) {
    for (int i = 0; i < d.repetitions; ++i)
      for (int j = i; j < d.repetitions; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d.block_dim; ++k)
          acc += e[static_cast<size_t>(off + i * d.block_dim + k)] *
                 e[static_cast<size_t>(off + j * d.block_dim + k)];
        sig.entries.push_back(acc);
      }
    off += d.block_dim * d.repetitions;
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Property audit
// ---------------------------------------------------------------------------

inline TransformParams sample_params(const TransformFamily& family,
                                     std::mt19937_64& rng) {
  TransformParams p;
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  for (const DofSpec& d : family.dofs) {
    switch (d.domain) {
      case DofDomain::Circle: p.values[d.name] = {angle(rng)}; break;
      case DofDomain::Interval: {
        std::uniform_real_distribution<double> u(d.lo, d.hi);
        p.values[d.name] = {u(rng)};
        break;
      }
      case DofDomain::Sphere: p.values[d.name] = {angle(rng), angle(rng)}; break;
    }
  }
  return p;
}

/// A pair (p1, p2) whose composition stays inside every dof domain: interval
/// dofs draw mapped angles with an in-range sum.
inline std::pair<TransformParams, TransformParams> sample_composable_pair(
    const TransformFamily& family, std::mt19937_64& rng) {
  TransformParams p1, p2;
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const DofSpec& d : family.dofs) {
    switch (d.domain) {
      case DofDomain::Circle:
        p1.values[d.name] = {angle(rng)};
        p2.values[d.name] = {angle(rng)};
        break;
      case DofDomain::Interval: {
        const double a1 = unit(rng) * kPi;
        const double a2 = unit(rng) * (kPi - a1);
        p1.values[d.name] = {detail::interval_value_of_angle(a1, d)};
        p2.values[d.name] = {detail::interval_value_of_angle(a2, d)};
        break;
      }
      case DofDomain::Sphere:
        p1.values[d.name] = {angle(rng), angle(rng)};
        p2.values[d.name] = {angle(rng), angle(rng)};
        break;
    }
  }
  return {p1, p2};
}

/// Largest entrywise deviation between the composed-parameter blocks and the
/// block products.
inline double homomorphism_residual(const TransformFamily& family,
                                    const TransformParams& p2,
                                    const TransformParams& p1) {
  const BlockOperator lhs = build_block_transform(family, compose(family, p2, p1));
  const BlockOperator f2 = build_block_transform(family, p2);
  const BlockOperator f1 = build_block_transform(family, p1);
  double res = 0.0;
  for (size_t d = 0; d < lhs.blocks.size(); ++d)
    res = std::max(res, max_abs_diff(lhs.blocks[d], matmul(f2.blocks[d], f1.blocks[d])));
  return res;
}

/// Largest entrywise deviation of F(invert(p)) * F(p) from the identity.
inline double inverse_residual(const TransformFamily& family,
                               const TransformParams& p) {
  const BlockOperator fi = build_block_transform(family, invert(family, p));
  const BlockOperator f = build_block_transform(family, p);
  double res = 0.0;
  for (size_t d = 0; d < f.blocks.size(); ++d)
    res = std::max(res, max_abs_diff(matmul(fi.blocks[d], f.blocks[d]),
                                     Mat::identity(f.blocks[d].n)));
  return res;
}

/// Largest entrywise deviation of F(identity params) from the identity.
inline double identity_residual(const TransformFamily& family) {
  const BlockOperator f = build_block_transform(family, identity_params(family));
  double res = 0.0;
  for (const Mat& b : f.blocks)
    res = std::max(res, max_abs_diff(b, Mat::identity(b.n)));
  return res;
}

/// Relative deviation of the transformed vector's L2 norm from the input's.
inline double norm_residual(const BlockOperator& op, std::span<const double> e) {
  std::vector<double> y(e.size());
  detail::apply_blocks(op, e.data(), y.data());
  double ne = 0.0, ny = 0.0;
  for (size_t i = 0; i < e.size(); ++i) {
    ne += e[i] * e[i];
    ny += y[i] * y[i];
  }
  ne = std::sqrt(ne);
  ny = std::sqrt(ny);
  return std::fabs(ny - ne) / std::max(ne, 1e-300);
}

/// Largest entrywise deviation of the signature of F e from the signature of e.
inline double signature_residual(const TransformFamily& family,
                                 const BlockOperator& op,
                                 std::span<const double> e) {
  std::vector<double> y(e.size());
  detail::apply_blocks(op, e.data(), y.data());
  const InvariantSignature a = signature_of(family, e);
  const InvariantSignature b = signature_of(family, y);
  double res = 0.0;
  for (size_t i = 0; i < a.entries.size(); ++i)
    res = std::max(res, std::fabs(a.entries[i] - b.entries[i]));
  return res;
}

/// Maximum residuals of the algebraic contracts over seeded random trials.
struct AuditReport {
  long trials = 0;
  std::uint64_t seed = 0;
  double homomorphism = 0.0;
  double inverse = 0.0;
  double identity = 0.0;
  double norm = 0.0;
  double signature = 0.0;

  bool within(double block_tol, double signature_tol) const {
    return homomorphism <= block_tol && inverse <= block_tol &&
           identity <= block_tol && norm <= block_tol &&
           signature <= signature_tol;
  }
};

inline AuditReport audit_homomorphism(const TransformFamily& family, long trials,
                                      std::uint64_t seed) {
  if (trials < 1) throw ValueError("audit: trials must be >= 1");
  family.validate();
  std::mt19937_64 rng(seed);
  AuditReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.identity = identity_residual(family);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> e(static_cast<size_t>(family.feature_dim));
  for (long t = 0; t < trials; ++t) {
    auto [p1, p2] = sample_composable_pair(family, rng);
    rep.homomorphism = std::max(rep.homomorphism,
                                homomorphism_residual(family, p2, p1));
    rep.inverse = std::max(rep.inverse, inverse_residual(family, p1));
    for (double& v : e) v = unit(rng);
    const BlockOperator op = build_block_transform(family, p1);
    rep.norm = std::max(rep.norm, norm_residual(op, e));
    rep.signature = std::max(rep.signature, signature_residual(family, op, e));
  }
  return rep;
}

}  // namespace ftl

#endif  // FTL_TRANSFORM_HPP
