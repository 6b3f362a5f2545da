#ifndef FTL_EVALUATION_HPP
#define FTL_EVALUATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftl/dataset.hpp"
#include "ftl/network.hpp"
#include "ftl/train.hpp"

namespace ftl {

// ---------------------------------------------------------------------------
// Stability sweeps
// ---------------------------------------------------------------------------

/// Similarity of invariant signatures between base views and warped views,
/// per sweep value, for same-identity and cross-identity pairs.
struct StabilityCurve {
  std::string dof;
  std::string metric;  // "cosine" or "l2"
  std::vector<double> grid;
  std::vector<double> same_mean, same_std, diff_mean, diff_std;
  double train_lo = 0.0, train_hi = 0.0;
  long identity_count = 0;
};

namespace detail {

inline WarpParams single_dof_warp(const DofSpec& d, double value) {
  if (d.name == "rotation" && d.domain == DofDomain::Circle)
    return WarpParams{value, 1.0, 1.0};
  if (d.name == "scale-x" && d.domain == DofDomain::Interval)
    return WarpParams{0.0, value, 1.0};
  if (d.name == "scale-y" && d.domain == DofDomain::Interval)
    return WarpParams{0.0, 1.0, value};
  throw ValueError("sweep: dof '" + d.name + "' has no image-space sweep");
}

/// Cosine of two signature vectors; bitwise-identical vectors are exactly 1.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a == b) return 1.0;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline std::vector<double> signature_row(Model& model, const TransformFamily& family,
                                         const Image& img) {
  Tensor x = images_to_tensor({img});
  Tensor sig = invariant_signature(family, model.encode(x, Mode::Eval));
  return {sig.data().begin(), sig.data().end()};
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace detail

/// For each grid value: warp every identity's base image along the chosen
/// dof, encode, take invariant signatures, and compare same-identity pairs
/// (base vs its own warped view) and all cross-identity pairs.
inline StabilityCurve stability_sweep(Model& model, const TransformFamily& family,
                                      const std::vector<Image>& identities,
                                      const std::string& dof,
                                      const std::vector<double>& grid,
                                      const std::string& metric) {
  if (identities.size() < 2)
    throw ValueError("stability_sweep: need at least 2 identities, got " +
                     std::to_string(identities.size()));
  if (metric != "cosine" && metric != "l2")
    throw ValueError("stability_sweep: metric must be cosine or l2");
  const DofSpec& spec = family.dofs[static_cast<size_t>(family.dof_index(dof))];

  StabilityCurve curve;
  curve.dof = dof;
  curve.metric = metric;
  curve.grid = grid;
  curve.identity_count = static_cast<long>(identities.size());
  if (spec.domain == DofDomain::Interval) {
    curve.train_lo = spec.lo;
    curve.train_hi = spec.hi;
  } else {
    curve.train_lo = 0.0;
    curve.train_hi = kTwoPi;
  }

  std::vector<std::vector<double>> base_sigs;
  base_sigs.reserve(identities.size());
  for (const Image& img : identities)
    base_sigs.push_back(detail::signature_row(model, family, img));

  auto compare = [&](const std::vector<double>& a, const std::vector<double>& b) {
    return metric == "cosine" ? detail::cosine(a, b) : detail::l2_distance(a, b);
  };

  for (double v : grid) {
    const WarpParams wp = detail::single_dof_warp(spec, v);
    std::vector<std::vector<double>> warped_sigs;
    warped_sigs.reserve(identities.size());
    for (const Image& img : identities)
      warped_sigs.push_back(detail::signature_row(model, family, warp(img, wp)));

    std::vector<double> same, diff;
    for (size_t i = 0; i < identities.size(); ++i) {
      same.push_back(compare(base_sigs[i], warped_sigs[i]));
      for (size_t j = 0; j < identities.size(); ++j)
        if (j != i) diff.push_back(compare(base_sigs[j], warped_sigs[i]));
    }
    double m, sd;
    detail::mean_std(same, m, sd);
    curve.same_mean.push_back(m);
    curve.same_std.push_back(sd);
    detail::mean_std(diff, m, sd);
    curve.diff_mean.push_back(m);
    curve.diff_std.push_back(sd);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Reconstruction error and classification
// ---------------------------------------------------------------------------

/// Per-item and mean losses of the transformed reconstruction against the
/// transformed target, the identity baseline loss(x, x_t), and the plain
/// reconstruction loss(decode(encode(x)), x).
struct ReconReport {
  double model_mean = 0.0;
  double identity_mean = 0.0;
  double plain_mean = 0.0;
  std::vector<std::array<double, 3>> per_item;  // model, identity, plain
};

inline ReconReport transformed_reconstruction_error(
    Model& model, const std::vector<TrainingTriple>& triples, LossKind kind,
    double alpha = 0.85, double gamma = 0.98) {
  ReconReport rep;
  for (const TrainingTriple& t : triples) {
    Tensor x = images_to_tensor({t.x});
    Tensor xt = images_to_tensor({t.x_t});
    Tensor out = model.forward_transformed(x, t.params, Mode::Eval);
    const double model_loss = reconstruction_loss(out, xt, kind, alpha, gamma).item();
    const double identity_loss = reconstruction_loss(x, xt, kind, alpha, gamma).item();
    Tensor plain = model.decode(model.encode(x, Mode::Eval), Mode::Eval);
    const double plain_loss = reconstruction_loss(plain, x, kind, alpha, gamma).item();
    rep.per_item.push_back({model_loss, identity_loss, plain_loss});
    rep.model_mean += model_loss;
    rep.identity_mean += identity_loss;
    rep.plain_mean += plain_loss;
  }
  if (!rep.per_item.empty()) {
    const double n = static_cast<double>(rep.per_item.size());
    rep.model_mean /= n;
    rep.identity_mean /= n;
    rep.plain_mean /= n;
  }
  return rep;
}

struct ClassifierEval {
  double accuracy = 0.0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

/// Argmax accuracy of the invariant-signature head over a labeled set.
inline ClassifierEval evaluate_classifier(Model& model, const LabeledImages& data) {
  if (!model.has_head())
    throw ConfigError("evaluate_classifier: model has no classifier head");
  const int k = model.config().class_count;
  ClassifierEval ev;
  ev.confusion.assign(static_cast<size_t>(k), std::vector<long>(static_cast<size_t>(k), 0));
  if (data.images.empty()) return ev;
  long correct = 0;
  const TransformFamily& family = model.config().family;
  for (size_t i = 0; i < data.images.size(); ++i) {
    Tensor x = images_to_tensor({data.images[i]});
    Tensor scores = model.classify_invariants(
        invariant_signature(family, model.encode(x, Mode::Eval)), Mode::Eval);
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (scores.data()[j] > scores.data()[best]) best = j;
    const int truth = data.labels[i];
    ev.confusion[static_cast<size_t>(truth)][static_cast<size_t>(best)] += 1;
    if (best == truth) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.images.size());
  return ev;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t config_hash(const ModelConfig& cfg) {
  return fnv1a64(config_to_json(cfg).dump());
}

/// Machine-readable evaluation results: metrics map plus stability curves.
/// Every metric is tagged with the config hash that produced it.
struct EvalReport {
  std::string run_id;
  std::string preset;
  std::uint64_t seed = 0;
  std::uint64_t cfg_hash = 0;
  std::map<std::string, double> metrics;
  std::vector<std::string> artifacts;
  std::vector<StabilityCurve> curves;
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes report.json and one CSV per curve with the stable column order
/// sweep_value,same_mean,same_std,diff_mean,diff_std. Reruns with identical
/// inputs produce identical bytes.
inline void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json curves = nlohmann::json::array();
  for (const StabilityCurve& c : report.curves) {
    const std::string csv_name = "curve_" + c.dof + "_" + c.metric + ".csv";
    std::ofstream csv(dir / csv_name);
    if (!csv) throw DataError("emit_report: cannot write " + csv_name);
    csv << "sweep_value,same_mean,same_std,diff_mean,diff_std\n";
    for (size_t i = 0; i < c.grid.size(); ++i)
      csv << detail::fmt17(c.grid[i]) << "," << detail::fmt17(c.same_mean[i]) << ","
          << detail::fmt17(c.same_std[i]) << "," << detail::fmt17(c.diff_mean[i])
          << "," << detail::fmt17(c.diff_std[i]) << "\n";
    curves.push_back({{"dof", c.dof},
                      {"metric", c.metric},
                      {"grid", c.grid},
                      {"same_mean", c.same_mean},
                      {"same_std", c.same_std},
                      {"diff_mean", c.diff_mean},
                      {"diff_std", c.diff_std},
                      {"train_lo", c.train_lo},
                      {"train_hi", c.train_hi},
                      {"identity_count", c.identity_count},
                      {"csv", csv_name}});
  }
  nlohmann::json j = {{"run_id", report.run_id},
                      {"preset", report.preset},
                      {"seed", report.seed},
                      {"config_hash", report.cfg_hash},
                      {"metrics", report.metrics},
                      {"artifacts", report.artifacts},
                      {"curves", curves}};
  std::ofstream out(dir / "report.json");
  if (!out) throw DataError("emit_report: cannot write report.json");
  out << j.dump(2) << "\n";
}

inline EvalReport parse_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("parse_report: cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("parse_report: malformed JSON");
  EvalReport rep;
  try {
    rep.run_id = j.at("run_id").get<std::string>();
    rep.preset = j.at("preset").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.cfg_hash = j.at("config_hash").get<std::uint64_t>();
    rep.metrics = j.at("metrics").get<std::map<std::string, double>>();
    rep.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    for (const nlohmann::json& c : j.at("curves")) {
      StabilityCurve curve;
      curve.dof = c.at("dof").get<std::string>();
      curve.metric = c.at("metric").get<std::string>();
      curve.grid = c.at("grid").get<std::vector<double>>();
      curve.same_mean = c.at("same_mean").get<std::vector<double>>();
      curve.same_std = c.at("same_std").get<std::vector<double>>();
      curve.diff_mean = c.at("diff_mean").get<std::vector<double>>();
      curve.diff_std = c.at("diff_std").get<std::vector<double>>();
      curve.train_lo = c.at("train_lo").get<double>();
      curve.train_hi = c.at("train_hi").get<double>();
      curve.identity_count = c.at("identity_count").get<long>();
      rep.curves.push_back(std::move(curve));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("parse_report: ") + ex.what());
  }
  return rep;
}

}  // namespace ftl

#endif  // FTL_EVALUATION_HPP
