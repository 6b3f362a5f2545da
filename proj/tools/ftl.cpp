// Command-line driver: train / eval / sweep / audit / datagen.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric audit failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftl/checkpoint.hpp"
#include "ftl/dataset.hpp"
#include "ftl/evaluation.hpp"
#include "ftl/network.hpp"
#include "ftl/train.hpp"
#include "ftl/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitAudit = 3;

constexpr double kAuditBlockTol = 1e-12;
constexpr double kAuditSignatureTol = 1e-9;

struct RunConfig {
  std::string preset = "desk-mlp";
  std::string family_path;  // optional replacement family
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::vector<long> decimation_steps;
  int batch_size = 128;
  int epochs = 60;
  std::string loss = "l1";
  double alpha = 0.85;
  double gamma = 0.98;
  double reg_weight = 0.1;
  double class_weight = 0.0;
  long log_every = 50;
  std::uint64_t seed = 0;
  std::string dataset_dir;  // empty selects synthetic triples
  int dataset_count = 5000;
  int resolution = 16;
  std::uint64_t dataset_seed = 0;
};

json run_config_to_json(const RunConfig& c) {
  json dataset;
  if (c.dataset_dir.empty())
    dataset = {{"kind", "synthetic"},
               {"count", c.dataset_count},
               {"resolution", c.resolution},
               {"seed", c.dataset_seed}};
  else
    dataset = {{"kind", "dir"}, {"path", c.dataset_dir}};
  return {{"preset", c.preset},
          {"family_path", c.family_path.empty() ? json(nullptr) : json(c.family_path)},
          {"optimizer",
           {{"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"decimation_steps", c.decimation_steps}}},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"loss",
           {{"kind", c.loss},
            {"alpha", c.alpha},
            {"gamma", c.gamma},
            {"reg_weight", c.reg_weight},
            {"class_weight", c.class_weight}}},
          {"log_every", c.log_every},
          {"seed", c.seed},
          {"dataset", dataset},
          {"versions",
           {{"tool", ftl::kToolVersion},
            {"checkpoint_format", ftl::kCheckpointVersion},
            {"report_format", ftl::kReportFormatVersion}}}};
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ftl::ConfigError("config: cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ftl::ConfigError("config: malformed JSON in " + path);
  return j;
}

/// Layered resolution: built-in defaults, then preset defaults, then
/// loss-recipe defaults, then the config file, then explicit flags.
RunConfig resolve_run_config(CLI::App* sub, const RunConfig& flags,
                             const json& file) {
  auto given = [&](const char* name) {
    if (!sub) return false;
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  RunConfig r;

  r.preset = given("--preset") ? flags.preset
                               : file.value("preset", r.preset);
  if (r.preset == "mnist-mlp") {
    r.batch_size = 128;
    r.lr = 1e-3;
    r.epochs = 200;
    r.resolution = 28;
  }

  std::string loss_kind = r.loss;
  if (file.contains("loss") && file["loss"].contains("kind"))
    loss_kind = file["loss"]["kind"].get<std::string>();
  if (given("--loss")) loss_kind = flags.loss;
  r.loss = loss_kind;
  ftl::loss_kind_from_string(r.loss);  // validate early
  if (r.loss == "face") {
    // Blended-loss recipe: lower rate, two decimations, smaller batches.
    r.lr = 1e-4;
    r.decimation_steps = {30000, 50000};
    r.batch_size = 32;
  }

  try {
    if (file.contains("family_path"))
      r.family_path = file["family_path"].is_null()
                          ? ""
                          : file["family_path"].get<std::string>();
    if (file.contains("optimizer")) {
      const json& o = file["optimizer"];
      if (o.contains("lr")) r.lr = o["lr"].get<double>();
      if (o.contains("beta1")) r.beta1 = o["beta1"].get<double>();
      if (o.contains("beta2")) r.beta2 = o["beta2"].get<double>();
      if (o.contains("epsilon")) r.epsilon = o["epsilon"].get<double>();
      if (o.contains("decimation_steps"))
        r.decimation_steps = o["decimation_steps"].get<std::vector<long>>();
    }
    if (file.contains("loss")) {
      const json& l = file["loss"];
      if (l.contains("alpha")) r.alpha = l["alpha"].get<double>();
      if (l.contains("gamma")) r.gamma = l["gamma"].get<double>();
      if (l.contains("reg_weight")) r.reg_weight = l["reg_weight"].get<double>();
      if (l.contains("class_weight"))
        r.class_weight = l["class_weight"].get<double>();
    }
    if (file.contains("batch_size")) r.batch_size = file["batch_size"].get<int>();
    if (file.contains("epochs")) r.epochs = file["epochs"].get<int>();
    if (file.contains("log_every")) r.log_every = file["log_every"].get<long>();
    if (file.contains("seed")) r.seed = file["seed"].get<std::uint64_t>();
    if (file.contains("dataset")) {
      const json& d = file["dataset"];
      const std::string kind = d.value("kind", "synthetic");
      if (kind == "dir") {
        r.dataset_dir = d.at("path").get<std::string>();
      } else if (kind == "synthetic") {
        if (d.contains("count")) r.dataset_count = d["count"].get<int>();
        if (d.contains("resolution")) r.resolution = d["resolution"].get<int>();
        if (d.contains("seed")) r.dataset_seed = d["seed"].get<std::uint64_t>();
      } else {
        throw ftl::ConfigError("config: unknown dataset kind '" + kind + "'");
      }
    }
  } catch (const json::exception& ex) {
    throw ftl::ConfigError(std::string("config: ") + ex.what());
  }

  if (given("--seed")) r.seed = flags.seed;
  if (given("--lr")) r.lr = flags.lr;
  if (given("--epochs")) r.epochs = flags.epochs;
  if (given("--batch")) r.batch_size = flags.batch_size;
  if (given("--alpha")) r.alpha = flags.alpha;
  if (given("--gamma")) r.gamma = flags.gamma;
  if (given("--reg-weight")) r.reg_weight = flags.reg_weight;
  if (given("--class-weight")) r.class_weight = flags.class_weight;
  if (given("--log-every")) r.log_every = flags.log_every;
  if (given("--data")) r.dataset_dir = flags.dataset_dir;
  if (given("--count")) r.dataset_count = flags.dataset_count;
  if (given("--res")) r.resolution = flags.resolution;
  if (given("--data-seed")) r.dataset_seed = flags.dataset_seed;
  if (given("--family")) r.family_path = flags.family_path;

  if (r.epochs < 0) throw ftl::ConfigError("config: negative epochs");
  if (r.batch_size < 1) throw ftl::ConfigError("config: batch_size must be >= 1");
  if (r.dataset_count < 1) throw ftl::ConfigError("config: dataset count must be >= 1");
  if (!(r.alpha >= 0.0 && r.alpha <= 1.0))
    throw ftl::ConfigError("config: alpha must lie in [0,1]");
  if (!(r.gamma > 0.0 && r.gamma < 1.0))
    throw ftl::ConfigError("config: gamma must lie in (0,1)");
  if (r.reg_weight < 0.0) throw ftl::ConfigError("config: negative reg_weight");
  return r;
}

ftl::TransformFamily family_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ftl::DataError("family: cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ftl::DataError("family: malformed JSON in " + path);
  return ftl::family_from_json(j);
}

ftl::ModelConfig resolve_model_config(const RunConfig& c) {
  ftl::ModelConfig cfg = ftl::make_preset(c.preset);
  if (!c.family_path.empty()) {
    cfg.family = family_from_file(c.family_path);
    cfg.encoder.back().width = cfg.family.feature_dim;
  }
  cfg.validate();
  return cfg;
}

ftl::TrainSettings resolve_settings(const RunConfig& c) {
  ftl::TrainSettings s;
  s.schedule.base_lr = c.lr;
  s.schedule.decimation_steps = c.decimation_steps;
  s.beta1 = c.beta1;
  s.beta2 = c.beta2;
  s.epsilon = c.epsilon;
  s.batch_size = c.batch_size;
  s.epochs = c.epochs;
  s.loss = ftl::loss_kind_from_string(c.loss);
  s.alpha = c.alpha;
  s.gamma = c.gamma;
  s.reg_weight = c.reg_weight;
  s.class_weight = c.class_weight;
  s.log_every = c.log_every;
  s.seed = c.seed;
  return s;
}

/// Shared synthetic-triples path so training and evaluation on the same
/// (family, count, resolution, seed) see bit-identical data.
std::vector<ftl::TrainingTriple> make_synthetic_dataset(
    const ftl::TransformFamily& family, int count, int resolution,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ftl::sample_triples(rng, family, ftl::default_glyph_pool(), resolution,
                             count);
}

std::vector<ftl::TrainingTriple> resolve_dataset(const RunConfig& c,
                                                 const ftl::TransformFamily& family) {
  if (!c.dataset_dir.empty()) {
    ftl::TransformFamily file_family;
    auto triples = ftl::import_dataset(c.dataset_dir, file_family);
    if (ftl::family_to_json(file_family).dump() != ftl::family_to_json(family).dump())
      throw ftl::DataError("dataset: family in " + c.dataset_dir +
                           " does not match the model family");
    return triples;
  }
  return make_synthetic_dataset(family, c.dataset_count, c.resolution,
                                c.dataset_seed);
}

void echo_resolved_config(const RunConfig& c, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "resolved_config.json");
  if (!out)
    throw ftl::DataError("cannot write " + (out_dir / "resolved_config.json").string());
  out << run_config_to_json(c).dump(2) << "\n";
}

std::string run_id_of(const RunConfig& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64,
                ftl::fnv1a64(run_config_to_json(c).dump()));
  return buf;
}

std::vector<double> parse_grid(const std::string& text) {
  double a = 0.0, b = 0.0;
  long n = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%ld", &a, &b, &n) != 3 || n < 1)
    throw ftl::ConfigError("grid: expected \"a:b:n\" with n >= 1, got \"" + text + "\"");
  std::vector<double> grid;
  grid.reserve(static_cast<size_t>(n));
  if (n == 1) {
    grid.push_back(a);
  } else {
    for (long k = 0; k < n; ++k)
      grid.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  return grid;
}

void check_grid_in_domain(const ftl::DofSpec& dof, const std::vector<double>& grid) {
  for (double v : grid) {
    if (!std::isfinite(v)) throw ftl::DomainError("grid: non-finite value");
    if (dof.domain == ftl::DofDomain::Interval && (v < dof.lo || v > dof.hi))
      throw ftl::DomainError("grid: value " + std::to_string(v) +
                             " outside dof '" + dof.name + "' domain [" +
                             std::to_string(dof.lo) + "," +
                             std::to_string(dof.hi) + "]");
  }
}

void write_loss_history(const fs::path& path, const std::vector<ftl::LogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ftl::DataError("cannot write " + path.string());
  out << "step,total,recon,reg,cls,wall_ms\n";
  char buf[64];
  for (const ftl::LogRow& r : rows) {
    out << r.step;
    for (double v : {r.total, r.recon, r.reg, r.cls, r.wall_ms}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const fs::path& out_dir) {
  ftl::ModelConfig model_cfg = resolve_model_config(cfg);
  ftl::TrainSettings settings = resolve_settings(cfg);
  auto data = resolve_dataset(cfg, model_cfg.family);
  if (data.empty()) throw ftl::DataError("train: empty dataset");

  echo_resolved_config(cfg, out_dir);

  ftl::Model model(model_cfg, cfg.seed);
  ftl::ModelOptimizer opt(model, settings.schedule, settings.beta1,
                          settings.beta2, settings.epsilon);

  ftl::TrainOutcome outcome;
  if (settings.epochs > 0) {
    outcome = ftl::train_model(model, opt, data, settings);
  } else {
    outcome.final_loss = ftl::dataset_loss(model, data, settings);
  }
  write_loss_history(out_dir / "loss_history.csv", outcome.history);
  ftl::save_checkpoint(model, out_dir / "checkpoint_final.ckpt",
                       static_cast<std::uint64_t>(outcome.steps), &opt);

  json summary = {{"run_id", run_id_of(cfg)},
                  {"steps", outcome.steps},
                  {"final_loss", outcome.final_loss},
                  {"config_hash", ftl::config_hash(model_cfg)}};
  std::ofstream sout(out_dir / "summary.json");
  sout << summary.dump(2) << "\n";
  std::printf("train: %ld steps, final %s loss %.6g\n", outcome.steps,
              ftl::loss_kind_name(settings.loss), outcome.final_loss);
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const fs::path& checkpoint_path,
             const fs::path& out_dir) {
  ftl::Checkpoint ckpt = ftl::load_checkpoint(checkpoint_path);
  ftl::Model model = ftl::restore_model(ckpt);
  if (!cfg.family_path.empty()) {
    ftl::TransformFamily requested = family_from_file(cfg.family_path);
    if (ftl::family_to_json(requested).dump() !=
        ftl::family_to_json(model.config().family).dump())
      throw ftl::DataError("eval: requested family does not match the checkpoint");
  }
  auto data = resolve_dataset(cfg, model.config().family);
  ftl::TrainSettings settings = resolve_settings(cfg);

  echo_resolved_config(cfg, out_dir);

  ftl::ReconReport recon = ftl::transformed_reconstruction_error(
      model, data, settings.loss, settings.alpha, settings.gamma);
  const double ds_loss = ftl::dataset_loss(model, data, settings);

  ftl::EvalReport report;
  report.run_id = run_id_of(cfg);
  report.preset = model.config().preset;
  report.seed = cfg.seed;
  report.cfg_hash = ftl::config_hash(model.config());
  report.metrics["model_loss"] = recon.model_mean;
  report.metrics["identity_baseline_loss"] = recon.identity_mean;
  report.metrics["plain_reconstruction_loss"] = recon.plain_mean;
  report.metrics["dataset_loss"] = ds_loss;

  {
    std::ofstream tab(out_dir / "per_item.csv");
    tab << "model_loss,identity_baseline,plain_reconstruction\n";
    char buf[96];
    for (const auto& row : recon.per_item) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row[0], row[1], row[2]);
      tab << buf;
    }
    report.artifacts.push_back("per_item.csv");
  }

  if (model.has_head()) {
    ftl::LabeledImages labeled;
    for (const ftl::TrainingTriple& t : data) {
      labeled.images.push_back(t.x);
      labeled.labels.push_back(t.label);
      labeled.angles.push_back(0.0);
    }
    ftl::ClassifierEval ce = ftl::evaluate_classifier(model, labeled);
    report.metrics["classifier_accuracy"] = ce.accuracy;
    std::ofstream conf(out_dir / "confusion.csv");
    for (size_t i = 0; i < ce.confusion.size(); ++i) {
      for (size_t j = 0; j < ce.confusion[i].size(); ++j)
        conf << (j ? "," : "") << ce.confusion[i][j];
      conf << "\n";
    }
    report.artifacts.push_back("confusion.csv");
  }

  ftl::emit_report(report, out_dir);
  std::printf("eval: model %.6g vs identity baseline %.6g (plain %.6g)\n",
              recon.model_mean, recon.identity_mean, recon.plain_mean);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& checkpoint_path,
              const std::string& dof, const std::string& grid_text,
              const std::string& metric, int identity_count,
              const fs::path& out_dir) {
  ftl::Checkpoint ckpt = ftl::load_checkpoint(checkpoint_path);
  ftl::Model model = ftl::restore_model(ckpt);
  const ftl::TransformFamily& family = model.config().family;
  const ftl::DofSpec& spec = family.dofs[static_cast<size_t>(family.dof_index(dof))];
  if (spec.domain == ftl::DofDomain::Sphere)
    throw ftl::ConfigError("sweep: sphere dofs have no planar sweep inputs");
  std::vector<double> grid = parse_grid(grid_text);
  check_grid_in_domain(spec, grid);
  if (identity_count < 2) throw ftl::ConfigError("sweep: need at least 2 identities");

  auto pool = ftl::default_glyph_pool();
  const int res = model.config().input_shape[1];
  std::vector<ftl::Image> identities;
  for (int i = 0; i < identity_count; ++i)
    identities.push_back(ftl::rasterize(pool[static_cast<size_t>(i) % pool.size()], res));

  echo_resolved_config(cfg, out_dir);

  ftl::EvalReport report;
  report.run_id = run_id_of(cfg);
  report.preset = model.config().preset;
  report.seed = cfg.seed;
  report.cfg_hash = ftl::config_hash(model.config());
  report.curves.push_back(
      ftl::stability_sweep(model, family, identities, dof, grid, metric));

  // Decoded image grid: rows are inputs, columns are grid values.
  for (size_t i = 0; i < identities.size(); ++i) {
    ftl::Tensor x = ftl::images_to_tensor({identities[i]});
    for (size_t k = 0; k < grid.size(); ++k) {
      ftl::TransformParams p = ftl::identity_params(family);
      p.values[dof] = {grid[k]};
      ftl::Tensor decoded = model.forward_transformed(x, p, ftl::Mode::Eval);
      ftl::Image img(res, res);
      std::copy(decoded.data().begin(), decoded.data().end(), img.pixels.begin());
      char name[64];
      std::snprintf(name, sizeof name, "sweep_i%03zu_v%03zu.pgm", i, k);
      ftl::write_pgm(out_dir / name, img);
      report.artifacts.emplace_back(name);
    }
  }
  ftl::emit_report(report, out_dir);
  std::printf("sweep: %zu inputs x %zu grid values along '%s'\n",
              identities.size(), grid.size(), dof.c_str());
  return kExitOk;
}

int cmd_audit(const std::string& family_path, const std::string& preset,
              long trials, std::uint64_t seed, const std::string& out_dir) {
  ftl::TransformFamily family = family_path.empty()
                                    ? ftl::make_preset(preset).family
                                    : family_from_file(family_path);

  ftl::AuditReport rep = ftl::audit_homomorphism(family, trials, seed);
  std::printf("audit: %ld trials, seed %" PRIu64 "\n", rep.trials, rep.seed);
  std::printf("  homomorphism residual: %.3e\n", rep.homomorphism);
  std::printf("  inverse residual:      %.3e\n", rep.inverse);
  std::printf("  identity residual:     %.3e\n", rep.identity);
  std::printf("  norm residual:         %.3e\n", rep.norm);
  std::printf("  signature residual:    %.3e\n", rep.signature);
  const bool ok = rep.within(kAuditBlockTol, kAuditSignatureTol);
  std::printf("  verdict: %s\n", ok ? "PASS" : "FAIL");

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json j = {{"trials", rep.trials},
              {"seed", rep.seed},
              {"residuals",
               {{"homomorphism", rep.homomorphism},
                {"inverse", rep.inverse},
                {"identity", rep.identity},
                {"norm", rep.norm},
                {"signature", rep.signature}}},
              {"thresholds",
               {{"blocks", kAuditBlockTol}, {"signature", kAuditSignatureTol}}},
              {"pass", ok}};
    std::ofstream out(fs::path(out_dir) / "audit.json");
    out << j.dump(2) << "\n";
  }
  return ok ? kExitOk : kExitAudit;
}

int cmd_datagen(const RunConfig& cfg, const fs::path& out_dir) {
  ftl::ModelConfig model_cfg = resolve_model_config(cfg);
  auto triples = make_synthetic_dataset(model_cfg.family, cfg.dataset_count,
                                        cfg.resolution, cfg.dataset_seed);
  ftl::export_dataset(out_dir, triples, model_cfg.family, cfg.dataset_seed);
  std::printf("datagen: wrote %zu triples to %s\n", triples.size(),
              out_dir.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-transform encoder-decoder toolkit"};
  app.require_subcommand(1);

  RunConfig flags;
  std::string config_path, out_dir, checkpoint_path;
  std::string dof, grid_text = "0:6.283185307179586:12", metric = "cosine";
  std::string audit_family, audit_preset = "mnist-mlp", audit_out;
  long trials = 1000, log_every_flag = 50;
  int identity_count = 10;
  std::uint64_t audit_seed = 0;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", flags.seed, "master seed");
    auto* opt = sub->add_option("--out", out_dir, "output directory");
    if (out_required) opt->required();
    sub->add_option("--preset", flags.preset,
                    "model preset (mnist-mlp, desk-mlp, desk-conv, tiny)");
    sub->add_option("--family", flags.family_path, "family JSON file");
  };

  CLI::App* train = app.add_subcommand("train", "train an encoder-decoder");
  add_common(train, true);
  train->add_option("--lr", flags.lr, "learning rate");
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--batch", flags.batch_size, "minibatch size");
  train->add_option("--loss", flags.loss, "loss kind: l1, ssim, face, bce");
  train->add_option("--alpha", flags.alpha, "face-loss blend");
  train->add_option("--gamma", flags.gamma, "balanced-BCE occupancy weight");
  train->add_option("--reg-weight", flags.reg_weight, "invariance regularizer weight");
  train->add_option("--class-weight", flags.class_weight, "classification term weight");
  train->add_option("--log-every", log_every_flag, "steps between CSV log rows");
  train->add_option("--data", flags.dataset_dir, "dataset directory (default synthetic)");
  train->add_option("--count", flags.dataset_count, "synthetic triple count");
  train->add_option("--data-seed", flags.dataset_seed, "synthetic dataset seed");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("--loss", flags.loss, "loss kind");
  eval->add_option("--alpha", flags.alpha, "face-loss blend");
  eval->add_option("--gamma", flags.gamma, "balanced-BCE occupancy weight");
  eval->add_option("--data", flags.dataset_dir, "dataset directory (default synthetic)");
  eval->add_option("--count", flags.dataset_count, "synthetic triple count");
  eval->add_option("--data-seed", flags.dataset_seed, "synthetic dataset seed");

  CLI::App* sweep = app.add_subcommand("sweep", "decode a per-dof parameter sweep");
  add_common(sweep, true);
  sweep->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  sweep->add_option("--dof", dof, "degree of freedom to sweep")->required();
  sweep->add_option("--grid", grid_text, "a:b:n sweep grid");
  sweep->add_option("--metric", metric, "cosine or l2");
  sweep->add_option("--identities", identity_count, "number of base inputs");

  CLI::App* audit = app.add_subcommand("audit", "audit the transform algebra");
  audit->add_option("--family", audit_family, "family JSON to audit");
  audit->add_option("--preset", audit_preset, "preset whose family to audit");
  audit->add_option("--trials", trials, "random trials")->check(CLI::PositiveNumber);
  audit->add_option("--seed", audit_seed, "audit seed");
  audit->add_option("--out", audit_out, "directory for audit.json");

  CLI::App* datagen = app.add_subcommand("datagen", "write a synthetic dataset");
  add_common(datagen, true);
  datagen->add_option("--count", flags.dataset_count, "triple count");
  datagen->add_option("--res", flags.resolution, "image resolution");
  datagen->add_option("--data-seed", flags.dataset_seed, "dataset seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* active = train->parsed()   ? train
                       : eval->parsed()  ? eval
                       : sweep->parsed() ? sweep
                       : datagen->parsed() ? datagen
                                           : nullptr;
    if (audit->parsed())
      return cmd_audit(audit_family, audit_preset, trials, audit_seed, audit_out);

    flags.log_every = log_every_flag;
    RunConfig cfg = resolve_run_config(active, flags, load_config_file(config_path));

    if (train->parsed()) return cmd_train(cfg, out_dir);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint_path, out_dir);
    if (sweep->parsed())
      return cmd_sweep(cfg, checkpoint_path, dof, grid_text, metric,
                       identity_count, out_dir);
    if (datagen->parsed()) return cmd_datagen(cfg, out_dir);
    std::fprintf(stderr, "no subcommand\n");
    return kExitUsage;
  } catch (const ftl::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const ftl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const ftl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
