#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "ftl/checkpoint.hpp"
#include "ftl/network.hpp"
#include "ftl/train.hpp"
#include "helpers.hpp"

using namespace ftl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("ftl_net_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void zero_param(Model& model, const std::string& name) {
  for (auto& [n, t] : model.parameters())
    if (n == name) std::fill(t.data().begin(), t.data().end(), 0.0);
}

}  // namespace

TEST_CASE("encode: zeroed final layer maps anything to the zero code") {
  Model model(preset_desk_mlp(), 1);
  zero_param(model, "enc2.w");
  zero_param(model, "enc2.b");
  std::mt19937_64 rng(71);
  Tensor x = Tensor::uniform({3, 1, 16, 16}, 0.0, 1.0, rng);
  Tensor code = model.encode(x, Mode::Eval);
  REQUIRE(code.shape() == Shape{3, 30});
  for (double v : code.data()) CHECK(v == 0.0);
}

TEST_CASE("encode is deterministic and identical rows give identical codes") {
  Model model(preset_desk_mlp(), 2);
  std::mt19937_64 rng(72);
  Tensor one = Tensor::uniform({1, 1, 16, 16}, 0.0, 1.0, rng);
  std::vector<double> two_data(one.data().begin(), one.data().end());
  two_data.insert(two_data.end(), one.data().begin(), one.data().end());
  Tensor two = Tensor::from_data({2, 1, 16, 16}, two_data);
  Tensor codes = model.encode(two, Mode::Eval);
  for (int j = 0; j < 30; ++j)
    CHECK(codes.data()[j] == codes.data()[30 + j]);

  Tensor again = model.encode(two, Mode::Eval);
  for (long i = 0; i < codes.size(); ++i)
    CHECK(codes.data()[i] == again.data()[i]);

  Tensor bad = Tensor::zeros({2, 1, 8, 8});
  CHECK_THROWS_AS(model.encode(bad, Mode::Eval), ShapeError);
}

TEST_CASE("mnist preset: code width 510, signature width 10965, decode shape") {
  ModelConfig cfg = preset_mnist_mlp();
  CHECK(cfg.family.feature_dim == 510);
  CHECK(cfg.family.signature_length() == 10965);
  Model model(cfg, 3);
  std::mt19937_64 rng(73);
  Tensor x = Tensor::uniform({2, 1, 28, 28}, 0.0, 1.0, rng);
  Tensor code = model.encode(x, Mode::Eval);
  REQUIRE(code.shape() == Shape{2, 510});
  Tensor img = model.decode(code, Mode::Eval);
  REQUIRE(img.shape() == Shape{2, 1, 28, 28});
  for (double v : img.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(model.decode(Tensor::zeros({2, 511}), Mode::Eval), ShapeError);
}

TEST_CASE("desk-conv preset round-trips shapes") {
  Model model(preset_desk_conv(), 4);
  std::mt19937_64 rng(74);
  Tensor x = Tensor::uniform({2, 1, 16, 16}, 0.0, 1.0, rng);
  Tensor code = model.encode(x, Mode::Train);
  REQUIRE(code.shape() == Shape{2, 30});
  Tensor img = model.decode(code, Mode::Train);
  REQUIRE(img.shape() == Shape{2, 1, 16, 16});
}

TEST_CASE("forward_transformed with identity params is bit-identical to plain decode-encode") {
  Model model(preset_desk_mlp(), 5);
  std::mt19937_64 rng(75);
  Tensor x = Tensor::uniform({2, 1, 16, 16}, 0.0, 1.0, rng);
  Tensor plain = model.decode(model.encode(x, Mode::Eval), Mode::Eval);
  Tensor transformed =
      model.forward_transformed(x, identity_params(model.config().family), Mode::Eval);
  for (long i = 0; i < plain.size(); ++i)
    CHECK(plain.data()[i] == transformed.data()[i]);
}

TEST_CASE("forward_transformed respects composition") {
  Model model(preset_desk_mlp(), 6);
  const TransformFamily& family = model.config().family;
  std::mt19937_64 rng(76);
  Tensor x = Tensor::uniform({2, 1, 16, 16}, 0.0, 1.0, rng);
  auto [p1, p2] = sample_composable_pair(family, rng);
  Tensor via_compose = model.forward_transformed(x, compose(family, p2, p1), Mode::Eval);
  Tensor e = model.encode(x, Mode::Eval);
  Tensor chained = model.decode(
      apply(build_block_transform(family, p2),
            apply(build_block_transform(family, p1), e)),
      Mode::Eval);
  for (long i = 0; i < chained.size(); ++i)
    CHECK(std::fabs(via_compose.data()[i] - chained.data()[i]) <= 1e-12);
}

TEST_CASE("feature norms are preserved for any model state") {
  Model model(preset_desk_mlp(), 7);
  const TransformFamily& family = model.config().family;
  std::mt19937_64 rng(77);
  Tensor x = Tensor::uniform({4, 1, 16, 16}, 0.0, 1.0, rng);
  Tensor e = model.encode(x, Mode::Eval);
  TransformParams p = sample_params(family, rng);
  Tensor y = apply(build_block_transform(family, p), e);
  for (int r = 0; r < 4; ++r) {
    double ne = 0.0, ny = 0.0;
    for (int j = 0; j < 30; ++j) {
      ne += e.data()[r * 30 + j] * e.data()[r * 30 + j];
      ny += y.data()[r * 30 + j] * y.data()[r * 30 + j];
    }
    CHECK(std::fabs(std::sqrt(ny) - std::sqrt(ne)) <= 1e-12 * std::sqrt(ne));
  }
}

TEST_CASE("classifier head: zero initialization gives uniform scores and "
          "signature scores barely drift under feature transforms") {
  Model model(preset_desk_mlp(), 8);
  const TransformFamily& family = model.config().family;
  std::mt19937_64 rng(78);
  Tensor x = Tensor::uniform({3, 1, 16, 16}, 0.0, 1.0, rng);
  Tensor e = model.encode(x, Mode::Eval);

  {
    Model zeroed(preset_desk_mlp(), 8);
    for (auto& [n, t] : zeroed.parameters())
      if (n.rfind("head", 0) == 0) std::fill(t.data().begin(), t.data().end(), 0.0);
    Tensor scores =
        zeroed.classify_invariants(invariant_signature(family, e), Mode::Eval);
    for (long i = 0; i < scores.size(); ++i) CHECK(scores.data()[i] == 0.0);
  }

  Tensor scores_base =
      model.classify_invariants(invariant_signature(family, e), Mode::Eval);
  TransformParams p = sample_params(family, rng);
  Tensor scores_rot = model.classify_invariants(
      invariant_signature(family, apply(build_block_transform(family, p), e)),
      Mode::Eval);
  for (long i = 0; i < scores_base.size(); ++i)
    CHECK(std::fabs(scores_base.data()[i] - scores_rot.data()[i]) <= 1e-6);

  CHECK_THROWS_AS(model.classify_invariants(Tensor::zeros({1, 7}), Mode::Eval),
                  ShapeError);
}

TEST_CASE("full pipeline gradient check on the tiny model") {
  Model model(preset_tiny(), 9);
  std::mt19937_64 rng(79);
  Tensor x = Tensor::uniform({3, 1, 8, 8}, 0.0, 1.0, rng);
  Tensor target = Tensor::uniform({3, 1, 8, 8}, 0.0, 1.0, rng);
  TransformParams p = sample_params(model.config().family, rng);
  std::vector<Tensor> params;
  for (auto& [name, t] : model.parameters())
    if (name.rfind("head", 0) != 0) params.push_back(t);
  double err = testutil::max_grad_error(
      [&] {
        return l1_loss(model.forward_transformed(x, p, Mode::Train), target);
      },
      params);
  CHECK(err <= 1e-5);
}

TEST_CASE("checkpoints restore models exactly and round-trip byte for byte") {
  fs::path dir = temp_dir("ckpt");
  Model model(preset_desk_mlp(), 10);
  LrSchedule sched;
  sched.base_lr = 1e-3;
  sched.decimation_steps = {100, 200};
  ModelOptimizer opt(model, sched);

  // A couple of training steps so stats and moments are non-trivial.
  TransformFamily family = model.config().family;
  auto pool = default_glyph_pool();
  std::mt19937_64 rng(80);
  auto triples = sample_triples(rng, family, pool, 16, 8);
  TrainSettings s;
  s.batch_size = 4;
  s.epochs = 1;
  s.log_every = 0;
  s.seed = 80;
  train_model(model, opt, triples, s);

  save_checkpoint(model, dir / "a.ckpt", 2, &opt);

  Checkpoint ckpt = load_checkpoint(dir / "a.ckpt");
  CHECK(ckpt.step == 2);
  CHECK(ckpt.seed == 10);
  Model restored = restore_model(ckpt);
  ModelOptimizer ropt = restore_optimizer(ckpt, restored);
  CHECK(ropt.iteration() == opt.iteration());

  std::mt19937_64 rng2(81);
  Tensor x = Tensor::uniform({2, 1, 16, 16}, 0.0, 1.0, rng2);
  Tensor a = model.encode(x, Mode::Eval);
  Tensor b = restored.encode(x, Mode::Eval);
  for (long i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

  save_checkpoint(restored, dir / "b.ckpt", 2, &ropt);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
}

TEST_CASE("checkpoint array count matches the layer arithmetic") {
  Model model(preset_desk_mlp(), 11);
  fs::path dir = temp_dir("count");
  save_checkpoint(model, dir / "m.ckpt");
  Checkpoint ckpt = load_checkpoint(dir / "m.ckpt");
  // desk-mlp: 6 coder layers (w+b), 4 with batchnorm (g+b), head 3 layers
  // (w+b); running stats add 2 arrays per batchnorm layer.
  const size_t params = 6 * 2 + 4 * 2 + 3 * 2;
  const size_t stats = 4 * 2;
  CHECK(ckpt.arrays.size() == params + stats);
  long total = 0;
  for (auto& [name, data] : ckpt.arrays) total += static_cast<long>(data.size());
  long expected = 0;
  for (auto& [name, t] : model.parameters()) expected += t.size();
  for (auto& [name, st] : model.running_stats())
    expected += 2 * static_cast<long>(st->mean.size());
  CHECK(total == expected);
}

TEST_CASE("corrupted checkpoints are rejected with explicit errors") {
  fs::path dir = temp_dir("corrupt");
  Model model(preset_tiny(), 12);
  save_checkpoint(model, dir / "m.ckpt");
  const std::string bytes = slurp(dir / "m.ckpt");

  {
    std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), DataError);

  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH(load_checkpoint(dir / "magic.ckpt"),
                    Catch::Matchers::ContainsSubstring("magic"));

  {
    std::string bad = bytes;
    bad[8] = 9;  // unsupported version
    std::ofstream out(dir / "ver.ckpt", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH(load_checkpoint(dir / "ver.ckpt"),
                    Catch::Matchers::ContainsSubstring("version"));

  {
    std::string bad = bytes + "zz";  // trailing garbage
    std::ofstream out(dir / "trail.ckpt", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "trail.ckpt"), DataError);

  // Parameter-count mismatch: a checkpoint stripped of one array.
  Checkpoint ckpt = load_checkpoint(dir / "m.ckpt");
  ckpt.arrays.pop_back();
  CHECK_THROWS_AS(restore_model(ckpt), DataError);
}

TEST_CASE("model config validation rejects layers breaking the linear FTL contract") {
  ModelConfig cfg = preset_desk_mlp();
  cfg.encoder.back().activation = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  ModelConfig cfg2 = preset_desk_mlp();
  cfg2.encoder.back().width = 31;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);

  ModelConfig cfg3 = preset_desk_mlp();
  cfg3.decoder.back().batchnorm = true;
  CHECK_THROWS_AS(cfg3.validate(), ConfigError);

  CHECK_THROWS_AS(make_preset("nope"), ConfigError);
}

TEST_CASE("model config JSON round-trips") {
  for (const char* name : {"mnist-mlp", "desk-mlp", "desk-conv", "tiny"}) {
    ModelConfig cfg = make_preset(name);
    nlohmann::json j = config_to_json(cfg);
    ModelConfig back = config_from_json(j);
    CHECK(config_to_json(back).dump() == j.dump());
  }
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"preset", "x"}}), DataError);
}
