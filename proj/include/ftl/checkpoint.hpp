#ifndef FTL_CHECKPOINT_HPP
#define FTL_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftl/errors.hpp"
#include "ftl/network.hpp"
#include "ftl/optimizer.hpp"

namespace ftl {

// Binary layout, all integers little-endian:
//   bytes 0..7   magic "FTLCHKPT"
//   bytes 8..11  u32 format version (1)
//   bytes 12..19 u64 header length H
//   bytes 20..   header JSON (H bytes), then raw f64 arrays in table order.
// The header's array table stores element offsets into the payload. Loading
// and re-saving a checkpoint reproduces the file byte for byte.

inline constexpr char kCheckpointMagic[8] = {'F', 'T', 'L', 'C', 'H', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  bool has_optimizer = false;
  double opt_lr = 0.0, opt_beta1 = 0.0, opt_beta2 = 0.0, opt_epsilon = 0.0;
  std::vector<long> opt_decimation_steps;
  long opt_iteration = 0;
  long opt_step_count = 0;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;  // table order

  const std::vector<double>& array(const std::string& name) const {
    for (const auto& [n, v] : arrays)
      if (n == name) return v;
    throw DataError("checkpoint: missing array '" + name + "'");
  }
};

namespace detail {

inline void collect_arrays(Model& model, const ModelOptimizer* opt,
                           std::vector<std::pair<std::string, std::vector<double>>>& out) {
  for (auto& [name, t] : model.parameters())
    out.emplace_back(name, std::vector<double>(t.data().begin(), t.data().end()));
  for (auto& [name, stats] : model.running_stats()) {
    out.emplace_back(name + ".bn_rm", stats->mean);
    out.emplace_back(name + ".bn_rv", stats->var);
  }
  if (opt) {
    for (const auto& [name, state] : opt->states()) {
      out.emplace_back("adam.m." + name, state.first_moment);
      out.emplace_back("adam.v." + name, state.second_moment);
    }
  }
}

inline nlohmann::json checkpoint_header(
    const ModelConfig& config, std::uint64_t seed, std::uint64_t step,
    const std::vector<std::pair<std::string, std::vector<double>>>& arrays,
    bool has_opt, double lr, double b1, double b2, double eps,
    const std::vector<long>& decimations, long opt_iter, long opt_step_count) {
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, data] : arrays) {
    table.push_back({{"name", name}, {"offset", offset}, {"count", data.size()}});
    offset += data.size();
  }
  nlohmann::json opt = nullptr;
  if (has_opt)
    opt = {{"lr", lr},
           {"beta1", b1},
           {"beta2", b2},
           {"epsilon", eps},
           {"decimation_steps", decimations},
           {"iteration", opt_iter},
           {"step_count", opt_step_count}};
  return {{"config", config_to_json(config)},
          {"seed", seed},
          {"step", step},
          {"optimizer", opt},
          {"arrays", table}};
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.write(b, 8);
}

}  // namespace detail

inline void save_checkpoint(Model& model, const std::filesystem::path& path,
                            std::uint64_t step = 0,
                            const ModelOptimizer* opt = nullptr) {
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  detail::collect_arrays(model, opt, arrays);
  const long opt_step_count =
      opt && !opt->states().empty() ? opt->states().front().second.step_count : 0;
  nlohmann::json header = detail::checkpoint_header(
      model.config(), model.seed(), step, arrays, opt != nullptr,
      opt ? opt->schedule().base_lr : 0.0,
      opt && !opt->states().empty() ? opt->states().front().second.beta1 : 0.0,
      opt && !opt->states().empty() ? opt->states().front().second.beta2 : 0.0,
      opt && !opt->states().empty() ? opt->states().front().second.epsilon : 0.0,
      opt ? opt->schedule().decimation_steps : std::vector<long>{},
      opt ? opt->iteration() : 0, opt_step_count);
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out.write(kCheckpointMagic, 8);
  detail::write_u32(out, kCheckpointVersion);
  detail::write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, data] : arrays)
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw DataError("checkpoint: write failure on " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), 4))
    throw DataError("checkpoint: truncated header in " + path.string());
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version) +
                    " in " + path.string());
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), 8))
    throw DataError("checkpoint: truncated header in " + path.string());
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw DataError("checkpoint: truncated header in " + path.string());
  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded())
    throw DataError("checkpoint: malformed header JSON in " + path.string());

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(header.at("config"));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::uint64_t>();
    const nlohmann::json& opt = header.at("optimizer");
    if (!opt.is_null()) {
      ckpt.has_optimizer = true;
      ckpt.opt_lr = opt.at("lr").get<double>();
      ckpt.opt_beta1 = opt.at("beta1").get<double>();
      ckpt.opt_beta2 = opt.at("beta2").get<double>();
      ckpt.opt_epsilon = opt.at("epsilon").get<double>();
      ckpt.opt_decimation_steps = opt.at("decimation_steps").get<std::vector<long>>();
      ckpt.opt_iteration = opt.at("iteration").get<long>();
      ckpt.opt_step_count = opt.at("step_count").get<long>();
    }
    for (const nlohmann::json& entry : header.at("arrays")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::uint64_t count = entry.at("count").get<std::uint64_t>();
      std::vector<double> data(count);
      if (!in.read(reinterpret_cast<char*>(data.data()),
                   static_cast<std::streamsize>(count * sizeof(double))))
        throw DataError("checkpoint: truncated payload reading '" + name +
                        "' in " + path.string());
      ckpt.arrays.emplace_back(name, std::move(data));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("checkpoint: malformed header: ") + ex.what());
  }
  // Nothing may trail the declared payload.
  char extra;
  if (in.read(&extra, 1))
    throw DataError("checkpoint: trailing bytes after payload in " + path.string());
  return ckpt;
}

/// Rebuilds the model and restores every parameter and running statistic.
/// The checkpoint must contain exactly the arrays the config declares.
inline Model restore_model(const Checkpoint& ckpt) {
  Model model(ckpt.config, ckpt.seed);
  size_t used = 0;
  for (auto& [name, t] : model.parameters()) {
    const std::vector<double>& src = ckpt.array(name);
    if (static_cast<long>(src.size()) != t.size())
      throw DataError("checkpoint: array '" + name + "' has " +
                      std::to_string(src.size()) + " values, model expects " +
                      std::to_string(t.size()));
    std::copy(src.begin(), src.end(), t.data().begin());
    ++used;
  }
  for (auto& [name, stats] : model.running_stats()) {
    const std::vector<double>& rm = ckpt.array(name + ".bn_rm");
    const std::vector<double>& rv = ckpt.array(name + ".bn_rv");
    if (rm.size() != stats->mean.size() || rv.size() != stats->var.size())
      throw DataError("checkpoint: running stats size mismatch for '" + name + "'");
    stats->mean = rm;
    stats->var = rv;
    used += 2;
  }
  const size_t expected_extra = ckpt.has_optimizer ? 2 * model.parameters().size() : 0;
  if (ckpt.arrays.size() != used + expected_extra)
    throw DataError("checkpoint: parameter count mismatch (" +
                    std::to_string(ckpt.arrays.size()) + " arrays, expected " +
                    std::to_string(used + expected_extra) + ")");
  return model;
}

inline ModelOptimizer restore_optimizer(const Checkpoint& ckpt, Model& model) {
  if (!ckpt.has_optimizer)
    throw DataError("checkpoint: no optimizer state stored");
  LrSchedule sched;
  sched.base_lr = ckpt.opt_lr;
  sched.decimation_steps = ckpt.opt_decimation_steps;
  ModelOptimizer opt(model, sched, ckpt.opt_beta1, ckpt.opt_beta2, ckpt.opt_epsilon);
  opt.set_iteration(ckpt.opt_iteration);
  for (auto& [name, state] : opt.states()) {
    const std::vector<double>& m = ckpt.array("adam.m." + name);
    const std::vector<double>& v = ckpt.array("adam.v." + name);
    if (m.size() != state.first_moment.size() || v.size() != state.second_moment.size())
      throw DataError("checkpoint: optimizer state size mismatch for '" + name + "'");
    state.first_moment = m;
    state.second_moment = v;
    state.step_count = ckpt.opt_step_count;
  }
  return opt;
}

}  // namespace ftl

#endif  // FTL_CHECKPOINT_HPP
