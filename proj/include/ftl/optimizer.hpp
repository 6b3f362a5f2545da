#ifndef FTL_OPTIMIZER_HPP
#define FTL_OPTIMIZER_HPP

#include <string>
#include <utility>
#include <vector>

#include "ftl/adam.hpp"
#include "ftl/network.hpp"

namespace ftl {

/// Step-decimation schedule: the learning rate is divided by 10 at each
/// listed iteration.
struct LrSchedule {
  double base_lr = 1e-3;
  std::vector<long> decimation_steps;

  double lr_at(long iter) const {
    double lr = base_lr;
    for (long d : decimation_steps)
      if (iter >= d) lr /= 10.0;
    return lr;
  }
};

/// Adam over every named model parameter, with one state per parameter and a
/// shared schedule. Parameters that received no gradient in a step are left
/// untouched.
class ModelOptimizer {
 public:
  ModelOptimizer(Model& model, LrSchedule schedule, double beta1 = 0.9,
                 double beta2 = 0.999, double epsilon = 1e-8)
      : schedule_(std::move(schedule)) {
    for (auto& [name, param] : model.parameters()) {
      AdamState state(param.size(), schedule_.base_lr);
      state.beta1 = beta1;
      state.beta2 = beta2;
      state.epsilon = epsilon;
      states_.emplace_back(name, std::move(state));
    }
  }

  void step(Model& model) {
    const double lr = schedule_.lr_at(iteration_);
    auto params = model.parameters();
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& t = params[i].second;
      if (!t.has_grad()) continue;
      states_[i].second.learning_rate = lr;
      adam_step(t.data(), t.grad(), states_[i].second);
    }
    ++iteration_;
  }

  long iteration() const { return iteration_; }
  void set_iteration(long it) { iteration_ = it; }
  const LrSchedule& schedule() const { return schedule_; }
  std::vector<std::pair<std::string, AdamState>>& states() { return states_; }
  const std::vector<std::pair<std::string, AdamState>>& states() const {
    return states_;
  }

 private:
  LrSchedule schedule_;
  std::vector<std::pair<std::string, AdamState>> states_;
  long iteration_ = 0;
};

}  // namespace ftl

#endif  // FTL_OPTIMIZER_HPP
