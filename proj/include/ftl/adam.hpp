#ifndef FTL_ADAM_HPP
#define FTL_ADAM_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ftl/errors.hpp"
#include "ftl/tensor.hpp"

namespace ftl {

/// Per-parameter Adam state. Moment arrays always match the parameter length.
struct AdamState {
  long step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(long param_count, double lr)
      : first_moment(static_cast<size_t>(param_count), 0.0),
        second_moment(static_cast<size_t>(param_count), 0.0),
        learning_rate(lr) {}
};

/// One bias-corrected Adam update, in place. step_count advances by one.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw ShapeError("adam_step: size mismatch (params " +
                     std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", state " +
                     std::to_string(state.first_moment.size()) + ")");
  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
    state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
    const double mhat = state.first_moment[i] / bias1;
    const double vhat = state.second_moment[i] / bias2;
    params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

/// Convenience overload for a parameter tensor with populated grad.
inline void adam_step(Tensor& param, AdamState& state) {
  if (!param.has_grad())
    throw ValueError("adam_step: parameter has no gradient");
  adam_step(param.data(), param.grad(), state);
}

}  // namespace ftl

#endif  // FTL_ADAM_HPP
