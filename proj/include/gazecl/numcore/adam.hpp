#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazecl/numcore/tensor.hpp"

namespace gazecl::numcore {

// First/second moment estimates for one ordered parameter list. Moment
// arrays are lazily sized to match the parameters on the first step and must
// stay aligned with them afterwards.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::int64_t step_count = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

// One Adam update with bias correction. Scans all gradients first: a single
// non-finite gradient rejects the whole step and leaves parameters, moments
// and step_count untouched.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, T lr) {
  if (!(lr > T(0))) throw ContractError("adam_step: learning rate must be > 0");

  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i].data().size(), T(0));
      state.second_moment[i].assign(params[i].data().size(), T(0));
    }
  }
  if (state.first_moment.size() != params.size())
    throw ContractError("adam_step: state tracks " +
                        std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].data().size())
      throw ContractError("adam_step: moment shape mismatch at parameter " +
                          std::to_string(i));
    for (T g : params[i].grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("adam_step: non-finite gradient in parameter " +
                           std::to_string(i) + "; step rejected");
  }

  state.step_count += 1;
  const T t = static_cast<T>(state.step_count);
  const T bc1 = T(1) - std::pow(state.beta1, t);
  const T bc2 = T(1) - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    const auto& g = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g[j] * g[j];
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace gazecl::numcore
