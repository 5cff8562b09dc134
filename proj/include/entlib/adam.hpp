#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/tensor.hpp"

namespace entlib {

// Adam optimizer state: per-parameter first/second moment estimates plus the
// shared step counter. Moment arrays are congruent with their parameters.
struct AdamState {
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real epsilon = real(1e-8);
  long step = 0;
  std::vector<std::vector<real>> first_moment;
  std::vector<std::vector<real>> second_moment;

  static AdamState init(const std::vector<Tensor>& params) {
    AdamState st;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const Tensor& p : params) {
      st.first_moment.emplace_back(p.size(), real(0));
      st.second_moment.emplace_back(p.size(), real(0));
    }
    return st;
  }
};

// One bias-corrected Adam update over the parameter list. Gradients are read
// from each tensor's grad buffer; an unallocated grad counts as zero.
inline void adam_step(std::vector<Tensor>& params, AdamState& state, real learning_rate) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step parameter count " + std::to_string(params.size()) +
                     " does not match state (" + std::to_string(state.first_moment.size()) + ")");
  }
  state.step += 1;
  const real bc1 = real(1) - std::pow(state.beta1, static_cast<real>(state.step));
  const real bc2 = real(1) - std::pow(state.beta2, static_cast<real>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != params[p].size()) {
      throw ShapeError("adam_step moment shape mismatch for parameter " + std::to_string(p) +
                       ": " + std::to_string(m.size()) + " vs " +
                       std::to_string(params[p].size()));
    }
    const std::vector<real>* grad = params[p].grad_if();
    auto& vals = params[p].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const real g = grad ? (*grad)[i] : real(0);
      m[i] = state.beta1 * m[i] + (real(1) - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (real(1) - state.beta2) * g * g;
      const real m_hat = m[i] / bc1;
      const real v_hat = v[i] / bc2;
      vals[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace entlib
