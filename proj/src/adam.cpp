#include "pedcast/adam.hpp"

#include <cmath>

namespace pedcast::ad {

void adam_step(ParameterSet& params, AdamState& state) {
  for (const auto& name : params.names()) {
    const TensorPtr& p = params.get(name);
    if (p->grad.size() != p->value.size())
      throw ContractError("adam_step: parameter '" + name + "' has no gradient");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (const auto& name : params.names()) {
    const TensorPtr& p = params.get(name);
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m.assign(p->size(), 0.0);
    if (v.empty()) v.assign(p->size(), 0.0);
    if (m.size() != p->size() || v.size() != p->size())
      throw ContractError("adam_step: moment shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p->value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    p->zero_grad();
  }
}

}  // namespace pedcast::ad
