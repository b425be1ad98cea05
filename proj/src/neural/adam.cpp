#include <cmath>

#include "qmoe/error.hpp"
#include "qmoe/neural.hpp"

namespace qmoe::neural {

void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ConfigError("optimizer_step: block count mismatch");
  if (state.step_count == 0 && state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ConfigError("optimizer_step: parameter blocks changed between steps");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size()) {
      throw ConfigError("optimizer_step: block " + std::to_string(b) + " shape mismatch");
    }
  }

  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void optimizer_step(OptimizerState& state, MlpParams& params, const MlpParams& grads) {
  auto p = params.views();
  auto g = grads.views();
  optimizer_step(state, p, g);
  params.touch();
}

}  // namespace qmoe::neural
