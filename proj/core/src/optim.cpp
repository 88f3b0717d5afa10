#include "tdg/optim.hpp"

#include <cmath>
#include <string>

#include "tdg/error.hpp"

namespace tdg {

namespace {

void require_shapes(const Vec& params, const Vec& grads, Vec& buffer,
                    const char* what) {
  if (params.size() != grads.size()) {
    throw DimensionError(std::string(what) + ": parameter/gradient shape mismatch");
  }
  if (buffer.empty()) {
    buffer.assign(params.size(), 0.0);
  } else if (buffer.size() != params.size()) {
    throw DimensionError(std::string(what) + ": state shape mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError(std::string(what) + ": non-finite gradient " +
                         std::to_string(grads[i]) + " at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace

void adam_step(AdamState& state, Vec& params, const Vec& grads, double lr) {
  require_shapes(params, grads, state.first_moment, "adam_step");
  if (state.second_moment.empty()) {
    state.second_moment.assign(params.size(), 0.0);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first_moment[i] =
        state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * grads[i];
    state.second_moment[i] = state.beta2 * state.second_moment[i] +
                             (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.first_moment[i] / bc1;
    const double v_hat = state.second_moment[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void sgd_step(SgdState& state, Vec& params, const Vec& grads, double lr) {
  require_shapes(params, grads, state.momentum_buffer, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.momentum_buffer[i] = state.momentum * state.momentum_buffer[i] + grads[i];
    params[i] -= lr * state.momentum_buffer[i];
  }
}

EmaState make_ema(const Vec& params, double decay) {
  if (!(decay >= 0.0) || !(decay <= 1.0)) {
    throw ConfigError("ema: decay must lie in [0, 1]");
  }
  return EmaState{params, decay};
}

void ema_update(EmaState& state, const Vec& params) {
  if (state.shadow.size() != params.size()) {
    throw DimensionError("ema_update: shape mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.shadow[i] =
        state.decay * state.shadow[i] + (1.0 - state.decay) * params[i];
  }
}

}  // namespace tdg
