#pragma once

#include "tdg/vec.hpp"

namespace tdg {

// Adam with bias correction; moments are lazily sized on first use.
struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(AdamState& state, Vec& params, const Vec& grads, double lr);

// Momentum SGD: buf <- momentum * buf + g; p <- p - lr * buf.
struct SgdState {
  Vec momentum_buffer;
  double momentum = 0.9;
};

void sgd_step(SgdState& state, Vec& params, const Vec& grads, double lr);

// shadow <- decay * shadow + (1 - decay) * param.
struct EmaState {
  Vec shadow;
  double decay = 0.999;
};

EmaState make_ema(const Vec& params, double decay);
void ema_update(EmaState& state, const Vec& params);

}  // namespace tdg
