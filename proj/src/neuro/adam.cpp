#include "aptc/neuro/adam.hpp"

#include <cmath>

#include "aptc/errors.hpp"

namespace aptc::neuro {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, kernels::Backend backend) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InputError("adam_step: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const kernels::AdamCoefficients coeff{c.lr, c.beta1, c.beta2, c.eps, 1.0 - std::pow(c.beta1, t),
                                        1.0 - std::pow(c.beta2, t)};
  if (backend == kernels::Backend::serial) {
    kernels::serial::adam_update(params, grads, state.m, state.v, coeff);
  } else {
    kernels::parallel::adam_update(params, grads, state.m, state.v, coeff);
  }
}

}  // namespace aptc::neuro
