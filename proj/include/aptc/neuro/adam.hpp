#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aptc/neuro/kernels.hpp"

namespace aptc::neuro {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg) : m(size, 0.0), v(size, 0.0), config(cfg) {}
};

/// Bias-corrected Adam update in place. Throws InputError on shape mismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               kernels::Backend backend = kernels::Backend::parallel);

}  // namespace aptc::neuro
