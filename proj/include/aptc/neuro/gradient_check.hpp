#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "aptc/neuro/mlp.hpp"

namespace aptc::neuro {

struct GradientCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;  // central-difference half width
  // Relative errors are |a - n| / max(|a|, |n|, scale_floor), so gradients that
  // are numerically zero are compared on an absolute scale.
  double scale_floor = 1e-6;
};

struct GradientCheckReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> failures;  // parameter indices above tolerance
};

/// Compares `analytic` against central differences of `loss`, perturbing
/// `params` in place (each entry is restored before moving on).
GradientCheckReport gradient_check(std::span<double> params, const std::function<double()>& loss,
                                   std::span<const double> analytic, const GradientCheckOptions& options = {});

/// Convenience form for a network: `loss_and_grad` returns the loss and its
/// parameter gradient at the network's current parameters.
using NetLoss = std::function<std::pair<double, std::vector<double>>(const Mlp&)>;
GradientCheckReport gradient_check(Mlp& net, const NetLoss& loss_and_grad, const GradientCheckOptions& options = {});

}  // namespace aptc::neuro
