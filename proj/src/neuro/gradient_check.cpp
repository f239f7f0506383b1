#include "aptc/neuro/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "aptc/errors.hpp"

namespace aptc::neuro {

GradientCheckReport gradient_check(std::span<double> params, const std::function<double()>& loss,
                                   std::span<const double> analytic, const GradientCheckOptions& options) {
  if (analytic.size() != params.size()) throw InputError("gradient_check: gradient size mismatch");
  GradientCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + options.step;
    const double up = loss();
    params[k] = saved - options.step;
    const double down = loss();
    params[k] = saved;

    const double numeric = (up - down) / (2.0 * options.step);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), options.scale_floor});
    const double rel = std::abs(numeric - analytic[k]) / scale;
    if (!(rel <= options.tolerance)) {
      report.passed = false;
      report.failures.push_back(k);
    }
    if (!(rel <= report.max_relative_error)) {
      report.max_relative_error = rel;
      report.worst_index = k;
    }
    ++report.checked;
  }
  return report;
}

GradientCheckReport gradient_check(Mlp& net, const NetLoss& loss_and_grad, const GradientCheckOptions& options) {
  const std::vector<double> analytic = loss_and_grad(net).second;
  std::span<double> params = net.mutable_parameters();
  return gradient_check(params, [&] { return loss_and_grad(net).first; }, analytic, options);
}

}  // namespace aptc::neuro
