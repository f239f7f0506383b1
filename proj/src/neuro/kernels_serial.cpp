#include <cmath>

#include "aptc/neuro/kernels.hpp"

namespace aptc::neuro::kernels::serial {

void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < s.in; ++i) acc += x[r * s.in + i] * w[i * s.out + o];
      y[r * s.out + o] = acc;
    }
  }
}

void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    for (std::size_t i = 0; i < s.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < s.out; ++o) acc += dy[r * s.out + o] * w[i * s.out + o];
      dx[r * s.in + i] = acc;
    }
  }
}

void dense_backward_params(DenseShape s, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                           std::span<double> db) {
  for (std::size_t i = 0; i < s.in; ++i) {
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < s.batch; ++r) acc += x[r * s.in + i] * dy[r * s.out + o];
      dw[i * s.out + o] = acc;
    }
  }
  for (std::size_t o = 0; o < s.out; ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < s.batch; ++r) acc += dy[r * s.out + o];
    db[o] = acc;
  }
}

void relu_forward(std::span<double> values) {
  for (double& v : values) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> activation, std::span<double> grad) {
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (!(activation[k] > 0.0)) grad[k] = 0.0;
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grads[k];
    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grads[k] * grads[k];
    const double m_hat = m[k] / c.bias_correction1;
    const double v_hat = v[k] / c.bias_correction2;
    params[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void polyak_mix(std::span<double> target, std::span<const double> online, double tau) {
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = (1.0 - tau) * target[k] + tau * online[k];
}

}  // namespace aptc::neuro::kernels::serial
