#pragma once

// Batched dense-layer kernels. Every kernel exists twice: `serial` is the
// plain-loop reference used by the tests, `parallel` is the OpenMP version the
// networks run on. Each output element of a parallel kernel is produced by a
// single thread with a fixed accumulation order, so results do not depend on
// the thread count.
//
// Layouts (row-major): x [batch x in], w [in x out], b [out], y [batch x out].

#include <cstddef>
#include <span>

namespace aptc::neuro::kernels {

enum class Backend { serial, parallel };

struct DenseShape {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

namespace serial {
// y = x w + b
void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
// dx = dy w^T
void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
// dw = x^T dy, db = column sums of dy; both overwritten
void dense_backward_params(DenseShape s, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                           std::span<double> db);
void relu_forward(std::span<double> values);
// grad *= (activation > 0)
void relu_backward(std::span<const double> activation, std::span<double> grad);
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);
// target = (1 - tau) target + tau online
void polyak_mix(std::span<double> target, std::span<const double> online, double tau);
}  // namespace serial

namespace parallel {
// Same contracts as serial::.
void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
void dense_backward_params(DenseShape s, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                           std::span<double> db);
void relu_forward(std::span<double> values);
void relu_backward(std::span<const double> activation, std::span<double> grad);
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);
void polyak_mix(std::span<double> target, std::span<const double> online, double tau);
}  // namespace parallel

}  // namespace aptc::neuro::kernels
