#include "aptc/neuro/mlp.hpp"

#include <atomic>
#include <cmath>
#include <random>

#include "aptc/errors.hpp"

namespace aptc::neuro {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void dense_forward(kernels::Backend backend, kernels::DenseShape s, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b, std::span<double> y) {
  if (backend == kernels::Backend::serial) {
    kernels::serial::dense_forward(s, x, w, b, y);
  } else {
    kernels::parallel::dense_forward(s, x, w, b, y);
  }
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
  build_layout();
  std::mt19937_64 rng(seed);
  for (const LayerSpan& l : layers_) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < l.in * l.out; ++k) params_[l.weight_offset + k] = dist(rng);
    for (std::size_t k = 0; k < l.out; ++k) params_[l.bias_offset + k] = dist(rng);
  }
}

Mlp Mlp::zeros(std::vector<std::size_t> layer_sizes) {
  Mlp net;
  net.sizes_ = std::move(layer_sizes);
  net.build_layout();
  return net;
}

Mlp::Mlp(const Mlp& other)
    : sizes_(other.sizes_),
      layers_(other.layers_),
      params_(other.params_),
      backend_(other.backend_),
      id_(next_id()),
      version_(0) {}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    sizes_ = other.sizes_;
    layers_ = other.layers_;
    params_ = other.params_;
    backend_ = other.backend_;
    ++version_;
  }
  return *this;
}

void Mlp::build_layout() {
  if (sizes_.size() < 2) throw InputError("Mlp needs at least an input and an output layer");
  for (std::size_t s : sizes_) {
    if (s == 0) throw InputError("Mlp layer sizes must be positive");
  }
  layers_.clear();
  std::size_t offset = 0;
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    LayerSpan l{sizes_[k], sizes_[k + 1], offset, offset + sizes_[k] * sizes_[k + 1]};
    offset = l.bias_offset + l.out;
    layers_.push_back(l);
  }
  params_.assign(offset, 0.0);
  id_ = next_id();
  version_ = 0;
}

std::span<double> Mlp::mutable_parameters() {
  ++version_;
  return params_;
}

std::span<const double> Mlp::weight(std::size_t k) const {
  const LayerSpan& l = layers_.at(k);
  return std::span<const double>(params_).subspan(l.weight_offset, l.in * l.out);
}

std::span<const double> Mlp::bias(std::size_t k) const {
  const LayerSpan& l = layers_.at(k);
  return std::span<const double>(params_).subspan(l.bias_offset, l.out);
}

Matrix Mlp::forward(const Matrix& input) const {
  Cache scratch;
  return forward(input, scratch);
}

Matrix Mlp::forward(const Matrix& input, Cache& cache) const {
  if (layers_.empty()) throw UsageError("Mlp::forward on an empty network");
  if (input.cols() != input_size()) {
    throw InputError("Mlp::forward: input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(input_size()));
  }
  const std::size_t batch = input.rows();
  cache.inputs.resize(layers_.size());
  cache.inputs[0] = input;
  Matrix out;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const LayerSpan& l = layers_[k];
    out = Matrix(batch, l.out);
    dense_forward(backend_, {batch, l.in, l.out}, cache.inputs[k].flat(), weight(k), bias(k), out.flat());
    if (k + 1 < layers_.size()) {
      if (backend_ == kernels::Backend::serial) {
        kernels::serial::relu_forward(out.flat());
      } else {
        kernels::parallel::relu_forward(out.flat());
      }
      cache.inputs[k + 1] = out;
    }
  }
  cache.owner = id_;
  cache.version = version_;
  return out;
}

Mlp::Gradients Mlp::backward(const Cache& cache, const Matrix& output_grad, bool want_params, bool want_input) const {
  if (cache.owner != id_ || cache.version != version_ || cache.inputs.size() != layers_.size()) {
    throw UsageError("Mlp::backward: cache is stale or belongs to another network");
  }
  const std::size_t batch = cache.inputs[0].rows();
  if (output_grad.rows() != batch || output_grad.cols() != output_size()) {
    throw InputError("Mlp::backward: output gradient shape mismatch");
  }
  const bool serial = backend_ == kernels::Backend::serial;
  Gradients grads;
  if (want_params) grads.params.assign(params_.size(), 0.0);

  Matrix delta = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const LayerSpan& l = layers_[k];
    const kernels::DenseShape shape{batch, l.in, l.out};
    if (want_params) {
      std::span<double> dw = std::span<double>(grads.params).subspan(l.weight_offset, l.in * l.out);
      std::span<double> db = std::span<double>(grads.params).subspan(l.bias_offset, l.out);
      if (serial) {
        kernels::serial::dense_backward_params(shape, cache.inputs[k].flat(), delta.flat(), dw, db);
      } else {
        kernels::parallel::dense_backward_params(shape, cache.inputs[k].flat(), delta.flat(), dw, db);
      }
    }
    if (k == 0 && !want_input) break;
    Matrix prev(batch, l.in);
    if (serial) {
      kernels::serial::dense_backward_input(shape, delta.flat(), weight(k), prev.flat());
    } else {
      kernels::parallel::dense_backward_input(shape, delta.flat(), weight(k), prev.flat());
    }
    if (k > 0) {
      if (serial) {
        kernels::serial::relu_backward(cache.inputs[k].flat(), prev.flat());
      } else {
        kernels::parallel::relu_backward(cache.inputs[k].flat(), prev.flat());
      }
    }
    delta = std::move(prev);
  }
  if (want_input) grads.input = std::move(delta);
  return grads;
}

}  // namespace aptc::neuro
