#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aptc/neuro/kernels.hpp"
#include "aptc/neuro/matrix.hpp"

namespace aptc::neuro {

// Multilayer perceptron: affine layers with rectifiers between them and an
// identity output. All parameters live in one flat vector, layer by layer,
// weight [in x out] first and then bias [out].
class Mlp {
 public:
  struct LayerSpan {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  // Per-call activations needed by backward(). Bound to the network instance
  // and parameter version that produced it.
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer (post-rectifier for hidden layers)
    std::uint64_t owner = 0;
    std::uint64_t version = 0;
  };

  struct Gradients {
    std::vector<double> params;  // same layout as parameters(); empty if not requested
    Matrix input;                // empty if not requested
  };

  Mlp() = default;
  /// Uniform fan-in initialization: every weight and bias of a layer is drawn
  /// from U(-1/sqrt(in), 1/sqrt(in)).
  Mlp(std::vector<std::size_t> layer_sizes, std::uint64_t seed);
  static Mlp zeros(std::vector<std::size_t> layer_sizes);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  const LayerSpan& layer(std::size_t k) const { return layers_.at(k); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<const double> parameters() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  std::span<double> mutable_parameters();
  std::span<const double> weight(std::size_t k) const;
  std::span<const double> bias(std::size_t k) const;

  void set_backend(kernels::Backend backend) { backend_ = backend; }
  kernels::Backend backend() const { return backend_; }

  /// Throws InputError when input.cols() != input_size().
  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Cache& cache) const;

  /// Reverse-mode gradients for the batch in `cache`. Throws UsageError if the
  /// cache came from another network or from older parameters.
  Gradients backward(const Cache& cache, const Matrix& output_grad, bool want_params = true,
                     bool want_input = true) const;

  std::uint64_t version() const { return version_; }

 private:
  void build_layout();

  std::vector<std::size_t> sizes_;
  std::vector<LayerSpan> layers_;
  std::vector<double> params_;
  kernels::Backend backend_ = kernels::Backend::parallel;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace aptc::neuro
