#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "facetts/common/rng.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::dc {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Uniform(-bound, bound) with bound = sqrt(6 / fan_in) (He initialization for ReLU stacks).
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  /// x: [N, in] -> [N, out], or [in] -> [out].
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;
  Tensor bias;
};

/// Same-length 1-D convolution (odd kernel, zero padding k/2).
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);

  Tensor forward(const Tensor& x) const;  // [in, L] -> [out, L]
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;
  Tensor bias;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng, std::size_t stride = 1);

  Tensor forward(const Tensor& x) const;  // [in, H, W] -> [out, H', W']
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t channels);

  Tensor forward(const Tensor& x) const;  // [C, L]
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor gamma;
  Tensor beta;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim, Rng& rng);

  Tensor forward(std::span<const std::size_t> ids) const;  // -> [L, dim]
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;
};

/// Marks every parameter in `params` as (non-)trainable.
void set_trainable(const ParamList& params, bool trainable);

}  // namespace facetts::dc
