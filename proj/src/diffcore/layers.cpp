#include "facetts/diffcore/layers.hpp"

#include <cmath>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::dc {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(he_uniform({out, in}, in, rng)) {
  if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() == 1) {
    return reshape(linear(reshape(x, {1, x.dim(0)}), weight, bias), {weight.dim(0)});
  }
  return linear(x, weight, bias);
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng)
    : weight(he_uniform({out, in, kernel}, in * kernel, rng)), bias(Tensor::zeros({out}, true)) {
  if (kernel % 2 == 0) throw ContractViolation("Conv1d: kernel must be odd");
}

Tensor Conv1d::forward(const Tensor& x) const { return conv1d(x, weight, bias, weight.dim(2) / 2); }

void Conv1d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng, std::size_t stride_)
    : weight(he_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng)),
      bias(Tensor::zeros({out}, true)),
      stride(stride_),
      pad(kernel / 2) {}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)) {}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm_channels(x, gamma, beta); }

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Embedding::Embedding(std::size_t vocab, std::size_t dim, Rng& rng) {
  std::vector<double> v(vocab * dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = sd * rng.normal();
  weight = Tensor::from_data({vocab, dim}, std::move(v), true);
}

Tensor Embedding::forward(std::span<const std::size_t> ids) const { return gather_rows(weight, ids); }

void Embedding::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
}

void set_trainable(const ParamList& params, bool trainable) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(trainable);
    if (!trainable) t.clear_grad();
  }
}

}  // namespace facetts::dc
