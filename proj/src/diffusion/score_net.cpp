#include "facetts/diffusion/score_net.hpp"

#include <cmath>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::diffusion {

std::vector<double> time_embedding(double t, std::size_t dim) {
  if (dim < 4 || dim % 2 != 0) throw ConfigError("time embedding size must be even and at least 4");
  const std::size_t half = dim / 2;
  std::vector<double> e(dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half - 1));
    e[k] = std::sin(1000.0 * t * freq);
    e[half + k] = std::cos(1000.0 * t * freq);
  }
  return e;
}

ScoreNetwork::ScoreNetwork(const ScoreNetConfig& config, const NoiseSchedule& schedule, Rng& rng)
    : config_(config), schedule_(schedule) {
  schedule.validate();
  if (config.c1 == 0 || config.c2 == 0 || config.c3 == 0 || config.emb_dim == 0) {
    throw ConfigError("score network widths must be positive");
  }
  const std::size_t E = config.emb_dim;
  time1_ = dc::Linear(config.time_dim, E, rng);
  time2_ = dc::Linear(E, E, rng);
  spk_proj_ = dc::Linear(config.spk_dim, E, rng);
  auto mk = [&](std::size_t in, std::size_t out) { return Block{dc::Conv2d(in, out, 3, rng), dc::Linear(E, out, rng)}; };
  down1_ = {mk(2, config.c1), mk(config.c1, config.c1)};
  down2_ = {mk(config.c1, config.c2), mk(config.c2, config.c2)};
  mid_ = {mk(config.c2, config.c3), mk(config.c3, config.c3)};
  up2_ = {mk(config.c3 + config.c2, config.c2), mk(config.c2, config.c2)};
  up1_ = {mk(config.c2 + config.c1, config.c1), mk(config.c1, config.c1)};
  out_ = dc::Conv2d(config.c1, 1, 3, rng);
}

dc::Tensor ScoreNetwork::block(const Block& b, const dc::Tensor& x, const dc::Tensor& emb) const {
  return dc::relu(dc::add_channel(b.conv.forward(x), b.emb.forward(emb)));
}

dc::Tensor ScoreNetwork::unet(const dc::Tensor& r_in, const dc::Tensor& mu, double t, const dc::Tensor& spk) const {
  const std::size_t T = r_in.dim(0), M = r_in.dim(1);
  const auto te = dc::Tensor::from_data({config_.time_dim}, time_embedding(t, config_.time_dim));
  const auto emb = dc::relu(dc::add(time2_.forward(dc::relu(time1_.forward(te))), spk_proj_.forward(spk)));

  const auto mu_in = dc::scale(dc::shift(mu, config_.mu_shift), config_.mu_scale);
  dc::Tensor h = dc::concat0({dc::reshape(r_in, {1, T, M}), dc::reshape(mu_in, {1, T, M})});
  for (const auto& b : down1_) h = block(b, h, emb);
  const auto skip1 = h;
  h = dc::avg_pool2d(h, 2, 2);
  for (const auto& b : down2_) h = block(b, h, emb);
  const auto skip2 = h;
  h = dc::avg_pool2d(h, 2, 2);
  for (const auto& b : mid_) h = block(b, h, emb);
  h = dc::concat0({dc::upsample_nearest(h, skip2.dim(1), skip2.dim(2)), skip2});
  for (const auto& b : up2_) h = block(b, h, emb);
  h = dc::concat0({dc::upsample_nearest(h, skip1.dim(1), skip1.dim(2)), skip1});
  for (const auto& b : up1_) h = block(b, h, emb);
  return dc::reshape(out_.forward(h), {T, M});
}

dc::Tensor ScoreNetwork::denoise(const dc::Tensor& xt, double t, const dc::Tensor& mu, const dc::Tensor& spk) const {
  if (xt.rank() != 2 || xt.dim(1) != config_.mel_dim || mu.shape() != xt.shape()) {
    throw ContractViolation("score network: xt and mu must both be [T, " + std::to_string(config_.mel_dim) +
                            "], got " + dc::shape_str(xt.shape()) + " and " + dc::shape_str(mu.shape()));
  }
  if (xt.dim(0) < 4) throw ContractViolation("score network: need at least 4 frames");
  if (spk.rank() != 1 || spk.dim(0) != config_.spk_dim) {
    throw ContractViolation("score network: speaker embedding must be [" + std::to_string(config_.spk_dim) + "]");
  }
  if (!(t > 0.0 && t <= 1.0)) throw SingularTime("score network: t must be in (0, 1]");
  const double a = mean_factor(schedule_, t);
  const double var = noise_variance(schedule_, t);
  const double s2 = var / (a * a);
  const double c_skip = 1.0 / (s2 + 1.0);
  const double c_out = std::sqrt(s2) / std::sqrt(s2 + 1.0);
  const double c_in = 1.0 / std::sqrt(s2 + 1.0);
  const auto r = dc::sub(dc::scale(xt, 1.0 / a), mu);
  const auto u = unet(dc::scale(r, c_in), mu, t, spk);
  return dc::add(mu, dc::add(dc::scale(r, c_skip), dc::scale(u, c_out)));
}

dc::Tensor ScoreNetwork::score(const dc::Tensor& xt, double t, const dc::Tensor& mu, const dc::Tensor& spk) const {
  const auto d = denoise(xt, t, mu, spk);
  const double a = mean_factor(schedule_, t);
  const double var = noise_variance(schedule_, t);
  return dc::scale(dc::sub(xt, dc::scale(d, a)), -1.0 / var);
}

void ScoreNetwork::collect(dc::ParamList& out, const std::string& prefix) const {
  time1_.collect(out, prefix + ".time1");
  time2_.collect(out, prefix + ".time2");
  spk_proj_.collect(out, prefix + ".spk_proj");
  auto add = [&](const std::vector<Block>& blocks, const std::string& name) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = prefix + "." + name + std::to_string(i);
      blocks[i].conv.collect(out, p + ".conv");
      blocks[i].emb.collect(out, p + ".emb");
    }
  };
  add(down1_, "down1.");
  add(down2_, "down2.");
  add(mid_, "mid.");
  add(up2_, "up2.");
  add(up1_, "up1.");
  out_.collect(out, prefix + ".out");
}

dc::Tensor score_net_forward(const ScoreNetwork& net, const dc::Tensor& xt, double t, const dc::Tensor& mu,
                             const dc::Tensor& spk) {
  return net.score(xt, t, mu, spk);
}

}  // namespace facetts::diffusion
