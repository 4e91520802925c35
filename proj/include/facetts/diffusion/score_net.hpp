#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "facetts/common/rng.hpp"
#include "facetts/diffcore/layers.hpp"
#include "facetts/diffcore/tensor.hpp"
#include "facetts/diffusion/sde.hpp"

namespace facetts::diffusion {

struct ScoreNetConfig {
  std::size_t c1 = 32;
  std::size_t c2 = 64;
  std::size_t c3 = 64;
  std::size_t time_dim = 32;
  std::size_t emb_dim = 64;
  std::size_t spk_dim = 512;
  std::size_t mel_dim = 128;
  /// mu enters the U-Net as (mu + mu_shift) * mu_scale.
  double mu_shift = 5.0;
  double mu_scale = 0.25;
};

/// Three-resolution 2-D conv U-Net over the T x mel grid. The U-Net is wrapped in a
/// denoiser around mu: with a = exp(-B/2), sigma^2 = 1 - exp(-B), s = sigma / a and
/// r = x_t / a - mu,
///   D = mu + r / (s^2 + 1) + s / sqrt(s^2 + 1) * U(r / sqrt(s^2 + 1), mu, t, spk)
/// and the score estimate is -(x_t - a D) / sigma^2.
class ScoreNetwork {
 public:
  ScoreNetwork() = default;
  ScoreNetwork(const ScoreNetConfig& config, const NoiseSchedule& schedule, Rng& rng);

  /// xt, mu: [T, mel_dim]; spk: [spk_dim]; t in (0, 1]. Returns the denoised estimate D.
  dc::Tensor denoise(const dc::Tensor& xt, double t, const dc::Tensor& mu, const dc::Tensor& spk) const;
  /// Score estimate, [T, mel_dim].
  dc::Tensor score(const dc::Tensor& xt, double t, const dc::Tensor& mu, const dc::Tensor& spk) const;

  void collect(dc::ParamList& out, const std::string& prefix) const;
  const ScoreNetConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  struct Block {
    dc::Conv2d conv;
    dc::Linear emb;
  };

  dc::Tensor block(const Block& b, const dc::Tensor& x, const dc::Tensor& emb) const;
  dc::Tensor unet(const dc::Tensor& r_in, const dc::Tensor& mu, double t, const dc::Tensor& spk) const;

  ScoreNetConfig config_;
  NoiseSchedule schedule_;
  dc::Linear time1_;
  dc::Linear time2_;
  dc::Linear spk_proj_;
  std::vector<Block> down1_, down2_, mid_, up2_, up1_;
  dc::Conv2d out_;
};

/// Score estimate of `net`; equals net.score.
dc::Tensor score_net_forward(const ScoreNetwork& net, const dc::Tensor& xt, double t, const dc::Tensor& mu,
                             const dc::Tensor& spk);

/// Sinusoidal embedding of 1000 t, `dim` (even) entries.
std::vector<double> time_embedding(double t, std::size_t dim);

}  // namespace facetts::diffusion
