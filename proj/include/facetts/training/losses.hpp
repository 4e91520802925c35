#pragma once

#include <functional>
#include <span>

#include "facetts/biometric/networks.hpp"
#include "facetts/common/matrix.hpp"
#include "facetts/common/rng.hpp"
#include "facetts/diffcore/tensor.hpp"
#include "facetts/diffusion/score_net.hpp"
#include "facetts/diffusion/sde.hpp"

namespace facetts::training {

struct LossWeights {
  double gamma = 1e-2;

  /// Throws ConfigError unless gamma is finite and non-negative.
  void validate() const;
};

/// Lower cutoff of the diffusion time draw.
inline constexpr double kMinDiffusionTime = 1e-3;

/// Mean over frames of -log N(x0_t; mu_t, I).
dc::Tensor prior_loss(const dc::Tensor& x0, const dc::Tensor& mu_frames);

/// Mean squared error between predicted log durations and log(durations).
dc::Tensor duration_loss(const dc::Tensor& log_dur_pred, std::span<const std::size_t> durations);

/// Differentiable score estimate s(x_t, t).
using TensorScoreFn = std::function<dc::Tensor(const dc::Tensor& xt, double t)>;

struct DiffusionDraw {
  double t = 1.0;
  Matrix z;
};

/// t uniform on [1e-3, 1] and z standard normal of the given shape.
DiffusionDraw draw_diffusion(std::size_t rows, std::size_t cols, Rng& rng);

struct DiffusionTerms {
  dc::Tensor loss;
  dc::Tensor xt;
  dc::Tensor score;
};

/// lambda_t * mean over elements of (score(x_t, t) - kernel_score(x_t, x0, t))^2 with
/// x_t = forward_sample(x0, t, z) and lambda_t = 1 - exp(-B(t)).
DiffusionTerms diffusion_terms(const TensorScoreFn& score, const Matrix& x0, const DiffusionDraw& draw,
                               const diffusion::NoiseSchedule& s);
dc::Tensor diffusion_loss(const diffusion::ScoreNetwork& net, const Matrix& x0, const dc::Tensor& mu_frames,
                          const dc::Tensor& spk, Rng& rng);

/// x0_hat = (x_t + (1 - exp(-B(t))) * score) / exp(-B(t)/2). Throws SingularTime at t = 0.
dc::Tensor denoised_estimate(const dc::Tensor& xt, const dc::Tensor& score, double t,
                             const diffusion::NoiseSchedule& s);
dc::Tensor denoised_estimate(const diffusion::ScoreNetwork& net, const dc::Tensor& xt, double t,
                             const dc::Tensor& mu_frames, const dc::Tensor& spk);

/// Sum over feature taps of the mean absolute difference |F_b(x0) - F_b(x0_hat)|.
/// F's parameters never receive gradient; x0's taps are computed without a graph.
/// Throws ContractViolation on a shape mismatch.
dc::Tensor speaker_binding_loss(const bio::AudioNet& F, const Matrix& x0, const dc::Tensor& x0_hat);

struct LossTerms {
  dc::Tensor prior;
  dc::Tensor duration;
  dc::Tensor diffusion;
  dc::Tensor speaker;
};

struct LossBreakdown {
  double prior = 0.0;
  double duration = 0.0;
  double diffusion = 0.0;
  double speaker = 0.0;
  double gamma = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  dc::Tensor total;
  LossBreakdown breakdown;
};

/// L_prior + L_dur + L_diff + gamma * L_spk. Throws TrainingFault naming the first
/// non-finite component.
TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace facetts::training
