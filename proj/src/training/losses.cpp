#include "facetts/training/losses.hpp"

#include <cmath>
#include <numbers>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::training {

namespace {

dc::Tensor as_tensor(const Matrix& m) { return dc::Tensor::from_data({m.rows, m.cols}, m.data); }

void require_same_shape(const dc::Tensor& a, const dc::Tensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ContractViolation(std::string(what) + ": shape mismatch");
}

double checked(const dc::Tensor& t, const char* component) {
  const double v = t.item();
  if (!std::isfinite(v)) throw TrainingFault(component, v);
  return v;
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("gamma must be finite and >= 0");
}

dc::Tensor prior_loss(const dc::Tensor& x0, const dc::Tensor& mu_frames) {
  require_same_shape(x0, mu_frames, "prior_loss");
  if (x0.rank() != 2 || x0.dim(0) == 0) throw ContractViolation("prior_loss: expects [T, D] with T > 0");
  const double frames = static_cast<double>(x0.dim(0));
  const double dims = static_cast<double>(x0.dim(1));
  auto quad = dc::scale(dc::sum(dc::square(dc::sub(x0, mu_frames))), 0.5 / frames);
  return dc::shift(quad, 0.5 * dims * std::log(2.0 * std::numbers::pi));
}

dc::Tensor duration_loss(const dc::Tensor& log_dur_pred, std::span<const std::size_t> durations) {
  if (log_dur_pred.rank() != 1 || log_dur_pred.dim(0) != durations.size() || durations.empty()) {
    throw ContractViolation("duration_loss: length mismatch");
  }
  std::vector<double> target(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] == 0) throw ContractViolation("duration_loss: durations must be >= 1");
    target[i] = std::log(static_cast<double>(durations[i]));
  }
  auto diff = dc::sub(log_dur_pred, dc::Tensor::from_data({durations.size()}, std::move(target)));
  return dc::mean(dc::square(diff));
}

DiffusionDraw draw_diffusion(std::size_t rows, std::size_t cols, Rng& rng) {
  DiffusionDraw d;
  d.t = rng.uniform(kMinDiffusionTime, 1.0);
  d.z = diffusion::draw_normal(rows, cols, rng);
  return d;
}

DiffusionTerms diffusion_terms(const TensorScoreFn& score, const Matrix& x0, const DiffusionDraw& draw,
                               const diffusion::NoiseSchedule& s) {
  if (draw.z.rows != x0.rows || draw.z.cols != x0.cols) throw ContractViolation("diffusion_loss: noise shape");
  const Matrix xt = diffusion::forward_sample(x0, draw.t, draw.z, s);
  const Matrix target = diffusion::kernel_score(xt, x0, draw.t, s);
  DiffusionTerms out;
  out.xt = as_tensor(xt);
  out.score = score(out.xt, draw.t);
  require_same_shape(out.score, out.xt, "diffusion_loss");
  const double lambda = diffusion::noise_variance(s, draw.t);
  out.loss = dc::scale(dc::mean(dc::square(dc::sub(out.score, as_tensor(target)))), lambda);
  return out;
}

dc::Tensor diffusion_loss(const diffusion::ScoreNetwork& net, const Matrix& x0, const dc::Tensor& mu_frames,
                          const dc::Tensor& spk, Rng& rng) {
  const auto draw = draw_diffusion(x0.rows, x0.cols, rng);
  auto fn = [&](const dc::Tensor& xt, double t) { return net.score(xt, t, mu_frames, spk); };
  return diffusion_terms(fn, x0, draw, net.schedule()).loss;
}

dc::Tensor denoised_estimate(const dc::Tensor& xt, const dc::Tensor& score, double t,
                             const diffusion::NoiseSchedule& s) {
  if (t == 0.0) throw SingularTime("denoised_estimate: t = 0");
  require_same_shape(xt, score, "denoised_estimate");
  const double a = diffusion::mean_factor(s, t);
  const double var = diffusion::noise_variance(s, t);
  return dc::scale(dc::add(xt, dc::scale(score, var)), 1.0 / a);
}

dc::Tensor denoised_estimate(const diffusion::ScoreNetwork& net, const dc::Tensor& xt, double t,
                             const dc::Tensor& mu_frames, const dc::Tensor& spk) {
  if (t == 0.0) throw SingularTime("denoised_estimate: t = 0");
  return denoised_estimate(xt, net.score(xt, t, mu_frames, spk), t, net.schedule());
}

dc::Tensor speaker_binding_loss(const bio::AudioNet& F, const Matrix& x0, const dc::Tensor& x0_hat) {
  if (x0_hat.rank() != 2 || x0_hat.dim(0) != x0.rows || x0_hat.dim(1) != x0.cols) {
    throw ContractViolation("speaker_binding_loss: x0 and x0_hat differ in shape");
  }
  dc::ParamList f_params;
  F.collect(f_params, "F");
  // Freeze for the duration of the call, restoring the caller's flags afterwards.
  std::vector<bool> flags;
  for (const auto& p : f_params) flags.push_back(p.tensor.requires_grad());
  dc::set_trainable(f_params, false);
  struct Restore {
    dc::ParamList& params;
    std::vector<bool>& flags;
    ~Restore() {
      for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.set_requires_grad(flags[i]);
    }
  } restore{f_params, flags};

  std::vector<dc::Tensor> ref;
  {
    dc::NoGradGuard guard;
    ref = F.taps(x0);
  }
  const auto taps = F.taps(x0_hat);
  dc::Tensor total = dc::Tensor::scalar(0.0);
  for (std::size_t b = 0; b < taps.size(); ++b) total = dc::add(total, dc::mean(dc::abs(dc::sub(taps[b], ref[b]))));
  return total;
}

TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  out.breakdown.prior = checked(terms.prior, "L_prior");
  out.breakdown.duration = checked(terms.duration, "L_dur");
  out.breakdown.diffusion = checked(terms.diffusion, "L_diff");
  out.breakdown.speaker = checked(terms.speaker, "L_spk");
  out.breakdown.gamma = weights.gamma;
  out.total = dc::add(dc::add(dc::add(terms.prior, terms.duration), terms.diffusion),
                      dc::scale(terms.speaker, weights.gamma));
  out.breakdown.total = checked(out.total, "total");
  return out;
}

}  // namespace facetts::training
