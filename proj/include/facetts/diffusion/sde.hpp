#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

#include "facetts/common/matrix.hpp"
#include "facetts/common/rng.hpp"

namespace facetts::diffusion {

/// Linear schedule beta(t) = beta0 + (beta1 - beta0) t on [0, 1].
struct NoiseSchedule {
  double beta0 = 0.05;
  double beta1 = 20.0;

  /// Throws ConfigError unless 0 < beta0 <= beta1.
  void validate() const;
  double beta(double t) const { return beta0 + (beta1 - beta0) * t; }
};

/// B(t) = integral of beta over [0, t]. Throws InputError for t outside [0, 1].
double cumulative_noise(const NoiseSchedule& s, double t);
/// exp(-B(t)/2).
double mean_factor(const NoiseSchedule& s, double t);
/// 1 - exp(-B(t)).
double noise_variance(const NoiseSchedule& s, double t);

/// Matrix of independent standard normal draws, filled row-major.
Matrix draw_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// x0 exp(-B/2) + z sqrt(1 - exp(-B)).
Matrix forward_sample(const Matrix& x0, double t, const Matrix& z, const NoiseSchedule& s);

/// Conditional score -(xt - x0 exp(-B/2)) / (1 - exp(-B)). Throws SingularTime at t = 0.
Matrix kernel_score(const Matrix& xt, const Matrix& x0, double t, const NoiseSchedule& s);

/// Score estimate for state x at time t.
using ScoreFn = std::function<Matrix(const Matrix& x, double t)>;

/// One discretized reverse step from time t with N steps: x + (beta_t/N)(x/2 + score) + sqrt(beta_t/N) z.
Matrix reverse_step(const Matrix& x, const Matrix& score, double t, std::size_t steps, const Matrix& z,
                    const NoiseSchedule& s);

struct ReverseOptions {
  std::size_t steps = 10;
  std::uint64_t seed = 0;
  /// Optional JSONL sink receiving {step, t, mean, var} after every step.
  std::ostream* trace = nullptr;
};

/// Runs reverse steps at t = 1, (N-1)/N, ..., 1/N from x_T. Noise is drawn from Rng(seed).
/// Throws DivergenceError carrying the 1-based step index if the score or state becomes non-finite.
Matrix reverse_sample(const ScoreFn& score_fn, const Matrix& x_T, const NoiseSchedule& s,
                      const ReverseOptions& options);

/// Starting state offset * mu + z. Offset 0 gives the standard normal terminal.
Matrix initial_state(const Matrix& mu, const Matrix& z, double offset);

}  // namespace facetts::diffusion
