#include "facetts/diffusion/sde.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "facetts/common/errors.hpp"

namespace facetts::diffusion {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ContractViolation(std::string(what) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

bool all_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void NoiseSchedule::validate() const {
  if (!(beta0 > 0.0) || !(beta1 >= beta0) || !std::isfinite(beta1)) {
    throw ConfigError("noise schedule requires 0 < beta0 <= beta1, got beta0=" + std::to_string(beta0) +
                      " beta1=" + std::to_string(beta1));
  }
}

double cumulative_noise(const NoiseSchedule& s, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("cumulative_noise: t=" + std::to_string(t) + " outside [0, 1]");
  return s.beta0 * t + 0.5 * (s.beta1 - s.beta0) * t * t;
}

double mean_factor(const NoiseSchedule& s, double t) { return std::exp(-0.5 * cumulative_noise(s, t)); }

double noise_variance(const NoiseSchedule& s, double t) { return -std::expm1(-cumulative_noise(s, t)); }

Matrix draw_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

Matrix forward_sample(const Matrix& x0, double t, const Matrix& z, const NoiseSchedule& s) {
  require_same_shape(x0, z, "forward_sample");
  if (!(t > 0.0)) throw InputError("forward_sample: t must be in (0, 1]");
  const double a = mean_factor(s, t);
  const double sd = std::sqrt(noise_variance(s, t));
  Matrix out(x0.rows, x0.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = x0.data[i] * a + z.data[i] * sd;
  return out;
}

Matrix kernel_score(const Matrix& xt, const Matrix& x0, double t, const NoiseSchedule& s) {
  require_same_shape(xt, x0, "kernel_score");
  if (t == 0.0) throw SingularTime("kernel_score: score is singular at t = 0");
  const double a = mean_factor(s, t);
  const double var = noise_variance(s, t);
  Matrix out(xt.rows, xt.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = -(xt.data[i] - x0.data[i] * a) / var;
  return out;
}

Matrix reverse_step(const Matrix& x, const Matrix& score, double t, std::size_t steps, const Matrix& z,
                    const NoiseSchedule& s) {
  require_same_shape(x, score, "reverse_step");
  require_same_shape(x, z, "reverse_step");
  if (steps == 0) throw ContractViolation("reverse_step: step count must be positive");
  const double h = s.beta(t) / static_cast<double>(steps);
  const double sd = std::sqrt(h);
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = x.data[i] + h * (0.5 * x.data[i] + score.data[i]) + sd * z.data[i];
  }
  return out;
}

Matrix reverse_sample(const ScoreFn& score_fn, const Matrix& x_T, const NoiseSchedule& s,
                      const ReverseOptions& options) {
  if (options.steps == 0) throw ContractViolation("reverse_sample: N must be at least 1");
  const std::size_t N = options.steps;
  Rng rng(options.seed);
  Matrix x = x_T;
  for (std::size_t k = 1; k <= N; ++k) {
    const double t = static_cast<double>(N - k + 1) / static_cast<double>(N);
    const Matrix score = score_fn(x, t);
    require_same_shape(x, score, "reverse_sample");
    if (!all_finite(score)) throw DivergenceError("reverse_sample: non-finite score", k);
    const Matrix z = draw_normal(x.rows, x.cols, rng);
    x = reverse_step(x, score, t, N, z, s);
    if (!all_finite(x)) throw DivergenceError("reverse_sample: non-finite state", k);
    if (options.trace) {
      double mean = 0.0, sq = 0.0;
      for (double v : x.data) mean += v;
      mean /= static_cast<double>(x.data.size());
      for (double v : x.data) sq += (v - mean) * (v - mean);
      const nlohmann::json rec{{"step", k}, {"t", t}, {"mean", mean}, {"var", sq / static_cast<double>(x.data.size())}};
      *options.trace << rec.dump() << '\n';
    }
  }
  return x;
}

Matrix initial_state(const Matrix& mu, const Matrix& z, double offset) {
  require_same_shape(mu, z, "initial_state");
  Matrix out(z.rows, z.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = offset * mu.data[i] + z.data[i];
  return out;
}

}  // namespace facetts::diffusion
