#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/gradcheck.hpp"
#include "facetts/diffusion/score_net.hpp"
#include "facetts/diffusion/sde.hpp"
#include "support/analytic_scores.hpp"
#include "support/tensors.hpp"

namespace dc = facetts::dc;
namespace df = facetts::diffusion;
using facetts::Matrix;
using facetts::Rng;
namespace ft = facetts::testing;

namespace {

const df::NoiseSchedule kSchedule{0.05, 20.0};

double simpson_beta_integral(const df::NoiseSchedule& s, double t) {
  const int n = 1000;
  const double h = t / n;
  double acc = s.beta(0.0) + s.beta(t);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * s.beta(i * h);
  return acc * h / 3.0;
}

df::ScoreNetConfig tiny_net() {
  df::ScoreNetConfig c;
  c.c1 = 3;
  c.c2 = 4;
  c.c3 = 4;
  c.time_dim = 8;
  c.emb_dim = 6;
  c.spk_dim = 5;
  c.mel_dim = 8;
  return c;
}

}  // namespace

TEST(Schedule, CumulativeNoiseClosedForm) {
  EXPECT_EQ(df::cumulative_noise(kSchedule, 0.0), 0.0);
  EXPECT_NEAR(df::cumulative_noise(kSchedule, 1.0), 10.025, 1e-12);
  for (double t : {0.01, 0.1, 0.33, 0.5, 0.77, 1.0}) {
    const double q = simpson_beta_integral(kSchedule, t);
    EXPECT_LE(std::abs(df::cumulative_noise(kSchedule, t) - q) / q, 1e-10) << "t=" << t;
  }
}

TEST(Schedule, StrictlyIncreasingAndRangeChecked) {
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double b = df::cumulative_noise(kSchedule, i / 100.0);
    EXPECT_GT(b, prev);
    prev = b;
  }
  EXPECT_THROW(df::cumulative_noise(kSchedule, -0.01), facetts::InputError);
  EXPECT_THROW(df::cumulative_noise(kSchedule, 1.01), facetts::InputError);
  EXPECT_THROW((df::NoiseSchedule{0.0, 1.0}.validate()), facetts::ConfigError);
  EXPECT_THROW((df::NoiseSchedule{2.0, 1.0}.validate()), facetts::ConfigError);
}

TEST(ForwardKernel, TerminalFactors) {
  EXPECT_NEAR(df::mean_factor(kSchedule, 1.0), std::exp(-5.0125), 1e-15);
  EXPECT_NEAR(df::mean_factor(kSchedule, 1.0), 6.65e-3, 1e-5);
  EXPECT_NEAR(df::noise_variance(kSchedule, 1.0), 0.99996, 1e-5);
}

TEST(ForwardKernel, VariancePreservingIdentity) {
  for (int i = 0; i <= 50; ++i) {
    const double t = i / 50.0;
    const double a = df::mean_factor(kSchedule, t);
    EXPECT_NEAR(df::noise_variance(kSchedule, t) + a * a, 1.0, 1e-15);
  }
}

TEST(ForwardKernel, SmallTimeApproachesData) {
  Rng rng(1);
  const Matrix x0 = ft::random_matrix(3, 4, rng);
  const Matrix z = ft::random_matrix(3, 4, rng);
  const Matrix xt = df::forward_sample(x0, 1e-9, z, kSchedule);
  for (std::size_t i = 0; i < x0.data.size(); ++i) EXPECT_NEAR(xt.data[i], x0.data[i], 1e-4);
}

TEST(ForwardKernel, MonteCarloMoments) {
  Rng rng(2);
  const std::size_t n = 100000;
  const double x0v = 1.7, t = 0.5;
  const Matrix x0(n, 1, x0v);
  const Matrix xt = df::forward_sample(x0, t, df::draw_normal(n, 1, rng), kSchedule);
  double mean = 0.0, var = 0.0;
  for (double v : xt.data) mean += v / n;
  for (double v : xt.data) var += (v - mean) * (v - mean) / (n - 1);
  const double m = x0v * std::exp(-0.5 * df::cumulative_noise(kSchedule, t));
  const double s2 = 1.0 - std::exp(-df::cumulative_noise(kSchedule, t));
  EXPECT_LE(std::abs(mean - m), 4.0 * std::sqrt(s2 / n));
  EXPECT_LE(std::abs(var - s2), 4.0 * s2 * std::sqrt(2.0 / (n - 1)));
}

TEST(KernelScore, ZeroAtMeanAndUnitCase) {
  const double t = 0.3;
  const double a = df::mean_factor(kSchedule, t), s2 = df::noise_variance(kSchedule, t);
  const Matrix x0(1, 1, 0.8);
  EXPECT_NEAR(df::kernel_score(Matrix(1, 1, 0.8 * a), x0, t, kSchedule)(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(df::kernel_score(Matrix(1, 1, 0.8 * a + s2), x0, t, kSchedule)(0, 0), -1.0, 1e-12);
  EXPECT_THROW(df::kernel_score(x0, x0, 0.0, kSchedule), facetts::SingularTime);
}

TEST(KernelScore, MatchesFiniteDifferenceOfLogDensity) {
  Rng rng(3);
  for (double t : {0.05, 0.4, 0.9}) {
    const double a = df::mean_factor(kSchedule, t), s2 = df::noise_variance(kSchedule, t);
    for (int rep = 0; rep < 20; ++rep) {
      const double x0 = rng.normal(), xt = rng.normal();
      auto logp = [&](double x) { return -0.5 * (x - a * x0) * (x - a * x0) / s2 - 0.5 * std::log(2 * std::numbers::pi * s2); };
      const double h = 1e-5;
      const double fd = (logp(xt + h) - logp(xt - h)) / (2 * h);
      const double an = df::kernel_score(Matrix(1, 1, xt), Matrix(1, 1, x0), t, kSchedule)(0, 0);
      EXPECT_LE(std::abs(an - fd) / std::max(std::abs(an), 1e-8), 1e-6);
    }
  }
}

TEST(ReverseSampler, SingleStepHandComputed) {
  const Matrix x(1, 3, std::vector<double>{0.5, -1.0, 2.0});
  const Matrix z(1, 3, std::vector<double>{0.1, 0.2, -0.3});
  const Matrix score(1, 3, std::vector<double>{-0.5, 1.0, -2.0});
  const Matrix out = df::reverse_step(x, score, 1.0, 1, z, kSchedule);
  // beta(1) = 20, h = 20: x + 20 (x/2 - x) + sqrt(20) z = -9 x + sqrt(20) z.
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out.data[i], x.data[i] + 20.0 * (0.5 * x.data[i] - x.data[i]) + std::sqrt(20.0) * z.data[i]);
  EXPECT_NEAR(out.data[0], -4.5 + std::sqrt(20.0) * 0.1, 1e-12);
}

TEST(ReverseSampler, OneStepRunMatchesReverseStep) {
  Rng init(4);
  const Matrix x = ft::random_matrix(2, 3, init);
  df::ReverseOptions opt{1, 77, nullptr};
  const Matrix out = df::reverse_sample([](const Matrix& v, double) {
    Matrix s = v;
    for (auto& e : s.data) e = -e;
    return s;
  }, x, kSchedule, opt);
  Rng noise(77);
  const Matrix z = df::draw_normal(2, 3, noise);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    EXPECT_DOUBLE_EQ(out.data[i], x.data[i] + 20.0 * (0.5 * x.data[i] - x.data[i]) + std::sqrt(20.0) * z.data[i]);
  }
}

TEST(ReverseSampler, RecoversShiftedGaussian) {
  Rng rng(5);
  const std::vector<double> m{1.0, -0.5};
  const std::size_t n = 10000;
  const Matrix x1 = df::draw_normal(n, 2, rng);
  const Matrix out = df::reverse_sample([&](const Matrix& x, double t) { return ft::gaussian_score(x, t, m, kSchedule); },
                                        x1, kSchedule, {100, 6, nullptr});
  const auto s = ft::column_moments(out);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_LE(std::abs(s.mean[c] - m[c]), 4.0 / std::sqrt(double(n)));
    for (std::size_t d = 0; d < 2; ++d) EXPECT_LE(std::abs(s.cov[c][d] - (c == d ? 1.0 : 0.0)), 0.05);
  }
}

TEST(ReverseSampler, RecoversGaussianMixture) {
  Rng rng(7);
  const std::size_t n = 20000;
  const Matrix out = df::reverse_sample([](const Matrix& x, double t) { return ft::mixture_score(x, t, 2.0, kSchedule); },
                                        df::draw_normal(n, 1, rng), kSchedule, {200, 8, nullptr});
  const auto s = ft::mixture_stats(out, 2.0);
  EXPECT_NEAR(s.plus_weight, 0.5, 0.03);
  EXPECT_NEAR(s.plus_mean, 2.0, 0.05);
  EXPECT_NEAR(s.minus_mean, -2.0, 0.05);
}

TEST(ReverseSampler, DiscretizationErrorShrinksWithSteps) {
  const std::vector<double> zero{0.0};
  auto run = [&](std::size_t N) {
    Rng rng(9);
    const Matrix out = df::reverse_sample([&](const Matrix& x, double t) { return ft::gaussian_score(x, t, zero, kSchedule); },
                                          df::draw_normal(10000, 1, rng), kSchedule, {N, 10, nullptr});
    return ft::gaussian_recovery_error(out, zero);
  };
  EXPECT_GT(run(10), run(200));
}

TEST(ReverseSampler, DeterministicAndTraced) {
  Rng rng(11);
  const Matrix x1 = df::draw_normal(5, 4, rng);
  auto score = [](const Matrix& x, double) {
    Matrix s = x;
    for (auto& e : s.data) e = -e;
    return s;
  };
  std::ostringstream trace;
  const Matrix a = df::reverse_sample(score, x1, kSchedule, {10, 3, &trace});
  const Matrix b = df::reverse_sample(score, x1, kSchedule, {10, 3, nullptr});
  EXPECT_EQ(a, b);
  std::istringstream lines(trace.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<std::size_t>(), ++count);
    EXPECT_TRUE(j.contains("mean") && j.contains("var") && j.contains("t"));
  }
  EXPECT_EQ(count, 10u);
}

TEST(ReverseSampler, NaNScoreReportsStep) {
  const Matrix x1(2, 2, 0.1);
  try {
    df::reverse_sample([](const Matrix& x, double t) {
      Matrix s = x;
      if (t < 0.75) s.data[0] = std::nan("");
      return s;
    }, x1, kSchedule, {10, 0, nullptr});
    FAIL() << "expected DivergenceError";
  } catch (const facetts::DivergenceError& e) {
    // t = 1.0, 0.9, 0.8 are finite; t = 0.7 is step 4.
    EXPECT_EQ(e.step(), 4u);
  }
}

TEST(ReverseSampler, InitialStateOffset) {
  const Matrix mu(1, 2, std::vector<double>{3.0, -1.0});
  const Matrix z(1, 2, std::vector<double>{0.5, 0.25});
  EXPECT_EQ(df::initial_state(mu, z, 0.0), z);
  EXPECT_EQ(df::initial_state(mu, z, 1.0), (Matrix(1, 2, std::vector<double>{3.5, -0.75})));
}

TEST(ScoreNet, ShapeContract) {
  Rng rng(12);
  df::ScoreNetwork net(df::ScoreNetConfig{}, kSchedule, rng);
  const auto spk = ft::unit_vector(512, rng);
  for (std::size_t T : {17u, 64u}) {
    const auto xt = ft::random_tensor({T, 128}, rng);
    const auto mu = ft::random_tensor({T, 128}, rng);
    const auto out = df::score_net_forward(net, xt, 0.5, mu, spk);
    EXPECT_EQ(out.shape(), (dc::Shape{T, 128}));
  }
}

TEST(ScoreNet, SpeakerConditioningIsLive) {
  Rng rng(13);
  df::ScoreNetwork net(df::ScoreNetConfig{}, kSchedule, rng);
  const auto xt = ft::random_tensor({20, 128}, rng);
  const auto mu = ft::random_tensor({20, 128}, rng);
  const auto a = df::score_net_forward(net, xt, 0.4, mu, ft::unit_vector(512, rng));
  const auto b = df::score_net_forward(net, xt, 0.4, mu, ft::unit_vector(512, rng));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
  EXPECT_GT(diff, 0.0);
}

TEST(ScoreNet, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(14);
  df::ScoreNetwork net(tiny_net(), kSchedule, rng);
  dc::ParamList params;
  net.collect(params, "score");
  ft::nudge_biases(params, rng);
  const auto xt = ft::random_tensor({9, 8}, rng);
  const auto mu = ft::random_tensor({9, 8}, rng);
  const auto spk = ft::unit_vector(5, rng);
  const auto plain = dc::grad_check_params([&] { return dc::sum(df::score_net_forward(net, xt, 0.3, mu, spk)); }, params,
                                           ft::kNetworkCheck);
  EXPECT_LE(plain.max_rel_error, 1e-5);
  const auto weighted = dc::grad_check_params(
      [&] { return ft::weighted_sum(df::score_net_forward(net, xt, 0.6, mu, spk), 3); }, params, ft::kNetworkCheck);
  EXPECT_LE(weighted.max_rel_error, 1e-5);
}

TEST(ScoreNet, InputGradientsMatchFiniteDifferences) {
  Rng rng(15);
  df::ScoreNetwork net(tiny_net(), kSchedule, rng);
  const auto xt = ft::random_tensor({6, 8}, rng);
  const auto mu = ft::random_tensor({6, 8}, rng);
  const auto spk = ft::unit_vector(5, rng);
  EXPECT_LE(dc::grad_check([&](const dc::Tensor& m) { return ft::weighted_sum(net.score(xt, 0.2, m, spk), 4); }, mu).max_rel_error, 1e-5);
  EXPECT_LE(dc::grad_check([&](const dc::Tensor& s) { return ft::weighted_sum(net.score(xt, 0.2, mu, s), 5); }, spk).max_rel_error, 1e-5);
}

TEST(ScoreNet, ScoreIsConsistentWithDenoiser) {
  Rng rng(16);
  df::ScoreNetwork net(tiny_net(), kSchedule, rng);
  const auto xt = ft::random_tensor({7, 8}, rng);
  const auto mu = ft::random_tensor({7, 8}, rng);
  const auto spk = ft::unit_vector(5, rng);
  const double t = 0.35;
  const auto d = net.denoise(xt, t, mu, spk);
  const auto s = net.score(xt, t, mu, spk);
  const double a = df::mean_factor(kSchedule, t), v = df::noise_variance(kSchedule, t);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(s.data()[i], -(xt.data()[i] - a * d.data()[i]) / v, 1e-10 * (1.0 + std::abs(s.data()[i])));
  }
}
