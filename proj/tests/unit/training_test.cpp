#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/gradcheck.hpp"
#include "facetts/diffcore/ops.hpp"
#include "facetts/diffusion/sde.hpp"
#include "facetts/training/losses.hpp"
#include "facetts/training/synthesis.hpp"
#include "facetts/training/trainer.hpp"
#include "support/tensors.hpp"
#include "support/tiny_model.hpp"

namespace dc = facetts::dc;
namespace tr = facetts::training;
namespace fs = std::filesystem;
using facetts::Matrix;
using facetts::Rng;
using facetts::testing::random_matrix;
using facetts::testing::random_tensor;
using facetts::testing::tiny_config;
using facetts::testing::tiny_items;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

dc::Tensor as_tensor(const Matrix& m, bool grad = false) { return dc::Tensor::from_data({m.rows, m.cols}, m.data, grad); }

std::vector<double> snapshot(const dc::ParamList& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

tr::TrainConfig small_train(std::uint64_t seed, double gamma = 1e-2) {
  tr::TrainConfig c;
  c.batch_size = 2;
  c.crop_frames = 32;
  c.seed = seed;
  c.weights.gamma = gamma;
  c.base_lr = 1e-3;
  return c;
}

std::vector<facetts::corpus::CorpusItem> first_item() { return {tiny_items().front()}; }

}  // namespace

TEST(PriorLoss, ZeroQuadraticGivesNormalizer) {
  Rng rng(1);
  auto x = random_tensor({3, 128}, rng);
  EXPECT_NEAR(tr::prior_loss(x, x).item(), 64.0 * kLog2Pi, 1e-12);
}

TEST(PriorLoss, SingleFrameUnitHalfQuadratic) {
  std::vector<double> a(128, 0.0), b(128, 0.0);
  a[0] = 1.0;
  b[5] = -1.0;
  const double v = tr::prior_loss(dc::Tensor::from_data({1, 128}, a), dc::Tensor::from_data({1, 128}, b)).item();
  EXPECT_NEAR(v, 1.0 + 64.0 * kLog2Pi, 1e-12);
}

TEST(PriorLoss, MatchesScalarLogDensity) {
  Rng rng(2);
  const auto x = random_matrix(4, 128, rng, 2.0);
  const auto mu = random_matrix(4, 128, rng, 2.0);
  double nll = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - mu.data[i];
    nll += -std::log(std::exp(-0.5 * d * d) / std::sqrt(2.0 * std::numbers::pi));
  }
  nll /= 4.0;
  const double v = tr::prior_loss(as_tensor(x), as_tensor(mu)).item();
  EXPECT_LE(std::abs(v - nll) / std::abs(nll), 1e-12);
}

TEST(PriorLoss, ShapeMismatchIsContractViolation) {
  EXPECT_THROW(tr::prior_loss(dc::Tensor::zeros({2, 128}), dc::Tensor::zeros({3, 128})), facetts::ContractViolation);
}

TEST(DurationLoss, ExactAndUnitOffset) {
  const std::vector<std::size_t> d{1, 3, 7, 2};
  std::vector<double> logs, plus;
  for (auto v : d) {
    logs.push_back(std::log(static_cast<double>(v)));
    plus.push_back(std::log(static_cast<double>(v)) + 1.0);
  }
  EXPECT_EQ(tr::duration_loss(dc::Tensor::from_data({4}, logs), d).item(), 0.0);
  EXPECT_NEAR(tr::duration_loss(dc::Tensor::from_data({4}, plus), d).item(), 1.0, 1e-14);
}

TEST(DurationLoss, AnalyticGradient) {
  const std::vector<std::size_t> d{2, 5, 1};
  auto pred = dc::Tensor::from_data({3}, {0.3, 2.0, -0.4}, true);
  dc::backward(tr::duration_loss(pred, d));
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = 2.0 * (pred.data()[i] - std::log(static_cast<double>(d[i]))) / 3.0;
    EXPECT_NEAR(pred.grad()[i], expect, 1e-14);
  }
}

TEST(DurationLoss, ZeroDurationIsContractViolation) {
  const std::vector<std::size_t> d{0};
  EXPECT_THROW(tr::duration_loss(dc::Tensor::zeros({1}), d), facetts::ContractViolation);
}

TEST(DiffusionLoss, ExactScoreGivesZero) {
  Rng rng(4);
  const facetts::diffusion::NoiseSchedule s;
  const auto x0 = random_matrix(6, 128, rng);
  const auto draw = tr::draw_diffusion(6, 128, rng);
  auto exact = [&](const dc::Tensor& xt, double t) {
    const Matrix xm(xt.dim(0), xt.dim(1), std::vector<double>(xt.data().begin(), xt.data().end()));
    return as_tensor(facetts::diffusion::kernel_score(xm, x0, t, s));
  };
  EXPECT_EQ(tr::diffusion_terms(exact, x0, draw, s).loss.item(), 0.0);
}

TEST(DiffusionLoss, ZeroScoreMatchesClosedForm) {
  Rng rng(5);
  const facetts::diffusion::NoiseSchedule s;
  const auto x0 = random_matrix(6, 128, rng);
  for (double t : {0.01, 0.3, 1.0}) {
    tr::DiffusionDraw draw{t, facetts::diffusion::draw_normal(6, 128, rng)};
    auto zero = [](const dc::Tensor& xt, double) { return dc::Tensor::zeros(xt.shape()); };
    // kernel score = -z / sigma, so lambda * mean(score^2) = mean(z^2).
    double expect = 0.0;
    for (double z : draw.z.data) expect += z * z;
    expect /= static_cast<double>(draw.z.data.size());
    EXPECT_NEAR(tr::diffusion_terms(zero, x0, draw, s).loss.item(), expect, 1e-12 * expect) << "t=" << t;
  }
}

TEST(DiffusionLoss, DrawRespectsTimeCutoff) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto d = tr::draw_diffusion(1, 1, rng);
    EXPECT_GE(d.t, tr::kMinDiffusionTime);
    EXPECT_LE(d.t, 1.0);
  }
}

TEST(DiffusionLoss, OverfitsSingleItem) {
  Rng rng(7);
  auto config = tiny_config();
  config.score = facetts::diffusion::ScoreNetConfig{};
  config.score.spk_dim = config.bio.visual.embed_dim;
  tr::FaceTts model(config, rng);
  const auto& item = tiny_items().front();
  const Matrix x0(32, 128, std::vector<double>(item.mel.data.begin(), item.mel.data.begin() + 32 * 128));
  const auto mu = dc::Tensor::full({32, 128}, -5.0);
  const auto spk = model.speaker_embedding(item.face).detach();
  // Fixed evaluation draws across the time range.
  Rng eval_rng(8);
  std::vector<tr::DiffusionDraw> eval;
  for (double t : {0.05, 0.2, 0.4, 0.6, 0.8, 1.0}) eval.push_back({t, facetts::diffusion::draw_normal(32, 128, eval_rng)});
  auto evaluate = [&] {
    dc::NoGradGuard guard;
    double v = 0.0;
    for (const auto& d : eval) {
      auto fn = [&](const dc::Tensor& xt, double t) { return model.score.score(xt, t, mu, spk); };
      v += tr::diffusion_terms(fn, x0, d, model.config.schedule).loss.item();
    }
    return v;
  };
  dc::ParamList params;
  model.score.collect(params, "score");
  dc::Adam opt({{"base", 3e-3, params}});
  const double initial = evaluate();
  Rng train_rng(9);
  for (int step = 0; step < 500; ++step) {
    opt.zero_grad();
    dc::backward(tr::diffusion_loss(model.score, x0, mu, spk, train_rng));
    opt.step();
  }
  const double final_loss = evaluate();
  EXPECT_LT(final_loss, 0.1 * initial) << initial << " -> " << final_loss;
}

TEST(DenoisedEstimate, InvertsKernelWithExactScore) {
  Rng rng(10);
  const facetts::diffusion::NoiseSchedule s;
  for (int k = 0; k < 20; ++k) {
    const auto x0 = random_matrix(5, 128, rng, 3.0);
    const double t = rng.uniform(1e-3, 1.0);
    const auto z = facetts::diffusion::draw_normal(5, 128, rng);
    const auto xt = facetts::diffusion::forward_sample(x0, t, z, s);
    const auto score = facetts::diffusion::kernel_score(xt, x0, t, s);
    const auto hat = tr::denoised_estimate(as_tensor(xt), as_tensor(score), t, s);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x0.data.size(); ++i) {
      num += std::pow(hat.data()[i] - x0.data[i], 2);
      den += x0.data[i] * x0.data[i];
    }
    EXPECT_LE(std::sqrt(num / den), 1e-10) << "t=" << t;
  }
}

TEST(DenoisedEstimate, SmallTimeZeroScoreReturnsState) {
  const facetts::diffusion::NoiseSchedule s;
  Rng rng(11);
  auto xt = random_tensor({3, 128}, rng);
  const auto hat = tr::denoised_estimate(xt, dc::Tensor::zeros({3, 128}), 1e-9, s);
  for (std::size_t i = 0; i < xt.size(); ++i) EXPECT_NEAR(hat.data()[i], xt.data()[i], 1e-9);
  EXPECT_THROW(tr::denoised_estimate(xt, dc::Tensor::zeros({3, 128}), 0.0, s), facetts::SingularTime);
}

TEST(DenoisedEstimate, GradientReachesScoreNetwork) {
  Rng rng(12);
  tr::FaceTts model(tiny_config(), rng);
  auto xt = random_tensor({16, 128}, rng);
  const auto mu = dc::Tensor::full({16, 128}, -4.0);
  const auto spk = model.speaker_embedding(tiny_items().front().face).detach();
  dc::backward(dc::sum(tr::denoised_estimate(model.score, xt, 0.5, mu, spk)));
  dc::ParamList params;
  model.score.collect(params, "score");
  double norm = 0.0;
  for (const auto& p : params) {
    if (p.tensor.has_grad()) {
      for (double g : p.tensor.grad()) norm += g * g;
    }
  }
  EXPECT_GT(norm, 0.0);
}

TEST(SpeakerBinding, IdenticalInputsGiveExactlyZero) {
  Rng rng(13);
  facetts::bio::AudioNet F(tiny_config().bio.audio, rng);
  const auto x = random_matrix(17, 128, rng, 2.0);
  EXPECT_EQ(tr::speaker_binding_loss(F, x, as_tensor(x)).item(), 0.0);
}

TEST(SpeakerBinding, NonNegativeAndShapeChecked) {
  Rng rng(14);
  facetts::bio::AudioNet F(tiny_config().bio.audio, rng);
  for (int k = 0; k < 5; ++k) {
    const auto a = random_matrix(20, 128, rng, 2.0);
    EXPECT_GE(tr::speaker_binding_loss(F, a, random_tensor({20, 128}, rng)).item(), 0.0);
  }
  EXPECT_THROW(tr::speaker_binding_loss(F, random_matrix(20, 128, rng), random_tensor({21, 128}, rng)),
               facetts::ContractViolation);
}

TEST(SpeakerBinding, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  facetts::bio::AudioNet F(tiny_config().bio.audio, rng);
  dc::ParamList fp;
  F.collect(fp, "F");
  facetts::testing::nudge_biases(fp, rng);
  const auto x0 = random_matrix(17, 128, rng, 2.0);
  auto hat = random_tensor({17, 128}, rng);
  auto opts = facetts::testing::kNetworkCheck;
  opts.max_probes = 300;
  const auto report = dc::grad_check([&](const dc::Tensor& h) { return tr::speaker_binding_loss(F, x0, h); }, hat, opts);
  EXPECT_LE(report.max_rel_error, 1e-4);
}

TEST(SpeakerBinding, NeverTouchesAudioNetworkParameters) {
  Rng rng(16);
  tr::FaceTts model(tiny_config(), rng);
  const auto& item = tiny_items().front();
  const Matrix x0(24, 128, std::vector<double>(item.mel.data.begin(), item.mel.data.begin() + 24 * 128));
  const auto mu = dc::Tensor::full({24, 128}, -5.0);
  const auto spk = model.speaker_embedding(item.face).detach();
  const auto xt = dc::Tensor::from_data({24, 128}, facetts::diffusion::forward_sample(
                                                       x0, 0.4, facetts::diffusion::draw_normal(24, 128, rng),
                                                       model.config.schedule).data);
  // F is not frozen here; the loss must still keep it out of the graph.
  const auto hat = tr::denoised_estimate(model.score, xt, 0.4, mu, spk);
  dc::backward(dc::scale(tr::speaker_binding_loss(model.bio.audio, x0, hat), 1e-2));
  for (const auto& p : model.audio_params()) {
    EXPECT_FALSE(p.tensor.has_grad()) << p.name;
    EXPECT_TRUE(p.tensor.requires_grad()) << p.name << " freeze leaked out of the call";
  }
  double norm = 0.0;
  dc::ParamList sp;
  model.score.collect(sp, "score");
  for (const auto& p : sp) {
    if (p.tensor.has_grad()) {
      for (double g : p.tensor.grad()) norm += g * g;
    }
  }
  EXPECT_GT(norm, 0.0);
}

TEST(SpeakerBinding, TapsSkipTheFirstTwoBlocks) {
  for (std::size_t blocks : {3u, 5u, 7u}) {
    Rng rng(17);
    facetts::bio::AudioNetConfig c;
    c.widths.assign(blocks, 4);
    c.embed_dim = 8;
    facetts::bio::AudioNet F(c, rng);
    const auto out = F.forward(random_matrix(F.min_frames(), 128, rng));
    EXPECT_EQ(out.taps.size(), blocks - 2);
  }
}

TEST(TotalLoss, Composition) {
  tr::LossTerms terms{dc::Tensor::scalar(1.0), dc::Tensor::scalar(2.0), dc::Tensor::scalar(3.0),
                      dc::Tensor::scalar(4.0)};
  EXPECT_NEAR(tr::total_loss(terms, {}).breakdown.total, 6.04, 1e-12);
  EXPECT_EQ(tr::LossWeights{}.gamma, 1e-2);
  EXPECT_EQ(tr::total_loss(terms, {0.0}).total.item(), 6.0);
  const auto r = tr::total_loss(terms, {0.5});
  EXPECT_EQ(r.breakdown.prior, 1.0);
  EXPECT_EQ(r.breakdown.speaker, 4.0);
  EXPECT_EQ(r.breakdown.gamma, 0.5);
}

TEST(TotalLoss, NaNComponentIsNamed) {
  tr::LossTerms terms{dc::Tensor::scalar(1.0), dc::Tensor::scalar(2.0), dc::Tensor::scalar(std::nan("")),
                      dc::Tensor::scalar(4.0)};
  try {
    tr::total_loss(terms, {});
    FAIL() << "expected TrainingFault";
  } catch (const facetts::TrainingFault& e) {
    EXPECT_EQ(e.component(), "L_diff");
  }
  EXPECT_THROW(tr::total_loss(terms, {-1.0}), facetts::ConfigError);
}

TEST(Trainer, ComponentsAddUpAndGammaOnlyScalesSpeakerTerm) {
  Rng rng(18);
  tr::FaceTts model(tiny_config(), rng);
  tr::Trainer a(model, tiny_items(), small_train(1, 1e-2));
  tr::Trainer b(model, tiny_items(), small_train(1, 2e-2));
  const auto plan_a = a.plan_batch();
  const auto plan_b = b.plan_batch();
  const auto la = a.batch_loss(plan_a).breakdown;
  const auto lb = b.batch_loss(plan_b).breakdown;
  EXPECT_EQ(la.prior, lb.prior);
  EXPECT_EQ(la.duration, lb.duration);
  EXPECT_EQ(la.diffusion, lb.diffusion);
  EXPECT_EQ(la.speaker, lb.speaker);
  EXPECT_NEAR(la.total, la.prior + la.duration + la.diffusion + 1e-2 * la.speaker, 1e-12);
  EXPECT_NEAR(lb.total - la.total, 1e-2 * la.speaker, 1e-12);
}

TEST(Trainer, OptimizerHasBaseAndVisualGroups) {
  Rng rng(19);
  tr::FaceTts model(tiny_config(), rng);
  tr::TrainConfig cfg;
  tr::Trainer trainer(model, tiny_items(), cfg);
  const auto& groups = trainer.optimizer().groups();
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].name, "base");
  EXPECT_EQ(trainer.optimizer().group_lr("base"), 1e-4);
  EXPECT_EQ(groups[1].name, "visual");
  EXPECT_EQ(trainer.optimizer().group_lr("visual"), 1e-6);
  for (const auto& g : groups) {
    for (const auto& p : g.params) EXPECT_EQ(p.name.rfind("bio.audio", 0), std::string::npos) << p.name;
  }
}

TEST(Trainer, AudioNetworkStaysBitIdentical) {
  Rng rng(20);
  tr::FaceTts model(tiny_config(), rng);
  const auto before = snapshot(model.audio_params());
  const auto visual_before = snapshot(model.visual_params());
  auto cfg = small_train(2);
  cfg.steps = 3;
  tr::Trainer trainer(model, tiny_items(), cfg);
  trainer.run();
  EXPECT_EQ(snapshot(model.audio_params()), before);
  EXPECT_NE(snapshot(model.visual_params()), visual_before);
}

TEST(Trainer, OverfitsOneUtterance) {
  Rng rng(21);
  tr::FaceTts model(tiny_config(), rng);
  auto cfg = small_train(3);
  cfg.batch_size = 1;
  tr::Trainer trainer(model, first_item(), cfg);
  // Fixed evaluation batch so the comparison is not drowned by draw noise.
  tr::Trainer probe(model, first_item(), small_train(99));
  std::vector<tr::ItemPlan> eval;
  for (int i = 0; i < 4; ++i) {
    auto p = probe.plan_batch();
    eval.insert(eval.end(), p.begin(), p.end());
  }
  auto evaluate = [&] { return probe.batch_loss(eval).breakdown.total; };
  std::vector<double> trace{evaluate()};
  for (int step = 1; step <= 100; ++step) {
    trainer.step();
    if (step % 10 == 0) trace.push_back(evaluate());
  }
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LT(trace[i], trace[i - 1]) << "after " << 10 * i << " steps";
}

TEST(Trainer, ResumeIsBitIdentical) {
  const auto dir = fs::temp_directory_path() / "facetts_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(22);
  tr::FaceTts model(tiny_config(), rng);
  const auto init = dir / "init.ckpt";
  tr::save_face_tts(init, model);

  tr::Trainer straight(model, tiny_items(), small_train(4));
  for (int i = 0; i < 3; ++i) straight.step();
  straight.save_checkpoint(dir / "mid.ckpt");
  const auto expected = straight.step().loss;

  auto other = tr::load_face_tts(init);
  tr::Trainer resumed(other, tiny_items(), small_train(4));
  resumed.load_checkpoint(dir / "mid.ckpt");
  EXPECT_EQ(resumed.steps_done(), 3u);
  const auto got = resumed.step().loss;
  EXPECT_EQ(got.total, expected.total);
  EXPECT_EQ(got.prior, expected.prior);
  EXPECT_EQ(got.speaker, expected.speaker);
  fs::remove_all(dir);
}

TEST(Trainer, RunWritesMetricsAndCheckpoints) {
  const auto dir = fs::temp_directory_path() / "facetts_run";
  fs::remove_all(dir);
  Rng rng(23);
  tr::FaceTts model(tiny_config(), rng);
  auto cfg = small_train(5);
  cfg.steps = 4;
  cfg.checkpoint_every = 2;
  cfg.out_dir = dir;
  tr::Trainer trainer(model, tiny_items(), cfg);
  const auto records = trainer.run();
  ASSERT_EQ(records.size(), 4u);
  std::ifstream in(trainer.metrics_path());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<std::size_t>(), ++lines);
    for (const char* k : {"L_prior", "L_dur", "L_diff", "L_spk", "gamma", "total"}) EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(lines, 4u);
  EXPECT_TRUE(fs::exists(trainer.checkpoint_dir() / "step_000002.ckpt"));
  EXPECT_TRUE(fs::exists(trainer.checkpoint_dir() / "step_000004.ckpt"));
  EXPECT_TRUE(fs::exists(trainer.checkpoint_dir() / "latest.ckpt"));
  fs::remove_all(dir);
}

TEST(Trainer, NonFiniteLossAbortsWithoutTouchingParameters) {
  Rng rng(24);
  tr::FaceTts model(tiny_config(), rng);
  tr::Trainer trainer(model, tiny_items(), small_train(6));
  dc::ParamList score;
  model.score.collect(score, "score");
  dc::Tensor(score.back().tensor).mutable_data()[0] = std::nan("");
  const auto before = snapshot(model.params());
  try {
    trainer.step();
    FAIL() << "expected TrainingFault";
  } catch (const facetts::TrainingFault& e) {
    EXPECT_EQ(e.component(), "L_diff");
  }
  EXPECT_EQ(trainer.steps_done(), 0u);
  const auto after = snapshot(model.params());
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_TRUE(before[i] == after[i] || (std::isnan(before[i]) && std::isnan(after[i])));
  }
}

TEST(Trainer, NonFiniteMelIsRejectedUpFront) {
  Rng rng(30);
  tr::FaceTts model(tiny_config(), rng);
  auto items = tiny_items();
  items[0].mel.data[5] = std::nan("");
  EXPECT_THROW(tr::Trainer(model, items, small_train(6)), facetts::InputError);
}

TEST(Trainer, ZeroGammaTrajectoryIgnoresAudioNetworkWeights) {
  Rng rng_a(25), rng_b(25);
  tr::FaceTts a(tiny_config(), rng_a);
  tr::FaceTts b(tiny_config(), rng_b);
  Rng other(77);
  for (const auto& p : b.audio_params()) {
    for (double& v : dc::Tensor(p.tensor).mutable_data()) v = other.normal();
  }
  tr::Trainer ta(a, tiny_items(), small_train(7, 0.0));
  tr::Trainer tb(b, tiny_items(), small_train(7, 0.0));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(ta.step().loss.total, tb.step().loss.total);
  }
  EXPECT_EQ(snapshot(a.base_params()), snapshot(b.base_params()));
  EXPECT_EQ(snapshot(a.visual_params()), snapshot(b.visual_params()));
}

TEST(Trainer, RejectsBadConfig) {
  Rng rng(26);
  tr::FaceTts model(tiny_config(), rng);
  auto cfg = small_train(8);
  cfg.crop_frames = 10;
  EXPECT_THROW(tr::Trainer(model, tiny_items(), cfg), facetts::ConfigError);
  cfg = small_train(8, -1.0);
  EXPECT_THROW(tr::Trainer(model, tiny_items(), cfg), facetts::ConfigError);
  EXPECT_THROW(tr::Trainer(model, {}, small_train(8)), facetts::InputError);
}

TEST(Checkpoint, ModelRoundTrip) {
  const auto path = fs::temp_directory_path() / "facetts_model.ckpt";
  Rng rng(27);
  tr::FaceTts model(tiny_config(), rng);
  tr::save_face_tts(path, model);
  const auto back = tr::load_face_tts(path);
  EXPECT_EQ(snapshot(back.params()), snapshot(model.params()));
  EXPECT_EQ(tr::to_json(back.config), tr::to_json(model.config));
  EXPECT_EQ(snapshot(tr::load_biometric(path).params()), snapshot(model.bio.params()));
  fs::remove(path);
}

TEST(Checkpoint, InconsistentConfigIsConfigError) {
  auto c = tiny_config();
  c.text.spk_dim = 32;
  Rng rng(28);
  EXPECT_THROW(tr::FaceTts(c, rng), facetts::ConfigError);
}

TEST(Synthesis, DeterministicAndFaceConditioned) {
  Rng rng(29);
  tr::FaceTts model(tiny_config(), rng);
  auto cfg = small_train(9);
  cfg.steps = 20;
  tr::Trainer trainer(model, tiny_items(), cfg);
  trainer.run();
  const auto tokens = facetts::text::normalize_and_tokenize("the quiet river");
  tr::SynthesisOptions opt;
  opt.seed = 3;
  opt.griffin_lim_iters = 4;
  const auto& items = tiny_items();
  const auto a = tr::synthesize(model, tokens, items.front().face, opt);
  const auto b = tr::synthesize(model, tokens, items.front().face, opt);
  EXPECT_EQ(facetts::dsp::encode_wav(a.wave), facetts::dsp::encode_wav(b.wave));
  EXPECT_EQ(a.mel.frames.cols, 128u);
  EXPECT_GE(a.mel.frames.rows, model.bio.audio.min_frames());
  const auto c = tr::synthesize(model, tokens, items.back().face, opt);
  ASSERT_NE(items.front().identity, items.back().identity);
  double dist = 0.0;
  const std::size_t rows = std::min(a.mel.frames.rows, c.mel.frames.rows);
  for (std::size_t i = 0; i < rows * 128; ++i) dist += std::pow(a.mel.frames.data[i] - c.mel.frames.data[i], 2);
  EXPECT_GT(dist, 0.0);
}

TEST(Synthesis, DefaultsToTenSteps) {
  EXPECT_EQ(tr::SynthesisOptions{}.steps, 10u);
  EXPECT_EQ(tr::SynthesisOptions{}.duration_scale, 1.0);
}
