#include "facetts/training/synthesis.hpp"

#include "facetts/aligner/mas.hpp"
#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"
#include "facetts/diffusion/sde.hpp"

namespace facetts::training {

namespace {

// Shortest mel the score network and the audio network both accept.
std::size_t min_output_frames(const FaceTts& model) { return std::max<std::size_t>(4, model.bio.audio.min_frames()); }

}  // namespace

SynthesisResult synthesize(const FaceTts& model, const text::TokenSequence& tokens, const bio::FaceImage& face,
                           const SynthesisOptions& options) {
  if (options.steps == 0) throw ConfigError("synthesis needs at least one reverse step");
  if (!(options.duration_scale > 0.0)) throw ConfigError("duration scale must be positive");
  dc::NoGradGuard guard;
  Rng rng(Rng::derive(options.seed, 0x5e));
  const auto spk = model.speaker_embedding(face);
  const auto enc = model.encoder.forward(tokens, spk);

  SynthesisResult out;
  out.durations = align::predicted_durations(enc.log_dur.data(), options.duration_scale);
  std::size_t frames = 0;
  for (auto d : out.durations) frames += d;
  // Stretch the last token so the output is long enough to analyse.
  if (frames < min_output_frames(model)) out.durations.back() += min_output_frames(model) - frames;
  const auto mu = align::expand(enc.mu_tokens, out.durations);
  out.mu_frames = Matrix(mu.dim(0), mu.dim(1), std::vector<double>(mu.data().begin(), mu.data().end()));

  const Matrix z = diffusion::draw_normal(out.mu_frames.rows, out.mu_frames.cols, rng);
  const Matrix x_T = diffusion::initial_state(out.mu_frames, z, options.terminal_offset);
  auto score_fn = [&](const Matrix& x, double t) {
    const auto s = model.score.score(dc::Tensor::from_data({x.rows, x.cols}, x.data), t, mu, spk);
    return Matrix(x.rows, x.cols, std::vector<double>(s.data().begin(), s.data().end()));
  };
  diffusion::ReverseOptions ro;
  ro.steps = options.steps;
  ro.seed = Rng::derive(options.seed, 0x5f);
  ro.trace = options.trace;
  out.mel.frames = diffusion::reverse_sample(score_fn, x_T, model.config.schedule, ro);
  if (options.vocode) out.wave = dsp::griffin_lim(out.mel, {options.griffin_lim_iters, Rng::derive(options.seed, 0x60)});
  return out;
}

}  // namespace facetts::training
