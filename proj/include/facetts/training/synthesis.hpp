#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "facetts/biometric/image.hpp"
#include "facetts/dsp/audio.hpp"
#include "facetts/textfront/text.hpp"
#include "facetts/training/model.hpp"

namespace facetts::training {

struct SynthesisOptions {
  std::size_t steps = 10;
  std::uint64_t seed = 0;
  /// Multiplies predicted durations; larger is slower speech.
  double duration_scale = 1.0;
  /// Terminal state is terminal_offset * mu + z.
  double terminal_offset = 0.0;
  std::size_t griffin_lim_iters = 32;
  /// Skip waveform reconstruction (mel only).
  bool vocode = true;
  std::ostream* trace = nullptr;
};

struct SynthesisResult {
  std::vector<std::size_t> durations;
  Matrix mu_frames;
  dsp::MelSpectrogram mel;
  dsp::WaveForm wave;
};

/// Encodes text conditioned on G(face), expands by predicted durations, runs the reverse
/// sampler and inverts the mel with Griffin-Lim. Deterministic in options.seed.
/// Throws DivergenceError if sampling produces non-finite values.
SynthesisResult synthesize(const FaceTts& model, const text::TokenSequence& tokens, const bio::FaceImage& face,
                           const SynthesisOptions& options = {});

}  // namespace facetts::training
