#include "facetts/training/evaluation.hpp"

#include <set>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::training {

bio::MatchReport evaluate_matching(const FaceTts& model, const std::vector<corpus::CorpusItem>& items,
                                   const MatchEvalOptions& options) {
  std::set<std::size_t> identities;
  for (const auto& it : items) identities.insert(it.identity);
  if (identities.size() < 5) throw ConfigError("matching needs at least 5 identities, got " + std::to_string(identities.size()));

  dc::NoGradGuard guard;
  std::vector<bio::SpeechProbe> probes;
  std::vector<bio::FaceCandidate> faces;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    auto so = options.synthesis;
    so.seed = Rng::derive(options.seed, i);
    so.vocode = options.via_waveform;
    const auto out = synthesize(model, it.tokens, it.face, so);
    const Matrix mel = options.via_waveform ? dsp::mel_analyze(out.wave).frames : out.mel.frames;
    probes.push_back({it.utt_id, it.identity, bio::to_vector(model.bio.audio.forward(mel).embedding)});
    faces.push_back({it.identity, bio::to_vector(model.speaker_embedding(it.face))});
  }
  return bio::run_matching(probes, faces, options.trials, options.seed);
}

}  // namespace facetts::training
