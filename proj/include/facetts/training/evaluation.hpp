#pragma once

#include <cstdint>
#include <vector>

#include "facetts/biometric/matching.hpp"
#include "facetts/corpus/corpus.hpp"
#include "facetts/training/synthesis.hpp"

namespace facetts::training {

struct MatchEvalOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  SynthesisOptions synthesis;
  /// Re-analyse the Griffin-Lim waveform instead of matching the sampled mel directly.
  bool via_waveform = true;
};

/// Synthesizes every item's transcript conditioned on its own face, embeds the result with F
/// and runs forced 5-way matching against G embeddings of the items' faces. Throws ConfigError
/// with fewer than 5 identities.
bio::MatchReport evaluate_matching(const FaceTts& model, const std::vector<corpus::CorpusItem>& items,
                                   const MatchEvalOptions& options);

}  // namespace facetts::training
