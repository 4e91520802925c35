#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facetts/biometric/image.hpp"
#include "facetts/biometric/networks.hpp"
#include "facetts/common/matrix.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::bio {

/// One utterance with its paired face and identity label.
struct BioSample {
  Matrix mel;
  FaceImage face;
  std::size_t identity = 0;
};

/// Symmetric InfoNCE over in-batch pairs. audio, visual: [K, D] rows of unit embeddings.
dc::Tensor info_nce(const dc::Tensor& audio, const dc::Tensor& visual, double temperature = 0.07);

struct PretrainOptions {
  std::size_t steps = 200;
  /// Distinct identities per batch (capped at the number available).
  std::size_t batch_identities = 8;
  /// Random crop length in frames; 0 uses whole utterances.
  std::size_t crop_frames = 64;
  double lr = 1e-3;
  double temperature = 0.07;
  std::uint64_t seed = 0;
  std::function<void(std::size_t step, double loss)> on_step;
};

struct PretrainReport {
  std::vector<double> losses;
};

/// Trains F and G jointly with Adam on symmetric InfoNCE. Throws DegenerateTask with fewer than 2 identities.
PretrainReport contrastive_pretrain(BiometricModel& model, const std::vector<BioSample>& samples,
                                    const PretrainOptions& options);

struct MatchResult {
  std::size_t index = 0;
  std::array<double, 5> scores{};
};

/// Argmax of cosine(speech, face_i) with the first maximum winning ties.
MatchResult match_5way(std::span<const double> speech, std::span<const std::vector<double>> faces);
/// Embeds the speech with F and each face with G, then matches. Exactly 5 faces.
MatchResult match_5way(const BiometricModel& model, const Matrix& speech, std::span<const FaceImage> faces);

struct SpeechProbe {
  std::string label;
  std::size_t identity = 0;
  std::vector<double> embedding;
};

struct FaceCandidate {
  std::size_t identity = 0;
  std::vector<double> embedding;
};

struct MatchTrial {
  std::string probe;
  std::size_t identity = 0;
  std::array<std::size_t, 5> candidates{};  // identity of each candidate, in presented order
  std::size_t true_position = 0;
  MatchResult result;
  bool correct = false;
};

struct MatchReport {
  std::vector<MatchTrial> trials;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// One-sided binomial p-value of `correct` successes against 20% chance.
  double p_value = 1.0;

  nlohmann::json to_json() const;
};

/// Runs `trials` forced-matching trials. Probes are visited round-robin; the true face is a
/// random face of the probe's identity and four distractor identities are drawn without
/// replacement; the five candidates are presented in random order. Throws ConfigError with
/// fewer than 5 identities among the faces.
MatchReport run_matching(std::span<const SpeechProbe> probes, std::span<const FaceCandidate> faces,
                         std::size_t trials, std::uint64_t seed);

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

std::vector<double> to_vector(const dc::Tensor& t);

}  // namespace facetts::bio
