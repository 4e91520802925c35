#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "facetts/biometric/networks.hpp"
#include "facetts/diffcore/container.hpp"
#include "facetts/diffusion/score_net.hpp"
#include "facetts/diffusion/sde.hpp"
#include "facetts/textfront/text.hpp"

namespace facetts::training {

struct FaceTtsConfig {
  text::TextEncoderConfig text;
  diffusion::ScoreNetConfig score;
  diffusion::NoiseSchedule schedule;
  bio::BiometricConfig bio;

  /// Throws ConfigError on inconsistent widths or an invalid schedule.
  void validate() const;
};

nlohmann::json to_json(const FaceTtsConfig& config);
/// Missing keys keep their defaults. Throws ConfigError on wrongly typed values.
FaceTtsConfig face_tts_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const bio::BiometricConfig& config);
bio::BiometricConfig biometric_config_from_json(const nlohmann::json& j);

/// Text encoder, score network and the cross-modal biometric pair. The speaker embedding
/// that conditions the encoder and the score network is G(face).
struct FaceTts {
  FaceTts() = default;
  FaceTts(const FaceTtsConfig& config, Rng& rng);

  dc::Tensor speaker_embedding(const bio::FaceImage& face) const { return bio.visual.forward(face); }

  /// Text encoder and score network ("text.*", "score.*").
  dc::ParamList base_params() const;
  dc::ParamList visual_params() const { return bio.visual_params(); }
  dc::ParamList audio_params() const { return bio.audio_params(); }
  dc::ParamList params() const;

  FaceTtsConfig config;
  text::TextEncoder encoder;
  diffusion::ScoreNetwork score;
  bio::BiometricModel bio;
};

/// Checkpoint meta keys: "kind", "config" and "vocab".
void save_face_tts(const std::filesystem::path& path, const FaceTts& model, dc::Container extra = {});
FaceTts load_face_tts(const std::filesystem::path& path);
FaceTts face_tts_from_container(const dc::Container& c);

void save_biometric(const std::filesystem::path& path, const bio::BiometricModel& model);
bio::BiometricModel load_biometric(const std::filesystem::path& path);
/// Accepts either a biometric checkpoint or a full model checkpoint.
bio::BiometricModel biometric_from_container(const dc::Container& c);

}  // namespace facetts::training
