#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

#include "facetts/biometric/matching.hpp"
#include "facetts/corpus/corpus.hpp"
#include "facetts/training/model.hpp"
#include "facetts/training/synthesis.hpp"
#include "facetts/training/trainer.hpp"

namespace facetts::cli {

struct EvalSettings {
  std::size_t trials = 200;
  bool via_waveform = true;
};

/// Everything a command needs, gathered from the config file and flags. Every seed used by a
/// command is derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  corpus::CorpusOptions corpus;
  training::FaceTtsConfig model;
  bio::PretrainOptions pretrain;
  training::TrainConfig train;
  training::SynthesisOptions synth;
  EvalSettings eval;
  /// Fixed analysis constants; present so a config written for other settings is rejected.
  int sample_rate = dsp::kSampleRate;
  std::size_t n_mels = dsp::kNumMels;

  /// Throws ConfigError on any setting the modules would reject.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys and wrongly typed values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Parses a flat TOML-style document: `[a.b]` section headers, `key = value` lines and `#`
/// comments. Values are integers, floats, booleans, double-quoted strings or flat arrays of
/// those. Throws ConfigError naming the line on malformed input.
nlohmann::json parse_config_text(std::string_view text);
/// Throws IoError if the file cannot be read.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace facetts::cli
