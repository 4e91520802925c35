#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facetts/biometric/image.hpp"
#include "facetts/common/matrix.hpp"
#include "facetts/dsp/audio.hpp"
#include "facetts/textfront/text.hpp"

namespace facetts::corpus {

/// Per-identity generative parameters shared by the voice and the face render.
struct IdentityLatent {
  std::size_t id = 0;
  double pitch_base = 0.0;  // Hz in [90, 300]
  double tilt = 0.0;        // [-1, 1]
  double rate = 1.0;        // [0.7, 1.3]
  std::uint64_t palette_seed = 0;
  std::uint64_t geometry_seed = 0;
};

inline constexpr double kMinPitch = 90.0;
inline constexpr double kMaxPitch = 300.0;

/// Deterministic in (seed, id). Pitch, tilt and rate follow golden-ratio sequences over id
/// so any set of identities is spread across the ranges.
IdentityLatent identity_latent(std::uint64_t seed, std::size_t id);

/// Random transcript of whole words lasting at least `min_seconds` at speaking rate `rate`.
std::string random_transcript(Rng& rng, double rate, double min_seconds);
/// Token-driven harmonic-stack voice for `transcript`.
dsp::WaveForm synthesize_voice(const IdentityLatent& who, const std::string& transcript, Rng& rng);
/// 224 x 224 procedural face proxy; `rng` drives nuisance jitter only.
bio::RgbImage render_face(const IdentityLatent& who, Rng& rng);

struct ManifestRecord {
  std::string utt_id;
  std::filesystem::path wav;   // as written in the manifest (relative to its directory)
  std::string transcript;
  std::filesystem::path face;  // as written in the manifest
  std::size_t identity = 0;
};

struct Manifest {
  std::filesystem::path root;  // directory that relative paths resolve against
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }
};

struct ManifestReport {
  std::vector<std::string> missing;                       // utt ids with a missing wav or face
  std::vector<std::pair<std::string, double>> too_short;  // utt id, seconds
  std::vector<std::string> warnings;
};

struct LoadedManifest {
  Manifest manifest;
  ManifestReport report;
};

inline constexpr double kMinUtteranceSeconds = 1.3;
inline constexpr double kMinSpeakerSeconds = 10.0;

/// Parses line-delimited JSON records. Records with missing files or audio shorter than
/// 1.3 s are excluded and listed; speakers with under 10 s of audio are warned about.
/// Throws IoError if the file cannot be opened and ParseError (with line) on malformed records.
LoadedManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct CorpusOptions {
  std::uint64_t seed = 0;
  std::size_t identities = 8;
  std::size_t utterances_per_identity = 20;
  /// Last utterances of each identity written to test.jsonl (the rest to train.jsonl).
  std::size_t test_per_identity = 4;
  double min_seconds = 1.5;
};

/// Writes wav/, faces/, manifest.jsonl, train.jsonl and test.jsonl under out_dir.
/// Throws InputError for fewer than 2 identities and IoError if out_dir is unwritable.
Manifest generate_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir);

/// A manifest record with its audio analysed, transcript tokenized and face ingested.
struct CorpusItem {
  std::string utt_id;
  std::size_t identity = 0;
  std::string transcript;
  text::TokenSequence tokens;
  Matrix mel;
  bio::FaceImage face;
};

std::vector<CorpusItem> load_items(const Manifest& manifest);

}  // namespace facetts::corpus
