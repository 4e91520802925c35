#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "facetts/common/errors.hpp"
#include "facetts/corpus/corpus.hpp"

namespace facetts::corpus {

LoadedManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  LoadedManifest out;
  out.manifest.root = path.parent_path();
  std::map<std::string, std::size_t> seen;
  std::map<std::size_t, double> seconds_by_identity;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.utt_id = j.at("utt_id").get<std::string>();
      rec.wav = j.at("wav").get<std::string>();
      rec.transcript = j.at("transcript").get<std::string>();
      rec.face = j.at("face").get<std::string>();
      const auto& id = j.at("identity");
      if (!id.is_number_unsigned()) throw ParseError("identity must be a non-negative integer", lineno);
      rec.identity = id.get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("malformed manifest record in " + path.string() + ": " + e.what(), lineno);
    }
    if (rec.utt_id.empty()) throw ParseError("empty utt_id", lineno);
    if (!seen.emplace(rec.utt_id, lineno).second) throw ParseError("duplicate utt_id " + rec.utt_id, lineno);

    const auto wav = out.manifest.resolve(rec.wav);
    const auto face = out.manifest.resolve(rec.face);
    if (!std::filesystem::exists(wav) || !std::filesystem::exists(face)) {
      out.report.missing.push_back(rec.utt_id);
      continue;
    }
    const double secs = dsp::wav_duration_seconds(wav);
    if (secs < kMinUtteranceSeconds) {
      out.report.too_short.emplace_back(rec.utt_id, secs);
      continue;
    }
    seconds_by_identity[rec.identity] += secs;
    out.manifest.records.push_back(std::move(rec));
  }
  for (const auto& [id, secs] : seconds_by_identity) {
    if (secs < kMinSpeakerSeconds) {
      out.report.warnings.push_back("identity " + std::to_string(id) + " has only " + std::to_string(secs) +
                                    " s of audio (< 10 s)");
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["utt_id"] = r.utt_id;
    j["wav"] = r.wav.generic_string();
    j["transcript"] = r.transcript;
    j["face"] = r.face.generic_string();
    j["identity"] = r.identity;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<CorpusItem> load_items(const Manifest& manifest) {
  std::vector<CorpusItem> items;
  items.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    CorpusItem it;
    it.utt_id = r.utt_id;
    it.identity = r.identity;
    it.transcript = r.transcript;
    it.tokens = text::normalize_and_tokenize(r.transcript);
    it.mel = dsp::mel_analyze(dsp::read_wav(manifest.resolve(r.wav))).frames;
    it.face = bio::load_face(manifest.resolve(r.face));
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace facetts::corpus
