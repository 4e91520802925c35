#include "facetts/cli/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "facetts/common/errors.hpp"

namespace facetts::cli {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

std::size_t audio_min_frames(const bio::AudioNetConfig& a) {
  const std::size_t pooled = a.widths.empty() ? 1 : std::size_t{1} << (a.widths.size() - 1);
  return std::max(bio::kMinAudioFrames, pooled);
}

// A user value is accepted where the default has the same kind; integers may stand in for floats.
bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    if (def.empty()) return true;
    for (const auto& e : v) {
      if (!same_kind(def.front(), e)) return false;
    }
    return true;
  }
  return false;
}

void check_keys(const json& def, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!def.contains(it.key())) throw ConfigError("unknown config key " + key);
    const auto& d = def.at(it.key());
    if (d.is_object()) {
      if (!it->is_object()) throw ConfigError("config key " + key + " is a section");
      check_keys(d, *it, key);
    } else if (!same_kind(d, *it)) {
      throw ConfigError("config key " + key + " expects a value like " + d.dump() + ", got " + it->dump());
    }
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing # comment that is not inside a double-quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_key(const std::string& key, std::size_t line) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    bool bare = !part.empty();
    for (char c : part) bare = bare && (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-');
    if (!bare) throw ConfigError("invalid key '" + key + "' on config line " + std::to_string(line));
    parts.push_back(part);
  }
  if (parts.empty() || key.back() == '.') throw ConfigError("invalid key '" + key + "' on config line " + std::to_string(line));
  return parts;
}

}  // namespace

void RunConfig::validate() const {
  require(!out.empty(), "out directory must be set");
  require(sample_rate == dsp::kSampleRate, "audio.sample_rate is fixed at " + std::to_string(dsp::kSampleRate));
  require(n_mels == dsp::kNumMels, "audio.n_mels is fixed at " + std::to_string(dsp::kNumMels));
  require(model.text.mel_dim == n_mels, "model mel width must equal audio.n_mels");

  require(corpus.identities >= 2, "corpus.identities must be at least 2");
  require(corpus.utterances_per_identity > corpus.test_per_identity,
          "corpus.utterances_per_identity must exceed corpus.test_per_identity");
  require(std::isfinite(corpus.min_seconds) && corpus.min_seconds >= corpus::kMinUtteranceSeconds,
          "corpus.min_seconds must be at least " + std::to_string(corpus::kMinUtteranceSeconds));

  model.validate();
  const std::size_t min_frames = audio_min_frames(model.bio.audio);

  require(pretrain.steps > 0, "pretrain.steps must be positive");
  require(pretrain.batch_identities >= 2, "pretrain.batch_identities must be at least 2");
  require(positive_finite(pretrain.lr), "pretrain.lr must be positive");
  require(positive_finite(pretrain.temperature), "pretrain.temperature must be positive");
  require(pretrain.crop_frames == 0 || pretrain.crop_frames >= min_frames,
          "pretrain.crop_frames must be 0 or at least " + std::to_string(min_frames));

  train.validate();
  require(train.steps > 0, "train.steps must be positive");
  require(train.crop_frames == 0 || train.crop_frames >= min_frames,
          "train.crop_frames must be 0 or at least " + std::to_string(min_frames));

  require(synth.steps > 0, "synth.steps must be positive");
  require(positive_finite(synth.duration_scale), "synth.duration_scale must be positive");
  require(std::isfinite(synth.terminal_offset), "synth.terminal_offset must be finite");
  require(synth.griffin_lim_iters > 0, "synth.griffin_lim_iters must be positive");

  require(eval.trials > 0, "eval.trials must be positive");
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["corpus"] = {{"identities", c.corpus.identities},
                 {"utterances_per_identity", c.corpus.utterances_per_identity},
                 {"test_per_identity", c.corpus.test_per_identity},
                 {"min_seconds", c.corpus.min_seconds}};
  j["model"] = training::to_json(c.model);
  j["pretrain"] = {{"steps", c.pretrain.steps},
                   {"batch_identities", c.pretrain.batch_identities},
                   {"crop_frames", c.pretrain.crop_frames},
                   {"lr", c.pretrain.lr},
                   {"temperature", c.pretrain.temperature}};
  j["train"] = {{"steps", c.train.steps},       {"batch_size", c.train.batch_size},
                {"base_lr", c.train.base_lr},   {"visual_lr", c.train.visual_lr},
                {"gamma", c.train.weights.gamma}, {"crop_frames", c.train.crop_frames},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["synth"] = {{"steps", c.synth.steps},
                {"duration_scale", c.synth.duration_scale},
                {"terminal_offset", c.synth.terminal_offset},
                {"griffin_lim_iters", c.synth.griffin_lim_iters}};
  j["eval"] = {{"trials", c.eval.trials}, {"via_waveform", c.eval.via_waveform}};
  j["audio"] = {{"sample_rate", c.sample_rate}, {"n_mels", c.n_mels}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& user) {
  if (!user.is_object()) throw ConfigError("config must be a table of keys");
  json j = to_json(RunConfig{});
  check_keys(j, user, "");
  j.merge_patch(user);

  RunConfig c;
  c.seed = j["seed"].get<std::uint64_t>();
  c.out = j["out"].get<std::string>();
  const auto& co = j["corpus"];
  c.corpus.identities = co["identities"].get<std::size_t>();
  c.corpus.utterances_per_identity = co["utterances_per_identity"].get<std::size_t>();
  c.corpus.test_per_identity = co["test_per_identity"].get<std::size_t>();
  c.corpus.min_seconds = co["min_seconds"].get<double>();
  c.model = training::face_tts_config_from_json(j["model"]);
  const auto& p = j["pretrain"];
  c.pretrain.steps = p["steps"].get<std::size_t>();
  c.pretrain.batch_identities = p["batch_identities"].get<std::size_t>();
  c.pretrain.crop_frames = p["crop_frames"].get<std::size_t>();
  c.pretrain.lr = p["lr"].get<double>();
  c.pretrain.temperature = p["temperature"].get<double>();
  const auto& t = j["train"];
  c.train.steps = t["steps"].get<std::size_t>();
  c.train.batch_size = t["batch_size"].get<std::size_t>();
  c.train.base_lr = t["base_lr"].get<double>();
  c.train.visual_lr = t["visual_lr"].get<double>();
  c.train.weights.gamma = t["gamma"].get<double>();
  c.train.crop_frames = t["crop_frames"].get<std::size_t>();
  c.train.checkpoint_every = t["checkpoint_every"].get<std::size_t>();
  const auto& s = j["synth"];
  c.synth.steps = s["steps"].get<std::size_t>();
  c.synth.duration_scale = s["duration_scale"].get<double>();
  c.synth.terminal_offset = s["terminal_offset"].get<double>();
  c.synth.griffin_lim_iters = s["griffin_lim_iters"].get<std::size_t>();
  c.eval.trials = j["eval"]["trials"].get<std::size_t>();
  c.eval.via_waveform = j["eval"]["via_waveform"].get<bool>();
  c.sample_rate = j["audio"]["sample_rate"].get<int>();
  c.n_mels = j["audio"]["n_mels"].get<std::size_t>();
  return c;
}

nlohmann::json parse_config_text(std::string_view text) {
  json root = json::object();
  std::vector<std::string> section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header on config line " + std::to_string(line));
      section = split_key(trim(s.substr(1, s.size() - 2)), line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value on config line " + std::to_string(line));
    auto path = section;
    for (auto& k : split_key(trim(s.substr(0, eq)), line)) path.push_back(std::move(k));
    const std::string value = trim(s.substr(eq + 1));
    json v;
    try {
      v = json::parse(value);
    } catch (const json::exception&) {
      throw ConfigError("cannot parse value '" + value + "' on config line " + std::to_string(line));
    }
    if (v.is_object() || v.is_null()) {
      throw ConfigError("unsupported value '" + value + "' on config line " + std::to_string(line));
    }
    json* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      node = &(*node)[path[i]];
      if (!node->is_object() && !node->is_null()) {
        throw ConfigError("key " + path[i] + " redefined as a section on config line " + std::to_string(line));
      }
    }
    if (node->contains(path.back())) {
      throw ConfigError("duplicate key " + path.back() + " on config line " + std::to_string(line));
    }
    (*node)[path.back()] = std::move(v);
  }
  return root;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace facetts::cli
