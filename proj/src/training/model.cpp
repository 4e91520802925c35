#include "facetts/training/model.hpp"

#include "facetts/common/errors.hpp"

namespace facetts::training {

namespace {

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field ") + key + ": " + e.what());
  }
}

void append(dc::ParamList& out, const dc::ParamList& more) { out.insert(out.end(), more.begin(), more.end()); }

const std::string& vocab_string() { return text::Vocab::standard().symbols(); }

}  // namespace

void FaceTtsConfig::validate() const {
  schedule.validate();
  if (text.spk_dim != bio.visual.embed_dim || score.spk_dim != bio.visual.embed_dim) {
    throw ConfigError("speaker embedding width must match the visual network's embedding");
  }
  if (text.mel_dim != score.mel_dim || text.mel_dim != bio.audio.mel_dim) {
    throw ConfigError("mel width must agree across encoder, score network and audio network");
  }
  if (text.vocab_size != text::Vocab::standard().size()) throw ConfigError("vocab_size must match the symbol set");
  if (bio.audio.widths.size() < 3) throw ConfigError("audio network needs at least 3 blocks");
  if (text.channels == 0 || text.layers == 0 || text.kernel % 2 == 0 || text.dp_kernel % 2 == 0) {
    throw ConfigError("text encoder needs positive widths and odd kernels");
  }
  if (score.c1 == 0 || score.c2 == 0 || score.c3 == 0 || score.time_dim % 2 != 0) {
    throw ConfigError("score network needs positive widths and an even time embedding");
  }
}

nlohmann::json to_json(const bio::BiometricConfig& c) {
  return {{"audio_widths", c.audio.widths}, {"audio_embed", c.audio.embed_dim}, {"audio_mel", c.audio.mel_dim},
          {"audio_shift", c.audio.input_shift}, {"audio_scale", c.audio.input_scale},
          {"visual_widths", c.visual.widths}, {"visual_embed", c.visual.embed_dim}};
}

bio::BiometricConfig biometric_config_from_json(const nlohmann::json& j) {
  bio::BiometricConfig c;
  read_into(j, "audio_widths", c.audio.widths);
  read_into(j, "audio_embed", c.audio.embed_dim);
  read_into(j, "audio_mel", c.audio.mel_dim);
  read_into(j, "audio_shift", c.audio.input_shift);
  read_into(j, "audio_scale", c.audio.input_scale);
  read_into(j, "visual_widths", c.visual.widths);
  read_into(j, "visual_embed", c.visual.embed_dim);
  return c;
}

nlohmann::json to_json(const FaceTtsConfig& c) {
  nlohmann::json text = {{"vocab_size", c.text.vocab_size}, {"channels", c.text.channels},
                         {"layers", c.text.layers},         {"kernel", c.text.kernel},
                         {"dp_channels", c.text.dp_channels}, {"dp_layers", c.text.dp_layers},
                         {"dp_kernel", c.text.dp_kernel},   {"mel_dim", c.text.mel_dim},
                         {"spk_dim", c.text.spk_dim}};
  nlohmann::json score = {{"c1", c.score.c1},           {"c2", c.score.c2},           {"c3", c.score.c3},
                          {"time_dim", c.score.time_dim}, {"emb_dim", c.score.emb_dim}, {"spk_dim", c.score.spk_dim},
                          {"mel_dim", c.score.mel_dim}, {"mu_shift", c.score.mu_shift}, {"mu_scale", c.score.mu_scale}};
  return {{"text", text},
          {"score", score},
          {"schedule", {{"beta0", c.schedule.beta0}, {"beta1", c.schedule.beta1}}},
          {"bio", to_json(c.bio)}};
}

FaceTtsConfig face_tts_config_from_json(const nlohmann::json& j) {
  FaceTtsConfig c;
  if (j.contains("text")) {
    const auto& t = j.at("text");
    read_into(t, "vocab_size", c.text.vocab_size);
    read_into(t, "channels", c.text.channels);
    read_into(t, "layers", c.text.layers);
    read_into(t, "kernel", c.text.kernel);
    read_into(t, "dp_channels", c.text.dp_channels);
    read_into(t, "dp_layers", c.text.dp_layers);
    read_into(t, "dp_kernel", c.text.dp_kernel);
    read_into(t, "mel_dim", c.text.mel_dim);
    read_into(t, "spk_dim", c.text.spk_dim);
  }
  if (j.contains("score")) {
    const auto& s = j.at("score");
    read_into(s, "c1", c.score.c1);
    read_into(s, "c2", c.score.c2);
    read_into(s, "c3", c.score.c3);
    read_into(s, "time_dim", c.score.time_dim);
    read_into(s, "emb_dim", c.score.emb_dim);
    read_into(s, "spk_dim", c.score.spk_dim);
    read_into(s, "mel_dim", c.score.mel_dim);
    read_into(s, "mu_shift", c.score.mu_shift);
    read_into(s, "mu_scale", c.score.mu_scale);
  }
  if (j.contains("schedule")) {
    read_into(j.at("schedule"), "beta0", c.schedule.beta0);
    read_into(j.at("schedule"), "beta1", c.schedule.beta1);
  }
  if (j.contains("bio")) c.bio = biometric_config_from_json(j.at("bio"));
  return c;
}

FaceTts::FaceTts(const FaceTtsConfig& cfg, Rng& rng) : config(cfg) {
  config.validate();
  encoder = text::TextEncoder(config.text, rng);
  score = diffusion::ScoreNetwork(config.score, config.schedule, rng);
  bio = bio::BiometricModel(config.bio, rng);
}

dc::ParamList FaceTts::base_params() const {
  dc::ParamList out;
  encoder.collect(out, "text");
  score.collect(out, "score");
  return out;
}

dc::ParamList FaceTts::params() const {
  auto out = base_params();
  append(out, bio.params());
  return out;
}

void save_face_tts(const std::filesystem::path& path, const FaceTts& model, dc::Container extra) {
  extra.meta["kind"] = "face_tts";
  extra.meta["config"] = to_json(model.config);
  extra.meta["vocab"] = vocab_string();
  dc::store_params(extra, model.params());
  dc::write_container(path, extra);
}

FaceTts face_tts_from_container(const dc::Container& c) {
  if (c.meta.value("kind", std::string()) != "face_tts") throw ParseError("not a model checkpoint");
  if (c.meta.value("vocab", std::string()) != vocab_string()) throw ParseError("checkpoint vocabulary differs");
  Rng rng(0);
  FaceTts model(face_tts_config_from_json(c.meta.at("config")), rng);
  dc::restore_params(c, model.params());
  return model;
}

FaceTts load_face_tts(const std::filesystem::path& path) { return face_tts_from_container(dc::read_container(path)); }

void save_biometric(const std::filesystem::path& path, const bio::BiometricModel& model) {
  dc::Container c;
  c.meta["kind"] = "biometric";
  c.meta["config"] = to_json(model.config);
  dc::store_params(c, model.params());
  dc::write_container(path, c);
}

bio::BiometricModel biometric_from_container(const dc::Container& c) {
  const auto kind = c.meta.value("kind", std::string());
  bio::BiometricConfig cfg;
  if (kind == "biometric") {
    cfg = biometric_config_from_json(c.meta.at("config"));
  } else if (kind == "face_tts") {
    cfg = face_tts_config_from_json(c.meta.at("config")).bio;
  } else {
    throw ParseError("not a biometric or model checkpoint");
  }
  Rng rng(0);
  bio::BiometricModel model(cfg, rng);
  dc::restore_params(c, model.params());
  return model;
}

bio::BiometricModel load_biometric(const std::filesystem::path& path) {
  return biometric_from_container(dc::read_container(path));
}

}  // namespace facetts::training
