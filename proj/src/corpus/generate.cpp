#include <array>
#include <cmath>
#include <numbers>

#include "facetts/common/errors.hpp"
#include "facetts/corpus/corpus.hpp"

namespace facetts::corpus {

namespace {

constexpr std::array<const char*, 48> kWords = {
    "the",   "a",     "voice", "face",  "sound", "light", "river", "stone", "green", "blue",  "open",  "close",
    "early", "late",  "north", "south", "small", "large", "quiet", "loud",  "warm",  "cold",  "hand",  "eye",
    "read",  "write", "walk",  "talk",  "over",  "under", "happy", "calm",  "bird",  "tree",  "moon",  "sun",
    "seven", "nine",  "city",  "field", "paper", "glass", "rain",  "snow",  "we",    "they",  "don't", "it's"};

constexpr double kBaseCharSeconds = 0.075;
constexpr double kSpaceSeconds = 0.05;
constexpr double kEdgeSilence = 0.05;

double frac(double x) { return x - std::floor(x); }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

double char_seconds(char c, double rate) {
  if (c == ' ') return kSpaceSeconds * rate;
  return kBaseCharSeconds * rate * (is_vowel(c) ? 1.4 : 1.0);
}

struct Phone {
  double pitch_mult;
  double f1;
  double f2;
  double gain;
};

// Fixed per-character pattern shared by every identity.
Phone phone_of(char c) {
  const double k = static_cast<double>(c == '\'' ? 26 : c - 'a');
  Phone p;
  p.pitch_mult = 1.0 + 0.06 * std::sin(1.7 * k + 0.3);
  p.f1 = 550.0 + 500.0 * frac(0.618034 * (k + 1.0));
  p.f2 = 1300.0 + 1600.0 * frac(0.414214 * (k + 2.0));
  p.gain = is_vowel(c) ? 1.0 : 0.55;
  return p;
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: rgb[0] = v, rgb[1] = t, rgb[2] = p; break;
    case 1: rgb[0] = q, rgb[1] = v, rgb[2] = p; break;
    case 2: rgb[0] = p, rgb[1] = v, rgb[2] = t; break;
    case 3: rgb[0] = p, rgb[1] = q, rgb[2] = v; break;
    case 4: rgb[0] = t, rgb[1] = p, rgb[2] = v; break;
    default: rgb[0] = v, rgb[1] = p, rgb[2] = q; break;
  }
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

IdentityLatent identity_latent(std::uint64_t seed, std::size_t id) {
  Rng offsets(Rng::derive(seed, 0x1d));
  const double o1 = offsets.uniform(), o2 = offsets.uniform(), o3 = offsets.uniform();
  const double n = static_cast<double>(id);
  const double u_pitch = frac(o1 + n * 0.6180339887498949);
  const double u_tilt = frac(o2 + n * 0.7548776662466927);
  const double u_rate = frac(o3 + n * 0.5698402909980532);
  IdentityLatent who;
  who.id = id;
  who.pitch_base = kMinPitch * std::pow(kMaxPitch / kMinPitch, u_pitch);
  who.tilt = 2.0 * u_tilt - 1.0;
  who.rate = 0.7 + 0.6 * u_rate;
  who.palette_seed = Rng::derive(seed, 0x10000 + 2 * id);
  who.geometry_seed = Rng::derive(seed, 0x10001 + 2 * id);
  return who;
}

std::string random_transcript(Rng& rng, double rate, double min_seconds) {
  std::string text;
  double seconds = 2.0 * kEdgeSilence;
  while (seconds < min_seconds) {
    if (!text.empty()) {
      text.push_back(' ');
      seconds += char_seconds(' ', rate);
    }
    const std::string w = kWords[rng.index(kWords.size())];
    for (char c : w) seconds += char_seconds(c, rate);
    text += w;
  }
  return text;
}

dsp::WaveForm synthesize_voice(const IdentityLatent& who, const std::string& transcript, Rng& rng) {
  const double sr = dsp::kSampleRate;
  std::vector<double> out(static_cast<std::size_t>(kEdgeSilence * sr), 0.0);
  double phase = 0.0;
  double f0 = who.pitch_base;
  const double glide = std::exp(-1.0 / (0.015 * sr));
  for (char c : transcript) {
    const auto n = static_cast<std::size_t>(char_seconds(c, who.rate) * sr);
    if (c == ' ') {
      out.insert(out.end(), n, 0.0);
      continue;
    }
    const Phone ph = phone_of(c);
    const double target = who.pitch_base * ph.pitch_mult;
    const double ramp = 0.01 * sr;
    for (std::size_t i = 0; i < n; ++i) {
      f0 = glide * f0 + (1.0 - glide) * target;
      phase += 2.0 * std::numbers::pi * f0 / sr;
      if (phase > 2.0 * std::numbers::pi * 1e6) phase = std::fmod(phase, 2.0 * std::numbers::pi);
      double s = 0.0;
      for (int k = 1; k * f0 < 7000.0; ++k) {
        const double fk = k * f0;
        const double formant = 1.0 + 3.0 * std::exp(-std::pow((fk - ph.f1) / 250.0, 2)) +
                               2.0 * std::exp(-std::pow((fk - ph.f2) / 400.0, 2));
        // Harmonic roll-off keeps the pitch band fundamental-dominated; tilt shapes the upper spectrum.
        const double tilt_gain = std::pow(std::max(fk, 1000.0) / 1000.0, 1.2 * who.tilt);
        s += formant * tilt_gain * std::sin(k * phase) / (k * k);
      }
      const double di = static_cast<double>(i);
      const double env = std::min({1.0, di / ramp, (static_cast<double>(n) - di) / ramp});
      out.push_back(ph.gain * env * s);
    }
  }
  out.insert(out.end(), static_cast<std::size_t>(kEdgeSilence * sr), 0.0);
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  dsp::WaveForm w;
  w.samples.resize(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) w.samples[i] = 0.5 * out[i] / peak + 0.002 * rng.normal();
  for (auto& v : w.samples) v = std::clamp(v, -1.0, 1.0);
  return w;
}

bio::RgbImage render_face(const IdentityLatent& who, Rng& rng) {
  constexpr std::size_t S = bio::kFaceSize;
  Rng palette(who.palette_seed), geometry(who.geometry_seed);
  const double u_pitch = std::log(who.pitch_base / kMinPitch) / std::log(kMaxPitch / kMinPitch);
  double skin[3], hair[3], bg[3];
  hsv_to_rgb(0.05 + 0.8 * u_pitch, 0.55, 0.85, skin);
  hsv_to_rgb(palette.uniform(), 0.5, 0.25 + 0.3 * palette.uniform(), hair);
  const double half_w = 52.0 + 22.0 * who.tilt;
  const double half_h = 78.0;
  const double eye_dx = 0.35 + 0.15 * geometry.uniform();
  const double eye_y = -0.25 + 0.1 * geometry.uniform();
  const double mouth_w = 0.3 + 0.25 * geometry.uniform();

  // Nuisance jitter per render.
  const double cx = 112.0 + rng.uniform(-8.0, 8.0), cy = 118.0 + rng.uniform(-8.0, 8.0);
  const double bright = 1.0 + rng.uniform(-0.08, 0.08);
  const double bg_level = rng.uniform(0.75, 0.95);
  hsv_to_rgb(rng.uniform(), 0.1, bg_level, bg);

  bio::RgbImage img{S, S, std::vector<std::uint8_t>(S * S * 3)};
  for (std::size_t y = 0; y < S; ++y) {
    for (std::size_t x = 0; x < S; ++x) {
      const double nx = (static_cast<double>(x) - cx) / half_w;
      const double ny = (static_cast<double>(y) - cy) / half_h;
      const double* col = bg;
      double shade = 1.0;
      if (nx * nx + ny * ny <= 1.0) {
        col = skin;
        shade = bright;
        const double ex = std::abs(nx) - eye_dx, ey = ny - eye_y;
        if (ex * ex * 4.0 + ey * ey * 16.0 < 0.02) col = hair, shade = 0.4;
        if (std::abs(ny - 0.45) < 0.03 && std::abs(nx) < mouth_w) col = hair, shade = 0.7;
      } else if (ny < -0.55 && nx * nx + ny * ny * 0.8 <= 1.35) {
        col = hair;
      }
      auto* p = img.at(x, y);
      for (int c = 0; c < 3; ++c) p[c] = to_byte(col[c] * shade + 0.015 * rng.normal());
    }
  }
  return img;
}

Manifest generate_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir) {
  if (options.identities < 2) throw InputError("corpus needs at least 2 identities");
  if (options.utterances_per_identity == 0) throw InputError("corpus needs at least 1 utterance per identity");
  if (options.test_per_identity >= options.utterances_per_identity && options.test_per_identity != 0) {
    throw InputError("test_per_identity must leave training utterances");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "faces", ec);
  if (ec) throw IoError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.root = out_dir;
  std::vector<ManifestRecord> train, test;
  for (std::size_t id = 0; id < options.identities; ++id) {
    const IdentityLatent who = identity_latent(options.seed, id);
    for (std::size_t u = 0; u < options.utterances_per_identity; ++u) {
      Rng rng(Rng::derive(options.seed, 0x100000 + id * 100000 + u));
      char name[32];
      std::snprintf(name, sizeof(name), "id%02zu_u%03zu", id, u);
      ManifestRecord rec;
      rec.utt_id = name;
      rec.identity = id;
      rec.transcript = random_transcript(rng, who.rate, options.min_seconds);
      rec.wav = std::filesystem::path("wav") / (rec.utt_id + ".wav");
      rec.face = std::filesystem::path("faces") / (rec.utt_id + ".ppm");
      dsp::write_wav(out_dir / rec.wav, synthesize_voice(who, rec.transcript, rng));
      bio::write_ppm(out_dir / rec.face, render_face(who, rng));
      m.records.push_back(rec);
      (u + options.test_per_identity >= options.utterances_per_identity ? test : train).push_back(rec);
    }
  }
  write_manifest(out_dir / "manifest.jsonl", m.records);
  write_manifest(out_dir / "train.jsonl", train);
  write_manifest(out_dir / "test.jsonl", test);
  return m;
}

}  // namespace facetts::corpus
