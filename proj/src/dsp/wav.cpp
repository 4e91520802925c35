#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/container.hpp"
#include "facetts/dsp/audio.hpp"

namespace facetts::dsp {

namespace {

void put_u32(std::vector<unsigned char>& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u16(std::vector<unsigned char>& o, std::uint16_t v) {
  o.push_back(static_cast<unsigned char>(v & 0xff));
  o.push_back(static_cast<unsigned char>(v >> 8));
}
std::uint32_t get_u32(std::span<const unsigned char> b, std::size_t at) {
  return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
         std::uint32_t{b[at + 3]} << 24;
}
std::uint16_t get_u16(std::span<const unsigned char> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path, std::size_t limit = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (limit == 0) return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  std::vector<unsigned char> out(limit);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(limit));
  out.resize(static_cast<std::size_t>(is.gcount()));
  return out;
}

struct WavLayout {
  std::uint32_t sample_rate = 0;
  std::size_t data_offset = 0;
  std::size_t data_bytes = 0;
};

// Walks RIFF chunks; the data chunk size may exceed what was read (header-only probes).
WavLayout parse_layout(std::span<const unsigned char> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE file");
  }
  WavLayout out;
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, at + 4);
    if (std::memcmp(b.data() + at, "fmt ", 4) == 0) {
      if (at + 8 + 16 > b.size()) throw ParseError("truncated fmt chunk");
      const auto format = get_u16(b, at + 8);
      const auto channels = get_u16(b, at + 10);
      out.sample_rate = get_u32(b, at + 12);
      const auto bits = get_u16(b, at + 22);
      if (format != 1 || channels != 1 || bits != 16) {
        throw InputError("only 16-bit PCM mono WAV is supported");
      }
      have_fmt = true;
    } else if (std::memcmp(b.data() + at, "data", 4) == 0) {
      if (!have_fmt) throw ParseError("data chunk before fmt chunk");
      out.data_offset = at + 8;
      out.data_bytes = size;
      return out;
    }
    at += 8 + size + (size & 1);
  }
  throw ParseError("WAV file has no data chunk");
}

}  // namespace

std::vector<unsigned char> encode_wav(const WaveForm& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::vector<unsigned char> o;
  o.reserve(44 + 2 * n);
  o.insert(o.end(), {'R', 'I', 'F', 'F'});
  put_u32(o, 36 + 2 * n);
  o.insert(o.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(o, 16);
  put_u16(o, 1);
  put_u16(o, 1);
  put_u32(o, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(o, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(o, 2);
  put_u16(o, 16);
  o.insert(o.end(), {'d', 'a', 't', 'a'});
  put_u32(o, 2 * n);
  for (double s : wave.samples) {
    const double c = std::isfinite(s) ? std::clamp(s, -1.0, 1.0) : 0.0;
    put_u16(o, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  return o;
}

WaveForm decode_wav(std::span<const unsigned char> bytes) {
  const auto layout = parse_layout(bytes);
  if (layout.data_offset + layout.data_bytes > bytes.size()) throw ParseError("truncated WAV data chunk");
  WaveForm w;
  w.sample_rate = static_cast<int>(layout.sample_rate);
  w.samples.resize(layout.data_bytes / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(get_u16(bytes, layout.data_offset + 2 * i));
    w.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const WaveForm& wave) {
  const auto bytes = encode_wav(wave);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

WaveForm read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return decode_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

double wav_duration_seconds(const std::filesystem::path& path) {
  const auto head = slurp(path, 4096);
  const auto layout = parse_layout(head);
  if (layout.sample_rate == 0) throw ParseError("WAV sample rate is zero");
  return static_cast<double>(layout.data_bytes / 2) / layout.sample_rate;
}

void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel) {
  dc::Container c;
  c.meta = {{"kind", "mel"},
            {"sample_rate", kSampleRate},
            {"hop_seconds", mel.hop_seconds},
            {"win_seconds", mel.win_seconds},
            {"num_mels", mel.frames.cols}};
  c.add("mel", {mel.frames.rows, mel.frames.cols}, mel.frames.data);
  dc::write_container(path, c);
}

MelSpectrogram read_mel_dump(const std::filesystem::path& path) {
  const auto c = dc::read_container(path);
  const auto& e = c.at("mel");
  if (e.shape.size() != 2 || e.shape[1] != kNumMels) throw ParseError("mel dump must be T x 128");
  MelSpectrogram mel;
  mel.frames = Matrix(e.shape[0], e.shape[1], e.data);
  mel.hop_seconds = c.meta.value("hop_seconds", 0.010);
  mel.win_seconds = c.meta.value("win_seconds", 0.0625);
  return mel;
}

}  // namespace facetts::dsp
