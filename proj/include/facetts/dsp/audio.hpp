#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "facetts/common/matrix.hpp"

namespace facetts::dsp {

// Analysis configuration: 16 kHz audio, 62.5 ms Hann window zero-padded to a
// 1024-point FFT, 10 ms hop, 128 mel bands over 0..8 kHz, log floor 1e-5.
inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kHopSamples = 160;
inline constexpr std::size_t kWinSamples = 1000;
inline constexpr std::size_t kFftSize = 1024;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kNumMels = 128;
inline constexpr double kFmin = 0.0;
inline constexpr double kFmax = 8000.0;
inline constexpr double kLogFloor = 1e-5;

struct WaveForm {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// T x 128 log-mel energies; row t is frame t.
struct MelSpectrogram {
  Matrix frames;
  double hop_seconds = 0.010;
  double win_seconds = 0.0625;

  std::size_t num_frames() const { return frames.rows; }
};

/// Complex STFT, frames x kNumBins, row-major.
struct Stft {
  std::size_t frames = 0;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(std::size_t t, std::size_t k) { return bins[t * kNumBins + k]; }
  const std::complex<double>& at(std::size_t t, std::size_t k) const { return bins[t * kNumBins + k]; }
};

/// Frames produced by `num_samples` samples: floor((n - win) / hop) + 1. Throws InputError below one window.
std::size_t frame_count(std::size_t num_samples);
/// Samples spanned by `frames` analysis frames.
std::size_t span_samples(std::size_t frames);

/// Periodic Hann window of kWinSamples points.
const std::vector<double>& analysis_window();

Stft stft(std::span<const double> samples);
/// Least-squares inverse (weighted overlap-add) producing span_samples(frames) samples.
std::vector<double> istft(const Stft& spec);

class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate, double fmin, double fmax);

  /// The pipeline filterbank (128 bands, 1024-point FFT, 16 kHz, 0..8000 Hz).
  static const MelFilterbank& standard();

  static double hz_to_mel(double hz);
  static double mel_to_hz(double mel);

  std::size_t num_mels() const { return weights_.rows; }
  std::size_t num_bins() const { return weights_.cols; }
  /// n_mels x n_bins triangular weights (peak 1).
  const Matrix& weights() const { return weights_; }
  /// n_bins x n_mels Moore-Penrose pseudo-inverse of weights().
  const Matrix& pseudo_inverse() const { return pinv_; }
  /// Center frequency of each band in Hz.
  const std::vector<double>& center_hz() const { return centers_; }
  /// First and one-past-last FFT bin with nonzero weight in band `m`.
  std::pair<std::size_t, std::size_t> support(std::size_t m) const;

  /// Band index whose center frequency is nearest `hz`.
  std::size_t nearest_band(double hz) const;

 private:
  Matrix weights_;
  Matrix pinv_;
  std::vector<double> centers_;
};

/// log(max(filterbank . |STFT|^2, 1e-5)). Requires 16 kHz input of at least one window.
MelSpectrogram mel_analyze(const WaveForm& wave);

struct GriffinLimOptions {
  std::size_t iters = 32;
  std::uint64_t seed = 0;
};

struct GriffinLimResult {
  WaveForm wave;
  /// Per-iteration projection residual || |STFT(ISTFT(X_k))| - A ||_F / ||A||_F.
  std::vector<double> residuals;
};

/// Mel energies -> nonnegative linear power (T x kNumBins): pseudo-inverse lift
/// refined by nonnegative least-squares multiplicative updates.
std::vector<double> lift_to_linear_power(const MelSpectrogram& mel, std::size_t refine_iters = 64);

/// Mel -> linear magnitude via lift_to_linear_power, then Griffin-Lim phase recovery.
GriffinLimResult griffin_lim_detailed(const MelSpectrogram& mel, const GriffinLimOptions& options);
WaveForm griffin_lim(const MelSpectrogram& mel, const GriffinLimOptions& options = {});

/// Pearson correlation over all cells of two equally shaped spectrograms.
double mel_correlation(const MelSpectrogram& a, const MelSpectrogram& b);

// 16-bit PCM mono RIFF at 16 kHz.
std::vector<unsigned char> encode_wav(const WaveForm& wave);
WaveForm decode_wav(std::span<const unsigned char> bytes);
void write_wav(const std::filesystem::path& path, const WaveForm& wave);
WaveForm read_wav(const std::filesystem::path& path);
/// Duration in seconds from the header alone.
double wav_duration_seconds(const std::filesystem::path& path);

/// Mel dumps share the tensor container format: one entry "mel" of shape [T, 128].
void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel_dump(const std::filesystem::path& path);

}  // namespace facetts::dsp
