#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "facetts/common/errors.hpp"
#include "facetts/common/rng.hpp"
#include "facetts/dsp/audio.hpp"

namespace facetts::dsp {

double MelFilterbank::hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelFilterbank::mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate, double fmin, double fmax)
    : weights_(n_mels, fft_size / 2 + 1), centers_(n_mels) {
  if (n_mels == 0 || !(fmax > fmin) || fmax > sample_rate / 2.0) {
    throw ContractViolation("MelFilterbank: invalid band layout");
  }
  const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    centers_[m] = c;
    for (std::size_t k = 0; k < weights_.cols; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double up = (f - lo) / (c - lo);
      const double down = (hi - f) / (hi - c);
      weights_(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> W(weights_.data.data(), weights_.rows, weights_.cols);
  const RowMat pinv = W.completeOrthogonalDecomposition().pseudoInverse();
  pinv_ = Matrix(weights_.cols, weights_.rows);
  Eigen::Map<RowMat>(pinv_.data.data(), pinv_.rows, pinv_.cols) = pinv;
}

const MelFilterbank& MelFilterbank::standard() {
  static const MelFilterbank fb(kNumMels, kFftSize, kSampleRate, kFmin, kFmax);
  return fb;
}

std::pair<std::size_t, std::size_t> MelFilterbank::support(std::size_t m) const {
  const auto row = weights_.row(m);
  std::size_t first = row.size(), last = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] > 0.0) {
      first = std::min(first, k);
      last = k + 1;
    }
  }
  return {first, last};
}

std::size_t MelFilterbank::nearest_band(double hz) const {
  std::size_t best = 0;
  for (std::size_t m = 1; m < centers_.size(); ++m) {
    if (std::abs(centers_[m] - hz) < std::abs(centers_[best] - hz)) best = m;
  }
  return best;
}

MelSpectrogram mel_analyze(const WaveForm& wave) {
  if (wave.sample_rate != kSampleRate) {
    throw InputError("expected " + std::to_string(kSampleRate) + " Hz audio, got " + std::to_string(wave.sample_rate));
  }
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw InputError("waveform contains non-finite samples");
  }
  const Stft spec = stft(wave.samples);
  const auto& fb = MelFilterbank::standard().weights();
  MelSpectrogram mel;
  mel.frames = Matrix(spec.frames, kNumMels);
  std::vector<double> power(kNumBins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < kNumBins; ++k) power[k] = std::norm(spec.at(t, k));
    for (std::size_t m = 0; m < kNumMels; ++m) {
      const auto w = fb.row(m);
      double e = 0.0;
      for (std::size_t k = 0; k < kNumBins; ++k) e += w[k] * power[k];
      mel.frames(t, m) = std::log(std::max(e, kLogFloor));
    }
  }
  return mel;
}

std::vector<double> lift_to_linear_power(const MelSpectrogram& mel, std::size_t refine_iters) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& fb = MelFilterbank::standard();
  const std::size_t T = mel.frames.rows;
  Eigen::Map<const RowMat> W(fb.weights().data.data(), kNumMels, kNumBins);
  Eigen::Map<const RowMat> pinv(fb.pseudo_inverse().data.data(), kNumBins, kNumMels);
  // Energies as columns: kNumMels x T.
  const RowMat energy = Eigen::Map<const RowMat>(mel.frames.data.data(), T, kNumMels).transpose().array().exp();
  RowMat power = (pinv * energy).cwiseMax(0.0);
  // Multiplicative updates can never revive an exact zero.
  const double seed_floor = 1e-3 * kLogFloor;
  power = power.array().max(seed_floor);
  // Lee-Seung nonnegative least-squares updates for min ||W P - E|| s.t. P >= 0.
  const RowMat wt_e = W.transpose() * energy;
  for (std::size_t it = 0; it < refine_iters; ++it) {
    const RowMat denom = W.transpose() * (W * power);
    power = power.array() * wt_e.array() / (denom.array() + 1e-30);
  }
  std::vector<double> out(T * kNumBins);
  Eigen::Map<RowMat>(out.data(), T, kNumBins) = power.transpose();
  return out;
}

GriffinLimResult griffin_lim_detailed(const MelSpectrogram& mel, const GriffinLimOptions& options) {
  if (options.iters < 1) throw ContractViolation("griffin_lim: iters must be >= 1");
  if (mel.frames.cols != kNumMels || mel.frames.rows == 0) {
    throw ContractViolation("griffin_lim: expected a non-empty T x 128 spectrogram");
  }
  const std::size_t T = mel.frames.rows;

  const std::vector<double> power = lift_to_linear_power(mel);
  std::vector<double> target(power.size());
  double target_norm = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    target[i] = std::sqrt(power[i]);
    target_norm += power[i];
  }
  target_norm = std::sqrt(target_norm);

  Rng rng(options.seed);
  Stft spec;
  spec.frames = T;
  spec.bins.resize(T * kNumBins);
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    spec.bins[i] = std::polar(target[i], 2.0 * std::numbers::pi * rng.uniform());
  }

  GriffinLimResult result;
  for (std::size_t it = 0; it < options.iters; ++it) {
    const Stft consistent = stft(istft(spec));
    double resid = 0.0;
    for (std::size_t i = 0; i < spec.bins.size(); ++i) {
      const double mag = std::abs(consistent.bins[i]);
      resid += (mag - target[i]) * (mag - target[i]);
      spec.bins[i] = mag > 0.0 ? consistent.bins[i] * (target[i] / mag) : std::complex<double>(target[i], 0.0);
    }
    result.residuals.push_back(target_norm > 0.0 ? std::sqrt(resid) / target_norm : 0.0);
  }
  result.wave.samples = istft(spec);
  for (auto& s : result.wave.samples) s = std::clamp(s, -1.0, 1.0);
  return result;
}

WaveForm griffin_lim(const MelSpectrogram& mel, const GriffinLimOptions& options) {
  return griffin_lim_detailed(mel, options).wave;
}

double mel_correlation(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames.rows != b.frames.rows || a.frames.cols != b.frames.cols || a.frames.data.empty()) {
    throw ContractViolation("mel_correlation: shape mismatch");
  }
  const auto& x = a.frames.data;
  const auto& y = b.frames.data;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace facetts::dsp
