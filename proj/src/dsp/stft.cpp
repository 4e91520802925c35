#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "facetts/common/errors.hpp"
#include "facetts/dsp/audio.hpp"

namespace facetts::dsp {

namespace {

constexpr double kIstftRidge = 1e-3;

// Plans are created once under a lock; executing a plan on caller-owned
// buffers through the new-array interface is thread-safe.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  FftPlans() {
    std::vector<double> real(kFftSize);
    std::vector<fftw_complex> spec(kNumBins);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), real.data(), spec.data(), flags);
    inverse = fftw_plan_dft_c2r_1d(static_cast<int>(kFftSize), spec.data(), real.data(), flags);
    if (!forward || !inverse) throw Error("FFTW planning failed");
  }
  ~FftPlans() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
  }
};

const FftPlans& plans() {
  static std::mutex mu;
  std::lock_guard lock(mu);
  static const FftPlans p;
  return p;
}

}  // namespace

std::size_t frame_count(std::size_t num_samples) {
  if (num_samples < kWinSamples) {
    throw InputError("audio of " + std::to_string(num_samples) + " samples is shorter than one analysis window (" +
                     std::to_string(kWinSamples) + ")");
  }
  return (num_samples - kWinSamples) / kHopSamples + 1;
}

std::size_t span_samples(std::size_t frames) { return frames == 0 ? 0 : (frames - 1) * kHopSamples + kWinSamples; }

const std::vector<double>& analysis_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWinSamples);
    for (std::size_t n = 0; n < kWinSamples; ++n) {
      v[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / kWinSamples);
    }
    return v;
  }();
  return w;
}

Stft stft(std::span<const double> samples) {
  const auto& p = plans();
  const auto& w = analysis_window();
  Stft out;
  out.frames = frame_count(samples.size());
  out.bins.resize(out.frames * kNumBins);
  std::vector<double> buf(kFftSize, 0.0);
  std::vector<fftw_complex> spec(kNumBins);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const double* src = samples.data() + t * kHopSamples;
    for (std::size_t n = 0; n < kWinSamples; ++n) buf[n] = src[n] * w[n];
    std::fill(buf.begin() + kWinSamples, buf.end(), 0.0);
    fftw_execute_dft_r2c(p.forward, buf.data(), spec.data());
    for (std::size_t k = 0; k < kNumBins; ++k) out.at(t, k) = {spec[k][0], spec[k][1]};
  }
  return out;
}

std::vector<double> istft(const Stft& spec) {
  const auto& p = plans();
  const auto& w = analysis_window();
  const std::size_t len = span_samples(spec.frames);
  std::vector<double> out(len, 0.0), wsum(len, 0.0);
  std::vector<double> buf(kFftSize);
  std::vector<fftw_complex> bins(kNumBins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < kNumBins; ++k) {
      bins[k][0] = spec.at(t, k).real();
      bins[k][1] = spec.at(t, k).imag();
    }
    fftw_execute_dft_c2r(p.inverse, bins.data(), buf.data());
    const std::size_t off = t * kHopSamples;
    for (std::size_t n = 0; n < kWinSamples; ++n) {
      out[off + n] += w[n] * buf[n] / static_cast<double>(kFftSize);
      wsum[off + n] += w[n] * w[n];
    }
  }
  // Samples near the ends are seen only through tiny window weights; the small
  // ridge term keeps them from being amplified without bound.
  for (std::size_t n = 0; n < len; ++n) out[n] /= wsum[n] + kIstftRidge;
  return out;
}

}  // namespace facetts::dsp
