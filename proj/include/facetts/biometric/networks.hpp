#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "facetts/biometric/image.hpp"
#include "facetts/common/matrix.hpp"
#include "facetts/common/rng.hpp"
#include "facetts/diffcore/layers.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::bio {

inline constexpr std::size_t kEmbeddingDim = 512;
/// Blocks 1 and 2 never contribute feature taps.
inline constexpr std::size_t kUntappedBlocks = 2;
inline constexpr std::size_t kMinAudioFrames = 17;

struct AudioNetConfig {
  /// One conv block per entry; block count B = widths.size() >= 3.
  std::vector<std::size_t> widths{32, 64, 128, 128, 256};
  std::size_t embed_dim = kEmbeddingDim;
  std::size_t mel_dim = 128;
  /// Log-mel input enters as (x + input_shift) * input_scale.
  double input_shift = 5.0;
  double input_scale = 0.25;
};

struct AudioOutput {
  dc::Tensor embedding;          // [embed_dim], unit norm
  std::vector<dc::Tensor> taps;  // outputs of blocks 3..B, in order
};

/// Audio network F: B blocks of 3x3 conv + ReLU over the T x mel grid (a fixed
/// frequency-coordinate channel rides along with the mel), 2x2 average pooling after
/// every block but the last, global average pooling and a linear head.
class AudioNet {
 public:
  AudioNet() = default;
  AudioNet(const AudioNetConfig& config, Rng& rng);

  /// mel: [T, mel_dim]. Throws InputError below min_frames().
  AudioOutput forward(const dc::Tensor& mel) const;
  AudioOutput forward(const Matrix& mel) const;
  /// Feature taps only (blocks 3..B); skips the embedding head.
  std::vector<dc::Tensor> taps(const dc::Tensor& mel) const;
  std::vector<dc::Tensor> taps(const Matrix& mel) const;

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t min_frames() const;
  const AudioNetConfig& config() const { return config_; }
  void collect(dc::ParamList& out, const std::string& prefix) const;

 private:
  dc::Tensor trunk(const dc::Tensor& mel, std::vector<dc::Tensor>& taps) const;

  AudioNetConfig config_;
  std::vector<dc::Conv2d> blocks_;
  dc::Linear head_;
};

struct VisualNetConfig {
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t embed_dim = kEmbeddingDim;
};

/// Visual network G: stride-2 3x3 conv + ReLU blocks, global average pooling, linear head.
class VisualNet {
 public:
  VisualNet() = default;
  VisualNet(const VisualNetConfig& config, Rng& rng);

  /// image: [3, H, W] in [0, 1]. Returns a unit-norm [embed_dim] embedding.
  dc::Tensor forward(const dc::Tensor& image) const;
  dc::Tensor forward(const FaceImage& face) const;

  const VisualNetConfig& config() const { return config_; }
  void collect(dc::ParamList& out, const std::string& prefix) const;

 private:
  VisualNetConfig config_;
  std::vector<dc::Conv2d> blocks_;
  dc::Linear head_;
};

struct BiometricConfig {
  AudioNetConfig audio;
  VisualNetConfig visual;
};

struct BiometricModel {
  BiometricModel() = default;
  BiometricModel(const BiometricConfig& config, Rng& rng);

  dc::ParamList audio_params() const;
  dc::ParamList visual_params() const;
  dc::ParamList params() const;

  BiometricConfig config;
  AudioNet audio;
  VisualNet visual;
};

/// Cosine similarity; invariant to positive rescaling of either argument.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace facetts::bio
