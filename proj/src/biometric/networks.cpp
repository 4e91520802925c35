#include "facetts/biometric/networks.hpp"

#include <cmath>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::bio {

AudioNet::AudioNet(const AudioNetConfig& config, Rng& rng) : config_(config) {
  if (config.widths.size() < kUntappedBlocks + 1) {
    throw ConfigError("audio network needs at least 3 blocks, got " + std::to_string(config.widths.size()));
  }
  std::size_t in = 2;
  for (std::size_t w : config.widths) {
    if (w == 0) throw ConfigError("audio network widths must be positive");
    blocks_.emplace_back(in, w, 3, rng);
    in = w;
  }
  head_ = dc::Linear(in, config.embed_dim, rng);
}

std::size_t AudioNet::min_frames() const {
  const std::size_t pooled = std::size_t{1} << (blocks_.size() - 1);
  return std::max(kMinAudioFrames, pooled);
}

dc::Tensor AudioNet::trunk(const dc::Tensor& mel, std::vector<dc::Tensor>& taps) const {
  if (mel.rank() != 2 || mel.dim(1) != config_.mel_dim) {
    throw ContractViolation("audio_embed: mel must be [T, " + std::to_string(config_.mel_dim) + "], got " +
                            dc::shape_str(mel.shape()));
  }
  const std::size_t T = mel.dim(0), M = mel.dim(1);
  if (T < min_frames()) {
    throw InputError("audio_embed: " + std::to_string(T) + " frames is below the minimum of " +
                     std::to_string(min_frames()));
  }
  std::vector<double> coord(T * M);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) coord[t * M + m] = 2.0 * static_cast<double>(m) / static_cast<double>(M - 1) - 1.0;
  }
  const auto x = dc::scale(dc::shift(mel, config_.input_shift), config_.input_scale);
  dc::Tensor h = dc::concat0({dc::reshape(x, {1, T, M}), dc::Tensor::from_data({1, T, M}, std::move(coord))});

  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    h = dc::relu(blocks_[b].forward(h));
    if (b + 1 < blocks_.size()) h = dc::avg_pool2d(h, 2, h.dim(2) >= 2 ? 2 : 1);
    if (b >= kUntappedBlocks) taps.push_back(h);
  }
  return h;
}

AudioOutput AudioNet::forward(const dc::Tensor& mel) const {
  AudioOutput out;
  const auto h = trunk(mel, out.taps);
  out.embedding = dc::l2_normalize(head_.forward(dc::global_avg_pool(h)));
  return out;
}

std::vector<dc::Tensor> AudioNet::taps(const dc::Tensor& mel) const {
  std::vector<dc::Tensor> out;
  trunk(mel, out);
  return out;
}

std::vector<dc::Tensor> AudioNet::taps(const Matrix& mel) const {
  return taps(dc::Tensor::from_data({mel.rows, mel.cols}, mel.data));
}

AudioOutput AudioNet::forward(const Matrix& mel) const {
  return forward(dc::Tensor::from_data({mel.rows, mel.cols}, mel.data));
}

void AudioNet::collect(dc::ParamList& out, const std::string& prefix) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].collect(out, prefix + ".block" + std::to_string(b + 1));
  head_.collect(out, prefix + ".head");
}

VisualNet::VisualNet(const VisualNetConfig& config, Rng& rng) : config_(config) {
  if (config.widths.empty()) throw ConfigError("visual network needs at least one block");
  std::size_t in = 3;
  for (std::size_t w : config.widths) {
    if (w == 0) throw ConfigError("visual network widths must be positive");
    blocks_.emplace_back(in, w, 3, rng, 2);
    in = w;
  }
  head_ = dc::Linear(in, config.embed_dim, rng);
}

dc::Tensor VisualNet::forward(const dc::Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ContractViolation("face_embed: image must be [3, H, W], got " + dc::shape_str(image.shape()));
  }
  dc::Tensor h = dc::scale(dc::shift(image, -0.5), 4.0);
  for (const auto& b : blocks_) h = dc::relu(b.forward(h));
  return dc::l2_normalize(head_.forward(dc::global_avg_pool(h)));
}

dc::Tensor VisualNet::forward(const FaceImage& face) const {
  if (face.chw.size() != 3 * kFaceSize * kFaceSize) throw ContractViolation("face_embed: face must be 224 x 224 x 3");
  return forward(dc::Tensor::from_data({3, kFaceSize, kFaceSize}, face.chw));
}

void VisualNet::collect(dc::ParamList& out, const std::string& prefix) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].collect(out, prefix + ".block" + std::to_string(b + 1));
  head_.collect(out, prefix + ".head");
}

BiometricModel::BiometricModel(const BiometricConfig& cfg, Rng& rng)
    : config(cfg), audio(cfg.audio, rng), visual(cfg.visual, rng) {
  if (cfg.audio.embed_dim != cfg.visual.embed_dim) throw ConfigError("audio and visual embedding sizes differ");
}

dc::ParamList BiometricModel::audio_params() const {
  dc::ParamList p;
  audio.collect(p, "bio.audio");
  return p;
}

dc::ParamList BiometricModel::visual_params() const {
  dc::ParamList p;
  visual.collect(p, "bio.visual");
  return p;
}

dc::ParamList BiometricModel::params() const {
  auto p = audio_params();
  const auto v = visual_params();
  p.insert(p.end(), v.begin(), v.end());
  return p;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ContractViolation("cosine: vectors must be non-empty and equal length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw EvaluationError("cosine: zero vector");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace facetts::bio
