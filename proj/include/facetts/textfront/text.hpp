#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "facetts/common/rng.hpp"
#include "facetts/diffcore/layers.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::text {

/// Character inventory: padding, space, apostrophe, then a..z.
class Vocab {
 public:
  explicit Vocab(std::string symbols);
  static const Vocab& standard();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbols() const { return symbols_; }
  char symbol(std::size_t id) const;
  /// Id of `c`, or size() when `c` is not in the inventory.
  std::size_t id(char c) const;

  static constexpr std::size_t kPad = 0;

 private:
  std::string symbols_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;

  std::size_t size() const { return ids.size(); }
};

/// Lowercases, maps whitespace to single spaces, drops symbols outside the vocabulary and trims.
std::string normalize(std::string_view text, const Vocab& vocab = Vocab::standard());
/// Throws InputError when nothing survives normalization.
TokenSequence normalize_and_tokenize(std::string_view text, const Vocab& vocab = Vocab::standard());
std::string detokenize(const TokenSequence& tokens, const Vocab& vocab = Vocab::standard());

struct TextEncoderConfig {
  std::size_t vocab_size = 29;
  std::size_t channels = 192;
  std::size_t layers = 4;
  std::size_t kernel = 5;
  std::size_t dp_channels = 192;
  std::size_t dp_layers = 2;
  std::size_t dp_kernel = 3;
  std::size_t mel_dim = 128;
  std::size_t spk_dim = 512;
};

struct TextEncoding {
  dc::Tensor mu_tokens;  // [L, mel_dim]
  dc::Tensor log_dur;    // [L]
};

/// Text encoder and duration predictor, both conditioned on the speaker embedding.
/// The duration predictor reads a stop-gradient copy of the encoder features.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& config, Rng& rng);

  /// spk: [spk_dim].
  TextEncoding forward(const TokenSequence& tokens, const dc::Tensor& spk) const;
  void collect(dc::ParamList& out, const std::string& prefix) const;
  const TextEncoderConfig& config() const { return config_; }

 private:
  struct Block {
    dc::Conv1d conv;
    dc::LayerNorm norm;
  };

  TextEncoderConfig config_;
  dc::Embedding embed_;
  dc::Linear spk_proj_;
  std::vector<Block> blocks_;
  dc::Linear out_;
  dc::Linear dp_spk_proj_;
  std::vector<Block> dp_blocks_;
  dc::Linear dp_out_;
};

}  // namespace facetts::text
