#include "facetts/textfront/text.hpp"

#include <cctype>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::text {

Vocab::Vocab(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw ContractViolation("empty vocabulary");
}

const Vocab& Vocab::standard() {
  static const Vocab vocab("_ 'abcdefghijklmnopqrstuvwxyz");
  return vocab;
}

char Vocab::symbol(std::size_t id) const {
  if (id >= symbols_.size()) throw ContractViolation("token id " + std::to_string(id) + " out of range");
  return symbols_[id];
}

std::size_t Vocab::id(char c) const {
  const auto pos = symbols_.find(c);
  return pos == std::string::npos ? symbols_.size() : pos;
}

std::string normalize(std::string_view text, const Vocab& vocab) {
  std::string out;
  bool pending_space = false;
  for (char raw : text) {
    const auto uc = static_cast<unsigned char>(raw);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    const char c = static_cast<char>(std::tolower(uc));
    if (c == ' ' || vocab.id(c) == Vocab::kPad || vocab.id(c) >= vocab.size()) continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

TokenSequence normalize_and_tokenize(std::string_view text, const Vocab& vocab) {
  const std::string norm = normalize(text, vocab);
  if (norm.empty()) throw InputError("text is empty after normalization");
  TokenSequence seq;
  seq.ids.reserve(norm.size());
  for (char c : norm) seq.ids.push_back(vocab.id(c));
  return seq;
}

std::string detokenize(const TokenSequence& tokens, const Vocab& vocab) {
  std::string out;
  for (auto id : tokens.ids) {
    if (id != Vocab::kPad) out.push_back(vocab.symbol(id));
  }
  return out;
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, Rng& rng) : config_(config) {
  if (config.layers == 0 || config.dp_layers == 0) throw ConfigError("text encoder needs at least one layer");
  embed_ = dc::Embedding(config.vocab_size, config.channels, rng);
  spk_proj_ = dc::Linear(config.spk_dim, config.channels, rng);
  for (std::size_t i = 0; i < config.layers; ++i) {
    blocks_.push_back({dc::Conv1d(config.channels, config.channels, config.kernel, rng), dc::LayerNorm(config.channels)});
  }
  out_ = dc::Linear(config.channels, config.mel_dim, rng);
  dp_spk_proj_ = dc::Linear(config.spk_dim, config.channels, rng);
  std::size_t in = config.channels;
  for (std::size_t i = 0; i < config.dp_layers; ++i) {
    dp_blocks_.push_back({dc::Conv1d(in, config.dp_channels, config.dp_kernel, rng), dc::LayerNorm(config.dp_channels)});
    in = config.dp_channels;
  }
  dp_out_ = dc::Linear(config.dp_channels, 1, rng);
}

TextEncoding TextEncoder::forward(const TokenSequence& tokens, const dc::Tensor& spk) const {
  if (tokens.ids.empty()) throw ContractViolation("text_encode: empty token sequence");
  for (auto id : tokens.ids) {
    if (id >= config_.vocab_size) throw ContractViolation("text_encode: token id out of range");
  }
  if (spk.rank() != 1 || spk.dim(0) != config_.spk_dim) {
    throw ContractViolation("text_encode: speaker embedding must be [" + std::to_string(config_.spk_dim) + "], got " +
                            dc::shape_str(spk.shape()));
  }
  const std::size_t L = tokens.ids.size();

  dc::Tensor h = dc::transpose(embed_.forward(tokens.ids));  // [C, L]
  h = dc::add_channel(h, spk_proj_.forward(spk));
  for (const auto& b : blocks_) h = dc::relu(b.norm.forward(b.conv.forward(h)));

  TextEncoding enc;
  enc.mu_tokens = out_.forward(dc::transpose(h));

  dc::Tensor d = dc::add_channel(h.detach(), dp_spk_proj_.forward(spk));
  for (const auto& b : dp_blocks_) d = b.norm.forward(dc::relu(b.conv.forward(d)));
  enc.log_dur = dc::reshape(dp_out_.forward(dc::transpose(d)), {L});
  return enc;
}

void TextEncoder::collect(dc::ParamList& out, const std::string& prefix) const {
  embed_.collect(out, prefix + ".embed");
  spk_proj_.collect(out, prefix + ".spk_proj");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    blocks_[i].conv.collect(out, p + ".conv");
    blocks_[i].norm.collect(out, p + ".norm");
  }
  out_.collect(out, prefix + ".out");
  dp_spk_proj_.collect(out, prefix + ".dp.spk_proj");
  for (std::size_t i = 0; i < dp_blocks_.size(); ++i) {
    const std::string p = prefix + ".dp.block" + std::to_string(i);
    dp_blocks_[i].conv.collect(out, p + ".conv");
    dp_blocks_[i].norm.collect(out, p + ".norm");
  }
  dp_out_.collect(out, prefix + ".dp.out");
}

}  // namespace facetts::text
