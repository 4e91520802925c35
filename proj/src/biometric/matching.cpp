#include "facetts/biometric/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "facetts/common/errors.hpp"
#include "facetts/common/rng.hpp"
#include "facetts/diffcore/ops.hpp"
#include "facetts/diffcore/optim.hpp"

namespace facetts::bio {

namespace {

dc::Tensor stack_rows(const std::vector<dc::Tensor>& rows) {
  std::vector<dc::Tensor> parts;
  parts.reserve(rows.size());
  for (const auto& r : rows) parts.push_back(dc::reshape(r, {1, r.size()}));
  return dc::concat0(parts);
}

Matrix crop(const Matrix& mel, std::size_t frames, Rng& rng) {
  if (frames == 0 || mel.rows <= frames) return mel;
  const std::size_t start = rng.index(mel.rows - frames + 1);
  Matrix out(frames, mel.cols);
  std::copy(mel.data.begin() + static_cast<std::ptrdiff_t>(start * mel.cols),
            mel.data.begin() + static_cast<std::ptrdiff_t>((start + frames) * mel.cols), out.data.begin());
  return out;
}

}  // namespace

std::vector<double> to_vector(const dc::Tensor& t) { return {t.data().begin(), t.data().end()}; }

dc::Tensor info_nce(const dc::Tensor& audio, const dc::Tensor& visual, double temperature) {
  if (audio.rank() != 2 || audio.shape() != visual.shape()) {
    throw ContractViolation("info_nce: audio and visual must be equal [K, D], got " + dc::shape_str(audio.shape()) +
                            " and " + dc::shape_str(visual.shape()));
  }
  if (!(temperature > 0.0)) throw ContractViolation("info_nce: temperature must be positive");
  const std::size_t K = audio.dim(0);
  std::vector<std::size_t> diag(K);
  std::iota(diag.begin(), diag.end(), 0);
  const auto logits = dc::scale(dc::matmul(audio, dc::transpose(visual)), 1.0 / temperature);
  return dc::scale(dc::add(dc::cross_entropy_rows(logits, diag), dc::cross_entropy_rows(dc::transpose(logits), diag)),
                   0.5);
}

PretrainReport contrastive_pretrain(BiometricModel& model, const std::vector<BioSample>& samples,
                                    const PretrainOptions& options) {
  std::map<std::size_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i) by_id[samples[i].identity].push_back(i);
  if (by_id.size() < 2) {
    throw DegenerateTask("contrastive pretraining needs at least 2 identities, got " + std::to_string(by_id.size()));
  }
  if (options.batch_identities < 2) throw ConfigError("contrastive pretraining needs batches of at least 2 identities");
  std::vector<std::size_t> ids;
  for (const auto& [id, _] : by_id) ids.push_back(id);
  const std::size_t K = std::min(options.batch_identities, ids.size());

  auto params = model.params();
  dc::set_trainable(params, true);
  dc::Adam adam({dc::ParamGroup{"biometric", options.lr, params}});
  Rng rng(options.seed);
  PretrainReport report;
  for (std::size_t step = 0; step < options.steps; ++step) {
    std::vector<std::size_t> order = ids;
    for (std::size_t i = 0; i < K; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    std::vector<dc::Tensor> a_rows, v_rows;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& pool = by_id[order[k]];
      const auto& speech = samples[pool[rng.index(pool.size())]];
      const auto& face = samples[pool[rng.index(pool.size())]];
      a_rows.push_back(model.audio.forward(crop(speech.mel, options.crop_frames, rng)).embedding);
      v_rows.push_back(model.visual.forward(face.face));
    }
    const auto loss = info_nce(stack_rows(a_rows), stack_rows(v_rows), options.temperature);
    const double value = loss.item();
    if (!std::isfinite(value)) throw TrainingFault("L_infonce", value);
    adam.zero_grad();
    dc::backward(loss);
    adam.step();
    report.losses.push_back(value);
    if (options.on_step) options.on_step(step + 1, value);
  }
  return report;
}

MatchResult match_5way(std::span<const double> speech, std::span<const std::vector<double>> faces) {
  if (faces.size() != 5) throw ContractViolation("match_5way: exactly 5 candidate faces required, got " + std::to_string(faces.size()));
  MatchResult r;
  for (std::size_t i = 0; i < 5; ++i) {
    r.scores[i] = cosine(speech, faces[i]);
    if (r.scores[i] > r.scores[r.index]) r.index = i;
  }
  return r;
}

MatchResult match_5way(const BiometricModel& model, const Matrix& speech, std::span<const FaceImage> faces) {
  if (faces.size() != 5) throw ContractViolation("match_5way: exactly 5 candidate faces required, got " + std::to_string(faces.size()));
  dc::NoGradGuard guard;
  const auto s = to_vector(model.audio.forward(speech).embedding);
  std::vector<std::vector<double>> f;
  for (const auto& face : faces) f.push_back(to_vector(model.visual.forward(face)));
  return match_5way(s, f);
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  for (std::size_t i = k; i <= n; ++i) {
    const double logc = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    total += std::exp(logc + i * std::log(p) + (n - i) * std::log1p(-p));
  }
  return std::min(1.0, total);
}

MatchReport run_matching(std::span<const SpeechProbe> probes, std::span<const FaceCandidate> faces,
                         std::size_t trials, std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < faces.size(); ++i) by_id[faces[i].identity].push_back(i);
  if (by_id.size() < 5) {
    throw ConfigError("5-way matching needs at least 5 identities, got " + std::to_string(by_id.size()));
  }
  if (probes.empty()) throw ConfigError("5-way matching needs at least one speech probe");
  for (const auto& p : probes) {
    if (!by_id.count(p.identity)) throw ConfigError("probe " + p.label + " has no face of its identity");
  }
  Rng rng(seed);
  MatchReport report;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto& probe = probes[k % probes.size()];
    std::vector<std::size_t> others;
    for (const auto& [id, _] : by_id) {
      if (id != probe.identity) others.push_back(id);
    }
    for (std::size_t i = 0; i < 4; ++i) std::swap(others[i], others[i + rng.index(others.size() - i)]);
    std::array<std::size_t, 5> cand_ids{probe.identity, others[0], others[1], others[2], others[3]};
    for (std::size_t i = 0; i < 4; ++i) std::swap(cand_ids[i], cand_ids[i + rng.index(5 - i)]);

    MatchTrial trial;
    trial.probe = probe.label;
    trial.identity = probe.identity;
    trial.candidates = cand_ids;
    std::vector<std::vector<double>> cand_emb;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& pool = by_id[cand_ids[i]];
      cand_emb.push_back(faces[pool[rng.index(pool.size())]].embedding);
      if (cand_ids[i] == probe.identity) trial.true_position = i;
    }
    trial.result = match_5way(probe.embedding, cand_emb);
    trial.correct = trial.result.index == trial.true_position;
    report.correct += trial.correct ? 1 : 0;
    report.trials.push_back(std::move(trial));
  }
  report.accuracy = trials ? static_cast<double>(report.correct) / static_cast<double>(trials) : 0.0;
  report.p_value = binomial_upper_tail(report.correct, trials, 0.2);
  return report;
}

nlohmann::json MatchReport::to_json() const {
  nlohmann::json j;
  j["trials"] = trials.size();
  j["correct"] = correct;
  j["accuracy"] = accuracy;
  j["chance"] = 0.2;
  j["p_value"] = p_value;
  auto& list = j["per_trial"] = nlohmann::json::array();
  for (const auto& t : trials) {
    list.push_back({{"probe", t.probe},
                    {"identity", t.identity},
                    {"candidates", t.candidates},
                    {"true_position", t.true_position},
                    {"predicted", t.result.index},
                    {"scores", t.result.scores},
                    {"correct", t.correct}});
  }
  return j;
}

}  // namespace facetts::bio
