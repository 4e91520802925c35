#include "facetts/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "facetts/aligner/mas.hpp"
#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::training {

namespace {

Matrix rows_of(const Matrix& m, std::size_t start, std::size_t count) {
  Matrix out(count, m.cols);
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(start * m.cols),
            m.data.begin() + static_cast<std::ptrdiff_t>((start + count) * m.cols), out.data.begin());
  return out;
}

Matrix to_matrix(const dc::Tensor& t) {
  return Matrix(t.dim(0), t.dim(1), std::vector<double>(t.data().begin(), t.data().end()));
}

dc::Tensor batch_mean(const std::vector<dc::Tensor>& xs) {
  dc::Tensor acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) acc = dc::add(acc, xs[i]);
  return dc::scale(acc, 1.0 / static_cast<double>(xs.size()));
}

std::vector<dc::ParamGroup> make_groups(const FaceTts& model, const TrainConfig& config) {
  return {{"base", config.base_lr, model.base_params()}, {"visual", config.visual_lr, model.visual_params()}};
}

}  // namespace

void TrainConfig::validate() const {
  weights.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(visual_lr >= 0.0) || !std::isfinite(visual_lr)) throw ConfigError("visual_lr must be non-negative");
  if (crop_frames != 0 && crop_frames < bio::kMinAudioFrames) {
    throw ConfigError("crop_frames must be 0 or at least " + std::to_string(bio::kMinAudioFrames));
  }
}

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["L_prior"] = r.loss.prior;
  j["L_dur"] = r.loss.duration;
  j["L_diff"] = r.loss.diffusion;
  j["L_spk"] = r.loss.speaker;
  j["gamma"] = r.loss.gamma;
  j["total"] = r.loss.total;
  return j;
}

Trainer::Trainer(FaceTts& model, std::vector<corpus::CorpusItem> items, TrainConfig config)
    : model_(model),
      items_(std::move(items)),
      config_(std::move(config)),
      optimizer_((config_.validate(), make_groups(model, config_))),
      rng_(config_.seed) {
  if (items_.empty()) throw InputError("training needs at least one item");
  const std::size_t min_frames = model_.bio.audio.min_frames();
  for (const auto& it : items_) {
    if (it.mel.cols != model_.config.text.mel_dim) throw InputError(it.utt_id + ": mel width mismatch");
    if (it.mel.rows < min_frames) throw InputError(it.utt_id + ": fewer than " + std::to_string(min_frames) + " frames");
    for (double v : it.mel.data) {
      if (!std::isfinite(v)) throw InputError(it.utt_id + ": non-finite mel value");
    }
    if (it.tokens.size() == 0 || it.mel.rows < it.tokens.size()) {
      throw InputError(it.utt_id + ": needs at least one frame per token");
    }
  }
  if (config_.crop_frames != 0 && config_.crop_frames < min_frames) {
    throw ConfigError("crop_frames below the audio network's minimum of " + std::to_string(min_frames));
  }
  dc::set_trainable(model_.audio_params(), false);
}

std::vector<ItemPlan> Trainer::plan_batch() {
  std::vector<ItemPlan> plan(config_.batch_size);
  for (auto& p : plan) {
    p.item = rng_.index(items_.size());
    const std::size_t frames = items_[p.item].mel.rows;
    p.crop_len = config_.crop_frames == 0 ? frames : std::min(frames, config_.crop_frames);
    p.crop_start = rng_.index(frames - p.crop_len + 1);
    p.draw = draw_diffusion(p.crop_len, items_[p.item].mel.cols, rng_);
  }
  return plan;
}

LossTerms Trainer::item_terms(const ItemPlan& plan) const {
  const auto& item = items_.at(plan.item);
  const auto spk = model_.speaker_embedding(item.face);
  const auto enc = model_.encoder.forward(item.tokens, spk);
  for (double v : enc.mu_tokens.data()) {
    if (!std::isfinite(v)) throw TrainingFault("text encoder output", v);
  }
  const auto path = align::mas(align::loglik_matrix(to_matrix(enc.mu_tokens), item.mel));
  const auto mu_frames = align::expand(enc.mu_tokens, path.durations);
  const auto x0 = dc::Tensor::from_data({item.mel.rows, item.mel.cols}, item.mel.data);

  LossTerms terms;
  terms.prior = prior_loss(x0, mu_frames);
  terms.duration = duration_loss(enc.log_dur, path.durations);

  const Matrix x0_crop = rows_of(item.mel, plan.crop_start, plan.crop_len);
  const auto mu_crop = dc::slice0(mu_frames, plan.crop_start, plan.crop_len);
  auto fn = [&](const dc::Tensor& xt, double t) { return model_.score.score(xt, t, mu_crop, spk); };
  const auto diff = diffusion_terms(fn, x0_crop, plan.draw, model_.config.schedule);
  terms.diffusion = diff.loss;

  auto binding = [&] {
    const auto x0_hat = denoised_estimate(diff.xt, diff.score, plan.draw.t, model_.config.schedule);
    return speaker_binding_loss(model_.bio.audio, x0_crop, x0_hat);
  };
  if (config_.weights.gamma == 0.0) {
    dc::NoGradGuard guard;
    terms.speaker = binding();
  } else {
    terms.speaker = binding();
  }
  return terms;
}

TotalLoss Trainer::batch_loss(std::span<const ItemPlan> plan) const {
  if (plan.empty()) throw ContractViolation("batch_loss: empty plan");
  std::vector<dc::Tensor> prior, duration, diffusion, speaker;
  for (const auto& p : plan) {
    auto t = item_terms(p);
    prior.push_back(t.prior);
    duration.push_back(t.duration);
    diffusion.push_back(t.diffusion);
    speaker.push_back(t.speaker);
  }
  return total_loss({batch_mean(prior), batch_mean(duration), batch_mean(diffusion), batch_mean(speaker)},
                    config_.weights);
}

StepRecord Trainer::step() {
  const auto plan = plan_batch();
  optimizer_.zero_grad();
  const auto loss = batch_loss(plan);
  dc::backward(loss.total);
  for (const auto& group : optimizer_.groups()) {
    for (const auto& p : group.params) {
      if (!p.tensor.has_grad()) continue;
      for (double g : p.tensor.grad()) {
        if (!std::isfinite(g)) throw TrainingFault("gradient of " + p.name, g);
      }
    }
  }
  optimizer_.step();
  ++steps_done_;
  return {steps_done_, loss.breakdown};
}

std::vector<StepRecord> Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  const bool files = !config_.out_dir.empty();
  std::ofstream metrics;
  if (files) {
    std::error_code ec;
    std::filesystem::create_directories(checkpoint_dir(), ec);
    if (ec) throw IoError("cannot create " + checkpoint_dir().string() + ": " + ec.message());
    metrics.open(metrics_path(), steps_done_ == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics) throw IoError("cannot write " + metrics_path().string());
  }
  const std::size_t period = config_.checkpoint_every != 0
                                 ? config_.checkpoint_every
                                 : (items_.size() + config_.batch_size - 1) / config_.batch_size;
  std::vector<StepRecord> records;
  while (steps_done_ < config_.steps) {
    const auto rec = step();
    records.push_back(rec);
    if (files) {
      metrics << to_json(rec).dump() << '\n';
      metrics.flush();
      if (rec.step % period == 0 || rec.step == config_.steps) {
        char name[32];
        std::snprintf(name, sizeof(name), "step_%06zu.ckpt", rec.step);
        save_checkpoint(checkpoint_dir() / name);
        save_checkpoint(checkpoint_dir() / "latest.ckpt");
      }
    }
    if (on_step) on_step(rec);
  }
  return records;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  dc::Container extra;
  extra.meta["train"] = {{"step", steps_done_}, {"rng", rng_.state()}};
  optimizer_.save_state(extra);
  save_face_tts(path, model_, std::move(extra));
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  const auto c = dc::read_container(path);
  if (c.meta.value("kind", std::string()) != "face_tts" || !c.meta.contains("train")) {
    throw ParseError("not a training checkpoint: " + path.string());
  }
  if (to_json(face_tts_config_from_json(c.meta.at("config"))) != to_json(model_.config)) {
    throw ConfigError("checkpoint model configuration differs from the trainer's model");
  }
  dc::restore_params(c, model_.params());
  optimizer_.load_state(c);
  rng_.set_state(c.meta.at("train").at("rng").get<std::string>());
  steps_done_ = c.meta.at("train").at("step").get<std::size_t>();
}

}  // namespace facetts::training
