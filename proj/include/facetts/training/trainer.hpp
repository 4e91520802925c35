#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "facetts/corpus/corpus.hpp"
#include "facetts/diffcore/optim.hpp"
#include "facetts/training/losses.hpp"
#include "facetts/training/model.hpp"

namespace facetts::training {

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  double base_lr = 1e-4;
  double visual_lr = 1e-6;
  LossWeights weights;
  /// Frames of each item used by L_diff and L_spk; 0 uses the whole utterance.
  std::size_t crop_frames = 0;
  std::uint64_t seed = 0;
  /// Checkpoint period in steps; 0 checkpoints once per pass over the data.
  std::size_t checkpoint_every = 0;
  /// Metrics and checkpoints go here; empty disables file output.
  std::filesystem::path out_dir;

  void validate() const;
};

/// The random choices behind one item of a batch.
struct ItemPlan {
  std::size_t item = 0;
  std::size_t crop_start = 0;
  std::size_t crop_len = 0;
  DiffusionDraw draw;
};

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
};

nlohmann::json to_json(const StepRecord& r);

/// End-to-end trainer. Each step draws a batch, recomputes alignments from the current
/// encoder, averages every loss component over the batch and applies one Adam update.
/// F (the audio network) is frozen; G trains in its own group at visual_lr.
class Trainer {
 public:
  Trainer(FaceTts& model, std::vector<corpus::CorpusItem> items, TrainConfig config);

  /// Consumes the trainer's generator.
  std::vector<ItemPlan> plan_batch();
  /// Loss graph for a planned batch; parameters are untouched.
  TotalLoss batch_loss(std::span<const ItemPlan> plan) const;
  LossTerms item_terms(const ItemPlan& plan) const;

  /// One optimizer step. Throws TrainingFault on a non-finite loss or gradient before
  /// any parameter changes.
  StepRecord step();
  /// Runs until config.steps, writing metrics and checkpoints when out_dir is set.
  std::vector<StepRecord> run(const std::function<void(const StepRecord&)>& on_step = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores parameters, optimizer state, generator state and step counter.
  void load_checkpoint(const std::filesystem::path& path);

  std::size_t steps_done() const { return steps_done_; }
  const dc::Adam& optimizer() const { return optimizer_; }
  const TrainConfig& config() const { return config_; }
  std::filesystem::path checkpoint_dir() const { return config_.out_dir / "checkpoints"; }
  std::filesystem::path metrics_path() const { return config_.out_dir / "metrics.jsonl"; }

 private:
  FaceTts& model_;
  std::vector<corpus::CorpusItem> items_;
  TrainConfig config_;
  dc::Adam optimizer_;
  Rng rng_;
  std::size_t steps_done_ = 0;
};

}  // namespace facetts::training
