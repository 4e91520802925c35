#include "facetts/cli/app.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>

#include "facetts/cli/config.hpp"
#include "facetts/cli/plots.hpp"
#include "facetts/common/errors.hpp"
#include "facetts/training/evaluation.hpp"

namespace facetts::cli {

namespace {

// Streams of the global seed; each command draws only from its own.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kPretrainStream = 2;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kRandomEmbeddingStream = 4;

enum class Command { GenCorpus, PretrainBio, TrainTts, Synth, EvalMatch, ExportPlots };

struct GlobalFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<double> gamma;
  std::optional<std::string> out;
};

RunConfig resolve(const GlobalFlags& flags, Command cmd) {
  RunConfig c = flags.config ? run_config_from_json(read_config_file(*flags.config)) : RunConfig{};
  if (flags.seed) c.seed = *flags.seed;
  if (flags.out) c.out = *flags.out;
  if (flags.gamma) c.train.weights.gamma = *flags.gamma;
  if (flags.steps) {
    switch (cmd) {
      case Command::PretrainBio: c.pretrain.steps = *flags.steps; break;
      case Command::TrainTts: c.train.steps = *flags.steps; break;
      case Command::Synth:
      case Command::EvalMatch: c.synth.steps = *flags.steps; break;
      default: throw ConfigError("--steps does not apply to this command");
    }
  }
  c.validate();
  return c;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<corpus::CorpusItem> load_corpus(const std::filesystem::path& manifest, std::ostream& err) {
  auto loaded = corpus::load_manifest(manifest);
  for (const auto& w : loaded.report.warnings) err << "warning: " << w << '\n';
  for (const auto& id : loaded.report.missing) err << "warning: skipped " << id << " (missing file)\n";
  for (const auto& [id, secs] : loaded.report.too_short) err << "warning: skipped " << id << " (" << secs << " s)\n";
  if (loaded.manifest.records.empty()) throw InputError("manifest " + manifest.string() + " has no usable records");
  return corpus::load_items(loaded.manifest);
}

std::size_t identity_count(const std::vector<corpus::CorpusItem>& items) {
  std::set<std::size_t> ids;
  for (const auto& it : items) ids.insert(it.identity);
  return ids.size();
}

void gen_corpus(const RunConfig& c, std::ostream& out) {
  auto opts = c.corpus;
  opts.seed = c.seed;
  const auto m = corpus::generate_corpus(opts, c.out);
  out << "wrote " << m.records.size() << " utterances to " << c.out.string() << '\n';
}

void pretrain_bio(const RunConfig& c, const std::string& manifest, std::ostream& out, std::ostream& err) {
  const auto items = load_corpus(manifest, err);
  if (identity_count(items) < 2) throw ConfigError("pretraining needs at least 2 identities");
  Rng rng(Rng::derive(c.seed, kModelStream));
  bio::BiometricModel model(c.model.bio, rng);
  std::vector<bio::BioSample> samples;
  for (const auto& it : items) samples.push_back({it.mel, it.face, it.identity});

  auto opts = c.pretrain;
  opts.seed = Rng::derive(c.seed, kPretrainStream);
  const std::size_t period = std::max<std::size_t>(1, opts.steps / 10);
  opts.on_step = [&](std::size_t step, double loss) {
    if (step % period == 0 || step == opts.steps) out << "pretrain step " << step << " loss " << loss << '\n';
  };
  const auto report = bio::contrastive_pretrain(model, samples, opts);

  ensure_dir(c.out);
  training::save_biometric(c.out / "biometric.ckpt", model);
  std::ofstream log(c.out / "pretrain.jsonl");
  if (!log) throw IoError("cannot write " + (c.out / "pretrain.jsonl").string());
  log << std::setprecision(17);
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    log << nlohmann::json{{"step", i + 1}, {"loss", report.losses[i]}}.dump() << '\n';
  }
  out << "wrote " << (c.out / "biometric.ckpt").string() << '\n';
}

void train_tts(const RunConfig& c, const std::string& manifest, const std::optional<std::string>& bio_path,
               bool resume, std::ostream& out, std::ostream& err) {
  auto items = load_corpus(manifest, err);
  Rng rng(Rng::derive(c.seed, kModelStream));
  training::FaceTts model(c.model, rng);
  if (bio_path) {
    auto bio = training::load_biometric(*bio_path);
    if (training::to_json(bio.config) != training::to_json(c.model.bio)) {
      throw ConfigError("biometric checkpoint " + *bio_path + " does not match model.bio");
    }
    model.bio = std::move(bio);
  } else if (!resume) {
    err << "warning: training without a pretrained biometric model\n";
  }

  auto tc = c.train;
  tc.seed = Rng::derive(c.seed, kTrainStream);
  tc.out_dir = c.out;
  training::Trainer trainer(model, std::move(items), tc);
  if (resume) {
    const auto latest = trainer.checkpoint_dir() / "latest.ckpt";
    if (!std::filesystem::exists(latest)) throw IoError("nothing to resume: " + latest.string() + " is missing");
    trainer.load_checkpoint(latest);
    out << "resumed at step " << trainer.steps_done() << '\n';
  }

  const std::size_t period = std::max<std::size_t>(1, tc.steps / 20);
  trainer.run([&](const training::StepRecord& r) {
    if (r.step % period == 0 || r.step == tc.steps) {
      out << "step " << r.step << " L_prior " << r.loss.prior << " L_dur " << r.loss.duration << " L_diff "
          << r.loss.diffusion << " L_spk " << r.loss.speaker << " total " << r.loss.total << '\n';
    }
  });
  training::save_face_tts(c.out / "model.ckpt", model);
  out << "wrote " << (c.out / "model.ckpt").string() << '\n';
}

void synth(const RunConfig& c, const std::string& checkpoint, const std::string& face_path, const std::string& text,
           std::optional<double> duration_scale, std::ostream& out) {
  auto opts = c.synth;
  opts.seed = c.seed;
  if (duration_scale) {
    if (!(std::isfinite(*duration_scale) && *duration_scale > 0.0)) {
      throw ConfigError("--duration-scale must be positive");
    }
    opts.duration_scale = *duration_scale;
  }
  const auto model = training::load_face_tts(checkpoint);
  const auto face = bio::load_face(face_path);
  const auto tokens = text::normalize_and_tokenize(text);
  const auto result = training::synthesize(model, tokens, face, opts);

  ensure_dir(c.out);
  dsp::write_wav(c.out / "synth.wav", result.wave);
  dsp::write_mel_dump(c.out / "synth.mel", result.mel);
  out << "wrote " << (c.out / "synth.wav").string() << " (" << result.mel.num_frames() << " frames, "
      << result.wave.duration_seconds() << " s)\n";
}

void eval_match(const RunConfig& c, const std::optional<std::string>& checkpoint, bool random_embeddings,
                const std::string& manifest, std::ostream& out, std::ostream& err) {
  if (!checkpoint && !random_embeddings) throw ConfigError("eval-match needs --checkpoint or --random-embeddings");
  const auto items = load_corpus(manifest, err);
  if (identity_count(items) < 5) {
    throw ConfigError("matching needs at least 5 identities, got " + std::to_string(identity_count(items)));
  }

  bio::MatchReport report;
  nlohmann::json header;
  if (random_embeddings) {
    // Identity-blind embeddings: the chance-level baseline of the trial protocol.
    Rng rng(Rng::derive(c.seed, kRandomEmbeddingStream));
    auto draw = [&] {
      std::vector<double> v(bio::kEmbeddingDim);
      for (auto& x : v) x = rng.normal();
      return v;
    };
    std::vector<bio::SpeechProbe> probes;
    std::vector<bio::FaceCandidate> faces;
    for (const auto& it : items) {
      probes.push_back({it.utt_id, it.identity, draw()});
      faces.push_back({it.identity, draw()});
    }
    report = bio::run_matching(probes, faces, c.eval.trials, c.seed);
    header["model"] = "random-embeddings";
  } else {
    const auto model = training::load_face_tts(*checkpoint);
    training::MatchEvalOptions mo;
    mo.trials = c.eval.trials;
    mo.seed = c.seed;
    mo.synthesis = c.synth;
    mo.via_waveform = c.eval.via_waveform;
    report = training::evaluate_matching(model, items, mo);
    header["model"] = *checkpoint;
  }

  auto j = report.to_json();
  j["model"] = header["model"];
  j["seed"] = c.seed;
  ensure_dir(c.out);
  write_json(c.out / "match_report.json", j);
  out << "accuracy " << report.accuracy << " (" << report.correct << "/" << report.trials.size()
      << "), one-sided binomial p = " << report.p_value << '\n';
}

void export_plots_cmd(const RunConfig& c, const std::string& log, std::ostream& out) {
  const auto records = read_metrics(log);
  const auto files = export_plots(records, c.out);
  out << "wrote " << files.size() << " CSV files with " << records.size() << " rows to " << c.out.string() << '\n';
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DegenerateTask*>(&e)) return kExitConfig;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) || dynamic_cast<const InputError*>(&e) ||
      dynamic_cast<const InfeasibleAlignment*>(&e)) {
    return kExitIo;
  }
  if (dynamic_cast<const NumericalFault*>(&e) || dynamic_cast<const SingularTime*>(&e)) return kExitNumerical;
  return kExitFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Face-conditioned diffusion text-to-speech", "facetts"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config, "TOML-style configuration file; flags override it");
  app.add_option("--seed", flags.seed, "Global seed");
  app.add_option("--steps", flags.steps, "Step count of the command (training steps or sampling steps)");
  app.add_option("--gamma", flags.gamma, "Weight of the speaker feature binding loss");
  app.add_option("--out", flags.out, "Output directory");

  std::string manifest, checkpoint, face, text, log;
  std::optional<std::string> bio_path, eval_checkpoint;
  std::optional<double> duration_scale;
  bool resume = false, random_embeddings = false;

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic face/voice corpus");
  auto* pre = app.add_subcommand("pretrain-bio", "Contrastively pretrain the face/voice biometric networks");
  pre->add_option("manifest", manifest, "Training manifest (JSONL)")->required();
  auto* train = app.add_subcommand("train-tts", "Train the text-to-speech model");
  train->add_option("manifest", manifest, "Training manifest (JSONL)")->required();
  train->add_option("--bio", bio_path, "Pretrained biometric checkpoint");
  train->add_flag("--resume", resume, "Continue from <out>/checkpoints/latest.ckpt");
  auto* syn = app.add_subcommand("synth", "Synthesize speech for a face");
  syn->add_option("checkpoint", checkpoint, "Model checkpoint")->required();
  syn->add_option("face", face, "Face image (PNG or PPM)")->required();
  syn->add_option("text", text, "Text to speak")->required();
  syn->add_option("--duration-scale", duration_scale, "Multiplies predicted durations");
  auto* ev = app.add_subcommand("eval-match", "5-way cross-modal matching of synthesized speech");
  ev->add_option("manifest", manifest, "Evaluation manifest (JSONL)")->required();
  auto* ev_ckpt = ev->add_option("--checkpoint", eval_checkpoint, "Model checkpoint");
  ev->add_flag("--random-embeddings", random_embeddings, "Use identity-blind random embeddings")->excludes(ev_ckpt);
  auto* plots = app.add_subcommand("export-plots", "Export per-component loss CSVs from a metrics log");
  plots->add_option("log", log, "metrics.jsonl")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      gen_corpus(resolve(flags, Command::GenCorpus), out);
    } else if (*pre) {
      pretrain_bio(resolve(flags, Command::PretrainBio), manifest, out, err);
    } else if (*train) {
      train_tts(resolve(flags, Command::TrainTts), manifest, bio_path, resume, out, err);
    } else if (*syn) {
      synth(resolve(flags, Command::Synth), checkpoint, face, text, duration_scale, out);
    } else if (*ev) {
      eval_match(resolve(flags, Command::EvalMatch), eval_checkpoint, random_embeddings, manifest, out, err);
    } else if (*plots) {
      export_plots_cmd(resolve(flags, Command::ExportPlots), log, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace facetts::cli
