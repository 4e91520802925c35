#pragma once

#include <filesystem>
#include <vector>

#include "facetts/training/trainer.hpp"

namespace facetts::cli {

/// Tolerance of the check that logged components add up to the logged total.
inline constexpr double kAdditivityTolerance = 1e-9;

/// Reads a metrics.jsonl log. Throws IoError if it cannot be opened and ParseError with the
/// line number on a malformed record or one whose components do not sum to its total.
std::vector<training::StepRecord> read_metrics(const std::filesystem::path& path);

/// Writes one CSV per loss component (L_prior, L_dur, L_diff, L_spk, total) with columns
/// step,value, plus components.csv with every column. Returns the files written.
std::vector<std::filesystem::path> export_plots(const std::vector<training::StepRecord>& records,
                                                const std::filesystem::path& out_dir);

}  // namespace facetts::cli
