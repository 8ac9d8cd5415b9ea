#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curvetransfer/similarity.hpp"
#include "curvetransfer/synthgen.hpp"
#include "curvetransfer/transfer.hpp"

namespace curvetransfer::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

/// Runs the tool on `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SplitOptions {
  std::vector<std::string> train_ids;
  bool auto_extreme = false;
};

/// Loads the manifests and ranks the sources against the target's training
/// split. When `dump_dir` is set, writes the DTW matrices of the first curve
/// of each source against the first training curve under it.
SourceRanking cmd_rank(std::span<const std::filesystem::path> sources, const std::filesystem::path& target,
                       const SplitOptions& split, std::size_t grid_n = kDefaultGridSize,
                       const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

struct PipelineInputs {
  ExperimentPlan plan;
  std::vector<Dataset> datasets;
  bool sweep_sources = false;  // also fill pearson_dtw_mape via a source sweep
};

/// Reads a plan file. Dataset names resolve through its optional
/// "datasets" {name: manifest} map; otherwise they are manifest paths.
/// Both are relative to the plan file.
PipelineInputs load_plan_file(const std::filesystem::path& plan_path);

/// Runs the plan and writes report.json, predictions/<sample_id>.csv and,
/// for dtw_tl, ranking.json into `out_dir`.
EvalReport cmd_pipeline(const PipelineInputs& inputs, const std::filesystem::path& out_dir);

/// Writes the standard synthetic suite as manifests + CSVs plus ground_truth.json.
synth::Suite cmd_synth(std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace curvetransfer::cli
