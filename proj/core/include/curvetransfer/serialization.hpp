#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "curvetransfer/similarity.hpp"
#include "curvetransfer/transfer.hpp"

namespace curvetransfer {

// JSON forms of the library's artifacts. Doubles are written in nlohmann's
// shortest round-trip decimal form, so weights survive a save/load cycle
// bit for bit.

nlohmann::json to_json(const seqnet::ModelParams& params);
seqnet::ModelParams params_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const FeatureScalers& scalers);
FeatureScalers scalers_from_json(const nlohmann::json& doc);

// {format_version, input_dim, hidden_dim, sequence_length, feature_scalers,
//  weights{name: {rows, cols, data}}, optimizer_state?, seed,
//  provenance{source_dataset, target_dataset, stage}, loss_history}
nlohmann::json to_json(const ModelCheckpoint& checkpoint);
ModelCheckpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// {entries: [{source, avg_dtw}], selected}
nlohmann::json to_json(const SourceRanking& ranking);
SourceRanking ranking_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const seqnet::TrainConfig& config);
seqnet::TrainConfig train_config_from_json(const nlohmann::json& doc, seqnet::TrainConfig defaults = {});

// {variant, sources, target, train_ids | auto_extreme, test_ids?, grid_n,
//  train_config{learning_rate, epochs, pretrain_epochs?, sequence_length,
//  hidden_dim, optimizer}, seed, pad_schema?, mape_epsilon?}
nlohmann::json to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const nlohmann::json& doc);

/// `dtw_ranking` and `selected_source` only appear for dtw_tl.
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const SourceSweep& sweep);

/// Columns strain, stress_actual, stress_predicted.
void write_prediction_csv(const std::filesystem::path& path, const SampleResult& sample);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace curvetransfer
