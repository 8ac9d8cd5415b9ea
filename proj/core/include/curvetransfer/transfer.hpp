#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvetransfer/curve_model.hpp"
#include "curvetransfer/matrix.hpp"
#include "curvetransfer/metrics.hpp"
#include "curvetransfer/seqnet.hpp"
#include "curvetransfer/similarity.hpp"

namespace curvetransfer {

// ---------------------------------------------------------------------------
// Feature scaling and windowing

/// Min-max scaler for one feature. A constant feature is flagged degenerate
/// and maps to 0.
struct MinMax {
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;

  static MinMax fit(std::span<const double> values);
  double scale(double v) const { return degenerate ? 0.0 : (v - min) / (max - min); }
  double unscale(double s) const { return degenerate ? min : min + s * (max - min); }

  bool operator==(const MinMax&) const = default;
};

/// Scalers for the network inputs (strain, then each process parameter by
/// position) and for the stress target. Parameter columns beyond a curve's
/// own arity are zero padding.
struct FeatureScalers {
  MinMax strain;
  std::vector<MinMax> params;
  MinMax stress;

  std::size_t input_dim() const noexcept { return 1 + params.size(); }

  bool operator==(const FeatureScalers&) const = default;
};

/// Fits scalers on training curves only. `param_width` > arity pads the
/// parameter block with constant zero columns; 0 means the curves' own arity.
/// Curves must agree on arity.
FeatureScalers fit_scalers(std::span<const RawCurve> train_curves, std::size_t param_width = 0);

/// len x input_dim matrix of scaled [strain, params...] rows for one curve.
Matrix curve_features(const RawCurve& curve, const FeatureScalers& scalers);

/// Sliding windows over each curve: rows t..t+n-1 of the scaled features
/// predict the scaled stress at t+n. Windows never span two curves.
struct SupervisedSet {
  std::vector<Matrix> windows;
  std::vector<double> targets;
  FeatureScalers scalers;
  std::string dataset;
  std::vector<std::string> sample_ids;     // curves that contributed windows
  std::vector<std::size_t> window_sample;  // index into sample_ids per window
  std::vector<std::string> skipped;        // curves with <= n points

  std::size_t size() const noexcept { return windows.size(); }
};

SupervisedSet window_dataset(std::span<const RawCurve> curves, const FeatureScalers& scalers, std::size_t n,
                             std::string dataset_name = {});

/// Picks the all-minimum and all-maximum corners of the DOE: the samples
/// whose min-max scaled parameter vectors have the smallest and largest
/// sums. Ties go to the lexicographically smaller sample id.
std::array<std::string, 2> select_extreme_training_samples(const Dataset& dataset);

/// Concatenates every dataset's curves and shuffles the sample order with
/// the seed. Sample ids become "<dataset>/<id>" to stay unique.
std::vector<RawCurve> concat_shuffle_sources(std::span<const Dataset> datasets, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints and the pretrain / transfer / finetune stages

enum class Stage { initialized, pretrained, finetuned };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct Provenance {
  std::string source_dataset;  // empty when there was no pre-training
  std::string target_dataset;  // set at fine-tuning
  Stage stage = Stage::initialized;

  bool operator==(const Provenance&) const = default;
};

struct ModelCheckpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  seqnet::ModelParams params;
  FeatureScalers scalers;
  std::size_t sequence_length = seqnet::kDefaultSequenceLength;
  std::uint64_t seed = 0;
  std::optional<seqnet::AdamState> optimizer_state;
  Provenance provenance;
  std::vector<double> loss_history;

  std::size_t input_dim() const noexcept { return params.input_dim; }
  std::size_t hidden_dim() const noexcept { return params.hidden_dim; }

  bool operator==(const ModelCheckpoint&) const = default;
};

/// Fits scalers on the source curves, windows them and trains freshly
/// initialized parameters.
ModelCheckpoint pretrain(std::span<const RawCurve> source_curves, const seqnet::TrainConfig& config,
                         const std::string& source_name, std::size_t param_width = 0);

/// Target parameters start as an exact copy of the source model's. The
/// source optimizer state is dropped. Throws DataError on a shape mismatch.
seqnet::ModelParams transfer_init(const ModelCheckpoint& source, std::size_t input_dim, std::size_t hidden_dim);

/// Refits scalers on the target training curves and continues training every
/// parameter from `initial`.
ModelCheckpoint finetune(const seqnet::ModelParams& initial, std::span<const RawCurve> target_train,
                         const seqnet::TrainConfig& config, const std::string& target_name,
                         const std::string& source_name = {}, std::size_t param_width = 0);

/// Predicted stress in the curve's units for points n..len-1 (the first n
/// points have no prediction).
std::vector<double> predict_curve(const ModelCheckpoint& checkpoint, const RawCurve& curve);

// ---------------------------------------------------------------------------
// Experiment protocol

enum class Variant { vanilla, tl_all, dtw_tl };
std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

struct ExperimentPlan {
  Variant variant = Variant::dtw_tl;
  std::vector<std::string> sources;
  std::string target;
  std::vector<std::string> train_ids;  // explicit split; wins over auto_extreme
  std::vector<std::string> test_ids;   // empty: every non-training sample
  bool auto_extreme = false;
  std::size_t grid_n = kDefaultGridSize;
  seqnet::TrainConfig train_config;
  std::optional<std::size_t> pretrain_epochs;  // defaults to train_config.epochs
  bool pad_schema = false;
  double mape_epsilon = metrics::kDefaultMapeEpsilon;
};

struct DataSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Resolves train/test ids for the plan's target. Throws DataError on unknown
/// ids, overlap, or a split that does not cover the dataset.
DataSplit resolve_split(const ExperimentPlan& plan, const Dataset& target);

struct SampleResult {
  std::string sample_id;
  metrics::MetricSummary metrics;
  std::vector<double> strain;     // points n..len-1
  std::vector<double> actual;
  std::vector<double> predicted;
};

struct AggregateMetrics {
  double mape = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

struct EvalReport {
  Variant variant = Variant::vanilla;
  std::string target;
  std::vector<std::string> sources;
  std::optional<std::string> selected_source;
  std::optional<SourceRanking> dtw_ranking;
  DataSplit split;
  std::vector<SampleResult> per_sample;  // ordered by sample id
  AggregateMetrics aggregate;            // unweighted means over samples
  std::optional<double> pearson_dtw_mape;
  seqnet::TrainConfig config;
  std::size_t pretrain_epochs = 0;
  std::size_t grid_n = kDefaultGridSize;
  double mape_epsilon = metrics::kDefaultMapeEpsilon;
  std::vector<double> pretrain_loss;
  std::vector<double> finetune_loss;
};

/// Scores a model on held-out curves.
std::vector<SampleResult> evaluate_checkpoint(const ModelCheckpoint& checkpoint, std::span<const RawCurve> curves,
                                              double mape_epsilon = metrics::kDefaultMapeEpsilon);
AggregateMetrics aggregate(std::span<const SampleResult> samples);

const Dataset& find_dataset(std::span<const Dataset> datasets, std::string_view name);

/// Runs one variant end to end:
///  vanilla - train from scratch on the target training curves;
///  tl_all  - pretrain on all sources concatenated and shuffled, transfer, finetune;
///  dtw_tl  - rank sources against the target training curves, pretrain on
///            the closest one, transfer, finetune.
/// Every variant is scored on the target test curves. When `model` is given it
/// receives the final checkpoint.
EvalReport run_variant(const ExperimentPlan& plan, std::span<const Dataset> datasets,
                       ModelCheckpoint* model = nullptr);

/// Transfer from each source in turn and correlate average DTW with the
/// resulting MAPE on the target test curves.
struct SourceSweep {
  struct Entry {
    std::string source;
    double avg_dtw = 0.0;
    AggregateMetrics metrics;
  };
  std::vector<Entry> entries;  // in ranking order
  double pearson_dtw_mape = 0.0;
};

SourceSweep run_source_sweep(const ExperimentPlan& plan, std::span<const Dataset> datasets);

}  // namespace curvetransfer
