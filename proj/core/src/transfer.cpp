#include "curvetransfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "curvetransfer/error.hpp"

namespace curvetransfer {

MinMax MinMax::fit(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot fit a scaler on no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  MinMax s{*lo, *hi, false};
  s.degenerate = !(s.max > s.min);
  return s;
}

namespace {

std::size_t common_arity(std::span<const RawCurve> curves) {
  const std::size_t arity = curves.front().params.size();
  for (const auto& c : curves)
    if (c.params.size() != arity)
      throw DataError("curves disagree on the number of process parameters (" + std::to_string(arity) + " vs " +
                      std::to_string(c.params.size()) + " for sample '" + c.sample_id + "')");
  return arity;
}

}  // namespace

FeatureScalers fit_scalers(std::span<const RawCurve> train_curves, std::size_t param_width) {
  if (train_curves.empty()) throw DataError("fit_scalers: no training curves");
  // A fixed width admits curves of smaller arity; missing columns are padding.
  std::size_t arity = 0;
  if (param_width == 0) {
    arity = common_arity(train_curves);
  } else {
    for (const auto& c : train_curves) arity = std::max(arity, c.params.size());
  }
  const std::size_t width = param_width == 0 ? arity : param_width;
  if (arity > width)
    throw DataError("curves carry " + std::to_string(arity) + " process parameters but the feature layout has room for " +
                    std::to_string(width));

  std::vector<double> strain;
  std::vector<double> stress;
  for (const auto& c : train_curves) {
    strain.insert(strain.end(), c.strain.begin(), c.strain.end());
    stress.insert(stress.end(), c.stress.begin(), c.stress.end());
  }
  FeatureScalers s;
  s.strain = MinMax::fit(strain);
  s.stress = MinMax::fit(stress);
  s.params.resize(width, MinMax{0.0, 0.0, true});
  for (std::size_t j = 0; j < arity; ++j) {
    std::vector<double> column;
    column.reserve(train_curves.size());
    for (const auto& c : train_curves)
      if (j < c.params.size()) column.push_back(c.params[j].value);
    s.params[j] = MinMax::fit(column);
  }
  return s;
}

Matrix curve_features(const RawCurve& curve, const FeatureScalers& scalers) {
  if (curve.params.size() > scalers.params.size())
    throw DataError("sample '" + curve.sample_id + "' has " + std::to_string(curve.params.size()) +
                    " process parameters, model expects " + std::to_string(scalers.params.size()));
  Matrix features(curve.size(), scalers.input_dim());
  for (std::size_t t = 0; t < curve.size(); ++t) {
    features(t, 0) = scalers.strain.scale(curve.strain[t]);
    for (std::size_t j = 0; j < curve.params.size(); ++j)
      features(t, 1 + j) = scalers.params[j].scale(curve.params[j].value);
  }
  return features;
}

SupervisedSet window_dataset(std::span<const RawCurve> curves, const FeatureScalers& scalers, std::size_t n,
                             std::string dataset_name) {
  if (n < 1) throw DataError("sequence length must be >= 1");
  SupervisedSet set;
  set.scalers = scalers;
  set.dataset = std::move(dataset_name);
  for (const auto& curve : curves) {
    if (curve.size() <= n) {
      set.skipped.push_back(curve.sample_id);
      continue;
    }
    const Matrix features = curve_features(curve, scalers);
    const std::size_t owner = set.sample_ids.size();
    set.sample_ids.push_back(curve.sample_id);
    for (std::size_t t = 0; t + n < curve.size(); ++t) {
      Matrix window(n, scalers.input_dim());
      for (std::size_t r = 0; r < n; ++r) std::ranges::copy(features.row(t + r), window.row(r).begin());
      set.windows.push_back(std::move(window));
      set.targets.push_back(scalers.stress.scale(curve.stress[t + n]));
      set.window_sample.push_back(owner);
    }
  }
  if (set.windows.empty())
    throw DataError("no curve has more than " + std::to_string(n) + " points; nothing to window");
  return set;
}

std::array<std::string, 2> select_extreme_training_samples(const Dataset& dataset) {
  if (dataset.curves.size() < 2)
    throw DataError("dataset '" + dataset.name + "' needs at least 2 samples to pick extreme corners");
  const std::size_t arity = common_arity(dataset.curves);
  std::vector<MinMax> scalers;
  for (std::size_t j = 0; j < arity; ++j) {
    std::vector<double> column;
    for (const auto& c : dataset.curves) column.push_back(c.params[j].value);
    scalers.push_back(MinMax::fit(column));
  }

  struct Scored {
    double sum;
    const std::string* id;
  };
  std::vector<Scored> scored;
  for (const auto& c : dataset.curves) {
    double sum = 0.0;
    for (std::size_t j = 0; j < arity; ++j) sum += scalers[j].scale(c.params[j].value);
    scored.push_back({sum, &c.sample_id});
  }
  const auto low = std::min_element(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.sum != b.sum ? a.sum < b.sum : *a.id < *b.id;
  });
  const std::string low_id = *low->id;
  scored.erase(low);
  const auto high = std::min_element(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.sum != b.sum ? a.sum > b.sum : *a.id < *b.id;
  });
  return {low_id, *high->id};
}

std::vector<RawCurve> concat_shuffle_sources(std::span<const Dataset> datasets, std::uint64_t seed) {
  if (datasets.empty()) throw DataError("concat_shuffle_sources: no datasets");
  std::vector<RawCurve> all;
  for (const auto& ds : datasets)
    for (auto c : ds.curves) {
      c.sample_id = ds.name + "/" + c.sample_id;
      all.push_back(std::move(c));
    }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  return all;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::initialized: return "initialized";
    case Stage::pretrained: return "pretrained";
    case Stage::finetuned: return "finetuned";
  }
  return "initialized";
}

Stage parse_stage(std::string_view text) {
  if (text == "initialized") return Stage::initialized;
  if (text == "pretrained") return Stage::pretrained;
  if (text == "finetuned") return Stage::finetuned;
  throw DataError("unknown checkpoint stage '" + std::string(text) + "'");
}

namespace {

ModelCheckpoint train_stage(seqnet::ModelParams initial, std::span<const RawCurve> curves,
                            const seqnet::TrainConfig& config, const std::string& dataset_name,
                            std::size_t param_width) {
  config.validate();
  if (curves.empty()) throw DataError("no training curves for '" + dataset_name + "'");
  const FeatureScalers scalers = fit_scalers(curves, param_width);
  if (scalers.input_dim() != initial.input_dim)
    throw DataError("feature layout of '" + dataset_name + "' has " + std::to_string(scalers.input_dim()) +
                    " inputs, model has " + std::to_string(initial.input_dim));
  const SupervisedSet set = window_dataset(curves, scalers, config.sequence_length, dataset_name);
  auto trained = seqnet::train(std::move(initial), set.windows, set.targets, config);

  ModelCheckpoint ckpt;
  ckpt.params = std::move(trained.params);
  ckpt.scalers = scalers;
  ckpt.sequence_length = config.sequence_length;
  ckpt.seed = config.seed;
  if (config.optimizer == seqnet::Optimizer::adam) ckpt.optimizer_state = std::move(trained.optimizer_state);
  ckpt.loss_history = std::move(trained.loss_history);
  return ckpt;
}

std::size_t layout_width(std::span<const RawCurve> curves, std::size_t param_width) {
  if (curves.empty()) throw DataError("no training curves");
  return param_width == 0 ? common_arity(curves) : param_width;
}

}  // namespace

ModelCheckpoint pretrain(std::span<const RawCurve> source_curves, const seqnet::TrainConfig& config,
                         const std::string& source_name, std::size_t param_width) {
  if (source_curves.empty()) throw DataError("pretrain: source '" + source_name + "' has no curves");
  config.validate();
  const std::size_t input_dim = 1 + layout_width(source_curves, param_width);
  auto ckpt = train_stage(seqnet::init_params(config.seed, input_dim, config.hidden_dim), source_curves, config,
                          source_name, param_width);
  ckpt.provenance = {source_name, {}, Stage::pretrained};
  return ckpt;
}

seqnet::ModelParams transfer_init(const ModelCheckpoint& source, std::size_t input_dim, std::size_t hidden_dim) {
  if (source.input_dim() != input_dim || source.hidden_dim() != hidden_dim)
    throw DataError("cannot transfer: source model is " + std::to_string(source.input_dim()) + " inputs x " +
                    std::to_string(source.hidden_dim()) + " hidden, target needs " + std::to_string(input_dim) +
                    " x " + std::to_string(hidden_dim));
  if (!source.params.shapes_valid()) throw DataError("cannot transfer: source checkpoint has malformed tensors");
  return source.params;
}

ModelCheckpoint finetune(const seqnet::ModelParams& initial, std::span<const RawCurve> target_train,
                         const seqnet::TrainConfig& config, const std::string& target_name,
                         const std::string& source_name, std::size_t param_width) {
  if (target_train.empty()) throw DataError("finetune: target '" + target_name + "' has no training curves");
  auto ckpt = train_stage(initial, target_train, config, target_name, param_width);
  ckpt.provenance = {source_name, target_name, Stage::finetuned};
  return ckpt;
}

std::vector<double> predict_curve(const ModelCheckpoint& checkpoint, const RawCurve& curve) {
  const std::size_t n = checkpoint.sequence_length;
  if (curve.size() <= n)
    throw DataError("sample '" + curve.sample_id + "' has " + std::to_string(curve.size()) +
                    " points; needs more than the sequence length " + std::to_string(n));
  const Matrix features = curve_features(curve, checkpoint.scalers);
  std::vector<double> out;
  out.reserve(curve.size() - n);
  Matrix window(n, features.cols());
  for (std::size_t t = 0; t + n < curve.size(); ++t) {
    for (std::size_t r = 0; r < n; ++r) std::ranges::copy(features.row(t + r), window.row(r).begin());
    out.push_back(checkpoint.scalers.stress.unscale(seqnet::predict(checkpoint.params, window)));
  }
  return out;
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::vanilla: return "vanilla";
    case Variant::tl_all: return "tl_all";
    case Variant::dtw_tl: return "dtw_tl";
  }
  return "vanilla";
}

Variant parse_variant(std::string_view text) {
  if (text == "vanilla") return Variant::vanilla;
  if (text == "tl_all") return Variant::tl_all;
  if (text == "dtw_tl") return Variant::dtw_tl;
  throw DataError("unknown variant '" + std::string(text) + "' (expected vanilla, tl_all or dtw_tl)");
}

DataSplit resolve_split(const ExperimentPlan& plan, const Dataset& target) {
  DataSplit split;
  if (!plan.train_ids.empty()) {
    split.train_ids = plan.train_ids;
  } else if (plan.auto_extreme) {
    const auto corners = select_extreme_training_samples(target);
    split.train_ids.assign(corners.begin(), corners.end());
  } else {
    throw DataError("no training split: give train ids or enable auto_extreme");
  }

  const std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
  if (train.size() != split.train_ids.size()) throw DataError("training ids contain duplicates");
  for (const auto& id : split.train_ids) target.at(id);

  if (plan.test_ids.empty()) {
    for (const auto& c : target.curves)
      if (!train.contains(c.sample_id)) split.test_ids.push_back(c.sample_id);
  } else {
    split.test_ids = plan.test_ids;
    std::set<std::string> test;
    for (const auto& id : split.test_ids) {
      target.at(id);
      if (train.contains(id)) throw DataError("sample '" + id + "' is in both the training and test split");
      if (!test.insert(id).second) throw DataError("test ids contain duplicates");
    }
    if (train.size() + test.size() != target.curves.size())
      throw DataError("train and test ids do not cover dataset '" + target.name + "'");
  }
  if (split.test_ids.empty()) throw DataError("test split of '" + target.name + "' is empty");
  return split;
}

std::vector<SampleResult> evaluate_checkpoint(const ModelCheckpoint& checkpoint, std::span<const RawCurve> curves,
                                              double mape_epsilon) {
  std::vector<SampleResult> results;
  results.reserve(curves.size());
  const std::size_t n = checkpoint.sequence_length;
  for (const auto& curve : curves) {
    SampleResult r;
    r.sample_id = curve.sample_id;
    r.predicted = predict_curve(checkpoint, curve);
    r.strain.assign(curve.strain.begin() + static_cast<std::ptrdiff_t>(n), curve.strain.end());
    r.actual.assign(curve.stress.begin() + static_cast<std::ptrdiff_t>(n), curve.stress.end());
    try {
      r.metrics = metrics::summarize(r.actual, r.predicted, mape_epsilon);
    } catch (const DataError& e) {
      throw DataError("sample '" + curve.sample_id + "': " + e.what());
    }
    results.push_back(std::move(r));
  }
  std::sort(results.begin(), results.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; });
  return results;
}

AggregateMetrics aggregate(std::span<const SampleResult> samples) {
  if (samples.empty()) throw DataError("aggregate: no samples");
  AggregateMetrics a;
  for (const auto& s : samples) {
    a.mape += s.metrics.mape;
    a.rmse += s.metrics.rmse;
    a.r2 += s.metrics.r2;
  }
  const double n = static_cast<double>(samples.size());
  a.mape /= n;
  a.rmse /= n;
  a.r2 /= n;
  return a;
}

const Dataset& find_dataset(std::span<const Dataset> datasets, std::string_view name) {
  for (const auto& ds : datasets)
    if (ds.name == name) return ds;
  throw DataError("unknown dataset '" + std::string(name) + "'");
}

namespace {

struct PreparedRun {
  const Dataset* target = nullptr;
  std::vector<const Dataset*> sources;
  DataSplit split;
  std::vector<RawCurve> train_curves;
  std::vector<RawCurve> test_curves;
  std::size_t param_width = 0;
};

PreparedRun prepare(const ExperimentPlan& plan, std::span<const Dataset> datasets) {
  plan.train_config.validate();
  if (plan.grid_n < 2) throw DataError("grid size must be at least 2");
  PreparedRun run;
  run.target = &find_dataset(datasets, plan.target);
  for (const auto& name : plan.sources) {
    if (name == plan.target) throw DataError("dataset '" + name + "' is both a source and the target");
    run.sources.push_back(&find_dataset(datasets, name));
  }
  if (plan.variant != Variant::vanilla && run.sources.empty())
    throw DataError(std::string(to_string(plan.variant)) + " needs at least one source dataset");

  run.split = resolve_split(plan, *run.target);
  run.train_curves = run.target->select(run.split.train_ids);
  run.test_curves = run.target->select(run.split.test_ids);

  const std::size_t target_arity = run.target->param_schema.size();
  std::size_t widest = target_arity;
  for (const auto* src : run.sources) {
    const std::size_t arity = src->param_schema.size();
    if (arity != target_arity && !plan.pad_schema)
      throw DataError("source '" + src->name + "' has " + std::to_string(arity) + " process parameters, target '" +
                      run.target->name + "' has " + std::to_string(target_arity) +
                      "; enable schema padding to transfer across arities");
    widest = std::max(widest, arity);
  }
  run.param_width = plan.variant == Variant::vanilla ? target_arity : widest;
  return run;
}

seqnet::TrainConfig pretrain_config(const ExperimentPlan& plan) {
  seqnet::TrainConfig cfg = plan.train_config;
  if (plan.pretrain_epochs) cfg.epochs = *plan.pretrain_epochs;
  return cfg;
}

}  // namespace

EvalReport run_variant(const ExperimentPlan& plan, std::span<const Dataset> datasets, ModelCheckpoint* model) {
  const PreparedRun run = prepare(plan, datasets);
  const seqnet::TrainConfig& cfg = plan.train_config;
  const std::size_t input_dim = 1 + run.param_width;

  EvalReport report;
  report.variant = plan.variant;
  report.target = plan.target;
  report.split = run.split;
  report.config = cfg;
  report.grid_n = plan.grid_n;
  report.mape_epsilon = plan.mape_epsilon;

  seqnet::ModelParams initial;
  std::string source_label;
  switch (plan.variant) {
    case Variant::vanilla:
      initial = seqnet::init_params(cfg.seed, input_dim, cfg.hidden_dim);
      break;
    case Variant::tl_all: {
      report.sources = plan.sources;
      std::vector<Dataset> picked;
      for (const auto* src : run.sources) picked.push_back(*src);
      const auto pool = concat_shuffle_sources(picked, cfg.seed);
      std::string joined;
      for (const auto& name : plan.sources) joined += (joined.empty() ? "" : "+") + name;
      const auto source_model = pretrain(pool, pretrain_config(plan), joined, run.param_width);
      report.pretrain_epochs = pretrain_config(plan).epochs;
      report.pretrain_loss = source_model.loss_history;
      initial = transfer_init(source_model, input_dim, cfg.hidden_dim);
      source_label = joined;
      break;
    }
    case Variant::dtw_tl: {
      report.sources = plan.sources;
      std::vector<Dataset> candidates;
      for (const auto* src : run.sources) candidates.push_back(*src);
      // Ranked against the target training curves only.
      auto ranking = rank_sources(candidates, run.train_curves, plan.grid_n);
      const Dataset& chosen = find_dataset(candidates, ranking.selected);
      const auto source_model = pretrain(chosen.curves, pretrain_config(plan), chosen.name, run.param_width);
      report.pretrain_epochs = pretrain_config(plan).epochs;
      report.pretrain_loss = source_model.loss_history;
      initial = transfer_init(source_model, input_dim, cfg.hidden_dim);
      source_label = chosen.name;
      report.selected_source = ranking.selected;
      report.dtw_ranking = std::move(ranking);
      break;
    }
  }

  auto tuned = finetune(initial, run.train_curves, cfg, run.target->name, source_label, run.param_width);
  report.finetune_loss = tuned.loss_history;
  report.per_sample = evaluate_checkpoint(tuned, run.test_curves, plan.mape_epsilon);
  report.aggregate = aggregate(report.per_sample);
  if (model) *model = std::move(tuned);
  return report;
}

SourceSweep run_source_sweep(const ExperimentPlan& plan, std::span<const Dataset> datasets) {
  const PreparedRun run = prepare(plan, datasets);
  if (run.sources.size() < 2) throw DataError("a source sweep needs at least two sources");
  std::vector<Dataset> candidates;
  for (const auto* src : run.sources) candidates.push_back(*src);
  const auto ranking = rank_sources(candidates, run.train_curves, plan.grid_n);

  SourceSweep sweep;
  std::vector<double> dtw;
  std::vector<double> mape;
  for (const auto& entry : ranking.entries) {
    ExperimentPlan single = plan;
    single.variant = Variant::dtw_tl;
    single.sources = {entry.source};
    single.train_ids = run.split.train_ids;
    single.test_ids = run.split.test_ids;
    const auto report = run_variant(single, datasets);
    sweep.entries.push_back({entry.source, entry.avg_dtw, report.aggregate});
    dtw.push_back(entry.avg_dtw);
    mape.push_back(report.aggregate.mape);
  }
  sweep.pearson_dtw_mape = metrics::pearson(dtw, mape);
  return sweep;
}

}  // namespace curvetransfer
