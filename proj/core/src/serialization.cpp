#include "curvetransfer/serialization.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "curvetransfer/error.hpp"

namespace curvetransfer {

using nlohmann::json;

namespace {

json tensor_json(std::span<const double> values, std::size_t rows, std::size_t cols) {
  return {{"rows", rows}, {"cols", cols}, {"data", std::vector<double>(values.begin(), values.end())}};
}

std::pair<std::size_t, std::size_t> tensor_shape(const seqnet::ModelParams& p, std::string_view name) {
  const std::size_t h = p.hidden_dim;
  if (name.starts_with("b_out")) return {1, 1};
  if (name.starts_with("b_")) return {h, 1};
  if (name == "W_out") return {1, h};
  if (name.ends_with("h")) return {h, h};
  return {h, p.input_dim};
}

MinMax minmax_from_json(const json& j) {
  return {j.at("min").get<double>(), j.at("max").get<double>(), j.at("degenerate").get<bool>()};
}

json minmax_json(const MinMax& m) { return {{"min", m.min}, {"max", m.max}, {"degenerate", m.degenerate}}; }

template <class Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const seqnet::ModelParams& params) {
  json weights = json::object();
  params.for_each_tensor([&](std::string_view name, std::span<const double> v) {
    const auto [rows, cols] = tensor_shape(params, name);
    weights[std::string(name)] = tensor_json(v, rows, cols);
  });
  return weights;
}

seqnet::ModelParams params_from_json(const json& doc) {
  return guarded("malformed weights", [&] {
    const auto& fh = doc.at("W_fh");
    const auto& fx = doc.at("W_fx");
    const std::size_t hidden = fh.at("rows").get<std::size_t>();
    const std::size_t input = fx.at("cols").get<std::size_t>();
    auto params = seqnet::ModelParams::zeros(input, hidden);
    params.for_each_tensor([&](std::string_view name, std::span<double> v) {
      const auto& t = doc.at(std::string(name));
      const auto [rows, cols] = tensor_shape(params, name);
      const auto data = t.at("data").get<std::vector<double>>();
      if (t.at("rows").get<std::size_t>() != rows || t.at("cols").get<std::size_t>() != cols || data.size() != v.size())
        throw DataError("weight tensor '" + std::string(name) + "' has the wrong shape");
      std::copy(data.begin(), data.end(), v.begin());
    });
    return params;
  });
}

json to_json(const FeatureScalers& scalers) {
  json params = json::array();
  for (const auto& p : scalers.params) params.push_back(minmax_json(p));
  return {{"strain", minmax_json(scalers.strain)}, {"params", params}, {"stress", minmax_json(scalers.stress)}};
}

FeatureScalers scalers_from_json(const json& doc) {
  return guarded("malformed feature_scalers", [&] {
    FeatureScalers s;
    s.strain = minmax_from_json(doc.at("strain"));
    s.stress = minmax_from_json(doc.at("stress"));
    for (const auto& p : doc.at("params")) s.params.push_back(minmax_from_json(p));
    return s;
  });
}

json to_json(const ModelCheckpoint& ckpt) {
  json doc;
  doc["format_version"] = ckpt.format_version;
  doc["input_dim"] = ckpt.input_dim();
  doc["hidden_dim"] = ckpt.hidden_dim();
  doc["sequence_length"] = ckpt.sequence_length;
  doc["seed"] = ckpt.seed;
  doc["provenance"] = {{"source_dataset", ckpt.provenance.source_dataset},
                       {"target_dataset", ckpt.provenance.target_dataset},
                       {"stage", std::string(to_string(ckpt.provenance.stage))}};
  doc["feature_scalers"] = to_json(ckpt.scalers);
  doc["weights"] = to_json(ckpt.params);
  if (ckpt.optimizer_state && ckpt.optimizer_state->step > 0) {
    doc["optimizer_state"] = {{"kind", "adam"},
                              {"step", ckpt.optimizer_state->step},
                              {"m", to_json(ckpt.optimizer_state->m)},
                              {"v", to_json(ckpt.optimizer_state->v)}};
  }
  doc["loss_history"] = ckpt.loss_history;
  return doc;
}

ModelCheckpoint checkpoint_from_json(const json& doc) {
  return guarded("malformed checkpoint", [&] {
    ModelCheckpoint ckpt;
    ckpt.format_version = doc.at("format_version").get<int>();
    if (ckpt.format_version != ModelCheckpoint::kFormatVersion)
      throw DataError("unsupported checkpoint format_version " + std::to_string(ckpt.format_version));
    ckpt.params = params_from_json(doc.at("weights"));
    if (doc.at("input_dim").get<std::size_t>() != ckpt.params.input_dim ||
        doc.at("hidden_dim").get<std::size_t>() != ckpt.params.hidden_dim)
      throw DataError("checkpoint dimensions disagree with its weights");
    ckpt.scalers = scalers_from_json(doc.at("feature_scalers"));
    if (ckpt.scalers.input_dim() != ckpt.params.input_dim)
      throw DataError("checkpoint feature scalers disagree with input_dim");
    ckpt.sequence_length = doc.at("sequence_length").get<std::size_t>();
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    const auto& prov = doc.at("provenance");
    ckpt.provenance.source_dataset = prov.value("source_dataset", std::string{});
    ckpt.provenance.target_dataset = prov.value("target_dataset", std::string{});
    ckpt.provenance.stage = parse_stage(prov.at("stage").get<std::string>());
    if (doc.contains("optimizer_state")) {
      const auto& os = doc.at("optimizer_state");
      seqnet::AdamState state;
      state.step = os.at("step").get<std::uint64_t>();
      state.m = params_from_json(os.at("m"));
      state.v = params_from_json(os.at("v"));
      ckpt.optimizer_state = std::move(state);
    }
    ckpt.loss_history = doc.value("loss_history", std::vector<double>{});
    return ckpt;
  });
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint) {
  write_json(path, to_json(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json to_json(const SourceRanking& ranking) {
  json entries = json::array();
  for (const auto& e : ranking.entries) entries.push_back({{"source", e.source}, {"avg_dtw", e.avg_dtw}});
  return {{"entries", entries}, {"selected", ranking.selected}};
}

SourceRanking ranking_from_json(const json& doc) {
  return guarded("malformed ranking", [&] {
    SourceRanking r;
    for (const auto& e : doc.at("entries")) r.entries.push_back({e.at("source").get<std::string>(), e.at("avg_dtw").get<double>()});
    r.selected = doc.at("selected").get<std::string>();
    return r;
  });
}

json to_json(const seqnet::TrainConfig& config) {
  return {{"learning_rate", config.learning_rate},
          {"epochs", config.epochs},
          {"sequence_length", config.sequence_length},
          {"hidden_dim", config.hidden_dim},
          {"optimizer", std::string(seqnet::to_string(config.optimizer))},
          {"seed", config.seed}};
}

seqnet::TrainConfig train_config_from_json(const json& doc, seqnet::TrainConfig cfg) {
  return guarded("malformed train_config", [&] {
    cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
    cfg.epochs = doc.value("epochs", cfg.epochs);
    cfg.sequence_length = doc.value("sequence_length", cfg.sequence_length);
    cfg.hidden_dim = doc.value("hidden_dim", cfg.hidden_dim);
    if (doc.contains("optimizer")) cfg.optimizer = seqnet::parse_optimizer(doc.at("optimizer").get<std::string>());
    cfg.seed = doc.value("seed", cfg.seed);
    return cfg;
  });
}

json to_json(const ExperimentPlan& plan) {
  json tc = to_json(plan.train_config);
  tc.erase("seed");
  if (plan.pretrain_epochs) tc["pretrain_epochs"] = *plan.pretrain_epochs;
  json doc = {{"variant", std::string(to_string(plan.variant))},
              {"sources", plan.sources},
              {"target", plan.target},
              {"grid_n", plan.grid_n},
              {"train_config", tc},
              {"seed", plan.train_config.seed},
              {"pad_schema", plan.pad_schema},
              {"mape_epsilon", plan.mape_epsilon}};
  if (!plan.train_ids.empty()) doc["train_ids"] = plan.train_ids;
  if (plan.auto_extreme) doc["auto_extreme"] = true;
  if (!plan.test_ids.empty()) doc["test_ids"] = plan.test_ids;
  return doc;
}

ExperimentPlan plan_from_json(const json& doc) {
  return guarded("malformed experiment plan", [&] {
    ExperimentPlan plan;
    plan.variant = parse_variant(doc.at("variant").get<std::string>());
    plan.sources = doc.value("sources", std::vector<std::string>{});
    plan.target = doc.at("target").get<std::string>();
    plan.train_ids = doc.value("train_ids", std::vector<std::string>{});
    plan.test_ids = doc.value("test_ids", std::vector<std::string>{});
    plan.auto_extreme = doc.value("auto_extreme", false);
    plan.grid_n = doc.value("grid_n", plan.grid_n);
    plan.pad_schema = doc.value("pad_schema", false);
    plan.mape_epsilon = doc.value("mape_epsilon", plan.mape_epsilon);
    if (doc.contains("train_config")) {
      const auto& tc = doc.at("train_config");
      plan.train_config = train_config_from_json(tc);
      if (tc.contains("pretrain_epochs")) plan.pretrain_epochs = tc.at("pretrain_epochs").get<std::size_t>();
    }
    if (doc.contains("seed")) plan.train_config.seed = doc.at("seed").get<std::uint64_t>();
    if (plan.train_ids.empty() && !plan.auto_extreme)
      throw DataError("plan needs train_ids or auto_extreme: true");
    return plan;
  });
}

json to_json(const EvalReport& report) {
  json doc;
  doc["format_version"] = 1;
  doc["variant"] = std::string(to_string(report.variant));
  doc["target"] = report.target;
  doc["sources"] = report.sources;
  if (report.selected_source) doc["selected_source"] = *report.selected_source;
  if (report.dtw_ranking) doc["dtw_ranking"] = to_json(*report.dtw_ranking);
  doc["split"] = {{"train_ids", report.split.train_ids}, {"test_ids", report.split.test_ids}};

  json samples = json::array();
  for (const auto& s : report.per_sample) {
    samples.push_back({{"sample_id", s.sample_id},
                       {"mape", s.metrics.mape},
                       {"rmse", s.metrics.rmse},
                       {"r2", s.metrics.r2},
                       {"n_points", s.metrics.n_points},
                       {"n_excluded", s.metrics.n_excluded},
                       {"predicted", s.predicted}});
  }
  doc["per_sample"] = samples;
  doc["aggregate"] = {{"mape", report.aggregate.mape}, {"rmse", report.aggregate.rmse}, {"r2", report.aggregate.r2}};
  if (report.pearson_dtw_mape) doc["pearson_dtw_mape"] = *report.pearson_dtw_mape;

  json config = to_json(report.config);
  config["pretrain_epochs"] = report.pretrain_epochs;
  config["grid_n"] = report.grid_n;
  config["mape_epsilon"] = report.mape_epsilon;
  doc["config"] = config;
  doc["seed"] = report.config.seed;
  doc["loss_history"] = {{"pretrain", report.pretrain_loss}, {"finetune", report.finetune_loss}};
  return doc;
}

json to_json(const SourceSweep& sweep) {
  json entries = json::array();
  for (const auto& e : sweep.entries)
    entries.push_back({{"source", e.source},
                       {"avg_dtw", e.avg_dtw},
                       {"mape", e.metrics.mape},
                       {"rmse", e.metrics.rmse},
                       {"r2", e.metrics.r2}});
  return {{"entries", entries}, {"pearson_dtw_mape", sweep.pearson_dtw_mape}};
}

void write_prediction_csv(const std::filesystem::path& path, const SampleResult& sample) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "strain,stress_actual,stress_predicted\n";
  char buf[64];
  const auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, ptr - buf);
  };
  for (std::size_t i = 0; i < sample.predicted.size(); ++i) {
    put(sample.strain[i]);
    out << ',';
    put(sample.actual[i]);
    out << ',';
    put(sample.predicted[i]);
    out << '\n';
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("failed writing file: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace curvetransfer
