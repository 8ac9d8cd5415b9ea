#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "curvetransfer/error.hpp"
#include "curvetransfer/serialization.hpp"

namespace curvetransfer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<Dataset> load_all(std::span<const fs::path> manifests) {
  std::vector<Dataset> out;
  for (const auto& m : manifests) out.push_back(load_dataset(m));
  return out;
}

std::vector<std::string> resolve_train_ids(const Dataset& target, const SplitOptions& split) {
  if (!split.train_ids.empty()) {
    for (const auto& id : split.train_ids) target.at(id);
    return split.train_ids;
  }
  if (split.auto_extreme) {
    const auto corners = select_extreme_training_samples(target);
    return {corners.begin(), corners.end()};
  }
  throw DataError("choose a training split with --train-ids or --auto-extreme");
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

SourceRanking cmd_rank(std::span<const fs::path> sources, const fs::path& target, const SplitOptions& split,
                       std::size_t grid_n, const std::optional<fs::path>& dump_dir) {
  const auto source_sets = load_all(sources);
  const Dataset target_set = load_dataset(target);
  const auto train = target_set.select(resolve_train_ids(target_set, split));
  auto ranking = rank_sources(source_sets, train, grid_n);

  if (dump_dir) {
    const auto target_grid = to_grid_curve(train.front(), grid_n);
    for (const auto& ds : source_sets) {
      const auto source_grid = to_grid_curve(ds.curves.front(), grid_n);
      const auto matrices = cost_matrices(source_grid.stress_norm, target_grid.stress_norm);
      write_dtw_csv(*dump_dir / ds.name, matrices, backtrack_path(matrices.cumulative));
    }
  }
  return ranking;
}

PipelineInputs load_plan_file(const fs::path& plan_path) {
  const json doc = read_json(plan_path);
  PipelineInputs inputs;
  inputs.plan = plan_from_json(doc);
  const fs::path base = plan_path.parent_path();

  std::map<std::string, fs::path> manifests;
  if (doc.contains("datasets")) {
    for (const auto& [name, path] : doc.at("datasets").items()) manifests[name] = base / path.get<std::string>();
  }
  const auto load_named = [&](const std::string& ref) -> std::string {
    auto it = manifests.find(ref);
    Dataset ds = load_dataset(it != manifests.end() ? it->second : base / ref);
    std::string name = ds.name;
    if (std::none_of(inputs.datasets.begin(), inputs.datasets.end(), [&](const Dataset& d) { return d.name == name; }))
      inputs.datasets.push_back(std::move(ds));
    return name;
  };
  for (auto& s : inputs.plan.sources) s = load_named(s);
  inputs.plan.target = load_named(inputs.plan.target);
  inputs.sweep_sources = doc.value("sweep_sources", false);
  return inputs;
}

EvalReport cmd_pipeline(const PipelineInputs& inputs, const fs::path& out_dir) {
  EvalReport report = run_variant(inputs.plan, inputs.datasets);
  std::optional<SourceSweep> sweep;
  if (inputs.sweep_sources) {
    sweep = run_source_sweep(inputs.plan, inputs.datasets);
    report.pearson_dtw_mape = sweep->pearson_dtw_mape;
  }

  fs::create_directories(out_dir / "predictions");
  write_json(out_dir / "report.json", to_json(report));
  for (const auto& s : report.per_sample) write_prediction_csv(out_dir / "predictions" / (s.sample_id + ".csv"), s);
  if (report.dtw_ranking) write_json(out_dir / "ranking.json", to_json(*report.dtw_ranking));
  if (sweep) write_json(out_dir / "source_sweep.json", to_json(*sweep));
  return report;
}

synth::Suite cmd_synth(std::uint64_t seed, const fs::path& out_dir) {
  auto suite = synth::standard_suite(seed);
  fs::create_directories(out_dir);
  for (const auto& ds : suite.sources) write_dataset(ds, out_dir);
  for (const auto& ds : suite.targets) write_dataset(ds, out_dir);
  json families = json::object();
  for (const auto& [name, fam] : suite.families) families[name] = std::string(synth::to_string(fam));
  write_json(out_dir / "ground_truth.json", {{"seed", seed}, {"ground_truth", suite.ground_truth}, {"families", families}});
  return suite;
}

namespace {

struct TrainFlags {
  std::size_t epochs = 100;
  std::optional<std::size_t> pretrain_epochs;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::size_t seq_len = seqnet::kDefaultSequenceLength;
  std::size_t hidden = seqnet::kDefaultHiddenDim;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--optimizer", optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    cmd->add_option("--seq-len", seq_len, "Points per input window")->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", hidden, "LSTM hidden units")->check(CLI::PositiveNumber);
  }

  seqnet::TrainConfig config(std::uint64_t seed) const {
    seqnet::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.optimizer = seqnet::parse_optimizer(optimizer);
    cfg.sequence_length = seq_len;
    cfg.hidden_dim = hidden;
    cfg.seed = seed;
    return cfg;
  }
};

void print_aggregate(std::ostream& out, const AggregateMetrics& a) {
  out << "MAPE " << format_fixed(a.mape, 2) << "%  RMSE " << format_fixed(a.rmse, 3) << "  R2 "
      << format_fixed(a.r2, 4) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Source selection by dynamic time warping and LSTM transfer learning for stress-strain curves",
               "curvetransfer"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  std::string stage = "setup";
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed")->envname("CURVETRANSFER_SEED");
  };

  // ingest
  fs::path ingest_manifest;
  auto* ingest = app.add_subcommand("ingest", "Load and validate a dataset manifest");
  ingest->add_option("--manifest", ingest_manifest, "Dataset manifest (JSON)")->required();

  // rank
  std::vector<fs::path> rank_sources_paths;
  fs::path rank_target;
  SplitOptions rank_split;
  std::size_t grid_n = kDefaultGridSize;
  std::optional<fs::path> rank_out;
  std::optional<fs::path> dump_dtw;
  auto* rank = app.add_subcommand("rank", "Rank source datasets by average DTW to the target training curves");
  rank->add_option("--sources", rank_sources_paths, "Source manifests")->required();
  rank->add_option("--target", rank_target, "Target manifest")->required();
  auto* rank_ids = rank->add_option("--train-ids", rank_split.train_ids, "Target training sample ids")->delimiter(',');
  rank->add_flag("--auto-extreme", rank_split.auto_extreme, "Train on the all-min and all-max DOE corners")
      ->excludes(rank_ids);
  rank->add_option("--grid-n", grid_n, "Strain grid points")->check(CLI::Range(2, 1000000));
  rank->add_option("--out", rank_out, "Directory for ranking.json");
  rank->add_option("--dump-dtw", dump_dtw, "Directory for local/cumulative matrix and path CSVs");

  // pretrain
  std::vector<fs::path> pre_sources;
  fs::path pre_out;
  std::size_t pre_width = 0;
  TrainFlags pre_flags;
  auto* pre = app.add_subcommand("pretrain", "Train a model on one or more source datasets");
  pre->add_option("--sources", pre_sources, "Source manifests (several are concatenated and shuffled)")->required();
  pre->add_option("--out", pre_out, "Checkpoint file to write")->required();
  pre->add_option("--param-width", pre_width, "Pad the parameter block to this many columns");
  pre_flags.add_to(pre);
  add_seed(pre);

  // finetune
  std::optional<fs::path> ft_checkpoint;
  fs::path ft_target;
  fs::path ft_out;
  SplitOptions ft_split;
  bool ft_pad = false;
  TrainFlags ft_flags;
  auto* ft = app.add_subcommand("finetune", "Fine-tune a checkpoint (or a fresh model) on the target training curves");
  ft->add_option("--checkpoint", ft_checkpoint, "Pre-trained checkpoint; omit to train from scratch");
  ft->add_option("--target", ft_target, "Target manifest")->required();
  ft->add_option("--out", ft_out, "Checkpoint file to write")->required();
  auto* ft_ids = ft->add_option("--train-ids", ft_split.train_ids, "Target training sample ids")->delimiter(',');
  ft->add_flag("--auto-extreme", ft_split.auto_extreme, "Train on the all-min and all-max DOE corners")->excludes(ft_ids);
  ft->add_flag("--pad-schema", ft_pad, "Zero-pad the target parameter block to the checkpoint's width");
  ft_flags.add_to(ft);
  add_seed(ft);

  // evaluate
  fs::path ev_checkpoint;
  fs::path ev_target;
  fs::path ev_out;
  std::vector<std::string> ev_test_ids;
  SplitOptions ev_split;
  double mape_eps = metrics::kDefaultMapeEpsilon;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on target test curves");
  ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint file")->required();
  ev->add_option("--target", ev_target, "Target manifest")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  auto* ev_tests = ev->add_option("--test-ids", ev_test_ids, "Test sample ids")->delimiter(',');
  auto* ev_ids = ev->add_option("--train-ids", ev_split.train_ids, "Training ids; the rest is scored")
                     ->delimiter(',')
                     ->excludes(ev_tests);
  ev->add_flag("--auto-extreme", ev_split.auto_extreme, "Score everything but the DOE corners")
      ->excludes(ev_ids)
      ->excludes(ev_tests);
  ev->add_option("--mape-epsilon", mape_eps, "Zero guard for MAPE, in stress units");

  // pipeline
  std::optional<fs::path> plan_path;
  std::vector<fs::path> pl_sources;
  std::optional<fs::path> pl_target;
  SplitOptions pl_split;
  std::string variant = "dtw_tl";
  fs::path pl_out;
  bool pl_sweep = false;
  bool pl_pad = false;
  TrainFlags pl_flags;
  auto* pl = app.add_subcommand("pipeline", "Run one experiment variant end to end");
  auto* pl_plan = pl->add_option("--plan", plan_path, "Experiment plan (JSON)");
  pl->add_option("--sources", pl_sources, "Source manifests")->excludes(pl_plan);
  pl->add_option("--target", pl_target, "Target manifest")->excludes(pl_plan);
  auto* pl_ids = pl->add_option("--train-ids", pl_split.train_ids, "Target training sample ids")->delimiter(',');
  pl->add_flag("--auto-extreme", pl_split.auto_extreme, "Train on the all-min and all-max DOE corners")->excludes(pl_ids);
  pl->add_option("--variant", variant, "vanilla, tl_all or dtw_tl")->check(CLI::IsMember({"vanilla", "tl_all", "dtw_tl"}));
  pl->add_option("--grid-n", grid_n, "Strain grid points")->check(CLI::Range(2, 1000000));
  pl->add_option("--pretrain-epochs", pl_flags.pretrain_epochs, "Epochs for the source stage (default: --epochs)");
  pl->add_option("--mape-epsilon", mape_eps, "Zero guard for MAPE, in stress units");
  pl->add_flag("--pad-schema", pl_pad, "Zero-pad parameter blocks of differing arity");
  pl->add_flag("--sweep-sources", pl_sweep, "Also transfer from every source and correlate DTW with MAPE");
  pl->add_option("--out", pl_out, "Output directory")->required();
  pl_flags.add_to(pl);
  add_seed(pl);

  // synth
  fs::path synth_out;
  auto* syn = app.add_subcommand("synth", "Write the synthetic benchmark suite");
  syn->add_option("--out", synth_out, "Output directory")->required();
  add_seed(syn);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*ingest) {
      stage = "ingest";
      const Dataset ds = load_dataset(ingest_manifest);
      json samples = json::array();
      for (const auto& c : ds.curves)
        samples.push_back({{"id", c.sample_id},
                           {"n_points", c.size()},
                           {"max_strain", *std::max_element(c.strain.begin(), c.strain.end())},
                           {"max_stress", *std::max_element(c.stress.begin(), c.stress.end())}});
      json schema = json::array();
      for (const auto& p : ds.param_schema) schema.push_back({{"name", p.name}, {"unit", p.unit}});
      out << json{{"name", ds.name},
                  {"role", std::string(to_string(ds.role))},
                  {"param_schema", schema},
                  {"n_samples", ds.curves.size()},
                  {"samples", samples}}
                 .dump(2)
          << '\n';
    } else if (*rank) {
      stage = "rank";
      if (!rank_split.auto_extreme && rank_split.train_ids.empty()) {
        err << "error: rank needs --train-ids or --auto-extreme\n";
        return kExitUsage;
      }
      const auto ranking = cmd_rank(rank_sources_paths, rank_target, rank_split, grid_n, dump_dtw);
      const json doc = to_json(ranking);
      if (rank_out) {
        fs::create_directories(*rank_out);
        write_json(*rank_out / "ranking.json", doc);
      }
      out << doc.dump(2) << '\n';
    } else if (*pre) {
      stage = "pretrain";
      const auto sets = load_all(pre_sources);
      const auto cfg = pre_flags.config(seed);
      std::vector<RawCurve> curves;
      std::string name;
      if (sets.size() == 1) {
        curves = sets.front().curves;
        name = sets.front().name;
      } else {
        curves = concat_shuffle_sources(sets, seed);
        for (const auto& s : sets) name += (name.empty() ? "" : "+") + s.name;
      }
      const auto ckpt = pretrain(curves, cfg, name, pre_width);
      if (pre_out.has_parent_path()) fs::create_directories(pre_out.parent_path());
      save_checkpoint(pre_out, ckpt);
      out << "pretrained on " << name << ": " << curves.size() << " curves, final loss "
          << ckpt.loss_history.back() << '\n';
    } else if (*ft) {
      stage = "finetune";
      if (!ft_split.auto_extreme && ft_split.train_ids.empty()) {
        err << "error: finetune needs --train-ids or --auto-extreme\n";
        return kExitUsage;
      }
      const Dataset target = load_dataset(ft_target);
      const auto train = target.select(resolve_train_ids(target, ft_split));
      auto cfg = ft_flags.config(seed);
      seqnet::ModelParams initial;
      std::string source_name;
      std::size_t width = target.param_schema.size();
      if (ft_checkpoint) {
        const auto source = load_checkpoint(*ft_checkpoint);
        if (ft_pad) width = std::max(width, source.scalers.params.size());
        cfg.hidden_dim = source.hidden_dim();
        cfg.sequence_length = source.sequence_length;
        initial = transfer_init(source, 1 + width, source.hidden_dim());
        source_name = source.provenance.source_dataset;
      } else {
        initial = seqnet::init_params(seed, 1 + width, cfg.hidden_dim);
      }
      const auto ckpt = finetune(initial, train, cfg, target.name, source_name, width);
      if (ft_out.has_parent_path()) fs::create_directories(ft_out.parent_path());
      save_checkpoint(ft_out, ckpt);
      out << "fine-tuned on " << target.name << " (" << train.size() << " curves), final loss "
          << ckpt.loss_history.back() << '\n';
    } else if (*ev) {
      stage = "evaluate";
      const auto ckpt = load_checkpoint(ev_checkpoint);
      const Dataset target = load_dataset(ev_target);
      std::vector<std::string> test_ids = ev_test_ids;
      if (test_ids.empty()) {
        if (!ev_split.auto_extreme && ev_split.train_ids.empty()) {
          test_ids = target.sample_ids();
        } else {
          const auto train = resolve_train_ids(target, ev_split);
          for (const auto& id : target.sample_ids())
            if (std::find(train.begin(), train.end(), id) == train.end()) test_ids.push_back(id);
        }
      }
      const auto results = evaluate_checkpoint(ckpt, target.select(test_ids), mape_eps);
      const auto agg = aggregate(results);
      fs::create_directories(ev_out / "predictions");
      json samples = json::array();
      for (const auto& s : results) {
        write_prediction_csv(ev_out / "predictions" / (s.sample_id + ".csv"), s);
        samples.push_back({{"sample_id", s.sample_id},
                           {"mape", s.metrics.mape},
                           {"rmse", s.metrics.rmse},
                           {"r2", s.metrics.r2},
                           {"n_points", s.metrics.n_points},
                           {"n_excluded", s.metrics.n_excluded}});
      }
      write_json(ev_out / "evaluation.json",
                 {{"target", target.name},
                  {"checkpoint_stage", std::string(to_string(ckpt.provenance.stage))},
                  {"source_dataset", ckpt.provenance.source_dataset},
                  {"seed", ckpt.seed},
                  {"per_sample", samples},
                  {"aggregate", {{"mape", agg.mape}, {"rmse", agg.rmse}, {"r2", agg.r2}}}});
      print_aggregate(out, agg);
    } else if (*pl) {
      stage = "pipeline";
      PipelineInputs inputs;
      if (plan_path) {
        inputs = load_plan_file(*plan_path);
        // Command-line seed overrides only when given explicitly.
        if (pl->count("--seed") > 0 || std::getenv("CURVETRANSFER_SEED")) inputs.plan.train_config.seed = seed;
      } else {
        if (!pl_target) {
          err << "error: pipeline needs --plan or --target\n";
          return kExitUsage;
        }
        if (!pl_split.auto_extreme && pl_split.train_ids.empty()) {
          err << "error: pipeline needs --train-ids or --auto-extreme\n";
          return kExitUsage;
        }
        ExperimentPlan& plan = inputs.plan;
        plan.variant = parse_variant(variant);
        inputs.datasets = load_all(pl_sources);
        for (const auto& d : inputs.datasets) plan.sources.push_back(d.name);
        inputs.datasets.push_back(load_dataset(*pl_target));
        plan.target = inputs.datasets.back().name;
        plan.train_ids = pl_split.train_ids;
        plan.auto_extreme = pl_split.auto_extreme;
        plan.grid_n = grid_n;
        plan.train_config = pl_flags.config(seed);
        plan.pretrain_epochs = pl_flags.pretrain_epochs;
        plan.pad_schema = pl_pad;
        plan.mape_epsilon = mape_eps;
      }
      inputs.sweep_sources = inputs.sweep_sources || pl_sweep;
      const auto report = cmd_pipeline(inputs, pl_out);
      out << "variant " << to_string(report.variant) << " on " << report.target;
      if (report.selected_source) out << " (source " << *report.selected_source << ")";
      out << " seed " << report.config.seed << '\n';
      print_aggregate(out, report.aggregate);
      if (report.pearson_dtw_mape) out << "pearson(DTW, MAPE) " << format_fixed(*report.pearson_dtw_mape, 3) << '\n';
    } else if (*syn) {
      stage = "synth";
      const auto suite = cmd_synth(seed, synth_out);
      out << "wrote " << suite.sources.size() << " source and " << suite.targets.size() << " target datasets to "
          << synth_out.string() << " (seed " << seed << ")\n";
    }
  } catch (const DivergenceError& e) {
    err << "error [" << stage << "]: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DataError& e) {
    err << "error [" << stage << "]: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error [" << stage << "]: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace curvetransfer::cli
