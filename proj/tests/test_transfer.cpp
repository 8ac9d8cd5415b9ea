#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "curvetransfer/error.hpp"
#include "curvetransfer/synthgen.hpp"
#include "curvetransfer/transfer.hpp"
#include "test_support.hpp"

namespace ct = curvetransfer;
namespace sn = curvetransfer::seqnet;
using ct::testing::make_curve;
using ct::testing::ramp_curve;

namespace {

ct::Dataset grid_dataset(std::string name, std::vector<ct::ParamSpec> schema,
                         std::vector<std::pair<std::string, std::vector<double>>> samples) {
  ct::Dataset ds{std::move(name), ct::DatasetRole::target, schema, {}};
  for (auto& [id, values] : samples) {
    std::vector<ct::ParamValue> params;
    for (std::size_t j = 0; j < schema.size(); ++j) params.push_back({schema[j].name, values[j]});
    ds.curves.push_back(ramp_curve(id, 8, 100.0, params));
  }
  return ds;
}

sn::TrainConfig quick_config(std::size_t epochs = 3) {
  sn::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden_dim = 6;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;
  return cfg;
}

// Small, fast slice of the synthetic suite.
const ct::synth::Suite& suite() {
  static const ct::synth::Suite s = ct::synth::standard_suite(42);
  return s;
}

std::vector<ct::Dataset> all_datasets() {
  std::vector<ct::Dataset> out = suite().sources;
  out.insert(out.end(), suite().targets.begin(), suite().targets.end());
  return out;
}

ct::ExperimentPlan quick_plan(ct::Variant variant, const std::string& target) {
  ct::ExperimentPlan plan;
  plan.variant = variant;
  for (const auto& s : suite().sources) plan.sources.push_back(s.name);
  plan.target = target;
  plan.auto_extreme = true;
  plan.train_config = quick_config(2);
  plan.pretrain_epochs = 1;
  return plan;
}

}  // namespace

TEST(MinMax, ScalesIntoUnitRange) {
  const auto s = ct::MinMax::fit(std::vector<double>{0.0, 0.01, 0.04});
  EXPECT_DOUBLE_EQ(s.scale(0.02), 0.5);
  EXPECT_FALSE(s.degenerate);
}

TEST(MinMax, ConstantColumnIsDegenerate) {
  const auto s = ct::MinMax::fit(std::vector<double>{3.0, 3.0});
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.scale(3.0), 0.0);
  EXPECT_EQ(s.scale(7.0), 0.0);
}

TEST(MinMax, OutOfRangeValuesMayLeaveUnitInterval) {
  const auto s = ct::MinMax::fit(std::vector<double>{10.0, 20.0});
  EXPECT_DOUBLE_EQ(s.scale(25.0), 1.5);
  EXPECT_DOUBLE_EQ(s.scale(5.0), -0.5);
}

TEST(MinMax, UnscaleStress) {
  const auto s = ct::MinMax::fit(std::vector<double>{0.0, 400.0});
  EXPECT_DOUBLE_EQ(s.unscale(0.5), 200.0);
}

TEST(FitScalers, ConstantParameterColumnIsFlagged) {
  const std::vector<ct::RawCurve> curves{ramp_curve("1", 8, 50, {{"p", 2.0}, {"q", 1.0}}),
                                         ramp_curve("2", 8, 70, {{"p", 2.0}, {"q", 3.0}})};
  const auto s = ct::fit_scalers(curves);
  EXPECT_TRUE(s.params[0].degenerate);
  EXPECT_FALSE(s.params[1].degenerate);
  EXPECT_EQ(s.input_dim(), 3u);
  const auto f = ct::curve_features(curves[0], s);
  for (std::size_t t = 0; t < f.rows(); ++t) EXPECT_EQ(f(t, 1), 0.0);
}

TEST(FitScalers, PaddingAddsDegenerateColumns) {
  const std::vector<ct::RawCurve> curves{ramp_curve("1", 8, 50, {{"p", 1.0}}), ramp_curve("2", 8, 70, {{"p", 3.0}})};
  const auto s = ct::fit_scalers(curves, 3);
  ASSERT_EQ(s.params.size(), 3u);
  EXPECT_TRUE(s.params[1].degenerate);
  EXPECT_TRUE(s.params[2].degenerate);
}

TEST(FitScalers, MixedArityNeedsAWidth) {
  const std::vector<ct::RawCurve> curves{ramp_curve("1", 8, 50, {{"p", 1.0}}), ramp_curve("2", 8, 70),
                                         ramp_curve("3", 8, 60, {{"p", 3.0}})};
  EXPECT_THROW(ct::fit_scalers(curves), ct::DataError);
  const auto s = ct::fit_scalers(curves, 2);
  EXPECT_EQ(s.params[0].min, 1.0);
  EXPECT_EQ(s.params[0].max, 3.0);
  EXPECT_TRUE(s.params[1].degenerate);
  EXPECT_THROW(ct::fit_scalers(curves, 0), ct::DataError);
}

TEST(WindowDataset, SevenPointsGiveTwoWindows) {
  const std::vector<ct::RawCurve> curves{ramp_curve("1", 7, 50, {{"p", 1.0}})};
  const auto set = ct::window_dataset(curves, ct::fit_scalers(curves), 5);
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.windows[0].rows(), 5u);
  EXPECT_EQ(set.windows[0].cols(), 2u);
}

TEST(WindowDataset, NoWindowCrossesCurves) {
  const std::vector<ct::RawCurve> curves{ramp_curve("a", 6, 50), ramp_curve("b", 6, 80)};
  const auto scalers = ct::fit_scalers(curves);
  const auto set = ct::window_dataset(curves, scalers, 5);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.window_sample, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(set.targets[0], scalers.stress.scale(50.0));
  EXPECT_DOUBLE_EQ(set.targets[1], scalers.stress.scale(80.0));
}

TEST(WindowDataset, ParamColumnsConstantWithinCurve) {
  const std::vector<ct::RawCurve> curves{ramp_curve("a", 12, 50, {{"p", 1.0}, {"q", 5.0}}),
                                         ramp_curve("b", 12, 90, {{"p", 2.0}, {"q", 9.0}})};
  const auto set = ct::window_dataset(curves, ct::fit_scalers(curves), 5);
  for (const auto& w : set.windows)
    for (std::size_t r = 1; r < w.rows(); ++r) {
      EXPECT_EQ(w(r, 1), w(0, 1));
      EXPECT_EQ(w(r, 2), w(0, 2));
    }
}

TEST(WindowDataset, ShortCurvesAreSkippedAndReported) {
  const std::vector<ct::RawCurve> curves{ramp_curve("short", 5, 50), ramp_curve("long", 9, 50)};
  const auto set = ct::window_dataset(curves, ct::fit_scalers(curves), 5);
  EXPECT_EQ(set.skipped, (std::vector<std::string>{"short"}));
  EXPECT_EQ(set.size(), 4u);
  const std::vector<ct::RawCurve> only_short{ramp_curve("short", 5, 50)};
  EXPECT_THROW(ct::window_dataset(only_short, ct::fit_scalers(only_short), 5), ct::DataError);
}

TEST(ExtremeSamples, PolymerDoeCorners) {
  std::vector<std::pair<std::string, std::vector<double>>> samples;
  int id = 1;
  for (double speed : {10, 20, 30, 40, 50})
    for (double temp : {220, 230, 240, 250, 260}) samples.push_back({std::to_string(id++), {speed, temp}});
  const auto ds = grid_dataset("pla", {{"speed", "mm/s"}, {"temp", "C"}}, samples);
  const auto picked = ct::select_extreme_training_samples(ds);
  EXPECT_EQ(*ds.at(picked[0]).param("speed"), 10.0);
  EXPECT_EQ(*ds.at(picked[0]).param("temp"), 220.0);
  EXPECT_EQ(*ds.at(picked[1]).param("speed"), 50.0);
  EXPECT_EQ(*ds.at(picked[1]).param("temp"), 260.0);
}

TEST(ExtremeSamples, AlSi10MgFirstDataset) {
  // Laser power (W), scanning speed (mm/s) for samples 1..32 at 0.1 mm hatch spacing.
  const double doe[32][2] = {{60, 250},   {160, 250},  {160, 800},  {160, 1350}, {260, 250},  {260, 800},
                             {260, 1350}, {260, 1900}, {360, 250},  {360, 800},  {360, 1350}, {360, 1900},
                             {360, 2450}, {360, 3000}, {460, 250},  {460, 800},  {460, 1350}, {460, 1900},
                             {460, 2450}, {460, 3000}, {110, 250},  {210, 250},  {60, 500},   {110, 500},
                             {160, 500},  {210, 500},  {260, 500},  {360, 500},  {460, 500},  {110, 800},
                             {210, 800},  {210, 1350}};
  std::vector<std::pair<std::string, std::vector<double>>> samples;
  for (int i = 0; i < 32; ++i) samples.push_back({std::to_string(i + 1), {doe[i][0], doe[i][1]}});
  const auto ds = grid_dataset("alsi10mg_1", {{"laser_power", "W"}, {"scanning_speed", "mm/s"}}, samples);
  const auto picked = ct::select_extreme_training_samples(ds);
  EXPECT_EQ(picked[0], "1");
  EXPECT_EQ(picked[1], "20");
}

TEST(ExtremeSamples, TwoSamplesReturnsBoth) {
  const auto ds = grid_dataset("two", {{"p", ""}}, {{"a", {5.0}}, {"b", {1.0}}});
  const auto picked = ct::select_extreme_training_samples(ds);
  EXPECT_EQ(picked[0], "b");
  EXPECT_EQ(picked[1], "a");
}

TEST(ExtremeSamples, TiesBrokenByIdAndAlwaysDistinct) {
  const auto ds = grid_dataset("flat", {{"p", ""}}, {{"z", {1.0}}, {"y", {1.0}}, {"x", {1.0}}});
  const auto picked = ct::select_extreme_training_samples(ds);
  EXPECT_EQ(picked[0], "x");
  EXPECT_EQ(picked[1], "y");
}

TEST(ConcatShuffle, PermutationWithPrefixedIds) {
  const auto& src = suite().sources;
  const auto all = ct::concat_shuffle_sources(src, 5);
  std::size_t expected = 0;
  for (const auto& ds : src) expected += ds.curves.size();
  EXPECT_EQ(all.size(), expected);
  EXPECT_EQ(all.size(), 100u);
  std::set<std::string> ids;
  for (const auto& c : all) ids.insert(c.sample_id);
  EXPECT_EQ(ids.size(), all.size());
  EXPECT_TRUE(ids.contains(src[0].name + "/1"));

  const auto again = ct::concat_shuffle_sources(src, 5);
  EXPECT_EQ(all, again);
  EXPECT_NE(all, ct::concat_shuffle_sources(src, 6));
}

TEST(ConcatShuffle, SingleDatasetIsPermutation) {
  const std::vector<ct::Dataset> one{suite().sources[0]};
  const auto out = ct::concat_shuffle_sources(one, 1);
  ASSERT_EQ(out.size(), one[0].curves.size());
  std::set<std::string> ids;
  for (const auto& c : out) ids.insert(c.sample_id);
  for (const auto& c : one[0].curves) EXPECT_TRUE(ids.contains(one[0].name + "/" + c.sample_id));
}

TEST(Pretrain, LossDecreasesAndIsDeterministic) {
  const auto& src = suite().sources[3];
  const auto cfg = quick_config(8);
  const auto a = ct::pretrain(src.curves, cfg, src.name);
  EXPECT_LT(a.loss_history.back(), a.loss_history.front());
  EXPECT_EQ(a.provenance.stage, ct::Stage::pretrained);
  EXPECT_EQ(a.provenance.source_dataset, src.name);
  EXPECT_EQ(a, ct::pretrain(src.curves, cfg, src.name));
}

TEST(Pretrain, EmptySourceIsRejected) {
  EXPECT_THROW(ct::pretrain(std::vector<ct::RawCurve>{}, quick_config(), "none"), ct::DataError);
}

TEST(TransferInit, CopiesWeightsExactly) {
  const auto& src = suite().sources[0];
  const auto ckpt = ct::pretrain(src.curves, quick_config(1), src.name);
  const auto init = ct::transfer_init(ckpt, ckpt.input_dim(), ckpt.hidden_dim());
  EXPECT_EQ(init, ckpt.params);
}

TEST(TransferInit, ShapeMismatchIsRejected) {
  ct::ModelCheckpoint ckpt;
  ckpt.params = sn::init_params(0, 3, 4);
  EXPECT_THROW(ct::transfer_init(ckpt, 4, 4), ct::DataError);
  EXPECT_THROW(ct::transfer_init(ckpt, 3, 5), ct::DataError);
}

TEST(Finetune, ImprovesOnTransferredStart) {
  const auto& src = suite().sources[3];  // resin_like
  const auto& tgt = suite().targets[0];  // alsi10mg_like
  const auto ckpt = ct::pretrain(src.curves, quick_config(3), src.name);
  const auto ids = ct::select_extreme_training_samples(tgt);
  const auto train = tgt.select(std::vector<std::string>(ids.begin(), ids.end()));
  const auto init = ct::transfer_init(ckpt, ckpt.input_dim(), ckpt.hidden_dim());

  const auto tuned = ct::finetune(init, train, quick_config(20), tgt.name, src.name);
  const auto set = ct::window_dataset(train, tuned.scalers, tuned.sequence_length);
  EXPECT_LT(sn::evaluate_loss(tuned.params, set.windows, set.targets),
            sn::evaluate_loss(init, set.windows, set.targets));
  EXPECT_NE(tuned.params, init);
  EXPECT_EQ(tuned.provenance.stage, ct::Stage::finetuned);
  EXPECT_EQ(tuned.provenance.target_dataset, tgt.name);
}

TEST(PredictCurve, LengthAndOverfitAccuracy) {
  const std::vector<ct::RawCurve> curve{ramp_curve("only", 30, 200.0)};
  auto cfg = quick_config(300);
  cfg.hidden_dim = 8;
  const auto ckpt = ct::finetune(sn::init_params(1, 1, 8), curve, cfg, "one");
  const auto pred = ct::predict_curve(ckpt, curve[0]);
  ASSERT_EQ(pred.size(), 30u - ckpt.sequence_length);
  for (std::size_t k = 0; k < pred.size(); ++k)
    EXPECT_NEAR(pred[k], curve[0].stress[k + ckpt.sequence_length], 0.05 * 200.0) << "k=" << k;
}

TEST(PredictCurve, TooShortCurveIsRejected) {
  ct::ModelCheckpoint ckpt;
  ckpt.params = sn::init_params(0, 1, 2);
  ckpt.scalers.params = {};
  EXPECT_THROW(ct::predict_curve(ckpt, ramp_curve("s", 5, 10.0)), ct::DataError);
}

TEST(ResolveSplit, ExplicitAndAutomatic) {
  const auto& tgt = suite().targets[0];
  ct::ExperimentPlan plan;
  plan.train_ids = {"1", "2"};
  const auto split = ct::resolve_split(plan, tgt);
  EXPECT_EQ(split.train_ids, (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(split.test_ids.size(), tgt.curves.size() - 2);

  plan.train_ids.clear();
  plan.auto_extreme = true;
  const auto corners = ct::select_extreme_training_samples(tgt);
  EXPECT_EQ(ct::resolve_split(plan, tgt).train_ids, std::vector<std::string>(corners.begin(), corners.end()));
}

TEST(ResolveSplit, RejectsOverlapUnknownAndMissing) {
  const auto& tgt = suite().targets[0];
  ct::ExperimentPlan plan;
  EXPECT_THROW(ct::resolve_split(plan, tgt), ct::DataError);
  plan.train_ids = {"nope"};
  EXPECT_THROW(ct::resolve_split(plan, tgt), ct::DataError);
  plan.train_ids = {"1"};
  plan.test_ids = {"1", "2"};
  EXPECT_THROW(ct::resolve_split(plan, tgt), ct::DataError);
}

TEST(Aggregate, UnweightedMeanOfSamples) {
  std::vector<ct::SampleResult> rs(2);
  rs[0].metrics = {10.0, 1.0, 0.5, 100, 0};
  rs[1].metrics = {20.0, 3.0, -0.5, 5, 0};
  const auto a = ct::aggregate(rs);
  EXPECT_DOUBLE_EQ(a.mape, 15.0);
  EXPECT_DOUBLE_EQ(a.rmse, 2.0);
  EXPECT_DOUBLE_EQ(a.r2, 0.0);
}

TEST(RunVariant, VanillaHasNoRanking) {
  const auto data = all_datasets();
  const auto r = ct::run_variant(quick_plan(ct::Variant::vanilla, "alsi10mg_like"), data);
  EXPECT_FALSE(r.dtw_ranking.has_value());
  EXPECT_FALSE(r.selected_source.has_value());
  EXPECT_TRUE(r.pretrain_loss.empty());
  EXPECT_EQ(r.per_sample.size(), r.split.test_ids.size());
  EXPECT_TRUE(std::is_sorted(r.per_sample.begin(), r.per_sample.end(),
                             [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; }));
}

TEST(RunVariant, DtwSelectsGroundTruthSource) {
  const auto data = all_datasets();
  for (const auto& [target, source] : suite().ground_truth) {
    const auto r = ct::run_variant(quick_plan(ct::Variant::dtw_tl, target), data);
    ASSERT_TRUE(r.selected_source.has_value());
    EXPECT_EQ(*r.selected_source, source) << target;
    EXPECT_EQ(r.dtw_ranking->selected, source);
  }
}

TEST(RunVariant, TlAllPretrainsOnEverySource) {
  const auto data = all_datasets();
  auto plan = quick_plan(ct::Variant::tl_all, "steel_like");
  ct::ModelCheckpoint model;
  const auto r = ct::run_variant(plan, data, &model);
  EXPECT_EQ(r.sources.size(), 4u);
  EXPECT_EQ(r.pretrain_loss.size(), 1u);
  EXPECT_EQ(model.provenance.source_dataset, "nylon_like+pla_like+cfabs_like+resin_like");
}

TEST(RunVariant, DeterministicGivenSeed) {
  const auto data = all_datasets();
  const auto plan = quick_plan(ct::Variant::dtw_tl, "ti6al4v_like");
  const auto a = ct::run_variant(plan, data);
  const auto b = ct::run_variant(plan, data);
  EXPECT_EQ(a.finetune_loss, b.finetune_loss);
  EXPECT_EQ(a.aggregate.mape, b.aggregate.mape);
}

TEST(RunVariant, SourceEqualToTargetIsRejected) {
  const auto data = all_datasets();
  auto plan = quick_plan(ct::Variant::dtw_tl, "steel_like");
  plan.sources.push_back("steel_like");
  EXPECT_THROW(ct::run_variant(plan, data), ct::DataError);
}

TEST(RunVariant, ArityMismatchNeedsPadding) {
  auto data = all_datasets();
  // Drop one parameter from every curve of one source.
  auto& src = data[0];
  src.param_schema.pop_back();
  for (auto& c : src.curves) c.params.pop_back();
  auto plan = quick_plan(ct::Variant::tl_all, "alsi10mg_like");
  EXPECT_THROW(ct::run_variant(plan, data), ct::DataError);
  plan.pad_schema = true;
  EXPECT_NO_THROW(ct::run_variant(plan, data));
}
