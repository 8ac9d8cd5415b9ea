#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "curvetransfer/serialization.hpp"
#include "test_support.hpp"

namespace ct = curvetransfer;
namespace cli = curvetransfer::cli;
using ct::testing::TempDir;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> source_args(const std::filesystem::path& dir) {
  return {"--sources", (dir / "nylon_like.json").string(), (dir / "pla_like.json").string(),
          (dir / "cfabs_like.json").string(), (dir / "resin_like.json").string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Cli, NoCommandIsUsageError) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
}

TEST(Cli, HelpSucceeds) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("pipeline"), std::string::npos);
}

TEST(Cli, SynthWritesReingestableSuite) {
  TempDir dir;
  const auto r = run({"synth", "--seed", "4", "--out", dir.path().string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  int manifests = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    if (e.path().extension() == ".json" && e.path().stem() != "ground_truth") {
      EXPECT_NO_THROW(ct::load_dataset(e.path())) << e.path();
      ++manifests;
    }
  EXPECT_EQ(manifests, 7);
  const auto gt = ct::read_json(dir / "ground_truth.json");
  EXPECT_EQ(gt.at("seed"), 4);
  EXPECT_EQ(gt.at("ground_truth").size(), 3u);
  const auto ds = ct::load_dataset(dir / "resin_like.json");
  EXPECT_EQ(ds, ct::synth::standard_suite(4).sources[3]);
}

TEST(Cli, SynthSeedsChangeContent) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--seed", "1", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"synth", "--seed", "2", "--out", (dir / "b").string()}).code, 0);
  EXPECT_NE(slurp(dir / "a/pla_like/1.csv"), slurp(dir / "b/pla_like/1.csv"));
}

TEST(Cli, IngestReportsSamples) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto r = run({"ingest", "--manifest", (dir / "steel_like.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc.at("n_samples"), 18);
  EXPECT_EQ(doc.at("role"), "target");
}

TEST(Cli, UnreadableManifestIsDataError) {
  const auto r = run({"rank", "--sources", "/no/such/source.json", "--target", "/no/such/target.json",
                      "--auto-extreme"});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("/no/such/"), std::string::npos);
  EXPECT_NE(r.err.find("rank"), std::string::npos);
}

TEST(Cli, RankSelectsGroundTruthAndWritesJson) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--seed", "42", "--out", dir.path().string()}).code, 0);
  const auto gt = ct::read_json(dir / "ground_truth.json").at("ground_truth");
  for (const auto& [target, source] : gt.items()) {
    const auto out = dir / ("rank_" + target);
    const auto r = run(cat(cat({"rank"}, source_args(dir.path())),
                           {"--target", (dir / (target + ".json")).string(), "--auto-extreme", "--out", out.string()}));
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const auto doc = ct::read_json(out / "ranking.json");
    EXPECT_EQ(doc.at("selected"), source.get<std::string>());
    EXPECT_EQ(doc.at("entries").size(), 4u);
  }
}

TEST(Cli, RankSingleSource) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto r = run({"rank", "--sources", (dir / "pla_like.json").string(), "--target",
                      (dir / "steel_like.json").string(), "--train-ids", "1,18"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out).at("selected"), "pla_like");
}

TEST(Cli, RankDumpsDtwMatrices) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto r = run({"rank", "--sources", (dir / "pla_like.json").string(), "--target",
                      (dir / "steel_like.json").string(), "--auto-extreme", "--grid-n", "20", "--dump-dtw",
                      (dir / "dtw").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "dtw/pla_like/cumulative.csv"));
}

TEST(Cli, RankNeedsSplit) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto r = run({"rank", "--sources", (dir / "pla_like.json").string(), "--target",
                      (dir / "steel_like.json").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST(Cli, PipelineVanillaHasNoRankingAndIsDeterministic) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto args = cat(cat({"pipeline", "--variant", "vanilla"}, source_args(dir.path())),
                        {"--target", (dir / "ti6al4v_like.json").string(), "--auto-extreme", "--epochs", "2",
                         "--hidden", "4", "--seed", "3"});
  const auto a = run(cat(args, {"--out", (dir / "run_a").string()}));
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  EXPECT_NE(a.out.find("MAPE"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "run_a/ranking.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run_a/predictions"));
  const auto report = ct::read_json(dir / "run_a/report.json");
  EXPECT_EQ(report.at("seed"), 3);
  for (const auto& s : report.at("per_sample"))
    EXPECT_TRUE(std::filesystem::exists(dir / "run_a/predictions" / (s.at("sample_id").get<std::string>() + ".csv")));

  ASSERT_EQ(run(cat(args, {"--out", (dir / "run_b").string()})).code, 0);
  EXPECT_EQ(slurp(dir / "run_a/report.json"), slurp(dir / "run_b/report.json"));
}

TEST(Cli, PipelineFromPlanFile) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const json plan = {{"variant", "dtw_tl"},
                     {"datasets",
                      {{"nylon", "nylon_like.json"}, {"resin", "resin_like.json"}, {"steel", "steel_like.json"}}},
                     {"sources", {"nylon", "resin"}},
                     {"target", "steel"},
                     {"auto_extreme", true},
                     {"seed", 5},
                     {"train_config", {{"epochs", 2}, {"hidden_dim", 4}, {"pretrain_epochs", 1}}}};
  ct::write_json(dir / "plan.json", plan);
  const auto r = run({"pipeline", "--plan", (dir / "plan.json").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto ranking = ct::read_json(dir / "out/ranking.json");
  EXPECT_EQ(ranking.at("selected"), "nylon_like");
  EXPECT_EQ(ct::read_json(dir / "out/report.json").at("seed"), 5);
}

TEST(Cli, SeedFromEnvironment) {
  TempDir dir;
  ::setenv("CURVETRANSFER_SEED", "77", 1);
  const auto r = run({"synth", "--out", dir.path().string()});
  ::unsetenv("CURVETRANSFER_SEED");
  ASSERT_EQ(r.code, cli::kExitOk);
  EXPECT_EQ(ct::read_json(dir / "ground_truth.json").at("seed"), 77);
}

TEST(Cli, PretrainFinetuneEvaluate) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  auto r = run({"pretrain", "--sources", (dir / "resin_like.json").string(), "--out", (dir / "src.json").string(),
                "--epochs", "1", "--hidden", "4"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  r = run({"finetune", "--checkpoint", (dir / "src.json").string(), "--target", (dir / "alsi10mg_like.json").string(),
           "--auto-extreme", "--epochs", "2", "--out", (dir / "tuned.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto tuned = ct::load_checkpoint(dir / "tuned.json");
  EXPECT_EQ(tuned.provenance.source_dataset, "resin_like");
  EXPECT_EQ(tuned.hidden_dim(), 4u);
  r = run({"evaluate", "--checkpoint", (dir / "tuned.json").string(), "--target", (dir / "alsi10mg_like.json").string(),
           "--auto-extreme", "--out", (dir / "eval").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(ct::read_json(dir / "eval/evaluation.json").at("per_sample").size(), 23u);
}

TEST(Cli, DivergenceExitCode) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.path().string()}).code, 0);
  const auto r = run({"pretrain", "--sources", (dir / "pla_like.json").string(), "--out", (dir / "x.json").string(),
                      "--epochs", "3", "--optimizer", "sgd", "--lr", "1e200"});
  EXPECT_EQ(r.code, cli::kExitDivergence) << r.err;
  EXPECT_NE(r.err.find("epoch"), std::string::npos);
}
