#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "drnav/cli.hpp"
#include "drnav/config.hpp"
#include "drnav/error.hpp"
#include "drnav/estimator.hpp"
#include "drnav/trace.hpp"
#include "support.hpp"

namespace drnav {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::size_t lines(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string l; std::getline(f, l);) ++n;
  return n;
}

// ---- config ----

TEST(Config, EveryKeyHasADefaultAndAppearsInHelp) {
  const auto keys = config_keys();
  ASSERT_GT(keys.size(), 50u);
  const std::string help = config_help();
  for (const auto& k : keys) {
    EXPECT_FALSE(k.default_value.is_null()) << k.key;
    EXPECT_NE(help.find(k.key), std::string::npos) << k.key;
  }
}

TEST(Config, HelpCommandListsKeys) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("match.alpha"), std::string::npos);
  EXPECT_NE(r.out.find("noise.epsilon"), std::string::npos);
}

TEST(Config, OverridesApply) {
  GlobalConfig cfg;
  apply_override(cfg, "match.alpha=0.25");
  apply_override(cfg, "estimator.queue_bucket=rush");
  apply_override(cfg, "noise.seed=42");
  apply_override(cfg, "estimator.landmarks_enabled=false");
  EXPECT_DOUBLE_EQ(cfg.estimator.match.alpha, 0.25);
  EXPECT_EQ(cfg.estimator.queue_bucket, "rush");
  EXPECT_EQ(cfg.noise.seed, 42u);
  EXPECT_FALSE(cfg.estimator.landmarks_enabled);
}

TEST(Config, NewQueueBucketThroughOverride) {
  GlobalConfig cfg;
  apply_override(cfg, "queue.buckets.evening.mu=3");
  apply_override(cfg, "queue.buckets.evening.sigma=1");
  apply_override(cfg, "estimator.queue_bucket=evening");
  finalize(cfg);
  EXPECT_DOUBLE_EQ(queue_correction(cfg.estimator.queue, "evening"), 7.5);
}

TEST(Config, UnknownKeyRejected) {
  GlobalConfig cfg;
  try {
    apply_override(cfg, "match.beta=1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  EXPECT_THROW(apply_override(cfg, "no_equals_sign"), Error);
  EXPECT_THROW(apply_override(cfg, "match.alpha=\"high\""), Error);
}

TEST(Config, FileThenOverrides) {
  test::TempDir dir("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"match": {"alpha": 0.9, "radius_m": 250}, "estimator": {"slot_s": 1.0}})";
  }
  const auto cfg = load_config(dir / "c.json", {"match.alpha=0.1"});
  EXPECT_DOUBLE_EQ(cfg.estimator.match.alpha, 0.1);
  EXPECT_DOUBLE_EQ(cfg.estimator.match.radius_m, 250.0);
  EXPECT_DOUBLE_EQ(cfg.estimator.slot_s, 1.0);
  EXPECT_DOUBLE_EQ(cfg.eval.slot_s, 1.0);
}

TEST(Config, InvalidValueCaughtAtFinalize) {
  EXPECT_THROW(load_config({}, {"estimator.gps_train_m=50"}), Error);
  EXPECT_THROW(load_config({}, {"noise.delta_std=-1"}), Error);
}

TEST(Config, JsonRoundTrip) {
  GlobalConfig cfg;
  apply_override(cfg, "match.alpha=0.3");
  GlobalConfig back;
  apply_config_json(back, to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

// ---- commands ----

class CliPipeline : public ::testing::Test {
 protected:
  test::TempDir dir{"cli"};
  std::filesystem::path sim_dir() const { return dir / "sim"; }
  void simulate_five_lights() {
    const auto r = cli({"simulate", "--builtin", "five_lights", "--seed", "3", "--out", sim_dir().string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

TEST_F(CliPipeline, SimulateWritesThreeFiles) {
  simulate_five_lights();
  for (const char* f : {"trace.jsonl", "landmarks.json", "truth.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(sim_dir() / f)) << f;
  }
}

TEST_F(CliPipeline, SimulateFromScenarioFile) {
  ASSERT_EQ(cli({"scenario", "cruise_only", "--out", (dir / "s.json").string()}).code, 0);
  const auto r = cli({"simulate", "--scenario", (dir / "s.json").string(), "--out", sim_dir().string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(sim_dir() / "trace.jsonl"));
}

TEST_F(CliPipeline, MissingScenarioFails) {
  const auto r = cli({"simulate", "--scenario", (dir / "nope.json").string(), "--out", sim_dir().string()});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliPipeline, MalformedScenarioFails) {
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"events\": [ {\"type\": \"teleport\"} ]}";
  }
  const auto r = cli({"simulate", "--scenario", (dir / "bad.json").string(), "--out", sim_dir().string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliPipeline, SameSeedSameBytes) {
  simulate_five_lights();
  const auto first = slurp(sim_dir() / "trace.jsonl");
  ASSERT_EQ(cli({"simulate", "--builtin", "five_lights", "--set", "noise.seed=3", "--out", (dir / "again").string()})
                .code,
            0);
  EXPECT_EQ(first, slurp(dir / "again" / "trace.jsonl"));
  EXPECT_EQ(slurp(sim_dir() / "truth.csv"), slurp(dir / "again" / "truth.csv"));
}

TEST_F(CliPipeline, RunWritesOneRowPerSlot) {
  simulate_five_lights();
  const auto poses = dir / "poses.csv";
  const auto r = cli({"run", "--trace", (sim_dir() / "trace.jsonl").string(), "--db",
                      (sim_dir() / "landmarks.json").string(), "--out", poses.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto slots = partition_slots(load_trace(sim_dir() / "trace.jsonl"), 2.0);
  EXPECT_EQ(lines(poses), slots.size() + 1);
}

TEST_F(CliPipeline, RunWithoutDatabase) {
  simulate_five_lights();
  const auto r = cli({"run", "--trace", (sim_dir() / "trace.jsonl").string(), "--out", (dir / "p.csv").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "p.csv").find("calibrated"), std::string::npos);
}

TEST_F(CliPipeline, EvalPrintsSummary) {
  simulate_five_lights();
  ASSERT_EQ(cli({"run", "--trace", (sim_dir() / "trace.jsonl").string(), "--out", (dir / "p.csv").string()}).code, 0);
  const auto r = cli({"eval", "--poses", (dir / "p.csv").string(), "--truth", (sim_dir() / "truth.csv").string(),
                      "--out", (dir / "report").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("mean_slot_error_m"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "summary.json"));
}

TEST_F(CliPipeline, DetectWritesPatternCsv) {
  simulate_five_lights();
  const auto out = dir / "patterns.csv";
  const auto r = cli({"detect", "--trace", (sim_dir() / "trace.jsonl").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string s = slurp(out);
  EXPECT_EQ(s.rfind("kind,t_start,t_end,t_anchor,heading_delta_deg,f0,", 0), 0u);
  std::size_t stop_go = 0;
  for (std::size_t p = s.find("\nstop_go,"); p != std::string::npos; p = s.find("\nstop_go,", p + 1)) ++stop_go;
  EXPECT_EQ(stop_go, 5u);
}

TEST_F(CliPipeline, UnknownOverrideFailsRun) {
  simulate_five_lights();
  const auto r = cli({"run", "--trace", (sim_dir() / "trace.jsonl").string(), "--set", "bogus.key=1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bogus.key"), std::string::npos);
}

TEST(Cli, NoSubcommandIsUsageError) {
  const auto r = cli({});
  EXPECT_NE(r.code, 0);
}

TEST(Cli, ConfigCommandPrintsEffectiveConfig) {
  const auto r = cli({"config", "--set", "match.alpha=0.7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.dump().find("0.7") != std::string::npos, true);
}

}  // namespace
}  // namespace drnav
