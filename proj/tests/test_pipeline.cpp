#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symdisc/pipeline.hpp"

using namespace symdisc;
using pipeline::json;

namespace {

std::filesystem::path tmp_dir() {
  const std::filesystem::path p = std::filesystem::path(SYMDISC_TEST_TMP);
  std::filesystem::create_directories(p);
  return p;
}

json run_in_process(const std::string& command, const json& overlay, std::vector<std::string> sets = {}) {
  pipeline::RunContext ctx;
  ctx.quiet = true;
  ctx.config = pipeline::resolve_config(command, std::nullopt, overlay, sets, &ctx.warnings);
  pipeline::run(ctx);
  return pipeline::results_document(ctx, "ok");
}

// Runs the CLI and returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string(SYMDISC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

const json kRotationInvariants = {{"field", {"-x2", "x1"}},
                                  {"degree", 2},
                                  {"domain", {{"lower", {-1, -1}}, {"upper", {1, 1}}}},
                                  {"soundness_trials", 100},
                                  {"known_invariants", {"x1^2 + x2^2 + 0.001*x1"}}};

}  // namespace

TEST(Config, DefaultsExistForEveryCommand) {
  for (const char* c : {"discover", "enforce", "invariants", "flow", "score", "generate"}) {
    EXPECT_EQ(pipeline::default_config(c)["command"], c);
  }
  EXPECT_THROW(pipeline::default_config("train"), ConfigError);
}

TEST(Config, UnknownKeysReportTheirPath) {
  try {
    pipeline::resolve_config("discover", std::nullopt, json{{"discovery", {{"epochz", 3}}}}, {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "discovery.epochz");
  }
  EXPECT_THROW(pipeline::resolve_config("score", std::nullopt, json{{"jobs", {{{"kind", "similarity"}, {"colour", 1}}}}}, {}),
               ConfigError);
}

TEST(Config, LayersApplyInOrder) {
  const json preset = {{"seed", 1}, {"discovery", {{"lr", 0.5}, {"epochs", 10}}}};
  const json file = {{"discovery", {{"lr", 0.25}}}};
  const json c = pipeline::resolve_config("discover", preset, file, {"discovery.epochs=20", "basis.kind=polynomial"});
  EXPECT_EQ(c["seed"], 1);
  EXPECT_EQ(c["discovery"]["lr"], 0.25);
  EXPECT_EQ(c["discovery"]["epochs"], 20);
  EXPECT_EQ(c["discovery"]["loss"], "L1");
  EXPECT_EQ(c["basis"]["kind"], "polynomial");
}

TEST(Config, CommandMismatchIsAnError) {
  EXPECT_THROW(pipeline::resolve_config("flow", json{{"command", "discover"}}, std::nullopt, {}), ConfigError);
  EXPECT_EQ(pipeline::resolve_config("", json{{"command", "flow"}}, std::nullopt, {})["command"], "flow");
}

TEST(Config, MissingScheduleWarns) {
  std::vector<std::string> w;
  pipeline::resolve_config("enforce", std::nullopt, std::nullopt, {}, &w);
  EXPECT_EQ(w.size(), 1u);
  w.clear();
  pipeline::resolve_config("enforce", std::nullopt, std::nullopt, {"schedule.lambda=0.1"}, &w);
  EXPECT_TRUE(w.empty());
}

TEST(Config, PresetsResolve) {
  for (const auto& entry : std::filesystem::directory_iterator(pipeline::preset_dir())) {
    if (entry.path().extension() != ".json") continue;
    const json p = pipeline::read_json_file(entry.path().string());
    EXPECT_NO_THROW(pipeline::resolve_config("", p, std::nullopt, {})) << entry.path();
  }
}

TEST(Config, StageSeedsAreIndependentAndStable) {
  EXPECT_EQ(pipeline::stage_seed(0, "model"), pipeline::stage_seed(0, "model"));
  EXPECT_NE(pipeline::stage_seed(0, "model"), pipeline::stage_seed(0, "discovery"));
  EXPECT_NE(pipeline::stage_seed(0, "model"), pipeline::stage_seed(1, "model"));
}

TEST(Pipeline, InvariantsCommand) {
  const json doc = run_in_process("invariants", kRotationInvariants);
  EXPECT_EQ(doc["schema_version"], 1);
  EXPECT_EQ(doc["outputs"]["basis"]["features"].size(), 2u);
  EXPECT_TRUE(doc["outputs"]["soundness"]["passed"].get<bool>());
  EXPECT_TRUE(doc["outputs"]["completeness"][0]["passed"].get<bool>());
}

TEST(Pipeline, HashIsReproducibleAndIgnoresTimings) {
  const json a = run_in_process("invariants", kRotationInvariants);
  const json b = run_in_process("invariants", kRotationInvariants);
  EXPECT_EQ(a["reproducibility_hash"], b["reproducibility_hash"]);
  EXPECT_EQ(a["reproducibility_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
  const json c = run_in_process("invariants", kRotationInvariants, {"epsilon=1e-6"});
  EXPECT_NE(a["reproducibility_hash"], c["reproducibility_hash"]);
}

TEST(Pipeline, EmbeddedConfigReruns) {
  const json a = run_in_process("invariants", kRotationInvariants);
  const json b = run_in_process("", a["config"]);
  EXPECT_EQ(a["reproducibility_hash"], b["reproducibility_hash"]);
}

TEST(Pipeline, ScoreJobs) {
  const json jobs = {{"jobs",
                      {{{"name", "rot-vs-dx"},
                        {"field_a", {"-x2", "x1"}},
                        {"field_b", {"1", "0"}},
                        {"region", {{"lower", {-1, -1}}, {"upper", {1, 1}}}},
                        {"samples", 2000}},
                       {{"kind", "symmetry"},
                        {"function", "x1^2 + x2^2"},
                        {"field", {"-x2", "x1"}},
                        {"region", {{"kind", "dataset"}, {"dataset", {{"name", "exp1-train"}}}}}}}}};
  const json doc = run_in_process("score", jobs);
  ASSERT_EQ(doc["outputs"]["jobs"].size(), 2u);
  EXPECT_NEAR(doc["outputs"]["jobs"][0]["value"].get<double>(), 0.6, 0.1);
  EXPECT_NEAR(doc["outputs"]["jobs"][1]["value"].get<double>(), 0.0, 1e-12);
  EXPECT_EQ(doc["outputs"]["jobs"][1]["method"], "dataset");
}

TEST(Pipeline, ScoreDimensionMismatchIsAConfigError) {
  const json jobs = {{"jobs",
                      {{{"field_a", {"-x2", "x1"}},
                        {"field_b", {"1", "0", "0"}},
                        {"region", {{"lower", {-1, -1}}, {"upper", {1, 1}}}},
                        {"samples", 10}}}}};
  EXPECT_THROW(run_in_process("score", jobs), Error);
}

TEST(Pipeline, FlowTraceCsv) {
  const auto out = tmp_dir() / "flow.json";
  pipeline::RunContext ctx;
  ctx.quiet = true;
  ctx.out_path = out.string();
  ctx.config = pipeline::resolve_config("flow", std::nullopt,
                                        json{{"field", {"-x2", "x1"}}, {"start", {1, 0}}, {"t_end", 6.283185307179586},
                                             {"steps", 1000}, {"function", "x1^2 + x2^2"}},
                                        {});
  pipeline::run(ctx);
  EXPECT_LT(ctx.outputs["trace"]["return_distance"].get<double>(), 1e-6);
  std::ifstream is(tmp_dir() / "flow.trace.csv");
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "t,x1,x2,f");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 1001);
}

TEST(Cli, ExitCodes) {
  const auto dir = tmp_dir();
  EXPECT_EQ(cli("--version"), 0);
  EXPECT_EQ(cli("invariants --set 'field=[\"-x2\",\"x1\"]' --set 'domain.lower=[-1,-1]' --set 'domain.upper=[1,1]' --out " +
                (dir / "ok.json").string()),
            0);
  EXPECT_EQ(read_json(dir / "ok.json")["status"], "ok");
  EXPECT_EQ(cli("invariants --set nonsense.key=1"), 2);
  EXPECT_EQ(cli("invariants --preset does-not-exist"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("flow --set 'field=[\"-x2\",\"x1\",\"x3\"]' --set 'start=[1,0]'"), 2);
}

TEST(Cli, DivergingFlowExitsThreeAndKeepsThePartialTrace) {
  const auto dir = tmp_dir();
  std::filesystem::remove(dir / "blowup.trace.csv");
  const int rc = cli("flow --set 'field=[\"x1^2\"]' --set 'start=[1]' --set t_end=5 --set steps=50 --out " +
                     (dir / "blowup.json").string());
  EXPECT_EQ(rc, 3);
  const json doc = read_json(dir / "blowup.json");
  EXPECT_EQ(doc["status"], "failed");
  EXPECT_EQ(doc["error"]["stage"], "flow");
  EXPECT_TRUE(doc["outputs"]["trace"]["diverged"].get<bool>());
  EXPECT_TRUE(std::filesystem::exists(dir / "blowup.trace.csv"));
}

TEST(Cli, GenerateWritesCsvNextToTheResults) {
  const auto dir = tmp_dir();
  EXPECT_EQ(cli("generate --set dataset.name=exp2 --set seed=3 --out " + (dir / "strip.json").string()), 0);
  const Dataset d = read_csv((dir / "strip.csv").string());
  EXPECT_EQ(d.size(), 2000);
  EXPECT_TRUE(d.targets.has_value());
}

TEST(Cli, PrintConfigShowsResolvedValues) {
  const auto dir = tmp_dir();
  const std::string cmd = std::string(SYMDISC_CLI_PATH) + " discover --preset exp1 --print-config > " +
                          (dir / "printed.json").string() + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const json c = read_json(dir / "printed.json");
  EXPECT_EQ(c["command"], "discover");
  EXPECT_EQ(c["basis"]["degree"], 1);
}
