#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "aost/cli.hpp"
#include "aost/config.hpp"
#include "aost/error.hpp"
#include "aost/format.hpp"

using namespace aost;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "aost_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// A testbed small enough for a few seconds per command.
std::map<std::string, std::string> tiny(const fs::path& workdir) {
  return {{"workdir", workdir.string()},
          {"seed", "5"},
          {"testbed_configs", "12"},
          {"testbed_images_per_config", "3"},
          {"target_size", "30"},
          {"image_width", "32"},
          {"image_height", "64"},
          {"budget", "9"},
          {"images_per_config", "3"},
          {"reference_count", "8"},
          {"boost_rounds", "20"},
          {"iterations", "40"}};
}

struct Outcome {
  int status;
  std::string log;
  std::string err;
};

Outcome run(const std::string& command, const RunConfig& config) {
  std::ostringstream log, err;
  const int status = dispatch(command, config, log, err);
  return {status, log.str(), err.str()};
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

// Configuration -------------------------------------------------------------

TEST(ParseConfig, EmptyFileGivesDefaults) {
  const fs::path file = write_file(fresh_dir("empty") / "run.conf", "");
  const RunConfig c = parse_config(file, {}, false);
  EXPECT_EQ(c.params.distance.alpha, 0.9);
  EXPECT_EQ(c.params.distance.beta, 1.0);
  EXPECT_EQ(c.params.distance.content_layer, 3);
  EXPECT_EQ(c.params.budget, 1000u);
  EXPECT_EQ(c.params.images_per_config, 50);
  EXPECT_EQ(c.params.rounds, 1);
  EXPECT_EQ(c.params.reference_count, 32u);
  EXPECT_EQ(c.params.surrogate.rounds, 100);
  EXPECT_EQ(c.params.surrogate.learning_rate, 0.3);
  EXPECT_EQ(c.params.surrogate.max_depth, 4);
  EXPECT_EQ(c.params.swarm.particles, 30);
  EXPECT_EQ(c.params.swarm.iterations, 200);
  EXPECT_EQ(c.params.swarm.inertia, 0.72);
  EXPECT_EQ(c.workdir, fs::path("aost-run"));
}

TEST(ParseConfig, CommentsAndWhitespace) {
  const fs::path file = write_file(fresh_dir("comments") / "run.conf",
                                   "# a comment\n\n  budget   =  600  \nalpha=0.5 # trailing\n");
  const RunConfig c = parse_config(file, {}, false);
  EXPECT_EQ(c.params.budget, 600u);
  EXPECT_EQ(c.params.distance.alpha, 0.5);
}

TEST(ParseConfig, OutOfRangeNamesKeyAndRange) {
  const fs::path file = write_file(fresh_dir("range") / "run.conf", "alpha = -1\n");
  try {
    parse_config(file, {}, false);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("alpha"), std::string::npos) << what;
    EXPECT_NE(what.find(">= 0"), std::string::npos) << what;
  }
}

TEST(ParseConfig, FlagBeatsFile) {
  const fs::path file = write_file(fresh_dir("precedence") / "run.conf", "budget = 500\n");
  EXPECT_EQ(parse_config(file, {{"budget", "1000"}}, false).params.budget, 1000u);
  EXPECT_EQ(parse_config(file, {}, false).params.budget, 500u);
}

TEST(ParseConfig, EnvironmentHasLowestPrecedence) {
  const ScopedEnv env("AOST_BUDGET", "300");
  const fs::path dir = fresh_dir("environment");
  const fs::path with = write_file(dir / "with.conf", "budget = 500\n");
  const fs::path without = write_file(dir / "without.conf", "seed = 3\n");
  EXPECT_EQ(parse_config(with).params.budget, 500u);
  EXPECT_EQ(parse_config(without).params.budget, 300u);
  EXPECT_EQ(parse_config(without, {{"budget", "700"}}).params.budget, 700u);
  EXPECT_EQ(parse_config(without, {}, false).params.budget, 1000u);
}

TEST(ParseConfig, ErrorsAreAggregated) {
  const fs::path file = write_file(fresh_dir("aggregate") / "run.conf",
                                   "alpha = -1\nbogus_key = 1\nbudget = lots\nthis line is bad\n");
  try {
    parse_config(file, {}, false);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("alpha"), std::string::npos) << what;
    EXPECT_NE(what.find("bogus_key"), std::string::npos) << what;
    EXPECT_NE(what.find("budget"), std::string::npos) << what;
    EXPECT_NE(what.find("this line is bad"), std::string::npos) << what;
  }
}

TEST(ParseConfig, CrossFieldChecks) {
  EXPECT_THROW(parse_config({{"alpha", "0"}, {"beta", "0"}}, false), ValidationError);
  EXPECT_THROW(parse_config({{"budget", "10"}, {"images_per_config", "50"}}, false), ValidationError);
  EXPECT_THROW(parse_config({{"kernel", "4"}}, false), ValidationError);
  EXPECT_THROW(parse_config({{"image_width", "48"}}, false), ValidationError);
  EXPECT_THROW(parse_config({{"style_gamma_low", "1.8"}, {"style_gamma_high", "1.2"}}, false),
               ValidationError);
}

TEST(ParseConfig, UnreadableFile) {
  EXPECT_THROW(parse_config(fs::path("/nonexistent/dir/run.conf"), {}, false), ValidationError);
}

TEST(ParseConfig, EveryKeyDocumentedAndSnapshotRoundTrips) {
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) {
    EXPECT_FALSE(key.description.empty()) << key.name;
  }
  const RunConfig base = parse_config({{"seed", "17"}, {"alpha", "0.25"}}, false);
  for (const auto& [k, v] : config_snapshot(base)) overrides[k] = v;
  EXPECT_EQ(overrides.size(), config_keys().size());
  const RunConfig again = parse_config(overrides, false);
  EXPECT_EQ(config_snapshot(again), config_snapshot(base));
}

TEST(ParseConfig, DefaultPathsLiveUnderWorkdir) {
  const RunConfig c = parse_config({{"workdir", "/tmp/x"}}, false);
  EXPECT_EQ(c.catalog_path(), fs::path("/tmp/x/catalog/catalog.jsonl"));
  EXPECT_EQ(c.target_path(), fs::path("/tmp/x/target/target.jsonl"));
}

// Dispatch ------------------------------------------------------------------

TEST(Dispatch, UnknownCommandIsValidationError) {
  const RunConfig c = parse_config(tiny(fresh_dir("unknown")), false);
  EXPECT_EQ(run("frobnicate", c).status, kExitValidation);
}

TEST(Dispatch, OptimizeBeforeFitNamesMissingArtifact) {
  const RunConfig c = parse_config(tiny(fresh_dir("order")), false);
  const Outcome o = run("optimize", c);
  EXPECT_EQ(o.status, kExitValidation);
  EXPECT_NE(o.err.find("model.json"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("fit-surrogate"), std::string::npos) << o.err;
}

TEST(Dispatch, LockedWorkdirIsRuntimeError) {
  const fs::path dir = fresh_dir("locked");
  write_file(dir / ".aost.lock", "");
  const RunConfig c = parse_config(tiny(dir), false);
  const Outcome o = run("gen-testbed", c);
  EXPECT_EQ(o.status, kExitRuntime);
  EXPECT_NE(o.err.find("locked"), std::string::npos) << o.err;
  fs::remove(dir / ".aost.lock");
  EXPECT_EQ(run("gen-testbed", c).status, kExitOk);
  EXPECT_FALSE(fs::exists(dir / ".aost.lock"));
}

TEST(Dispatch, StageCommandsMatchRunAost) {
  const fs::path staged = fresh_dir("staged");
  const RunConfig c = parse_config(tiny(staged), false);
  for (const std::string cmd : {"gen-testbed", "extract-features", "fit-surrogate", "optimize",
                                "select", "transfer", "evaluate", "report-importance"}) {
    const Outcome o = run(cmd, c);
    ASSERT_EQ(o.status, kExitOk) << cmd << ": " << o.err;
  }
  for (const char* f : {"schema.json", "features/measurement.json", "features/distances.csv",
                        "model.json", "plan.json", "subset/subset.jsonl", "subset/transferred.jsonl",
                        "subset/s_0000000.ppm", "subset/s_0000000.t.ppm", "report.csv",
                        "importance.csv"}) {
    EXPECT_TRUE(fs::exists(staged / f)) << f;
  }
  EXPECT_FALSE(fs::directory_iterator(staged / "features" / "references") == fs::directory_iterator());
  const std::string staged_report = read_text(staged / "report.csv");
  EXPECT_EQ(line_count(staged_report), 4u);

  auto keys = tiny(fresh_dir("monolith"));
  keys["catalog"] = (staged / "catalog" / "catalog.jsonl").string();
  keys["target"] = (staged / "target" / "target.jsonl").string();
  const RunConfig mono = parse_config(keys, false);
  const Outcome o = run("run-aost", mono);
  ASSERT_EQ(o.status, kExitOk) << o.err;
  EXPECT_EQ(read_text(mono.workdir / "report.csv"), staged_report);
  EXPECT_EQ(read_text(mono.workdir / "plan.json"), read_text(staged / "plan.json"));
  EXPECT_EQ(read_text(mono.workdir / "subset" / "subset.jsonl"),
            read_text(staged / "subset" / "subset.jsonl"));
  EXPECT_TRUE(fs::exists(mono.workdir / "manifest.json"));
}

TEST(Dispatch, RunAostIsRepeatableAndLeavesInputsAlone) {
  const fs::path dir = fresh_dir("repeat");
  const RunConfig c = parse_config(tiny(dir), false);
  ASSERT_EQ(run("gen-testbed", c).status, kExitOk);
  const std::string catalog_before = read_text(c.catalog_path());
  const std::string target_before = read_text(c.target_path());
  const auto image = dir / "catalog" / "images" / "img_0000000.ppm";
  const std::string image_before = read_text(image);
  const auto stamp = fs::last_write_time(image);

  ASSERT_EQ(run("run-aost", c).status, kExitOk);
  const std::string report = read_text(dir / "report.csv");
  const std::string plan = read_text(dir / "plan.json");
  ASSERT_EQ(run("run-aost", c).status, kExitOk);
  EXPECT_EQ(read_text(dir / "report.csv"), report);
  EXPECT_EQ(read_text(dir / "plan.json"), plan);

  EXPECT_EQ(read_text(c.catalog_path()), catalog_before);
  EXPECT_EQ(read_text(c.target_path()), target_before);
  EXPECT_EQ(read_text(image), image_before);
  EXPECT_EQ(fs::last_write_time(image), stamp);

  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("tool_version"), kToolVersion);
  EXPECT_EQ(manifest.at("seed"), 5);
  EXPECT_EQ(manifest.at("config").at("budget"), "9");
  for (const auto& t : manifest.at("timings")) EXPECT_GE(t.at("seconds").get<double>(), 0.0);
}

TEST(Dispatch, RunAostWithoutCatalogNamesGenTestbed) {
  const RunConfig c = parse_config(tiny(fresh_dir("nocatalog")), false);
  const Outcome o = run("run-aost", c);
  EXPECT_EQ(o.status, kExitValidation);
  EXPECT_NE(o.err.find("gen-testbed"), std::string::npos) << o.err;
}

// Executable ------------------------------------------------------------------

TEST(Executable, VersionAndExitCodes) {
  const std::string exe = AOST_CLI_PATH;
  const fs::path dir = fresh_dir("exe");
  const std::string quiet = " > " + (dir / "out.txt").string() + " 2>&1";
  EXPECT_EQ(std::system((exe + " --version" + quiet).c_str()), 0);
  EXPECT_NE(read_text(dir / "out.txt").find(kToolVersion), std::string::npos);
  EXPECT_EQ(std::system((exe + " --list-keys" + quiet).c_str()), 0);
  EXPECT_NE(read_text(dir / "out.txt").find("alpha = 0.9"), std::string::npos);

  const int optimize = std::system(
      (exe + " optimize --workdir " + (dir / "work").string() + quiet).c_str());
  ASSERT_TRUE(WIFEXITED(optimize));
  EXPECT_EQ(WEXITSTATUS(optimize), 1);

  const int bad = std::system((exe + " run-aost --alpha -1" + quiet).c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 1);
  EXPECT_NE(read_text(dir / "out.txt").find("alpha"), std::string::npos);
}
