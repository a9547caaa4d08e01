#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

#include "sdw/cli.hpp"

using namespace sdw;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sdw_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kMinimal = R"(experiment.steps_per_segment = 200
experiment.eval_every = 100
experiment.eval_episodes = 2
experiment.seed = 3
agent.hidden = 8
probe.steps = 32
replay.batch_size = 4

task.0.id = room
task.0.family = Room
task.0.grid_size = 5
task.0.max_steps = 40
)";

const char* kThreeTasks = R"(
task.1.id = trap
task.1.family = Room
task.1.grid_size = 5
task.1.trap = true
task.1.max_steps = 40

task.2.id = dark
task.2.family = KeyRoom
task.2.grid_size = 7
task.2.dark = true
task.2.max_steps = 60
)";

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "exp.cfg";
  std::ofstream(p) << text;
  return p;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sdw");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_matches(const std::string& s, const std::string& re) {
  const std::regex r(re);
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(s.begin(), s.end(), r), std::sregex_iterator()));
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(kMinimal);
  const auto cfg = parse_config(in, "exp.cfg");
  CHECK(cfg.plan.steps_per_segment == 200);
  CHECK(cfg.plan.training.hidden == 8);
  REQUIRE(cfg.plan.tasks.size() == 1);
  CHECK(cfg.plan.tasks[0].max_steps == 40);
  CHECK(cfg.resolved_similarity() == "gpt4o");

  SECTION("unknown keys name the key and the line") {
    std::istringstream bad(std::string("experiment.rounds = 1\n\nagent.hiden = 8\n") + kMinimal);
    try {
      parse_config(bad, "exp.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("exp.cfg:3") != std::string::npos);
      CHECK(msg.find("agent.hiden") != std::string::npos);
    }
  }
  SECTION("typed values are checked") {
    std::istringstream bad(std::string(kMinimal) + "experiment.rounds = two\n");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }
  SECTION("task indices must be contiguous") {
    std::istringstream bad(std::string(kMinimal) + "task.2.id = x\n");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }
  SECTION("overrides are applied after the file") {
    std::istringstream again(kMinimal);
    const auto c = parse_config(again, "exp.cfg", {"experiment.method = naive", "task.0.grid_size = 7"});
    CHECK(c.plan.method == Method::Naive);
    CHECK(c.plan.tasks[0].grid_size == 7);
  }
}

TEST_CASE("reference config round-trips") {
  const auto ref = reference_config();
  std::istringstream in(to_config_text(ref));
  CHECK(parse_config(in) == ref);

  std::istringstream in2(std::string(kMinimal) + kThreeTasks);
  auto cfg = parse_config(in2);
  cfg.plan.tasks[1].step_penalty = 0.125;
  cfg.plan.training.learning_rate = 0.1 + 0.2;  // not exactly representable in short form
  std::istringstream in3(to_config_text(cfg));
  const auto back = parse_config(in3);
  CHECK(back == cfg);

  // And reproduces identical runs.
  const auto a = run(cfg.plan_for_seed(0));
  const auto b = run(back.plan_for_seed(0));
  CHECK(a.reward_curves == b.reward_curves);
}

TEST_CASE("cli run writes every artifact") {
  const auto dir = scratch_dir("run");
  const auto cfg = write_config(dir, kMinimal);
  const auto r = cli({"run", "-c", cfg.string(), "--out", (dir / "out").string(), "-q"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"eval.csv", "weights.jsonl", "metrics.json", "curves.svg", "buffer_stats.csv", "checkpoint.bin"})
    CHECK(fs::exists(dir / "out" / "seed_0" / f));
  CHECK(fs::exists(dir / "out" / "summary.json"));

  // Strict CSV schema.
  const auto rows = read_eval_csv(dir / "out" / "seed_0" / "eval.csv");
  CHECK(rows.size() == 3);
  const auto m = read_metrics_json(dir / "out" / "seed_0" / "metrics.json");
  CHECK(std::isfinite(m.P));
  const auto ck = load_checkpoint((dir / "out" / "seed_0" / "checkpoint.bin").string());
  CHECK(ck.step == 200);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch_dir("codes");
  const auto cfg = write_config(dir, std::string(kMinimal) + "replay.bogus = 1\n");
  auto r = cli({"run", "-c", cfg.string(), "-q"});
  CHECK(r.code == 2);
  CHECK(r.err.find("replay.bogus") != std::string::npos);

  const auto good = write_config(dir, kMinimal);
  r = cli({"run", "-c", good.string(), "--set", "nope=1", "-q"});
  CHECK(r.code == 2);
  CHECK(r.err.find("nope") != std::string::npos);

  r = cli({"frobnicate"});
  CHECK(r.code == 2);
  r = cli({"run", "-c", good.string(), "--method", "bogus", "-q"});
  CHECK(r.code == 2);
}

TEST_CASE("method flag changes weights but not the environment streams") {
  const auto dir = scratch_dir("methods");
  const auto cfg = write_config(dir, std::string(kMinimal) + kThreeTasks);
  REQUIRE(cli({"run", "-c", cfg.string(), "--method", "sdw_full", "--out", (dir / "a").string(), "-q"}).code == 0);
  REQUIRE(cli({"run", "-c", cfg.string(), "--method", "clear_fixed", "--out", (dir / "b").string(), "-q"}).code == 0);
  CHECK(slurp(dir / "a/seed_0/weights.jsonl") != slurp(dir / "b/seed_0/weights.jsonl"));
  const auto ra = read_eval_csv(dir / "a/seed_0/eval.csv");
  const auto rb = read_eval_csv(dir / "b/seed_0/eval.csv");
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < 3; ++i) CHECK(ra[i] == rb[i]);  // pre-training rows
}

TEST_CASE("output root environment variable") {
  const auto dir = scratch_dir("root");
  const auto cfg = write_config(dir, kMinimal);
  ::setenv("SDW_OUTPUT_ROOT", dir.c_str(), 1);
  const auto r = cli({"run", "-c", cfg.string(), "--out", "rel", "-q"});
  ::unsetenv("SDW_OUTPUT_ROOT");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "rel" / "seed_0" / "eval.csv"));
}

TEST_CASE("eval.csv reconstructs the evaluation matrix") {
  std::istringstream in(std::string(kMinimal) + kThreeTasks);
  auto cfg = parse_config(in, "x", {"experiment.rounds = 2"});
  const auto art = run(cfg.plan_for_seed(0));
  std::stringstream csv;
  write_eval_csv(csv, art.reward_curves);
  const auto rows = read_eval_csv(csv);
  CHECK(rows == art.reward_curves);
  const auto m = eval_matrix_from_records(rows);
  CHECK(m.r == art.eval_matrix.r);
  CHECK(m.segment_task == art.eval_matrix.segment_task);
  CHECK(m.all_max == art.eval_matrix.all_max);
}

TEST_CASE("strict eval.csv reader") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_eval_csv(in);
  };
  const std::string header = std::string(kEvalCsvHeader) + "\n";
  CHECK(parse(header).empty());
  CHECK(parse(header + "0,0,none,a,0.5,10\n").size() == 1);
  CHECK_THROWS_AS(parse("step,segment\n"), UsageError);
  CHECK_THROWS_AS(parse(header + "0,0,none,a,0.5\n"), UsageError);
  CHECK_THROWS_AS(parse(header + "0,0,none,a,abc,10\n"), UsageError);
  CHECK_THROWS_AS(parse(header + "0,0,none,a,0.5,10x\n"), UsageError);
  CHECK_THROWS_AS(parse(header + ",0,none,a,0.5,10\n"), UsageError);
}

TEST_CASE("plot output") {
  const auto dir = scratch_dir("plot");
  const auto cfg = write_config(dir, std::string(kMinimal) + kThreeTasks);
  REQUIRE(cli({"run", "-c", cfg.string(), "--set", "experiment.rounds=2", "--out", (dir / "o").string(), "-q"}).code == 0);
  fs::remove(dir / "o/seed_0/curves.svg");
  const auto r = cli({"plot", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto svg = slurp(dir / "o/seed_0/curves.svg");
  CHECK(count_matches(svg, "<polyline class=\"curve\"") == 3);
  CHECK(count_matches(svg, "class=\"boundary\"") == 7);  // 6 segments
  CHECK(fs::exists(dir / "o/seed_0/metrics.svg"));

  SECTION("empty eval.csv is an error and writes nothing") {
    const auto e = scratch_dir("plot_empty");
    std::ofstream(e / "eval.csv") << kEvalCsvHeader << "\n";
    const auto r2 = cli({"plot", e.string()});
    CHECK(r2.code == 2);
    CHECK_FALSE(fs::exists(e / "curves.svg"));
    CHECK_FALSE(fs::exists(e / "metrics.svg"));
  }
}

TEST_CASE("metrics subcommand reads eval.csv") {
  const auto dir = scratch_dir("metrics");
  const auto cfg = write_config(dir, std::string(kMinimal) + kThreeTasks);
  REQUIRE(cli({"run", "-c", cfg.string(), "--out", (dir / "o").string(), "-q"}).code == 0);
  const auto r = cli({"metrics", (dir / "o/seed_0/eval.csv").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  const auto m = read_metrics_json(dir / "o/seed_0/metrics.json");
  CHECK(j["P"].get<double>() == m.P);
  CHECK(j["F"].get<double>() == m.F);
  CHECK(j["T"].get<double>() == m.T);
}

TEST_CASE("reference-config subcommand") {
  const auto r = cli({"reference-config"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  CHECK(parse_config(in) == reference_config());
}

TEST_CASE("ablation table") {
  const auto dir = scratch_dir("ablation");
  const auto cfg = write_config(dir, std::string(kMinimal) + kThreeTasks + "experiment.n_seeds = 2\n");
  const auto r = cli({"ablation", "-c", cfg.string(), "--out", (dir / "abl").string(), "-q"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = read_ablation_csv(dir / "abl/ablation.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "sdw_full");
  CHECK(rows[1].method == "sdw_buffer_only");
  CHECK(rows[2].method == "sdw_loss_only");
  CHECK(rows[3].method == "clear_fixed");
  CHECK(fs::exists(dir / "abl/ablation.md"));
  CHECK(fs::exists(dir / "abl/ablation_bars.svg"));

  // The clear_fixed row matches an independent run with that method.
  REQUIRE(cli({"run", "-c", cfg.string(), "--method", "clear_fixed", "--out", (dir / "solo").string(), "-q"}).code == 0);
  const auto solo = json::parse(slurp(dir / "solo/summary.json"));
  CHECK(solo["P"]["mean"].get<double>() == rows[3].P);
  CHECK(solo["F"]["mean"].get<double>() == rows[3].F);
  CHECK(solo["T"]["mean"].get<double>() == rows[3].T);

  // Shared pre-training column across methods.
  for (int s = 0; s < 2; ++s) {
    const auto seed = "seed_" + std::to_string(s);
    const auto base = eval_matrix_from_records(read_eval_csv(dir / "abl/clear_fixed" / seed / "eval.csv"));
    for (const char* m : {"sdw_full", "sdw_buffer_only", "sdw_loss_only"}) {
      const auto other = eval_matrix_from_records(read_eval_csv(dir / "abl" / m / seed / "eval.csv"));
      for (std::size_t t = 0; t < 3; ++t) CHECK(other.r[t][0] == base.r[t][0]);
    }
  }
}
