#include <catch_amalgamated.hpp>
#include <sys/wait.h>

#include "embercall/dataset.hpp"
#include "support.hpp"

using namespace embercall;

#ifdef EMBERCALL_CLI
namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

/// Runs the CLI through the shell with stdout and stderr captured.
Outcome run(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const auto log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + EMBERCALL_CLI + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = fs::exists(log) ? read_file(log) : "";
  return o;
}

bool contains(const std::string& haystack, const std::string& needle) { return haystack.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("cli usage errors exit 1", "[cli]") {
  test::TempDir dir("cli-usage");
  CHECK(run("--help", dir.path()).code == 0);
  CHECK(run("train --help", dir.path()).code == 0);
  CHECK(run("", dir.path()).code == 1);
  CHECK(run("frobnicate", dir.path()).code == 1);
  CHECK(run("build --bogus", dir.path()).code == 1);

  const auto threshold = run("build --corpus c.csv --out o --threshold 1.5", dir.path());
  CHECK(threshold.code == 1);
  CHECK(contains(threshold.output, "threshold"));
  CHECK(run("build --corpus missing.csv --out o", dir.path()).code != 0);
  CHECK(run("train --dataset d --out m --variant M9", dir.path()).code == 1);
}

TEST_CASE("cli end to end", "[cli][slow]") {
  test::TempDir dir("cli-e2e");
  const auto synth = run("synth --out corpus --species 2 --tracks-per-species 1 --noise-tracks 2", dir.path());
  REQUIRE(synth.code == 0);
  REQUIRE(fs::exists(dir / "corpus" / "corpus.csv"));

  const auto build = run("build --corpus corpus/corpus.csv --out out --workers 2", dir.path());
  REQUIRE(build.code == 0);
  CHECK(contains(build.output, "executed: 37"));
  CHECK(contains(run("build --corpus corpus/corpus.csv --out out", dir.path()).output, "skipped: all (37 tasks)"));
  const std::string dataset = "out/dataset/emb_v4";

  SECTION("train, infer, project") {
    const auto train = run("train --dataset " + dataset + " --out m.model", dir.path());
    REQUIRE(train.code == 0);
    CHECK(fs::exists(dir / "m.model"));
    CHECK(fs::exists(dir / "m.model.metrics.json"));

    REQUIRE(run("synth-soundscape --out sc.wav --duration 30 --calls 3", dir.path()).code == 0);
    REQUIRE(run("infer --model m.model --soundscape sc.wav --out sub.csv", dir.path()).code == 0);
    const auto sub = read_csv(dir / "sub.csv");
    CHECK(sub.size() == 7);
    CHECK(sub[0].size() == 265);

    REQUIRE(run("project --dataset " + dataset + " --where track_type=original --out p.csv", dir.path()).code == 0);
    CHECK(read_csv(dir / "p.csv").size() == 4 * 22 + 1);
    CHECK(run("nocall-report --dataset " + dataset, dir.path()).code == 0);
  }
  SECTION("cnb with embeddings is a usage error") {
    const auto r = run("train --dataset " + dataset + " --model cnb --out c.model", dir.path());
    CHECK(r.code == 1);
    CHECK(contains(r.output, "logit_softmax"));
    CHECK_FALSE(fs::exists(dir / "c.model"));
  }
  SECTION("a config file supplies subcommand options") {
    atomic_write_bytes(dir / "cfg.toml", "[train]\nmodel = \"cnb\"\nvariant = \"logit_softmax\"\n");
    const auto r = run("--config cfg.toml train --dataset " + dataset + " --out c.model", dir.path());
    REQUIRE(r.code == 0);
    CHECK(contains(read_file(dir / "c.model"), "\"cnb\""));
  }
  SECTION("backend failures exit 2 and name the task") {
    const std::string env = std::string("EMBERCALL_BACKEND_CMD='") + EMBERCALL_FAKE_BACKEND + "' EMBERCALL_FAKE_FAIL=separate";
    const auto r = run("build --corpus corpus/corpus.csv --out broken", dir.path(), env);
    CHECK(r.code == 2);
    CHECK(contains(r.output, "separate:"));
    CHECK(contains(r.output, "simulated separate failure"));
  }
  SECTION("the fake backend reproduces the synthetic build") {
    const std::string env = std::string("EMBERCALL_BACKEND_CMD='") + EMBERCALL_FAKE_BACKEND + "'";
    REQUIRE(run("build --corpus corpus/corpus.csv --out remote", dir.path(), env).code == 0);
    CHECK(read_file(dir / "remote" / "dataset" / "emb_v4" / kDatasetFile) ==
          read_file(dir / "out" / "dataset" / "emb_v4" / kDatasetFile));
  }
}
#endif
