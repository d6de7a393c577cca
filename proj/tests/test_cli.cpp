#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "spellforge/selection.hpp"
#include "spellforge/synth.hpp"

namespace fs = std::filesystem;
using namespace spellforge;

namespace {

std::string cli() {
  const char* p = std::getenv("SPELLFORGE_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  std::string cmd = "\"" + cli() + "\" " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string path(const std::string& f) const { return (dir / f).string(); }
};

void write_small_dgp(const std::string& path, int n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n_persons = n;
  cfg.seed = seed;
  save_dgp_json(path, cfg);
}

void write_small_ladder(const std::string& path) {
  Ladder ladder;
  LearnerSpec c0;
  c0.kind = LearnerSpec::Kind::kConstant;
  c0.name = "baseline";
  LearnerSpec c1;
  c1.kind = LearnerSpec::Kind::kOls;
  c1.name = "history";
  c1.inputs = {"p_isprop14", "p_evune14", "p_evdsp14"};
  LearnerSpec c2;
  c2.kind = LearnerSpec::Kind::kLasso;
  c2.name = "penalized";
  c2.all_inputs = true;
  c2.lambda_grid = {0.1, 10.0, 1000.0};
  ladder.models = {c0, c1, c2};
  save_ladder_json(path, ladder);
}

}  // namespace

TEST_CASE("synth writes the cohort files and a manifest") {
  Workspace ws("cli_synth");
  write_small_dgp(ws.path("dgp.json"), 120, 5);
  int rc = run("synth " + ws.path("dgp.json") + " --out " + ws.dir.string());
  CHECK(rc == 0);
  CHECK(fs::exists(ws.dir / "spells.csv"));
  CHECK(fs::exists(ws.dir / "persons.csv"));
  CHECK(fs::exists(ws.dir / "truth.csv"));
  CHECK(fs::exists(ws.dir / "manifest.json"));
  std::string manifest = slurp(ws.dir / "manifest.json");
  CHECK(manifest.find("spells.csv") != std::string::npos);
  CHECK(manifest.find("elapsed_ms") != std::string::npos);
}

TEST_CASE("reruns are byte-identical outside the manifest") {
  Workspace a("cli_rerun_a"), b("cli_rerun_b");
  write_small_dgp(a.path("dgp.json"), 100, 9);
  fs::copy_file(a.path("dgp.json"), b.path("dgp.json"));
  CHECK(run("synth " + a.path("dgp.json") + " --out " + a.dir.string()) == 0);
  CHECK(run("synth " + b.path("dgp.json") + " --out " + b.dir.string()) == 0);
  for (const char* f : {"spells.csv", "persons.csv", "truth.csv"})
    CHECK(slurp(a.dir / f) == slurp(b.dir / f));
}

TEST_CASE("the seed flag overrides the config seed") {
  Workspace a("cli_seed_a"), b("cli_seed_b");
  write_small_dgp(a.path("dgp.json"), 100, 9);
  fs::copy_file(a.path("dgp.json"), b.path("dgp.json"));
  CHECK(run("synth " + a.path("dgp.json") + " --out " + a.dir.string()) == 0);
  CHECK(run("synth " + b.path("dgp.json") + " --seed 77 --out " + b.dir.string()) == 0);
  CHECK(slurp(a.dir / "truth.csv") != slurp(b.dir / "truth.csv"));
}

TEST_CASE("bad inputs exit with the failure code") {
  Workspace ws("cli_bad");
  {
    std::ofstream out(ws.path("broken.json"));
    out << "{ not json";
  }
  CHECK(run("synth " + ws.path("broken.json") + " --out " + ws.dir.string()) == 2);
  CHECK(run("synth " + ws.path("missing.json") + " --out " + ws.dir.string()) == 2);
  CHECK(run("features --spells nope.csv --persons nope.csv --out " +
            ws.dir.string()) == 2);
}

TEST_CASE("full pipeline from cohort to report") {
  Workspace ws("cli_pipe");
  write_small_dgp(ws.path("dgp.json"), 150, 21);
  REQUIRE(run("synth " + ws.path("dgp.json") + " --out " + ws.dir.string()) == 0);

  REQUIRE(run("features --spells " + ws.path("spells.csv") + " --persons " +
              ws.path("persons.csv") + " --out " + ws.dir.string()) == 0);
  CHECK(fs::exists(ws.dir / "features.csv"));
  CHECK(fs::exists(ws.dir / "outcomes.csv"));
  {
    std::string header;
    std::ifstream in(ws.path("outcomes.csv"));
    std::getline(in, header);
    CHECK(header ==
          "person_id,outcome_any_is,outcome_unemployment,always_on_share");
  }

  write_small_ladder(ws.path("ladder.json"));
  REQUIRE(run("train --features " + ws.path("features.csv") + " --outcomes " +
              ws.path("outcomes.csv") + " --ladder " + ws.path("ladder.json") +
              " --seed 3 --out " + ws.dir.string()) == 0);
  CHECK(fs::exists(ws.dir / "report.json"));
  CHECK(fs::exists(ws.dir / "model_baseline.json"));
  CHECK(fs::exists(ws.dir / "model_history.json"));
  CHECK(fs::exists(ws.dir / "model_penalized.json"));
  auto reports = load_report_json(ws.path("report.json"));
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].name == "baseline");

  REQUIRE(run("evaluate --model " + ws.path("model_history.json") + " --features " +
              ws.path("features.csv") + " --outcomes " + ws.path("outcomes.csv") +
              " --out " + ws.dir.string()) == 0);
  CHECK(fs::exists(ws.dir / "eval.json"));

  REQUIRE(run("report --report " + ws.path("report.json") + " --outcomes " +
              ws.path("outcomes.csv") + " --out " + ws.dir.string()) == 0);
  CHECK(fs::exists(ws.dir / "report.txt"));
  CHECK(fs::exists(ws.dir / "histogram.csv"));
  std::string table = slurp(ws.dir / "report.txt");
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("penalized") != std::string::npos);

  // clustering over the at-risk set; a low threshold keeps it non-empty
  REQUIRE(run("cluster --model " + ws.path("model_history.json") + " --features " +
              ws.path("features.csv") + " --threshold 0.5 --k-max 4 --out " +
              ws.dir.string()) == 0);
  CHECK(fs::exists(ws.dir / "clusters.json"));
  CHECK(fs::exists(ws.dir / "clusters_summary.csv"));

  // an unreachable threshold is a clean empty result
  Workspace empty("cli_pipe_empty");
  CHECK(run("cluster --model " + ws.path("model_history.json") + " --features " +
            ws.path("features.csv") + " --threshold 1.01 --out " +
            empty.dir.string()) == 0);
}

TEST_CASE("train rejects an unknown outcome name") {
  Workspace ws("cli_outcome");
  // CLI11 validation fails before any work happens; any nonzero exit is fine,
  // but it must not be a crash signal
  int rc = run("train --features x.csv --outcomes y.csv --ladder l.json "
               "--outcome bogus --out " +
               ws.dir.string());
  CHECK(rc != 0);
  CHECK(rc < 128);
}

TEST_CASE("unemployment outcome selects the other target column") {
  Workspace ws("cli_unemp");
  write_small_dgp(ws.path("dgp.json"), 120, 33);
  REQUIRE(run("synth " + ws.path("dgp.json") + " --out " + ws.dir.string()) == 0);
  REQUIRE(run("features --spells " + ws.path("spells.csv") + " --persons " +
              ws.path("persons.csv") + " --out " + ws.dir.string()) == 0);
  write_small_ladder(ws.path("ladder.json"));
  REQUIRE(run("train --features " + ws.path("features.csv") + " --outcomes " +
              ws.path("outcomes.csv") + " --ladder " + ws.path("ladder.json") +
              " --outcome unemployment --seed 3 --out " + ws.dir.string()) == 0);
  auto reports = load_report_json(ws.path("report.json"));
  REQUIRE(reports.size() == 3);
}

TEST_CASE("always-on exclusion drops fully covered rows") {
  Workspace ws("cli_excl");
  write_small_dgp(ws.path("dgp.json"), 200, 41);
  REQUIRE(run("synth " + ws.path("dgp.json") + " --out " + ws.dir.string()) == 0);
  REQUIRE(run("features --spells " + ws.path("spells.csv") + " --persons " +
              ws.path("persons.csv") + " --always-on-range 2014-2014 --out " +
              ws.dir.string()) == 0);
  // count rows with always_on_share == 1
  int full = 0, total = 0;
  {
    std::ifstream in(ws.path("outcomes.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      ++total;
      auto pos = line.rfind(',');
      if (line.substr(pos + 1) == "1") ++full;
    }
  }
  REQUIRE(full > 0);  // the planted always-on class guarantees some

  write_small_ladder(ws.path("ladder.json"));
  Workspace all("cli_excl_all"), sub("cli_excl_sub");
  REQUIRE(run("train --features " + ws.path("features.csv") + " --outcomes " +
              ws.path("outcomes.csv") + " --ladder " + ws.path("ladder.json") +
              " --seed 3 --out " + all.dir.string()) == 0);
  REQUIRE(run("train --features " + ws.path("features.csv") + " --outcomes " +
              ws.path("outcomes.csv") + " --ladder " + ws.path("ladder.json") +
              " --exclude-always-on 2014-2014 --seed 3 --out " +
              sub.dir.string()) == 0);
  auto ra = load_report_json(all.path("report.json"));
  auto rs = load_report_json(sub.path("report.json"));
  // removing the point mass at one changes the baseline fit
  CHECK(ra[0].mse != rs[0].mse);
}
