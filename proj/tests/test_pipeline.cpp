#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recontact/pipeline.hpp"
#include "recontact/synth.hpp"

using namespace recontact;
using namespace recontact::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = RECONTACT_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("recontact_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string config(const char* name) { return (kSource / "configs" / name).string(); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RECONTACT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The pinned pipeline behind the golden report.
void golden_run(const fs::path& dir, std::ostream& log) {
  REQUIRE(cmd_synth({config("paper.json"), dir.string(), 7, 0.1}, log) == kOk);
  ImputeArgs ia;
  ia.in = (dir / kCohortFile).string();
  ia.out = dir.string();
  ia.m = 5;
  ia.cycles = 5;
  ia.seed = 3;
  ia.ridge = 0.5;
  REQUIRE(cmd_impute(ia, log) == kOk);
  REQUIRE(cmd_check({ia.in, dir.string(), "all"}, log) == kOk);
  REQUIRE(cmd_report({dir.string()}, log) == kOk);
}

}  // namespace

TEST_CASE("shipped configs match the built-in presets") {
  for (const auto& name : synth::preset_names()) {
    CAPTURE(name);
    const auto loaded = synth::load_config(config((name + ".json").c_str()));
    CHECK(synth::config_hash(loaded) == synth::config_hash(*synth::preset(name)));
  }
}

TEST_CASE("synth") {
  std::ostringstream log;
  const auto a = scratch("synth_a");
  const auto b = scratch("synth_b");
  SUBCASE("deterministic across runs") {
    REQUIRE(cmd_synth({config("paper.json"), a.string(), 7, 1.0}, log) == kOk);
    REQUIRE(cmd_synth({config("paper.json"), b.string(), 7, 1.0}, log) == kOk);
    CHECK(slurp(a / kCohortFile) == slurp(b / kCohortFile));
    CHECK(slurp(a / kTruthFile) == slurp(b / kTruthFile));
    CHECK(slurp(a / kSynthManifest).find("\"seed\": 7") != std::string::npos);
  }
  SUBCASE("seed is mandatory") {
    CHECK(cmd_synth({config("paper.json"), a.string(), std::nullopt, 1.0}, log) == kInputError);
    CHECK(log.str().find("--seed") != std::string::npos);
    CHECK_FALSE(fs::exists(a / kCohortFile));
  }
  SUBCASE("malformed and invalid configs") {
    fs::create_directories(a);
    std::ofstream(a / "bad.json") << "{ \"n_invitees\": ";
    CHECK(cmd_synth({(a / "bad.json").string(), b.string(), 1, 1.0}, log) == kInputError);
    std::string text = slurp(config("paper.json"));
    text.replace(text.find("\"item_missing_rate\": 0.02"), 25, "\"item_missing_rate\": 2.0");
    std::ofstream(a / "range.json") << text;
    CHECK(cmd_synth({(a / "range.json").string(), b.string(), 1, 1.0}, log) == kInputError);
    CHECK(log.str().find("item_missing_rate") != std::string::npos);
  }
  SUBCASE("scale keeps strata proportions") {
    REQUIRE(cmd_synth({config("paper.json"), a.string(), 7, 0.1}, log) == kOk);
    const auto t = load_cohort((a / kCohortFile).string());
    CHECK(t.size() == 1000);
    const auto full = synth::paper_config().strata_targets;
    std::array<std::array<std::array<int, kNumAgeGroups>, 2>, kNumRegions> got{};
    for (const auto& r : t.rows)
      ++got[static_cast<std::size_t>(r.background.region)][static_cast<std::size_t>(r.background.sex)]
           [static_cast<std::size_t>(r.background.age_group())];
    for (int r = 0; r < kNumRegions; ++r)
      for (int s = 0; s < 2; ++s)
        for (int g = 0; g < kNumAgeGroups; ++g) CHECK(std::abs(got[r][s][g] - 0.1 * full[r][s][g]) <= 1.0);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("impute") {
  std::ostringstream log;
  const auto dir = scratch("impute");
  REQUIRE(cmd_synth({config("paper.json"), dir.string(), 7, 0.1}, log) == kOk);
  ImputeArgs ia;
  ia.in = (dir / kCohortFile).string();
  ia.out = (dir / "a").string();
  ia.m = 3;
  ia.cycles = 3;
  ia.seed = 5;
  ia.ridge = 0.5;
  ia.horizon = "5y";

  SUBCASE("all strategies, byte-identical reruns") {
    REQUIRE(cmd_impute(ia, log) == kOk);
    const auto csv = slurp(dir / "a" / kEstimatesFile);
    std::istringstream lines(csv);
    std::string line;
    int rows = 0;
    std::getline(lines, line);
    CHECK(line == "indicator,subgroup,method,estimate,ci_low,ci_high");
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4 * 2 * 3);
    for (const char* needle : {"daily_smoking,men,mi-mnar,", "heavy_alcohol,both,mi-mar-nr,",
                               "daily_smoking,women,participants-only,"})
      CHECK(csv.find(needle) != std::string::npos);

    ia.out = (dir / "b").string();
    REQUIRE(cmd_impute(ia, log) == kOk);
    CHECK(slurp(dir / "b" / kEstimatesFile) == csv);
    CHECK(slurp(dir / "b" / kMethodHospFile) == slurp(dir / "a" / kMethodHospFile));
  }
  SUBCASE("single strategy with completed datasets") {
    ia.strategy = "mi-mnar";
    ia.write_completed = true;
    REQUIRE(cmd_impute(ia, log) == kOk);
    CHECK(fs::exists(dir / "a" / "completed" / "mi-mnar_03.csv"));
    const auto manifest = slurp(dir / "a" / kImputeManifest);
    CHECK(manifest.find("\"seed\": 5") != std::string::npos);
    CHECK(manifest.find("\"strategy\": \"mi-mnar\"") != std::string::npos);
  }
  SUBCASE("small strata surface as exit 3 naming variable and group") {
    ia.ridge = 0.0;
    CHECK(cmd_impute(ia, log) == kImputationFailure);
    CHECK(log.str().find("group RecontactRespondent") != std::string::npos);
    CHECK(log.str().find("imputation of '") != std::string::npos);
  }
  SUBCASE("usage errors") {
    ia.seed.reset();
    CHECK(cmd_impute(ia, log) == kInputError);
    ia.seed = 1;
    ia.m = 1;
    CHECK(cmd_impute(ia, log) == kInputError);
    ia.m = 3;
    ia.strategy = "mi-everything";
    CHECK(cmd_impute(ia, log) == kInputError);
  }
  fs::remove_all(dir);
}

TEST_CASE("check") {
  std::ostringstream log;
  const auto dir = scratch("check");
  SUBCASE("calibrated five-year cohort") {
    REQUIRE(cmd_synth({config("five-year.json"), dir.string(), 2, 1.0}, log) == kOk);
    REQUIRE(cmd_check({(dir / kCohortFile).string(), dir.string(), "all"}, log) == kOk);
    const auto text = slurp(dir / kCheckText);
    CHECK(text.find("five-year: assumption (2): violated; assumption (3): supported") != std::string::npos);
    CHECK(slurp(dir / kCheckJson).find("\"assumption2_supported\": false") != std::string::npos);
  }
  SUBCASE("tiny cohort warns") {
    REQUIRE(cmd_synth({config("paper.json"), dir.string(), 2, 0.005}, log) == kOk);
    const int code = cmd_check({(dir / kCohortFile).string(), dir.string(), "all"}, log);
    CHECK((code == kOk || code == kFitFailure));
    CHECK(slurp(dir / kCheckText).find("warning: small sample") != std::string::npos);
  }
  SUBCASE("missing hospitalization columns") {
    REQUIRE(cmd_synth({config("paper.json"), dir.string(), 2, 0.01}, log) == kOk);
    std::istringstream in(slurp(dir / kCohortFile));
    std::ofstream out(dir / "nohosp.csv");
    std::string line;
    while (std::getline(in, line)) {
      for (int k = 0; k < 3; ++k) line.resize(line.rfind(','));
      out << line << '\n';
    }
    out.close();
    CHECK(cmd_check({(dir / "nohosp.csv").string(), dir.string(), "all"}, log) == kInputError);
  }
  fs::remove_all(dir);
}

TEST_CASE("report") {
  std::ostringstream log;
  SUBCASE("nothing upstream") {
    const auto dir = scratch("report_empty");
    fs::create_directories(dir);
    CHECK(cmd_report({dir.string()}, log) == kInputError);
    CHECK(log.str().find("check.json") != std::string::npos);
    CHECK(log.str().find("estimates.csv") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("check outputs only") {
    const auto dir = scratch("report_check");
    REQUIRE(cmd_synth({config("paper.json"), dir.string(), 4, 0.1}, log) == kOk);
    REQUIRE(cmd_check({(dir / kCohortFile).string(), dir.string(), "all"}, log) == kOk);
    REQUIRE(cmd_report({dir.string()}, log) == kOk);
    const auto text = slurp(dir / kReportText);
    CHECK(text.find("4. Prevalence estimates") != std::string::npos);
    CHECK(text.find("(absent: no impute outputs in this run directory)") != std::string::npos);
    CHECK(text.find("(3) Given the background variables") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("golden report") {
    const auto dir = scratch("report_golden");
    golden_run(dir, log);
    const auto text = slurp(dir / kReportText);
    const auto golden = kSource / "tests" / "golden" / "report.txt";
    if (std::getenv("RECONTACT_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << text;
    CHECK(text == slurp(golden));
    fs::remove_all(dir);
  }
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("synth --config " + config("paper.json") + " --out " + dir.string() + " --scale 0.02") == kInputError);
  CHECK(run_cli("synth --config " + config("paper.json") + " --out " + dir.string() + " --scale 0.02 --seed 7") == kOk);
  CHECK(run_cli("impute --in " + (dir / kCohortFile).string() + " --out " + dir.string() +
                " --seed 1 --strategy nope") == kInputError);
  CHECK(run_cli("impute --in " + (dir / kCohortFile).string() + " --out " + dir.string() +
                " --seed 1 --m 3 --cycles 2 --horizon 1y --strategy mi-mnar") == kImputationFailure);
  CHECK(run_cli("check --in " + (dir / "absent.csv").string() + " --out " + dir.string()) == kInputError);
  CHECK(run_cli("frobnicate") == kInputError);
  fs::remove_all(dir);
}
