#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "srl/cli.hpp"
#include "srl/io.hpp"

using namespace srl;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = SRL_TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "srl_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Curated Airfoil-format dataset shared by the tests below.
fs::path airfoil_dataset() {
  static const fs::path manifest = [] {
    const fs::path dir = scratch("airfoil");
    const int code = cli::run({"curate-uci", "--csv", (kDataDir / "airfoil_standin.csv").string(),
                               "--target", "scaled_sound_pressure", "--name", "airfoil", "--seed",
                               "0", "--out", dir.string()});
    REQUIRE(code == cli::kExitOk);
    return dir / "dataset.json";
  }();
  return manifest;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli::run({}) == cli::kExitUsage);
  CHECK(cli::run({"train", "--no-such-flag"}) == cli::kExitUsage);
  CHECK(cli::run({"frobnicate"}) == cli::kExitUsage);
  CHECK(cli::run({"train", "--help"}) == cli::kExitOk);
  CHECK(cli::run({"train", "--out", scratch("nodata").string()}) == cli::kExitUsage);
  CHECK(cli::run({"probe", "--out", scratch("noprobe").string()}) == cli::kExitUsage);
  CHECK(cli::run({"train", "--dataset", airfoil_dataset().string(), "--mode", "fancy", "--out",
                  scratch("badmode").string()}) == cli::kExitUsage);
}

TEST_CASE("data and schema errors") {
  const fs::path dir = scratch("errors");
  CHECK(cli::run({"train", "--dataset", (dir / "missing.json").string(), "--out", dir.string()}) ==
        cli::kExitData);
  CHECK(cli::run({"curate-uci", "--csv", (kDataDir / "airfoil_standin.csv").string(), "--target",
                  "no_such_column", "--out", dir.string()}) == cli::kExitData);
  write_text(dir / "bad_config.json", R"({"lamda_e": 0.1})");
  CHECK(cli::run({"train", "--config", (dir / "bad_config.json").string(), "--dataset",
                  airfoil_dataset().string(), "--out", dir.string()}) == cli::kExitSchema);
  write_text(dir / "not_json.json", "{ nope");
  CHECK(cli::run({"train", "--config", (dir / "not_json.json").string(), "--dataset",
                  airfoil_dataset().string(), "--out", dir.string()}) == cli::kExitSchema);
  write_text(dir / "gen.json", R"({"operator": "linear", "colour": "blue"})");
  CHECK(cli::run({"gen-oldir", "--config", (dir / "gen.json").string(), "--out", dir.string()}) ==
        cli::kExitSchema);
}

TEST_CASE("numeric failure exit code") {
  const fs::path dir = scratch("numeric");
  std::string csv = "x,y\n";
  for (int i = 0; i < 20; ++i) csv += std::to_string(i) + "," + std::to_string(i) + "\n";
  csv += "20,1e300\n";
  write_text(dir / "huge.csv", csv);
  REQUIRE(cli::run({"curate-uci", "--csv", (dir / "huge.csv").string(), "--target", "y",
                    "--bin-width", "1e299", "--out", (dir / "ds").string()}) == cli::kExitOk);
  write_text(dir / "cfg.json", R"({"standardize_targets": false, "epochs": 2, "mode": "vanilla"})");
  CHECK(cli::run({"train", "--config", (dir / "cfg.json").string(), "--dataset",
                  (dir / "ds" / "dataset.json").string(), "--out", (dir / "run").string()}) ==
        cli::kExitNumeric);
}

TEST_CASE("gradcheck passes") { CHECK(cli::run({"gradcheck"}) == cli::kExitOk); }

TEST_CASE("train, eval and probe") {
  const fs::path dir = scratch("pipeline");
  write_text(dir / "cfg.json", R"({"epochs": 5})");
  for (const std::string mode : {"vanilla", "srl"}) {
    const fs::path run = dir / mode;
    REQUIRE(cli::run({"train", "--config", (dir / "cfg.json").string(), "--dataset",
                      airfoil_dataset().string(), "--mode", mode, "--seed", "1", "--out",
                      run.string()}) == cli::kExitOk);
    CHECK(fs::exists(run / "history.json"));
    CHECK(fs::exists(run / "checkpoint.bin"));
    CHECK(fs::exists(run / "report_test.json"));
    CHECK(fs::exists(run / "run_manifest.json"));
    CHECK(fs::exists(run / "surrogate.bin") == (mode == "srl"));
    const io::Json manifest = io::read_json(run / "run_manifest.json");
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("seed") == 1);
    CHECK(manifest.at("resolved_config").at("mode") == mode);
    CHECK_NOTHROW(cli::verify_manifest(manifest));

    const fs::path eval = run / "eval";
    REQUIRE(cli::run({"eval", "--checkpoint", (run / "checkpoint.bin").string(), "--dataset",
                      airfoil_dataset().string(), "--embeddings", (run / "emb.bin").string(),
                      "--out", eval.string()}) == cli::kExitOk);
    // eval on the same checkpoint reproduces the report written by train.
    CHECK(io::read_json(eval / "report.json") == io::read_json(run / "report_test.json"));

    const fs::path probe = run / "probe";
    REQUIRE(cli::run({"probe", "--embeddings", (run / "emb.bin").string(), "--epsilon",
                      "0.8,0.9,0.95,0.99", "--sphere-points", "5000", "--out", probe.string()}) ==
            cli::kExitOk);
    const io::Json report = io::read_json(probe / "probe.json");
    const io::Json& coverage = report.at("coverage");
    REQUIRE(coverage.size() == 4);
    for (std::size_t i = 1; i < coverage.size(); ++i) {
      CHECK(coverage[i].at("fraction").get<double>() <= coverage[i - 1].at("fraction").get<double>());
    }
    CHECK(report.contains("few_shot_proportion"));
    CHECK(report.at("enveloping").get<double>() >= -1.0);
  }
  CHECK(cli::run({"probe", "--surrogate", (dir / "srl" / "surrogate.bin").string()}) == cli::kExitOk);
}

TEST_CASE("replaying a run manifest reproduces the history byte for byte") {
  const fs::path dir = scratch("replay");
  write_text(dir / "cfg.json", R"({"epochs": 4, "sphere_points": 300})");
  REQUIRE(cli::run({"train", "--config", (dir / "cfg.json").string(), "--dataset",
                    airfoil_dataset().string(), "--seed", "7", "--out", (dir / "a").string()}) ==
          cli::kExitOk);
  REQUIRE(cli::run({"train", "--config", (dir / "a" / "run_manifest.json").string(), "--out",
                    (dir / "b").string()}) == cli::kExitOk);
  CHECK(slurp(dir / "a" / "history.json") == slurp(dir / "b" / "history.json"));
  CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));

  // A changed input is caught before training.
  const fs::path copy = dir / "copy";
  fs::create_directories(copy);
  io::Json manifest = io::read_json(dir / "a" / "run_manifest.json");
  manifest["inputs"]["dataset"][0]["sha256"] = std::string(64, '0');
  io::write_json(copy / "run_manifest.json", manifest);
  CHECK(cli::run({"train", "--config", (copy / "run_manifest.json").string(), "--out",
                  (dir / "c").string()}) == cli::kExitData);
}

TEST_CASE("operator-learning generation") {
  const fs::path dir = scratch("oldir");
  REQUIRE(cli::run({"gen-oldir", "--op", "nonlinear", "--n-train", "300", "--n-test", "100",
                    "--seed", "2", "--out", dir.string()}) == cli::kExitOk);
  const io::Json ds = io::read_json(dir / "dataset.json");
  CHECK(ds.at("kind") == "oldir");
  CHECK(ds.at("generator").at("operator") == "nonlinear");
  CHECK(ds.at("generator").at("mix") == io::Json::array({10.0, 30.0, 60.0}));
  const data::DirDataset loaded = cli::load_dataset(dir / "dataset.json");
  CHECK(loaded.size() == 400);
  CHECK(fs::exists(dir / "run_manifest.json"));
}
