#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "ccr/experiment.hpp"

using namespace ccr;
namespace fs = std::filesystem;

TEST_CASE("run configuration round-trips and hashes stably") {
  RunConfig c;
  c.model = "hsv";
  c.option = "digital";
  c.degree = 12;
  c.measures = {ExpectedExposure{}, ConditionalExpectedShortfall{0.9}, SpectralMeasure{{0.5, 1.5}}};
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());

  RunConfig local = c;
  local.threads = 4;
  local.out_dir = "elsewhere";
  CHECK(local.hash() == c.hash());
  RunConfig other = c;
  other.seed = 7;
  CHECK(other.hash() != c.hash());

  const RunConfig partial = RunConfig::from_json(R"({"model":"mjd","paths":500})");
  CHECK(partial.model == "mjd");
  CHECK(partial.paths == 500);
  CHECK(partial.steps == 52);
}

TEST_CASE("run configuration validation") {
  auto invalid = [](const char* text) { CHECK_THROWS(RunConfig::from_json(text).validate()); };
  invalid(R"({"model":"sabr"})");
  invalid(R"({"option":"asian"})");
  invalid(R"({"paths":10})");
  invalid(R"({"interpolation":"spline"})");
  invalid(R"({"measures":[{"type":"PFE","alpha":1.5}]})");
  invalid(R"({"model":"mjd","option":"barrier"})");
  invalid(R"({"model":"hsv","option":"american"})");
  CHECK_NOTHROW(RunConfig{}.validate());
  CHECK(make_pricer(RunConfig::from_json(R"({"option":"american"})")).id().find("crr") != std::string::npos);
  CHECK(make_pricer(RunConfig::from_json(R"({"model":"mjd"})")).id().find("cos") != std::string::npos);
}

TEST_CASE("small fixed-degree experiment") {
  RunConfig c;
  c.paths = 200;
  c.steps = 8;
  c.degree = 16;
  const ExperimentReport rep = run_experiment(c);
  CHECK(rep.full.values.rows() == 200);
  CHECK(rep.approximants.size() == 7);
  CHECK(rep.fit_pricer_calls == 7 * 2 * 17);
  CHECK(rep.comparison.all_pass());
  CHECK(rep.speedup > 0.0);
  for (int d : rep.degrees) CHECK(d == 16);

  const fs::path dir = fs::temp_directory_path() / "ccr_experiment_test";
  fs::remove_all(dir);
  write_experiment(rep, dir.string());
  CHECK(fs::exists(dir / "profiles.csv"));
  CHECK(fs::exists(dir / "approximants" / "u_001.bin"));
  std::ifstream mf(dir / "manifest.json");
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("seed") == 42);
  CHECK(manifest.at("error_table").size() == 3);
  CHECK(manifest.at("all_pass") == true);
  CHECK(manifest.contains("hardware"));
  fs::remove_all(dir);
}

TEST_CASE("adaptive experiment on a small sample") {
  RunConfig c;
  c.paths = 500;
  c.steps = 6;
  c.interpolation = "adaptive";
  const ExperimentReport rep = run_experiment(c);
  CHECK(rep.comparison.all_pass());
  for (int d : rep.degrees) {
    CHECK(d >= 1);
    CHECK((d & (d - 1)) == 0);  // degrees are powers of two
  }
}

TEST_CASE("diagnostics JSON") {
  RunConfig c;
  c.paths = 1000;
  const nlohmann::json d = nlohmann::json::parse(run_diagnostics(c));
  CHECK(d.at("digital_example").at("pfe_gap_exceeds_4x_l2") == true);
  CHECK(d.at("convergence").at("slope").get<double>() <= -0.5);
  CHECK(d.at("ordered_difference_violations").at("inf") == 0);
}

#ifdef CCR_CLI_PATH
TEST_CASE("command line smoke run") {
  const fs::path dir = fs::temp_directory_path() / "ccr_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"paths":200,"steps":4,"degree":16})";
  }
  const std::string cli = CCR_CLI_PATH;
  const std::string cfg = (dir / "cfg.json").string();
  CHECK(std::system((cli + " simulate --config " + cfg + " --out " + (dir / "sim").string() + " > /dev/null").c_str()) == 0);
  CHECK(fs::exists(dir / "sim" / "paths.bin"));
  CHECK(std::system((cli + " exposure --config " + cfg + " --seed 3 --out " + (dir / "exp").string() + " > /dev/null").c_str()) == 0);
  std::ifstream mf(dir / "exp" / "manifest.json");
  CHECK(nlohmann::json::parse(mf).at("seed") == 3);
  CHECK(std::system((cli + " exposure --config /nonexistent.json 2> /dev/null > /dev/null").c_str()) != 0);
  CHECK(std::system((cli + " 2> /dev/null > /dev/null").c_str()) != 0);
  fs::remove_all(dir);
}
#endif
