#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ccr/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--threads", f.threads, "worker thread cap")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "output directory");
}

ccr::RunConfig load(const CommonFlags& f) {
  ccr::RunConfig cfg = f.config.empty() ? ccr::RunConfig{} : ccr::RunConfig::from_file(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.out_dir = *f.out;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text << '\n';
}

void print_summary(const ccr::ExperimentReport& rep) {
  std::cout << "pricer " << rep.pricer_id << ", n=" << rep.config.paths << ", m=" << rep.config.steps << '\n';
  for (const auto& p : rep.comparison.profiles) {
    std::cout << "  " << p.name << ": eps=" << ccr::format_double(p.eps_accel)
              << " mc=" << ccr::format_double(p.eps_mc) << " u*=" << p.u_star << (p.pass ? " pass" : " FAIL")
              << '\n';
  }
  std::cout << "  full " << rep.full_seconds << " s, accelerated " << rep.accel_seconds << " s, speed-up "
            << rep.speedup << '\n';
  for (const auto& w : rep.warnings) std::cout << "  warning: " << w << '\n';
}

int run_simulate(const ccr::RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const ccr::ModelSpec model = ccr::make_model(cfg);
  const ccr::Measure measure = cfg.measure == "physical" ? ccr::Measure::physical : ccr::Measure::risk_neutral;
  const ccr::PathSet paths =
      ccr::simulate(model, ccr::TimeGrid{cfg.horizon, cfg.steps}, cfg.paths, measure, cfg.seed, cfg.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::ofstream bin(dir / "paths.bin", std::ios::binary);
  ccr::write_binary(paths, bin);
  std::ofstream csv(dir / "paths.csv");
  ccr::write_csv(paths, csv);
  const nlohmann::json manifest = {{"seed", cfg.seed},
                                   {"model", model.name()},
                                   {"paths", cfg.paths},
                                   {"steps", cfg.steps},
                                   {"threads", cfg.threads},
                                   {"hardware", ccr::hardware_string()},
                                   {"simulate_s", seconds},
                                   {"config", nlohmann::json::parse(cfg.to_json())}};
  write_text(dir / "manifest.json", manifest.dump(2));
  std::cout << "wrote " << cfg.paths << " paths to " << dir.string() << '\n';
  return 0;
}

int run_exposure(ccr::RunConfig cfg, bool adaptive) {
  if (adaptive) cfg.interpolation = "adaptive";
  const ccr::ExperimentReport rep = ccr::run_experiment(cfg);
  ccr::write_experiment(rep, cfg.out_dir);
  print_summary(rep);
  return rep.comparison.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chebyshev-accelerated counterparty exposure engine"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto* simulate = app.add_subcommand("simulate", "simulate risk-factor paths");
  auto* exposure = app.add_subcommand("exposure", "full vs accelerated exposure profiles");
  auto* adaptive = app.add_subcommand("adaptive", "exposure profiles with adaptive interpolation");
  auto* xva = app.add_subcommand("xva", "CVA delta and MVA with analytic and Chebyshev deltas");
  auto* diagnostics = app.add_subcommand("diagnostics", "bound checks, planner and convergence diagnostics");
  auto* bench = app.add_subcommand("bench", "per-call pricer vs interpolant timings");
  for (auto* sub : {simulate, exposure, adaptive, xva, diagnostics, bench}) add_common(sub, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const ccr::RunConfig cfg = load(flags);
    if (simulate->parsed()) return run_simulate(cfg);
    if (exposure->parsed()) return run_exposure(cfg, false);
    if (adaptive->parsed()) return run_exposure(cfg, true);
    if (xva->parsed()) {
      const std::string text = ccr::xva_json(ccr::run_xva(cfg), cfg);
      write_text(fs::path(cfg.out_dir) / "xva.json", text);
      std::cout << text << '\n';
      return 0;
    }
    if (diagnostics->parsed()) {
      const std::string text = ccr::run_diagnostics(cfg);
      write_text(fs::path(cfg.out_dir) / "diagnostics.json", text);
      std::cout << text << '\n';
      return 0;
    }
    const std::string text = ccr::run_bench(cfg);
    write_text(fs::path(cfg.out_dir) / "bench.json", text);
    std::cout << text << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
