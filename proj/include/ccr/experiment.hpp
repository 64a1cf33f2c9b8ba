#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccr/approximant.hpp"
#include "ccr/exposure.hpp"
#include "ccr/pricing.hpp"
#include "ccr/simulation.hpp"
#include "ccr/xva.hpp"

namespace ccr {

struct RunConfig {
  std::string model = "bsm";        // bsm | mjd | hsv
  std::string option = "european";  // european | digital | barrier | american
  int paths = 10000;
  int steps = 52;
  double horizon = 1.0;
  std::uint64_t seed = 42;
  std::string measure = "physical";  // scenario measure: physical | risk_neutral

  std::string pricer = "auto";  // auto | analytic | cos | binomial
  int cos_terms = 256;
  double cos_width = 10.0;
  int binomial_steps = 256;
  double boundary_tolerance = 1e-4;  // relative to the strike

  std::string interpolation = "fixed";  // fixed | adaptive
  int degree = 8;
  bool split = true;
  bool tails = true;
  int prepass_points = 17;  // piecewise-linear pre-pass of the adaptive mode
  int max_degree = 1024;

  std::vector<MeasureSpec> measures{ExpectedExposure{}, PotentialFutureExposure{0.95},
                                    ConditionalExpectedShortfall{0.95}};
  int threads = 1;
  int repetitions = 1;
  std::string out_dir = "out";

  // xva
  int xva_degree = 16;
  int inner_samples = 1000;
  double margin_period = 10.0 / 252.0;
  double im_alpha = 0.99;
  double funding_spread = 0.01;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
  /// FNV-1a of the canonical JSON with run-local fields (threads, out_dir) removed.
  std::uint64_t hash() const;
};

ModelSpec make_model(const RunConfig& cfg);
OptionSpec make_option(const RunConfig& cfg);
Pricer make_pricer(const RunConfig& cfg);

struct ExperimentReport {
  RunConfig config;
  std::string pricer_id;
  PathSet paths;
  ExposureCube full;
  ExposureCube accel;
  std::vector<ChebyshevApproximant> approximants;  // t_1 .. t_{m-1}
  std::vector<int> degrees;                        // max piece degree per u
  BoundaryProfile boundaries;
  ComparisonReport comparison;
  long fit_pricer_calls = 0;
  double simulate_seconds = 0.0;
  double full_seconds = 0.0;
  double accel_seconds = 0.0;  // domain + fit + evaluation (+ pre-pass)
  double fit_seconds = 0.0;
  double mask_seconds = 0.0;
  double speedup = 0.0;
  std::vector<std::string> warnings;
};

/// simulate -> full re-evaluation -> per-u fit -> accelerated re-evaluation
/// -> profiles -> speed-up. Timings are the minimum over `repetitions`.
ExperimentReport run_experiment(const RunConfig& cfg);

/// profiles.csv, manifest.json and approximants/u_XXX.bin under `dir`.
void write_experiment(const ExperimentReport& report, const std::string& dir);

struct XvaReport {
  McEstimate cva_analytic;
  McEstimate cva_chebyshev;
  McEstimate mva_analytic;
  McEstimate mva_chebyshev;
  double runtime_seconds = 0.0;
};

XvaReport run_xva(const RunConfig& cfg);
std::string xva_json(const XvaReport& report, const RunConfig& cfg);

/// Digital example, bound checks, planner outputs, convergence and property
/// suites rendered as JSON.
std::string run_diagnostics(const RunConfig& cfg);

/// Per-call timings of the reference pricer and of the fitted approximant.
std::string run_bench(const RunConfig& cfg);

struct ConvergencePoint {
  int degree = 0;
  double max_error = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;  // least-squares slope of ln(error) against log2(degree)
};

/// Max error of fixed-degree fits of V_t on [lo, hi] (split at the strike
/// when requested, no tails) over `probes` uniform points.
ConvergenceReport chebyshev_convergence(const Pricer& pricer, double t, double lo, double hi, bool split,
                                        const std::vector<int>& degrees, int probes = 10000,
                                        std::uint64_t seed = 5);

/// "model name" from /proc/cpuinfo, or "unknown".
std::string hardware_string();

std::string format_double(double v);

}  // namespace ccr
