#include "ccr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ccr/bounds.hpp"
#include "ccr/chebyshev.hpp"
#include "ccr/parallel.hpp"

namespace ccr {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json measure_to_json(const MeasureSpec& spec) {
  if (std::holds_alternative<ExpectedExposure>(spec)) return {{"type", "EE"}};
  if (const auto* p = std::get_if<PotentialFutureExposure>(&spec)) return {{"type", "PFE"}, {"alpha", p->alpha}};
  if (const auto* c = std::get_if<ConditionalExpectedShortfall>(&spec)) return {{"type", "CES"}, {"alpha", c->alpha}};
  return {{"type", "SEM"}, {"density", std::get<SpectralMeasure>(spec).density}};
}

MeasureSpec measure_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  const double alpha = j.value("alpha", 0.95);
  if (type == "EE") return ExpectedExposure{};
  if (type == "PFE") return PotentialFutureExposure{alpha};
  if (type == "CES") return ConditionalExpectedShortfall{alpha};
  if (type == "SEM") return SpectralMeasure{j.at("density").get<std::vector<double>>()};
  throw std::invalid_argument("config: unknown measure type " + type);
}

json config_json(const RunConfig& c, bool run_local) {
  json measures = json::array();
  for (const auto& m : c.measures) measures.push_back(measure_to_json(m));
  json j = {{"model", c.model},
            {"option", c.option},
            {"paths", c.paths},
            {"steps", c.steps},
            {"horizon", c.horizon},
            {"seed", c.seed},
            {"measure", c.measure},
            {"pricer", c.pricer},
            {"cos_terms", c.cos_terms},
            {"cos_width", c.cos_width},
            {"binomial_steps", c.binomial_steps},
            {"boundary_tolerance", c.boundary_tolerance},
            {"interpolation", c.interpolation},
            {"degree", c.degree},
            {"split", c.split},
            {"tails", c.tails},
            {"prepass_points", c.prepass_points},
            {"max_degree", c.max_degree},
            {"measures", measures},
            {"repetitions", c.repetitions},
            {"xva_degree", c.xva_degree},
            {"inner_samples", c.inner_samples},
            {"margin_period", c.margin_period},
            {"im_alpha", c.im_alpha},
            {"funding_spread", c.funding_spread}};
  if (run_local) {
    j["threads"] = c.threads;
    j["out_dir"] = c.out_dir;
  }
  return j;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

}  // namespace

void RunConfig::validate() const {
  if (!one_of(model, {"bsm", "mjd", "hsv"})) throw std::invalid_argument("config: unknown model " + model);
  if (!one_of(option, {"european", "digital", "barrier", "american"}))
    throw std::invalid_argument("config: unknown option " + option);
  if (!one_of(pricer, {"auto", "analytic", "cos", "binomial"}))
    throw std::invalid_argument("config: unknown pricer " + pricer);
  if (!one_of(interpolation, {"fixed", "adaptive"}))
    throw std::invalid_argument("config: interpolation must be fixed or adaptive");
  if (!one_of(measure, {"physical", "risk_neutral"}))
    throw std::invalid_argument("config: measure must be physical or risk_neutral");
  if ((option == "barrier" || option == "american") && model != "bsm")
    throw std::invalid_argument("config: " + option + " options are priced in the bsm model only");
  if (paths < 100) throw std::invalid_argument("config: at least 100 paths required for measure CIs");
  if (steps < 1 || !(horizon > 0.0)) throw std::invalid_argument("config: bad time grid");
  if (degree < 1 || max_degree < 2) throw std::invalid_argument("config: bad interpolation degree");
  if (prepass_points < 2) throw std::invalid_argument("config: pre-pass needs at least two points");
  if (threads < 1 || repetitions < 1) throw std::invalid_argument("config: threads and repetitions must be positive");
  if (measures.empty()) throw std::invalid_argument("config: no measures requested");
  for (const auto& m : measures) ccr::validate(m);
}

std::string RunConfig::to_json() const { return config_json(*this, true).dump(2); }

RunConfig RunConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c;
  c.model = j.value("model", c.model);
  c.option = j.value("option", c.option);
  c.paths = j.value("paths", c.paths);
  c.steps = j.value("steps", c.steps);
  c.horizon = j.value("horizon", c.horizon);
  c.seed = j.value("seed", c.seed);
  c.measure = j.value("measure", c.measure);
  c.pricer = j.value("pricer", c.pricer);
  c.cos_terms = j.value("cos_terms", c.cos_terms);
  c.cos_width = j.value("cos_width", c.cos_width);
  c.binomial_steps = j.value("binomial_steps", c.binomial_steps);
  c.boundary_tolerance = j.value("boundary_tolerance", c.boundary_tolerance);
  c.interpolation = j.value("interpolation", c.interpolation);
  c.degree = j.value("degree", c.degree);
  c.split = j.value("split", c.split);
  c.tails = j.value("tails", c.tails);
  c.prepass_points = j.value("prepass_points", c.prepass_points);
  c.max_degree = j.value("max_degree", c.max_degree);
  if (j.contains("measures")) {
    c.measures.clear();
    for (const auto& m : j.at("measures")) c.measures.push_back(measure_from_json(m));
  }
  c.threads = j.value("threads", c.threads);
  c.repetitions = j.value("repetitions", c.repetitions);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.xva_degree = j.value("xva_degree", c.xva_degree);
  c.inner_samples = j.value("inner_samples", c.inner_samples);
  c.margin_period = j.value("margin_period", c.margin_period);
  c.im_alpha = j.value("im_alpha", c.im_alpha);
  c.funding_spread = j.value("funding_spread", c.funding_spread);
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::uint64_t RunConfig::hash() const {
  const std::string canonical = config_json(*this, false).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

ModelSpec make_model(const RunConfig& cfg) { return calibrated_model(cfg.model); }

OptionSpec make_option(const RunConfig& cfg) {
  OptionSpec o = calibrated_option(cfg.option);
  o.maturity = cfg.horizon;
  return o;
}

Pricer make_pricer(const RunConfig& cfg) {
  const ModelSpec model = make_model(cfg);
  const OptionSpec option = make_option(cfg);
  std::string method = cfg.pricer;
  if (method == "auto") {
    if (option.is_american()) {
      method = "binomial";
    } else {
      method = cfg.model == "bsm" ? "analytic" : "cos";
    }
  }
  if (method == "analytic") return Pricer(model, option, AnalyticBsm{});
  if (method == "cos") return Pricer(model, option, CosParams{cfg.cos_terms, cfg.cos_width});
  return Pricer(model, option, BinomialCrr{cfg.binomial_steps});
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string hardware_string() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        auto name = line.substr(colon + 1);
        name.erase(0, name.find_first_not_of(' '));
        return name;
      }
    }
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// experiment

namespace {

Eigen::VectorXd variance_column(const PathSet& paths, int u) {
  if (paths.dims() == 2) return paths.variance.col(u);
  return Eigen::VectorXd();
}

// Piecewise-(bi)linear interpolant of V_t on an equidistant grid of the
// domain range, with the domain tails outside it.
struct LinearPrepass {
  double lo = 0.0, hi = 1.0, vlo = 0.0, vhi = 0.0;
  int points = 2;
  bool two_factor = false;
  Eigen::MatrixXd grid;
  std::optional<AffineTail> left, right;

  LinearPrepass(const Pricer& pricer, double t, const ChebDomain& d, int p)
      : lo(d.breaks.front()), hi(d.breaks.back()), vlo(d.var_lo), vhi(d.var_hi), points(p),
        two_factor(d.factors == 2), left(d.left_tail), right(d.right_tail) {
    if (hi <= lo) hi = lo + 1e-9 * (1.0 + std::abs(lo));
    if (two_factor && vhi <= vlo) vhi = vlo + 1e-12;
    const int cols = two_factor ? p : 1;
    grid.resize(p, cols);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < cols; ++j) grid(i, j) = pricer.value(t, {spot(i), var(j)});
  }
  double spot(int i) const { return lo + (hi - lo) * i / (points - 1); }
  double var(int j) const { return two_factor ? vlo + (vhi - vlo) * j / (points - 1) : 0.0; }

  double operator()(const State& z) const {
    if (z.spot < lo && left) return (*left)(z.spot);
    if (z.spot > hi && right) return (*right)(z.spot);
    const double xs = std::clamp((z.spot - lo) / (hi - lo) * (points - 1), 0.0, points - 1.0);
    const int i = std::min(static_cast<int>(xs), points - 2);
    const double ws = xs - i;
    if (!two_factor) return (1.0 - ws) * grid(i, 0) + ws * grid(i + 1, 0);
    const double xv = std::clamp((z.variance - vlo) / (vhi - vlo) * (points - 1), 0.0, points - 1.0);
    const int j = std::min(static_cast<int>(xv), points - 2);
    const double wv = xv - j;
    return (1.0 - ws) * ((1.0 - wv) * grid(i, j) + wv * grid(i, j + 1)) +
           ws * ((1.0 - wv) * grid(i + 1, j) + wv * grid(i + 1, j + 1));
  }
};

struct AcceleratedRun {
  std::vector<ChebyshevApproximant> approximants;
  std::vector<int> degrees;
  long pricer_calls = 0;
  double fit_seconds = 0.0;
  ExposureCube cube;
};

AcceleratedRun accelerated_stage(const RunConfig& cfg, const Pricer& pricer, const PathSet& paths,
                                 const BoundaryProfile* boundaries) {
  AcceleratedRun run;
  const int m = paths.steps();
  DomainOptions dopt;
  dopt.split_at_strike = cfg.split;
  dopt.tails = cfg.tails;
  const auto start = Clock::now();
  for (int u = 1; u < m; ++u) {
    const double t = paths.grid.time(u);
    const Eigen::VectorXd spots = paths.spot.col(u);
    const Eigen::VectorXd vars = variance_column(paths, u);
    const ChebDomain domain = build_domain(pricer, t, spots, vars, dopt);
    if (cfg.interpolation == "fixed") {
      FitStats stats;
      run.approximants.push_back(fit_approximant(pricer, t, domain, cfg.degree, &stats));
      run.pricer_calls += stats.pricer_calls;
    } else {
      const LinearPrepass linear(pricer, t, domain, cfg.prepass_points);
      run.pricer_calls += linear.grid.size();
      Eigen::VectorXd y(spots.size());
      for (Eigen::Index i = 0; i < spots.size(); ++i)
        y(i) = std::max(linear({spots(i), vars.size() ? vars(i) : 0.0}), 0.0);
      double target = std::numeric_limits<double>::infinity();
      for (const auto& spec : cfg.measures) {
        const auto r = measure(y, spec);
        if (r.ci_halfwidth && *r.ci_halfwidth > 0.0) target = std::min(target, 2.0 * *r.ci_halfwidth);
      }
      if (!std::isfinite(target)) target = 1e-6 * pricer.option().strike;
      AdaptiveOptions aopt;
      aopt.tolerance = target;
      aopt.max_degree = cfg.max_degree;
      aopt.seed = cfg.seed ^ static_cast<std::uint64_t>(u);
      AdaptiveResult res = adaptive_fit(pricer, t, domain, aopt);
      run.pricer_calls += res.pricer_calls;
      run.approximants.push_back(std::move(res.approximant));
    }
    run.degrees.push_back(run.approximants.back().degree());
  }
  run.fit_seconds = seconds_since(start);
  run.cube = accelerated_reeval(paths, run.approximants, pricer.option(), cfg.threads, boundaries);
  return run;
}

}  // namespace

ExperimentReport run_experiment(const RunConfig& cfg) {
  cfg.validate();
  ExperimentReport rep;
  rep.config = cfg;
  const ModelSpec model = make_model(cfg);
  const Pricer pricer = make_pricer(cfg);
  rep.pricer_id = pricer.id();
  const TimeGrid grid{cfg.horizon, cfg.steps};
  const Measure measure = cfg.measure == "physical" ? Measure::physical : Measure::risk_neutral;

  auto stage = [&](const char* name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
    }
  };

  stage("simulate", [&] {
    const auto start = Clock::now();
    rep.paths = simulate(model, grid, cfg.paths, measure, cfg.seed, cfg.threads);
    rep.simulate_seconds = seconds_since(start);
  });

  const bool american = pricer.option().is_american();
  if (american) {
    stage("exercise_boundary", [&] {
      rep.mask_seconds = std::numeric_limits<double>::infinity();
      for (int k = 0; k < cfg.repetitions; ++k) {
        const auto start = Clock::now();
        rep.boundaries = exercise_boundaries(pricer, grid, cfg.boundary_tolerance * pricer.option().strike,
                                             cfg.threads);
        rep.mask_seconds = std::min(rep.mask_seconds, seconds_since(start));
      }
    });
  }
  const BoundaryProfile* bp = american ? &rep.boundaries : nullptr;

  stage("full_reeval", [&] {
    rep.full_seconds = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.repetitions; ++k) {
      rep.full = full_reeval(rep.paths, pricer, cfg.threads, bp);
      rep.full_seconds = std::min(rep.full_seconds, rep.full.seconds);
    }
  });

  stage("accelerated_reeval", [&] {
    rep.accel_seconds = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.repetitions; ++k) {
      AcceleratedRun run = accelerated_stage(cfg, pricer, rep.paths, bp);
      const double total = run.fit_seconds + run.cube.seconds;
      if (total < rep.accel_seconds) {
        rep.accel_seconds = total;
        rep.fit_seconds = run.fit_seconds;
      }
      rep.accel = std::move(run.cube);
      rep.approximants = std::move(run.approximants);
      rep.degrees = std::move(run.degrees);
      rep.fit_pricer_calls = run.pricer_calls;
    }
  });

  stage("profile_and_compare", [&] {
    rep.comparison = profile_and_compare(rep.full, rep.accel, cfg.measures);
    rep.warnings = rep.comparison.warnings;
    rep.speedup = speedup(rep.full_seconds, rep.accel_seconds, american ? rep.mask_seconds : 0.0);
  });
  return rep;
}

void write_experiment(const ExperimentReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "approximants");

  std::ofstream csv(fs::path(dir) / "profiles.csv");
  csv << "u,t,measure,estimate_full,estimate_accel,ci_halfwidth\n";
  for (const auto& prof : rep.comparison.profiles) {
    for (std::size_t k = 0; k < prof.full.size(); ++k) {
      const int u = static_cast<int>(k) + 1;
      csv << u << ',' << format_double(rep.paths.grid.time(u)) << ',' << prof.name << ','
          << format_double(prof.full[k]) << ',' << format_double(prof.accel[k]) << ','
          << (prof.ci_halfwidth[k] ? format_double(*prof.ci_halfwidth[k]) : std::string()) << '\n';
    }
  }

  for (std::size_t k = 0; k < rep.approximants.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "u_%03zu.bin", k + 1);
    std::ofstream bin(fs::path(dir) / "approximants" / name, std::ios::binary);
    write_binary(rep.approximants[k], bin);
  }

  json table = json::array();
  for (const auto& p : rep.comparison.profiles) {
    table.push_back({{"measure", p.name},
                     {"eps", p.eps_accel},
                     {"u_star", p.u_star},
                     {"mc", std::isnan(p.eps_mc) ? json(nullptr) : json(p.eps_mc)},
                     {"pass", p.pass},
                     {"excluded_u", p.excluded}});
  }
  json boundaries = json::array();
  for (const auto& b : rep.boundaries) boundaries.push_back(b ? json(*b) : json(nullptr));
  std::ostringstream hash_stream;
  hash_stream << std::hex << rep.config.hash();
  const std::string hash_hex = hash_stream.str();
  const json manifest = {
      {"seed", rep.config.seed},
      {"config_hash", hash_hex},
      {"config", config_json(rep.config, true)},
      {"pricer", rep.pricer_id},
      {"threads", rep.config.threads},
      {"hardware", hardware_string()},
      {"timings",
       {{"simulate_s", rep.simulate_seconds},
        {"full_s", rep.full_seconds},
        {"accel_s", rep.accel_seconds},
        {"fit_s", rep.fit_seconds},
        {"mask_s", rep.mask_seconds},
        {"repetitions", rep.config.repetitions},
        {"protocol", "minimum over repetitions, pricing stage only"}}},
      {"speedup", rep.speedup},
      {"fit_pricer_calls", rep.fit_pricer_calls},
      {"degrees", rep.degrees},
      {"exercise_boundaries", boundaries},
      {"error_table", table},
      {"all_pass", rep.comparison.all_pass()},
      {"warnings", rep.warnings}};
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// xva

XvaReport run_xva(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.model != "bsm") throw std::invalid_argument("xva: analytic deltas require the BSM model");
  const auto start = Clock::now();
  const ModelSpec model = make_model(cfg);
  RunConfig call_cfg = cfg;
  call_cfg.option = "european";
  call_cfg.pricer = "analytic";
  const Pricer pricer = make_pricer(call_cfg);
  const TimeGrid grid{cfg.horizon, cfg.steps};
  const PathSet paths = simulate(model, grid, cfg.paths, Measure::risk_neutral, cfg.seed, cfg.threads);
  const int m = grid.steps;
  const double maturity = pricer.option().maturity;

  std::vector<ChebyshevApproximant> fits;
  for (int u = 1; u < m; ++u) {
    const double t = grid.time(u);
    const ChebDomain d = build_domain(pricer, t, paths.spot.col(u), Eigen::VectorXd(), {});
    fits.push_back(fit_approximant(pricer, t, d, cfg.xva_degree));
  }
  const DeltaFn analytic = [&](int u, double s) { return pricer.delta(grid.time(u), {s, 0.0}); };
  const DeltaFn chebyshev = [&](int u, double s) {
    if (u >= m) return pricer.option().payoff_slope(s);
    return fits[u - 1].delta({s, 0.0});
  };

  XvaReport rep;
  const PdCurve pd = PdCurve::uniform(cfg.horizon);
  rep.cva_analytic = cva_delta_mc(paths, analytic, pd, model.r);
  rep.cva_chebyshev = cva_delta_mc(paths, chebyshev, pd, model.r);
  InnerSampler sampler{model, cfg.margin_period, cfg.inner_samples, cfg.seed ^ 0x9E3779B97F4A7C15ull};
  const auto mva = mva_isda(paths, sampler, {analytic, chebyshev}, FundingSpread::constant(cfg.funding_spread),
                            cfg.im_alpha, maturity, cfg.threads);
  rep.mva_analytic = mva[0];
  rep.mva_chebyshev = mva[1];
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

std::string xva_json(const XvaReport& r, const RunConfig& cfg) {
  auto est = [](const McEstimate& e) { return json{{"value", e.value}, {"std_error", e.std_error}}; };
  const json j = {{"cva_delta",
                   {{"analytic", est(r.cva_analytic)},
                    {"chebyshev", est(r.cva_chebyshev)},
                    {"abs_diff", std::abs(r.cva_analytic.value - r.cva_chebyshev.value)}}},
                  {"mva",
                   {{"analytic", est(r.mva_analytic)},
                    {"chebyshev", est(r.mva_chebyshev)},
                    {"rel_diff", r.mva_analytic.value != 0.0
                                     ? std::abs(r.mva_analytic.value - r.mva_chebyshev.value) /
                                           std::abs(r.mva_analytic.value)
                                     : 0.0}}},
                  {"config", config_json(cfg, true)},
                  {"seed", cfg.seed},
                  {"runtime_s", r.runtime_seconds}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// diagnostics

ConvergenceReport chebyshev_convergence(const Pricer& pricer, double t, double lo, double hi, bool split,
                                        const std::vector<int>& degrees, int probes, std::uint64_t seed) {
  ChebDomain d;
  d.factors = 1;
  d.breaks.push_back(lo);
  const double k = pricer.option().strike;
  if (split && lo < k && k < hi) d.breaks.push_back(k);
  d.breaks.push_back(hi);

  Rng rng = substream(seed, 0, 0xC0);
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<double> xs(static_cast<std::size_t>(probes));
  std::vector<double> exact(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = unif(rng);
    exact[i] = pricer.value(t, {xs[i], 0.0});
  }
  ConvergenceReport rep;
  for (int n : degrees) {
    const ChebyshevApproximant a = fit_approximant(pricer, t, d, n);
    double err = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) err = std::max(err, std::abs(a.value({xs[i], 0.0}) - exact[i]));
    rep.points.push_back({n, err});
  }
  // Least squares of ln(err) on log2(N).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = static_cast<double>(rep.points.size());
  for (const auto& p : rep.points) {
    const double x = std::log2(static_cast<double>(p.degree));
    const double y = std::log(std::max(p.max_error, 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = cnt * sxx - sx * sx;
  rep.slope = den != 0.0 ? (cnt * sxy - sx * sy) / den : 0.0;
  return rep;
}

std::string run_diagnostics(const RunConfig& cfg) {
  json out;
  const DigitalReport dr = digital_example();
  out["digital_example"] = {{"pfe_x", dr.pfe_x},
                            {"ces_x", dr.ces_x},
                            {"pfe_y", dr.pfe_y},
                            {"ces_y", dr.ces_y},
                            {"l2", dr.l2},
                            {"pfe_gap_exceeds_4x_l2", dr.pfe_gap_exceeds_4x},
                            {"ces_gap_exceeds_5x_l2", dr.ces_gap_exceeds_5x}};

  const DigitalExample ex;
  const ScalarFn v = [ex](double z) { return ex.V(z); };
  const ScalarFn u = [ex](double z) { return ex.U(z); };
  LpBoundInput li;
  li.v = v;
  li.u = u;
  li.law = ex.law();
  li.fm = [](double w) { return w > 0.99 ? 100.0 : 0.0; };
  li.fm_breaks = {0.99};
  const LpBoundReport lb = lp_bound_eval(li);
  out["lp_bound_ces_0.99"] = {{"bound", lb.bound}, {"gap", lb.gap}, {"holds", lb.holds()}, {"vacuous", lb.vacuous}};

  json finite = json::array();
  for (double eta : {0.05, 0.2}) {
    FiniteSampleInput fi;
    fi.v = v;
    fi.u = u;
    fi.law = ex.law();
    fi.eta = eta;
    fi.seed = cfg.seed;
    const auto fr = finite_sample_bound_check(fi);
    finite.push_back({{"eta", eta},
                      {"bound_a", fr.bound_a},
                      {"bound_b", fr.bound_b},
                      {"rate_a", fr.rate_a()},
                      {"rate_b", fr.rate_b()},
                      {"allowed", fr.allowed_rate(eta)}});
  }
  out["finite_sample"] = finite;

  PlannerInput pin;
  pin.n = cfg.paths;
  pin.sigma_rho = 0.5;
  pin.kappa = 3.0 * pin.sigma_rho * std::sqrt(2.0);
  const PlannerOutput po = plan_parameters(pin);
  out["planner"] = {{"n", pin.n},
                    {"L", po.L},
                    {"N", po.N},
                    {"nodes_per_dim", po.nodes_per_dim},
                    {"M", po.M},
                    {"side_condition", planner_side_condition(pin, po)}};

  const ModelSpec bsm = calibrated_bsm();
  const Pricer call(bsm, calibrated_option("european"), AnalyticBsm{});
  const double sd = std::get<BsmParams>(bsm.dynamics).sigma * std::sqrt(0.5);
  const ConvergenceReport conv =
      chebyshev_convergence(call, 0.5, bsm.s0 * std::exp(-4.0 * sd), bsm.s0 * std::exp(4.0 * sd), true, {4, 8, 16, 32});
  json pts = json::array();
  for (const auto& p : conv.points) pts.push_back({{"N", p.degree}, {"max_error", p.max_error}});
  out["convergence"] = {{"points", pts}, {"slope", conv.slope}};

  json lemma = json::object();
  for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()})
    lemma[std::isinf(p) ? "inf" : format_double(p)] = ordered_difference_violations(10000, 50, p, cfg.seed);
  out["ordered_difference_violations"] = lemma;
  const ContractionCounts cc = measure_contraction_violations(10000, 200, 0.95, cfg.seed);
  out["measure_contraction_violations"] = {{"sorted", cc.sorted_violations}, {"pathwise", cc.pathwise_violations}};
  return out.dump(2);
}

std::string run_bench(const RunConfig& cfg) {
  cfg.validate();
  const ModelSpec model = make_model(cfg);
  const Pricer pricer = make_pricer(cfg);
  const TimeGrid grid{cfg.horizon, cfg.steps};
  const int n = std::min(cfg.paths, 2000);
  const PathSet paths = simulate(model, grid, n, Measure::physical, cfg.seed, 1);
  const int u = std::max(1, cfg.steps / 2);
  const double t = grid.time(u);
  const Eigen::VectorXd vars = variance_column(paths, u);
  const ChebDomain d = build_domain(pricer, t, paths.spot.col(u), vars, {});
  const ChebyshevApproximant a = fit_approximant(pricer, t, d, cfg.degree);

  double sink = 0.0;
  double pricer_best = std::numeric_limits<double>::infinity();
  double cheb_best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < std::max(3, cfg.repetitions); ++rep) {
    auto start = Clock::now();
    for (int i = 0; i < n; ++i) sink += pricer.value(t, paths.state(i, u));
    pricer_best = std::min(pricer_best, seconds_since(start));
    start = Clock::now();
    for (int i = 0; i < n; ++i) sink += a.value(paths.state(i, u));
    cheb_best = std::min(cheb_best, seconds_since(start));
  }
  const json j = {{"pricer", pricer.id()},
                  {"evaluations", n},
                  {"pricer_ns_per_call", 1e9 * pricer_best / n},
                  {"chebyshev_ns_per_call", 1e9 * cheb_best / n},
                  {"ratio", pricer_best / cheb_best},
                  {"degree", cfg.degree},
                  {"threads", 1},
                  {"hardware", hardware_string()},
                  {"checksum", sink}};
  return j.dump(2);
}

}  // namespace ccr
