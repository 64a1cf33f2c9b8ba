#include "ccr/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ccr {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

int ModelSpec::factor_count() const {
  return std::holds_alternative<HsvParams>(dynamics) ? 2 : 1;
}

void ModelSpec::validate() const {
  require(s0 > 0.0 && std::isfinite(s0), "model: s0 must be positive");
  require(std::isfinite(mu) && std::isfinite(r), "model: rates must be finite");
  if (const auto* p = std::get_if<BsmParams>(&dynamics)) {
    require(p->sigma >= 0.0, "bsm: sigma must be nonnegative");
  } else if (const auto* p = std::get_if<MjdParams>(&dynamics)) {
    require(p->sigma >= 0.0, "mjd: sigma must be nonnegative");
    require(p->lambda >= 0.0, "mjd: lambda must be nonnegative");
    require(p->delta >= 0.0, "mjd: delta must be nonnegative");
    require(std::isfinite(p->gamma), "mjd: gamma must be finite");
  } else {
    const auto& h = std::get<HsvParams>(dynamics);
    require(h.v0 >= 0.0 && h.theta >= 0.0, "hsv: v0 and theta must be nonnegative");
    require(h.kappa > 0.0, "hsv: kappa must be positive");
    require(h.eta > 0.0, "hsv: eta must be positive");
    require(h.rho >= -1.0 && h.rho <= 1.0, "hsv: rho must lie in [-1, 1]");
  }
}

std::string ModelSpec::name() const {
  switch (dynamics.index()) {
    case 0: return "BSM";
    case 1: return "MJD";
    default: return "HSV";
  }
}

double jump_compensator(const MjdParams& p) {
  return std::expm1(p.gamma + 0.5 * p.delta * p.delta);
}

ModelSpec calibrated_bsm() {
  return ModelSpec{BsmParams{0.1943}, 3825.33, 0.11, 0.0110};
}

ModelSpec calibrated_mjd() {
  return ModelSpec{MjdParams{0.1483, 1.2998, -0.1475, 0.1331}, 3825.33, 0.11, 0.0110};
}

ModelSpec calibrated_hsv() {
  return ModelSpec{HsvParams{0.0650, 2.3134, 0.0889, 0.9898, -0.7040}, 3825.33, 0.11, 0.0110};
}

ModelSpec calibrated_model(const std::string& id) {
  if (id == "BSM" || id == "bsm") return calibrated_bsm();
  if (id == "MJD" || id == "mjd") return calibrated_mjd();
  if (id == "HSV" || id == "hsv") return calibrated_hsv();
  throw std::invalid_argument("unknown model id: " + id);
}

void TimeGrid::validate() const {
  require(horizon > 0.0 && std::isfinite(horizon), "grid: horizon must be positive");
  require(steps >= 1, "grid: at least one step required");
}

}  // namespace ccr
