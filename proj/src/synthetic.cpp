#include "bartpp/synthetic.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "bartpp/errors.hpp"

namespace bartpp {

IntensityScenario make_piecewise_scenario(std::string name, Domain domain, double base,
                                          std::vector<PiecewisePiece> pieces) {
  double lambda_max = base;
  for (const auto& piece : pieces) lambda_max = std::max(lambda_max, piece.level);
  IntensityScenario scenario;
  scenario.name = std::move(name);
  scenario.domain = std::move(domain);
  scenario.lambda_max = lambda_max;
  scenario.intensity = [base, pieces = std::move(pieces)](std::span<const double> s) {
    for (const auto& piece : pieces) {
      if (piece.box.contains(s)) return piece.level;
    }
    return base;
  };
  return scenario;
}

IntensityScenario make_constant_scenario(Domain domain, double level) {
  return make_piecewise_scenario("constant", std::move(domain), level, {});
}

namespace {

RegionBox box1d(double lo, double hi) { return {{lo}, {hi}}; }
RegionBox box2d(double x0, double x1, double y0, double y1) { return {{x0, y0}, {x1, y1}}; }

std::vector<IntensityScenario> make_builtins() {
  std::vector<IntensityScenario> all;

  // Step levels are presets chosen to give realizations of a few thousand
  // events; expected count = 3490.
  all.push_back(make_piecewise_scenario("step1d", Domain::unit(1), 3000.0,
                                        {{box1d(0.00, 0.15), 1200.0},
                                         {box1d(0.15, 0.35), 4800.0},
                                         {box1d(0.35, 0.55), 1800.0},
                                         {box1d(0.55, 0.75), 6200.0}}));

  {
    IntensityScenario cosine;
    cosine.name = "cosine1d";
    cosine.domain = Domain{{0.0}, {10.0}};
    cosine.intensity = [](std::span<const double> s) {
      return 20.0 * std::exp(-s[0] / 5.0) * (5.0 + 4.0 * std::cos(s[0]));
    };
    cosine.lambda_max = 180.0;  // attained at x = 0
    all.push_back(std::move(cosine));
  }

  // Expected count = 5540.
  all.push_back(make_piecewise_scenario("step2d", Domain::unit(2), 3000.0,
                                        {{box2d(0.10, 0.45, 0.10, 0.45), 12000.0},
                                         {box2d(0.55, 0.95, 0.55, 0.95), 11000.0},
                                         {box2d(0.55, 0.90, 0.05, 0.35), 1000.0},
                                         {box2d(0.05, 0.40, 0.55, 0.90), 6000.0}}));

  {
    IntensityScenario gauss;
    gauss.name = "gaussian2d";
    gauss.domain = Domain::unit(2);
    gauss.intensity = [](std::span<const double> s) {
      return 1000.0 * std::exp(s[0] * s[0] + s[1] * s[1]);
    };
    gauss.lambda_max = 1000.0 * std::exp(2.0);
    all.push_back(std::move(gauss));
  }

  return all;
}

}  // namespace

const std::vector<IntensityScenario>& builtin_scenarios() {
  static const std::vector<IntensityScenario> scenarios = make_builtins();
  return scenarios;
}

const IntensityScenario* find_scenario(const std::string& name) {
  for (const auto& scenario : builtin_scenarios()) {
    if (scenario.name == name) return &scenario;
  }
  return nullptr;
}

PointSet simulate_thinning(const IntensityScenario& scenario, Rng& rng) {
  if (!(scenario.lambda_max > 0.0) || !std::isfinite(scenario.lambda_max)) {
    throw NumericalError("thinning requires a finite positive intensity bound");
  }
  const Domain& domain = scenario.domain;
  const int d = domain.dim();
  const double mean = scenario.lambda_max * domain.volume();
  const std::uint64_t candidates = rng.poisson(mean);

  PointSet points;
  points.dim = d;
  std::vector<double> s(d);
  for (std::uint64_t i = 0; i < candidates; ++i) {
    for (int j = 0; j < d; ++j) s[j] = domain.lower[j] + rng.uniform() * domain.range(j);
    const double lambda = scenario.intensity(s);
    if (lambda > scenario.lambda_max * (1.0 + 1e-12)) {
      throw NumericalError("intensity " + std::to_string(lambda) + " exceeds stated bound " +
                           std::to_string(scenario.lambda_max));
    }
    if (rng.uniform() < lambda / scenario.lambda_max) points.push_back(s);
  }
  return points;
}

}  // namespace bartpp
