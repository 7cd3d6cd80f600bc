#ifndef BARTPP_SYNTHETIC_HPP
#define BARTPP_SYNTHETIC_HPP

#include <functional>
#include <string>
#include <vector>

#include "bartpp/geometry.hpp"
#include "bartpp/rng.hpp"

namespace bartpp {

// An intensity surface in native coordinates together with a dominating
// constant for thinning. lambda_max must bound the intensity everywhere on
// the domain.
struct IntensityScenario {
  std::string name;
  Domain domain;
  std::function<double(std::span<const double>)> intensity;
  double lambda_max = 0.0;

  int dim() const { return domain.dim(); }
};

// Piecewise-constant surface: `base` everywhere except inside the listed
// half-open boxes (native coordinates); the first matching piece wins.
struct PiecewisePiece {
  RegionBox box;
  double level = 0.0;
};

IntensityScenario make_piecewise_scenario(std::string name, Domain domain, double base,
                                          std::vector<PiecewisePiece> pieces);

IntensityScenario make_constant_scenario(Domain domain, double level);

// Benchmark surfaces:
//   step1d     five-level step function on [0,1), ~3.5e3 expected events
//   cosine1d   20 exp(-x/5) (5 + 4 cos x) on [0,10], ~4.4e2 expected events
//   step2d     four rectangles over a constant background on [0,1)^2,
//              ~5.5e3 expected events
//   gaussian2d 1000 exp(x^2 + y^2) on [0,1)^2, ~2.1e3 expected events
const std::vector<IntensityScenario>& builtin_scenarios();

// nullptr when the name is unknown.
const IntensityScenario* find_scenario(const std::string& name);

// Draws one realization of the inhomogeneous process by thinning a
// homogeneous Poisson(lambda_max) candidate set. Returns native-coordinate
// events; throws NumericalError if the stated bound is violated.
PointSet simulate_thinning(const IntensityScenario& scenario, Rng& rng);

}  // namespace bartpp

#endif
