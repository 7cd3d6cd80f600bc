#ifndef BARTPP_DIAGNOSTICS_HPP
#define BARTPP_DIAGNOSTICS_HPP

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bartpp/sampler.hpp"

namespace bartpp {

double aae(std::span<const double> estimate, std::span<const double> truth);
double rmse(std::span<const double> estimate, std::span<const double> truth);

// Shortest contiguous window of the sorted samples containing
// ceil(mass * n) of them; ties resolve to the lowest window. Needs at
// least 20 samples.
std::pair<double, double> hdi(std::span<const double> samples, double mass = 0.95);

// Classic potential scale reduction factor over aligned post-burn-in
// sequences: sqrt((((L-1)/L) W + B/L) / W). All-constant input returns 1.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

// Biased sample autocorrelation, lags 0..max_lag; a constant series yields
// 1 at lag 0 and 0 beyond.
std::vector<double> autocorrelation(std::span<const double> series, int max_lag);

struct PosteriorSummaryRow {
  double mean = 0.0;
  double median = 0.0;
  double hdi_low = 0.0;
  double hdi_high = 0.0;
  double rhat = 1.0;
};

struct ErrorScores {
  double aae = 0.0;
  double rmse = 0.0;
};

struct SummaryResult {
  std::vector<PosteriorSummaryRow> rows;  // one per test point
  std::optional<ErrorScores> mean_scores;
  std::optional<ErrorScores> median_scores;
};

// Pools the chains' kept draws per test point for mean/median/HDI and runs
// the scale-reduction diagnostic across chains. A single chain is split into
// halves for R-hat. When the truth is given, scores the posterior-mean and
// posterior-median estimators against it.
SummaryResult summarize(std::span<const ChainResult> chains,
                        std::span<const double> truth = {});

}  // namespace bartpp

#endif
