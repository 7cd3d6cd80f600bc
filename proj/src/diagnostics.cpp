#include "bartpp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bartpp/errors.hpp"

namespace bartpp {

double aae(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || estimate.empty()) {
    throw DataError("aae: estimate and truth must be nonempty and equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) total += std::abs(estimate[i] - truth[i]);
  return total / static_cast<double>(estimate.size());
}

double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || estimate.empty()) {
    throw DataError("rmse: estimate and truth must be nonempty and equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double diff = estimate[i] - truth[i];
    total += diff * diff;
  }
  return std::sqrt(total / static_cast<double>(estimate.size()));
}

std::pair<double, double> hdi(std::span<const double> samples, double mass) {
  const std::size_t n = samples.size();
  if (n < 20) throw DataError("hdi: need at least 20 samples, got " + std::to_string(n));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t window = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
  window = std::clamp<std::size_t>(window, 1, n);
  std::size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + window <= n; ++i) {
    const double width = sorted[i + window - 1] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {sorted[best], sorted[best + window - 1]};
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw DataError("gelman_rubin: need at least 2 chains");
  const std::size_t length = chains.front().size();
  if (length < 10) throw DataError("gelman_rubin: chains must have length >= 10");
  for (const auto& chain : chains) {
    if (chain.size() != length) throw DataError("gelman_rubin: chains must have equal length");
  }

  const double L = static_cast<double>(length);
  double grand = 0.0;
  std::vector<double> means(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (double v : chains[c]) means[c] += v;
    means[c] /= L;
    grand += means[c];
  }
  grand /= static_cast<double>(m);

  double within = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double ss = 0.0;
    for (double v : chains[c]) ss += (v - means[c]) * (v - means[c]);
    within += ss / (L - 1.0);
  }
  within /= static_cast<double>(m);

  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= L / static_cast<double>(m - 1);

  if (within == 0.0) {
    return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(((L - 1.0) / L * within + between / L) / within);
}

std::vector<double> autocorrelation(std::span<const double> series, int max_lag) {
  const std::size_t n = series.size();
  if (max_lag < 0 || n <= static_cast<std::size_t>(max_lag)) {
    throw DataError("autocorrelation: series length must exceed max_lag");
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);

  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1, 0.0);
  rho[0] = 1.0;
  if (denom == 0.0) return rho;  // constant series
  for (int k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(k) < n; ++t) {
      num += (series[t] - mean) * (series[t + static_cast<std::size_t>(k)] - mean);
    }
    rho[static_cast<std::size_t>(k)] = num / denom;
  }
  return rho;
}

SummaryResult summarize(std::span<const ChainResult> chains, std::span<const double> truth) {
  if (chains.empty()) throw DataError("summarize: no chains given");
  const std::size_t points = chains.front().test_point_count;
  const std::size_t rows = chains.front().rows();
  for (const auto& chain : chains) {
    if (chain.test_point_count != points || chain.rows() != rows) {
      throw DataError("summarize: chains are misaligned");
    }
  }
  if (rows == 0) throw DataError("summarize: chains carry no kept draws");
  if (!truth.empty() && truth.size() != points) {
    throw DataError("summarize: truth length does not match test points");
  }

  SummaryResult result;
  result.rows.resize(points);
  std::vector<double> pooled;
  pooled.reserve(chains.size() * rows);
  std::vector<std::vector<double>> per_chain;
  std::vector<double> means(points), medians(points);

  for (std::size_t j = 0; j < points; ++j) {
    pooled.clear();
    per_chain.assign(chains.size(), {});
    for (std::size_t c = 0; c < chains.size(); ++c) {
      per_chain[c].resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double v = chains[c].at(r, j);
        per_chain[c][r] = v;
        pooled.push_back(v);
      }
    }

    PosteriorSummaryRow& row = result.rows[j];
    // Accumulate in sorted order: the mean is then independent of how the
    // chains were listed.
    std::sort(pooled.begin(), pooled.end());
    double total = 0.0;
    for (double v : pooled) total += v;
    row.mean = total / static_cast<double>(pooled.size());

    const std::size_t n = pooled.size();
    row.median = (n % 2 == 1) ? pooled[n / 2] : 0.5 * (pooled[n / 2 - 1] + pooled[n / 2]);
    std::tie(row.hdi_low, row.hdi_high) = hdi(pooled, 0.95);

    if (chains.size() >= 2) {
      row.rhat = gelman_rubin(per_chain);
    } else {
      // Single chain: compare its two halves.
      const std::size_t half = rows / 2;
      std::vector<std::vector<double>> halves(2);
      halves[0].assign(per_chain[0].begin(), per_chain[0].begin() + static_cast<std::ptrdiff_t>(half));
      halves[1].assign(per_chain[0].end() - static_cast<std::ptrdiff_t>(half), per_chain[0].end());
      row.rhat = half >= 10 ? gelman_rubin(halves) : 1.0;
    }

    means[j] = row.mean;
    medians[j] = row.median;
  }

  if (!truth.empty()) {
    result.mean_scores = ErrorScores{aae(means, truth), rmse(means, truth)};
    result.median_scores = ErrorScores{aae(medians, truth), rmse(medians, truth)};
  }
  return result;
}

}  // namespace bartpp
