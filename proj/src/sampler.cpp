#include "bartpp/sampler.hpp"

#include <math.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <utility>

#include "bartpp/errors.hpp"

namespace bartpp {

namespace {

// std::lgamma writes the global signgam, which races across chain threads;
// every argument here is positive, so the sign is irrelevant anyway.
double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

}  // namespace

void SamplerConfig::validate() const {
  if (tree_count < 1) throw ConfigError("tree_count must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (chain_count < 1) throw ConfigError("chain_count must be >= 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw ConfigError("burn_in_fraction must lie in [0, 1)");
  }
  if (p_grow < 0.0 || p_prune < 0.0 || p_change < 0.0) {
    throw ConfigError("proposal probabilities must be nonnegative");
  }
  const double total = p_grow + p_prune + p_change;
  if (total != 0.0 && std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("proposal probabilities must sum to 1 (or all be 0 to disable moves)");
  }
  if (!(split_gamma > 0.0 && split_gamma < 1.0)) throw ConfigError("split gamma must lie in (0, 1)");
  if (!(split_delta >= 0.0)) throw ConfigError("split delta must be >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be resolved and positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be resolved and positive");
  if (grid_resolution < 1) throw ConfigError("grid_resolution must be >= 1");
}

namespace {

double interquartile_range(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    // Linear interpolation between order statistics (R type 7).
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
  };
  return quantile(0.75) - quantile(0.25);
}

int bins_per_dim(const PointSet& points, BinningRule rule, int fixed_cells) {
  const double n = static_cast<double>(points.size());
  const int d = points.dim;
  switch (rule) {
    case BinningRule::fixed:
      return std::max(1, static_cast<int>(std::lround(std::pow(static_cast<double>(fixed_cells), 1.0 / d))));
    case BinningRule::sample_root_1:
      return std::max(1, static_cast<int>(std::ceil(std::pow(n, 1.0 / (d + 1)))));
    case BinningRule::sample_root_2:
      return std::max(1, static_cast<int>(std::ceil(std::pow(n, 1.0 / (d + 2)))));
    case BinningRule::iqr: {
      const double root = std::pow(n, 1.0 / (d + 2));
      int best = 0;
      for (int k = 0; k < d; ++k) {
        std::vector<double> column(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) column[i] = points[i][k];
        const double iqr = interquartile_range(std::move(column));
        if (iqr <= 0.0) continue;  // degenerate coordinate, skip
        best = std::max(best, static_cast<int>(std::ceil(root / (2.0 * iqr))));
      }
      if (best == 0) best = static_cast<int>(std::ceil(root));
      return std::max(1, best);
    }
  }
  return 1;
}

}  // namespace

GammaHyperFit fit_gamma_hyperparameters(const PointSet& unit_points, int tree_count,
                                        BinningRule rule, int fixed_cells, bool force_unit_rate) {
  if (unit_points.size() == 0) throw DataError("cannot fit hyperparameters from an empty point set");
  const int d = unit_points.dim;
  const int nb = bins_per_dim(unit_points, rule, fixed_cells);
  std::size_t cells = 1;
  for (int j = 0; j < d; ++j) {
    cells *= static_cast<std::size_t>(nb);
    if (cells > 100'000'000u) throw NumericalError("hyperparameter binning produced too many cells");
  }

  std::vector<long> counts(cells, 0);
  for (std::size_t i = 0; i < unit_points.size(); ++i) {
    const auto p = unit_points[i];
    std::size_t index = 0;
    for (int j = 0; j < d; ++j) {
      auto bin = static_cast<long>(p[j] * nb);
      bin = std::clamp<long>(bin, 0, nb - 1);
      index = index * nb + static_cast<std::size_t>(bin);
    }
    ++counts[index];
  }

  // Empirical density per cell, then m-th roots as per-tree candidates.
  const double cell_volume = 1.0 / static_cast<double>(cells);
  double mean = 0.0;
  std::vector<double> roots(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double density = static_cast<double>(counts[i]) / cell_volume;
    roots[i] = std::pow(density, 1.0 / tree_count);
    mean += roots[i];
  }
  mean /= static_cast<double>(cells);
  double variance = 0.0;
  if (cells > 1) {
    for (double r : roots) variance += (r - mean) * (r - mean);
    variance /= static_cast<double>(cells - 1);
  }

  GammaHyperFit fit;
  fit.bins_per_dim = nb;
  fit.cell_count = static_cast<int>(cells);
  if (force_unit_rate) {
    fit.beta = 1.0;
    fit.alpha = mean;
  } else if (variance > 0.0) {
    fit.alpha = mean * mean / variance;
    fit.beta = mean / variance;
  } else {
    fit.zero_variance_fallback = true;
    fit.beta = 1.0;
    fit.alpha = mean;
  }
  if (!(fit.alpha > 0.0)) throw NumericalError("hyperparameter fit produced nonpositive alpha");
  return fit;
}

LeafTerms compute_leaf_terms(const DecisionTree& tree, const PointSet& points,
                             const WeightedPartition& global) {
  LeafTerms terms;
  terms.leaf_ids = tree.leaves();
  terms.counts = leaf_point_counts(tree, points);
  terms.exposures.resize(terms.leaf_ids.size());
  for (std::size_t k = 0; k < terms.leaf_ids.size(); ++k) {
    terms.exposures[k] = leaf_exposure(tree.node_box(terms.leaf_ids[k]), global);
  }
  return terms;
}

double log_integrated_likelihood(const LeafTerms& terms, double alpha, double beta) {
  const double b = static_cast<double>(terms.size());
  double value = b * (alpha * std::log(beta) - log_gamma(alpha));
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double rate = terms.exposures[k] + beta;
    if (!(rate > 0.0)) {
      throw NumericalError("nonpositive posterior rate c + beta = " + std::to_string(rate));
    }
    value += log_gamma(terms.counts[k] + alpha) - (terms.counts[k] + alpha) * std::log(rate);
  }
  return value;
}

double log_conditional_likelihood(const EnsembleState& state, const PointSet& points) {
  double value = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    value += std::log(evaluate_intensity(state, points[i]));
  }
  const WeightedPartition all = build_global_partition(state.trees);
  return value - all.total_mass();
}

namespace {

RegionBox lower_half(const RegionBox& box, int dim, double value) {
  RegionBox out = box;
  out.upper[dim] = value;
  return out;
}

RegionBox upper_half(const RegionBox& box, int dim, double value) {
  RegionBox out = box;
  out.lower[dim] = value;
  return out;
}

// Events of the leaf `node_id` split by `coord < value`.
struct SplitCounts {
  int left = 0;
  int right = 0;
  int total() const { return left + right; }
};

SplitCounts count_leaf_split(const DecisionTree& tree, int node_id, int dim, double value,
                             const PointSet& points) {
  SplitCounts counts;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points[i];
    if (tree.find_leaf(p) != node_id) continue;
    if (p[dim] < value) {
      ++counts.left;
    } else {
      ++counts.right;
    }
  }
  return counts;
}

// Events under the cherry `node_id` (either child) split by `coord < value`.
SplitCounts count_cherry_split(const DecisionTree& tree, int node_id, int dim, double value,
                               const PointSet& points) {
  const int left = tree.node(node_id).left;
  const int right = tree.node(node_id).right;
  SplitCounts counts;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points[i];
    const int leaf = tree.find_leaf(p);
    if (leaf != left && leaf != right) continue;
    if (p[dim] < value) {
      ++counts.left;
    } else {
      ++counts.right;
    }
  }
  return counts;
}

// log of the integrated-likelihood ratio for splitting one leaf with
// statistics (n, c) into children (n_l, c_l), (n_r, c_r):
//   beta^alpha / Gamma(alpha)
//   * Gamma(n_l+a) Gamma(n_r+a) / Gamma(n+a)
//   * (c+b)^(n+a) / [(c_l+b)^(n_l+a) (c_r+b)^(n_r+a)].
double log_split_likelihood_ratio(int n, double c, int n_l, double c_l, int n_r, double c_r,
                                  double alpha, double beta) {
  return alpha * std::log(beta) - log_gamma(alpha) + log_gamma(n_l + alpha) +
         log_gamma(n_r + alpha) - log_gamma(n + alpha) + (n + alpha) * std::log(c + beta) -
         (n_l + alpha) * std::log(c_l + beta) - (n_r + alpha) * std::log(c_r + beta);
}

// log of the tree-structure ratio gained by splitting a node at `depth`
// with card_dims usable dimensions and card_values usable cut points:
//   (1 - p_split(depth+1))^2 p_split(depth) / (1 - p_split(depth))
//   / (card_dims card_values).
double log_split_structure_ratio(int depth, int card_dims, int card_values, double gamma,
                                 double delta) {
  const double p_here = split_probability(depth, gamma, delta);
  const double p_child = split_probability(depth + 1, gamma, delta);
  return 2.0 * std::log1p(-p_child) + std::log(p_here) - std::log1p(-p_here) -
         std::log(static_cast<double>(card_dims)) - std::log(static_cast<double>(card_values));
}

}  // namespace

ProposalOutcome propose_grow(const DecisionTree& tree, const SplitGrid& grid,
                             const PointSet& points, const WeightedPartition& global,
                             const SamplerConfig& config, Rng& rng) {
  ProposalOutcome out;
  out.kind = ProposalKind::grow;

  const std::vector<int> leaves = tree.leaves();
  const int leaf = leaves[rng.uniform_int(leaves.size())];
  const RegionBox box = tree.node_box(leaf);
  const AvailableSplits avail = available_splits(grid, box);
  if (avail.empty()) return out;  // leaf too narrow to split: auto-reject

  const int dim = avail.usable_dims[rng.uniform_int(avail.usable_dims.size())];
  const auto& range = avail.per_dim[dim];
  const double value = grid.value(range.first + static_cast<int>(rng.uniform_int(range.count)));
  out.target_node = leaf;
  out.rule_dim = dim;
  out.rule_value = value;

  const SplitCounts counts = count_leaf_split(tree, leaf, dim, value, points);
  const double c_parent = leaf_exposure(box, global);
  const double c_left = leaf_exposure(lower_half(box, dim, value), global);
  const double c_right = leaf_exposure(upper_half(box, dim, value), global);

  out.candidate = tree;
  out.candidate.grow(leaf, dim, value);

  const double card_dims = avail.card_dims();
  const double card_values = avail.card_values(dim);
  const double cherries_after = static_cast<double>(out.candidate.cherries().size());
  const double leaves_before = static_cast<double>(leaves.size());

  // Reverse move: PRUNE picking this cherry among those of the candidate.
  out.log_transition_ratio = std::log(config.p_prune) - std::log(cherries_after) -
                             std::log(config.p_grow) + std::log(leaves_before) +
                             std::log(card_dims) + std::log(card_values);
  out.log_tree_structure_ratio =
      log_split_structure_ratio(tree.depth(leaf), avail.card_dims(), avail.card_values(dim),
                                config.split_gamma, config.split_delta);
  out.log_likelihood_ratio =
      log_split_likelihood_ratio(counts.total(), c_parent, counts.left, c_left, counts.right,
                                 c_right, config.alpha, config.beta);
  out.valid = true;
  return out;
}

ProposalOutcome propose_prune(const DecisionTree& tree, const SplitGrid& grid,
                              const PointSet& points, const WeightedPartition& global,
                              const SamplerConfig& config, Rng& rng) {
  ProposalOutcome out;
  out.kind = ProposalKind::prune;

  const std::vector<int> cherries = tree.cherries();
  if (cherries.empty()) return out;  // single-leaf tree: auto-reject
  const int cherry = cherries[rng.uniform_int(cherries.size())];
  const TreeNode& node = tree.node(cherry);
  const RegionBox box = tree.node_box(cherry);
  const AvailableSplits avail = available_splits(grid, box);
  out.target_node = cherry;
  out.rule_dim = node.split_dim;
  out.rule_value = node.split_value;

  const SplitCounts counts = count_cherry_split(tree, cherry, node.split_dim, node.split_value, points);
  const double c_merged = leaf_exposure(box, global);
  const double c_left = leaf_exposure(lower_half(box, node.split_dim, node.split_value), global);
  const double c_right = leaf_exposure(upper_half(box, node.split_dim, node.split_value), global);

  out.candidate = tree;
  out.candidate.prune(cherry, node.intensity);

  const double card_dims = avail.card_dims();
  const double card_values = avail.card_values(node.split_dim);
  const double leaves_after = static_cast<double>(out.candidate.leaf_count());
  const double cherries_before = static_cast<double>(cherries.size());

  // Reverse move: GROW picking the merged leaf among the candidate's leaves,
  // then the same dimension and cut.
  out.log_transition_ratio = std::log(config.p_grow) - std::log(leaves_after) -
                             std::log(card_dims) - std::log(card_values) -
                             std::log(config.p_prune) + std::log(cherries_before);
  out.log_tree_structure_ratio =
      -log_split_structure_ratio(tree.depth(cherry), avail.card_dims(),
                                 avail.card_values(node.split_dim), config.split_gamma,
                                 config.split_delta);
  out.log_likelihood_ratio =
      -log_split_likelihood_ratio(counts.total(), c_merged, counts.left, c_left, counts.right,
                                  c_right, config.alpha, config.beta);
  out.valid = true;
  return out;
}

ProposalOutcome propose_change(const DecisionTree& tree, const SplitGrid& grid,
                               const PointSet& points, const WeightedPartition& global,
                               const SamplerConfig& config, Rng& rng) {
  ProposalOutcome out;
  out.kind = ProposalKind::change;

  const std::vector<int> cherries = tree.cherries();
  if (cherries.empty()) return out;
  const int cherry = cherries[rng.uniform_int(cherries.size())];
  const TreeNode& node = tree.node(cherry);
  const RegionBox box = tree.node_box(cherry);
  const AvailableSplits avail = available_splits(grid, box);

  const int new_dim = avail.usable_dims[rng.uniform_int(avail.usable_dims.size())];
  const auto& range = avail.per_dim[new_dim];
  const double new_value = grid.value(range.first + static_cast<int>(rng.uniform_int(range.count)));
  out.target_node = cherry;
  out.rule_dim = new_dim;
  out.rule_value = new_value;

  const SplitCounts old_counts =
      count_cherry_split(tree, cherry, node.split_dim, node.split_value, points);
  const SplitCounts new_counts = count_cherry_split(tree, cherry, new_dim, new_value, points);
  const double old_c_left = leaf_exposure(lower_half(box, node.split_dim, node.split_value), global);
  const double old_c_right = leaf_exposure(upper_half(box, node.split_dim, node.split_value), global);
  const double new_c_left = leaf_exposure(lower_half(box, new_dim, new_value), global);
  const double new_c_right = leaf_exposure(upper_half(box, new_dim, new_value), global);

  out.candidate = tree;
  out.candidate.change_rule(cherry, new_dim, new_value);

  // Rule-choice probabilities cancel between transition and structure ratios.
  const double log_card_old = std::log(static_cast<double>(avail.card_values(node.split_dim)));
  const double log_card_new = std::log(static_cast<double>(avail.card_values(new_dim)));
  out.log_transition_ratio = log_card_new - log_card_old;
  out.log_tree_structure_ratio = -out.log_transition_ratio;

  // Grouped as per-child differences so a re-picked identical rule yields
  // an exact zero.
  const double alpha = config.alpha;
  const double beta = config.beta;
  out.log_likelihood_ratio =
      (log_gamma(new_counts.left + alpha) - log_gamma(old_counts.left + alpha)) +
      (log_gamma(new_counts.right + alpha) - log_gamma(old_counts.right + alpha)) +
      ((old_counts.left + alpha) * std::log(old_c_left + beta) -
       (new_counts.left + alpha) * std::log(new_c_left + beta)) +
      ((old_counts.right + alpha) * std::log(old_c_right + beta) -
       (new_counts.right + alpha) * std::log(new_c_right + beta));
  out.valid = true;
  return out;
}

bool accept_log_ratio(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  return rng.uniform() < std::exp(log_ratio);
}

void AcceptanceStats::record(ProposalKind kind, bool was_accepted) {
  ++proposed[static_cast<int>(kind)];
  if (was_accepted) ++accepted[static_cast<int>(kind)];
}

void AcceptanceStats::merge(const AcceptanceStats& other) {
  for (int k = 0; k < 3; ++k) {
    proposed[k] += other.proposed[k];
    accepted[k] += other.accepted[k];
  }
}

double AcceptanceStats::rate(ProposalKind kind) const {
  const int k = static_cast<int>(kind);
  return proposed[k] > 0 ? static_cast<double>(accepted[k]) / static_cast<double>(proposed[k]) : 0.0;
}

ProposalOutcome mh_tree_update(EnsembleState& state, int tree_index, const PointSet& points,
                               const SplitGrid& grid, const SamplerConfig& config, Rng& rng,
                               const WeightedPartition* global) {
  if (!config.proposals_enabled()) return {};
  WeightedPartition scratch(points.dim);
  if (global == nullptr) {
    scratch = build_global_partition(state.trees, tree_index);
    global = &scratch;
  }
  const DecisionTree& tree = state.trees[tree_index];

  const double u = rng.uniform();
  ProposalOutcome outcome;
  if (u < config.p_grow) {
    outcome = propose_grow(tree, grid, points, *global, config, rng);
  } else if (u < config.p_grow + config.p_prune) {
    outcome = propose_prune(tree, grid, points, *global, config, rng);
  } else {
    outcome = propose_change(tree, grid, points, *global, config, rng);
  }

  if (outcome.valid && accept_log_ratio(outcome.total_log_ratio(), rng)) {
    outcome.accepted = true;
    state.trees[tree_index] = outcome.candidate;
  }
  return outcome;
}

void draw_leaf_intensities(DecisionTree& tree, const LeafTerms& terms, double alpha, double beta,
                           Rng& rng) {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double shape = terms.counts[k] + alpha;
    const double rate = terms.exposures[k] + beta;
    tree.set_intensity(terms.leaf_ids[k], rng.gamma(shape, rate));
  }
}

void gibbs_sweep(EnsembleState& state, const PointSet& points, const SplitGrid& grid,
                 const SamplerConfig& config, Rng& rng, AcceptanceStats* stats) {
  for (int h = 0; h < state.tree_count(); ++h) {
    const WeightedPartition global = build_global_partition(state.trees, h);
    if (config.proposals_enabled()) {
      const ProposalOutcome outcome = mh_tree_update(state, h, points, grid, config, rng, &global);
      // Auto-rejected (invalid) proposals count as proposed and rejected.
      if (stats != nullptr) stats->record(outcome.kind, outcome.accepted);
    }
    const LeafTerms terms = compute_leaf_terms(state.trees[h], points, global);
    draw_leaf_intensities(state.trees[h], terms, config.alpha, config.beta, rng);
  }
}

void ChainResult::drop_burn_in(double fraction) {
  const auto burn = static_cast<std::size_t>(std::floor(static_cast<double>(rows()) * fraction));
  if (burn == 0) return;
  samples.erase(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(burn * test_point_count));
  kept_iterations.erase(kept_iterations.begin(), kept_iterations.begin() + static_cast<std::ptrdiff_t>(burn));
}

ChainResult run_chain(const PointSet& points, const SamplerConfig& config,
                      const PointSet& test_points, Rng& rng) {
  config.validate();
  if (points.size() == 0) throw DataError("cannot run a chain on an empty point set");
  const RegionBox cube = RegionBox::unit(points.dim);
  for (std::size_t i = 0; i < test_points.size(); ++i) {
    if (!cube.contains(test_points[i])) {
      throw DataError("test point " + std::to_string(i) + " lies outside the unit domain");
    }
  }

  const SplitGrid grid(points.dim, config.grid_resolution);
  EnsembleState state;
  state.trees.assign(config.tree_count, DecisionTree(points.dim));
  for (auto& tree : state.trees) draw_prior_intensities(tree, config.alpha, config.beta, rng);

  ChainResult result;
  result.test_point_count = test_points.size();
  const std::size_t expected_rows = static_cast<std::size_t>(config.iterations / config.thin);
  result.samples.reserve(expected_rows * result.test_point_count);
  result.kept_iterations.reserve(expected_rows);

  for (long t = 1; t <= config.iterations; ++t) {
    gibbs_sweep(state, points, grid, config, rng, &result.acceptance);
    if (t % config.thin == 0) {
      result.kept_iterations.push_back(t);
      for (std::size_t i = 0; i < test_points.size(); ++i) {
        result.samples.push_back(evaluate_intensity(state, test_points[i]));
      }
    }
  }
  return result;
}

std::vector<ChainResult> run_parallel_chains(const PointSet& points, const SamplerConfig& config,
                                             const PointSet& test_points, int jobs) {
  config.validate();
  const int chains = config.chain_count;
  if (jobs <= 0 || jobs > chains) jobs = chains;

  std::vector<ChainResult> results(chains);
  std::vector<std::exception_ptr> failures(chains);

  const auto worker = [&](int first) {
    for (int k = first; k < chains; k += jobs) {
      try {
        Rng rng(config.seed, kChainStreamBase + static_cast<std::uint64_t>(k));
        results[k] = run_chain(points, config, test_points, rng);
        results[k].drop_burn_in(config.burn_in_fraction);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };

  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return results;
}

}  // namespace bartpp
