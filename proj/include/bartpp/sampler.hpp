#ifndef BARTPP_SAMPLER_HPP
#define BARTPP_SAMPLER_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "bartpp/geometry.hpp"
#include "bartpp/rng.hpp"
#include "bartpp/tree.hpp"

namespace bartpp {

// How the number of equal-volume cells for the leaf-prior moment match is
// chosen. `fixed` uses a target cell count directly (split evenly across
// dimensions); the others derive a per-dimension bin count from the sample.
enum class BinningRule {
  fixed,          // n_b = round(N_G^(1/d))
  sample_root_1,  // n_b = ceil(n^(1/(d+1)))
  sample_root_2,  // n_b = ceil(n^(1/(d+2)))
  iqr,            // n_b = max_k ceil(n^(1/(d+2)) / (2 IQR_k)), unit-range domain
};

struct SamplerConfig {
  int tree_count = 10;  // m
  long iterations = 10000;
  double burn_in_fraction = 0.5;
  int thin = 1;
  int chain_count = 3;
  std::uint64_t seed = 0;

  double p_grow = 0.4;
  double p_prune = 0.4;
  double p_change = 0.2;

  double split_gamma = 0.98;
  double split_delta = 2.0;

  // Leaf-prior Gamma(alpha, rate beta); must be resolved (finite, positive)
  // before a chain runs. See fit_gamma_hyperparameters.
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();

  int grid_resolution = 100;  // split values per dimension

  bool proposals_enabled() const { return p_grow + p_prune + p_change > 0.0; }
  // Throws ConfigError. The all-zero proposal mix is allowed and freezes
  // every topology (leaf intensities still refresh each sweep).
  void validate() const;
};

struct GammaHyperFit {
  double alpha = 1.0;
  double beta = 1.0;
  int bins_per_dim = 0;
  int cell_count = 0;
  // Set when the empirical densities were constant and the variance match
  // was impossible; beta pins to 1 and alpha to the mean.
  bool zero_variance_fallback = false;
};

// Moment-matches the leaf prior to the m-th roots of empirical cell
// densities on an equal-volume binning of the unit cube. `force_unit_rate`
// pins beta = 1 and matches the mean only.
GammaHyperFit fit_gamma_hyperparameters(const PointSet& unit_points, int tree_count,
                                        BinningRule rule, int fixed_cells = 100,
                                        bool force_unit_rate = false);

// Per-leaf sufficient statistics of one tree given the step function of the
// other trees: event counts n_t and exposures c_t, in leaves() order. The
// data-side constant of the conditional likelihood (the product of the other
// trees at the observed points) cancels from every ratio and is never
// computed anywhere in this module.
struct LeafTerms {
  std::vector<int> leaf_ids;
  std::vector<int> counts;
  std::vector<double> exposures;

  std::size_t size() const { return leaf_ids.size(); }
};

LeafTerms compute_leaf_terms(const DecisionTree& tree, const PointSet& points,
                             const WeightedPartition& global);

// log of the topology's marginal likelihood with leaf intensities integrated
// out (up to the constant dropped above):
//   b (alpha log beta - lgamma(alpha))
//   + sum_t [lgamma(n_t + alpha) - (n_t + alpha) log(c_t + beta)].
double log_integrated_likelihood(const LeafTerms& terms, double alpha, double beta);

// Full data log density sum_i log lambda(s_i) - integral of lambda, the
// integral taken exactly over the global partition of all trees. Used for
// testing and trace logging only; the sampler works with ratios.
double log_conditional_likelihood(const EnsembleState& state, const PointSet& points);

enum class ProposalKind { grow = 0, prune = 1, change = 2 };

struct ProposalOutcome {
  ProposalKind kind = ProposalKind::grow;
  bool valid = false;  // false: no applicable move existed, auto-reject
  bool accepted = false;
  DecisionTree candidate;
  double log_transition_ratio = 0.0;
  double log_likelihood_ratio = 0.0;
  double log_tree_structure_ratio = 0.0;

  // The node acted on (id in the pre-move tree; grow keeps ids, so it is
  // also the new internal node's id in the candidate) and the rule involved:
  // the assigned rule for grow/change, the collapsed rule for prune.
  int target_node = -1;
  int rule_dim = -1;
  double rule_value = 0.0;

  double total_log_ratio() const {
    return log_transition_ratio + log_likelihood_ratio + log_tree_structure_ratio;
  }
};

ProposalOutcome propose_grow(const DecisionTree& tree, const SplitGrid& grid,
                             const PointSet& points, const WeightedPartition& global,
                             const SamplerConfig& config, Rng& rng);

ProposalOutcome propose_prune(const DecisionTree& tree, const SplitGrid& grid,
                              const PointSet& points, const WeightedPartition& global,
                              const SamplerConfig& config, Rng& rng);

ProposalOutcome propose_change(const DecisionTree& tree, const SplitGrid& grid,
                               const PointSet& points, const WeightedPartition& global,
                               const SamplerConfig& config, Rng& rng);

// Accept with probability min(1, exp(log_ratio)); consumes a uniform draw
// only when the ratio is negative.
bool accept_log_ratio(double log_ratio, Rng& rng);

struct AcceptanceStats {
  std::array<long, 3> proposed{};  // indexed by ProposalKind
  std::array<long, 3> accepted{};

  void record(ProposalKind kind, bool was_accepted);
  void merge(const AcceptanceStats& other);
  double rate(ProposalKind kind) const;
};

// One Metropolis-Hastings topology step for tree h: draws the proposal kind
// from the configured mix, evaluates the Hastings ratio in log space, and on
// acceptance installs the candidate. Pass the global partition over the
// other trees if already built; otherwise it is built here.
ProposalOutcome mh_tree_update(EnsembleState& state, int tree_index, const PointSet& points,
                               const SplitGrid& grid, const SamplerConfig& config, Rng& rng,
                               const WeightedPartition* global = nullptr);

// Draws every leaf intensity from its conjugate conditional
// Gamma(n_t + alpha, rate c_t + beta), in leaves() order.
void draw_leaf_intensities(DecisionTree& tree, const LeafTerms& terms, double alpha, double beta,
                           Rng& rng);

// One full Gibbs sweep: for each tree in order, a topology step followed by
// fresh conjugate leaf draws, each conditioning on the newest values of all
// other trees.
void gibbs_sweep(EnsembleState& state, const PointSet& points, const SplitGrid& grid,
                 const SamplerConfig& config, Rng& rng, AcceptanceStats* stats = nullptr);

struct ChainResult {
  std::size_t test_point_count = 0;
  std::vector<double> samples;  // rows() x test_point_count, row-major
  std::vector<long> kept_iterations;
  AcceptanceStats acceptance;

  std::size_t rows() const { return kept_iterations.size(); }
  double at(std::size_t row, std::size_t point) const {
    return samples[row * test_point_count + point];
  }
  void drop_burn_in(double fraction);
};

// Runs one chain from zero-depth trees with prior leaf draws, recording the
// ensemble intensity at every test point for each kept (thinned) iteration.
// Unit-cube coordinates throughout; fully deterministic given the Rng state.
ChainResult run_chain(const PointSet& points, const SamplerConfig& config,
                      const PointSet& test_points, Rng& rng);

// chain_count chains on derived, independent seed streams, each with its
// leading burn_in_fraction of kept rows discarded. `jobs` caps the worker
// threads (0 = one thread per chain).
std::vector<ChainResult> run_parallel_chains(const PointSet& points, const SamplerConfig& config,
                                             const PointSet& test_points, int jobs = 0);

// Stream ids for the derived generators, kept distinct by construction.
inline constexpr std::uint64_t kChainStreamBase = 100;
inline constexpr std::uint64_t kSimulateStream = 1;
inline constexpr std::uint64_t kTestPointStream = 2;

}  // namespace bartpp

#endif
