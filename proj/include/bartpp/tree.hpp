#ifndef BARTPP_TREE_HPP
#define BARTPP_TREE_HPP

#include <span>
#include <vector>

#include "bartpp/geometry.hpp"
#include "bartpp/rng.hpp"

namespace bartpp {

// Candidate split values: the same uniform grid of `values_per_dim` points
// strictly inside (0,1) for every dimension, value v_i = (i+1)/(N+1).
// Splits are identified by value, so box bounds produced by earlier splits
// compare bit-exactly against grid entries.
class SplitGrid {
 public:
  SplitGrid(int dim, int values_per_dim);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(values_.size()); }
  double value(int index) const { return values_[index]; }

  // Grid indices of values strictly inside (lo, hi): [first, first+count).
  struct IndexRange {
    int first = 0;
    int count = 0;
  };
  IndexRange interior_range(double lo, double hi) const;

 private:
  int dim_;
  std::vector<double> values_;
};

// Usable split rules at a node, one range per dimension; a dimension is
// usable iff its range is nonempty. The cardinalities feed the Hastings
// ratios, so they are exact counts, never approximations.
struct AvailableSplits {
  std::vector<SplitGrid::IndexRange> per_dim;
  std::vector<int> usable_dims;

  bool empty() const { return usable_dims.empty(); }
  int card_dims() const { return static_cast<int>(usable_dims.size()); }
  int card_values(int dim) const { return per_dim[dim].count; }
};

AvailableSplits available_splits(const SplitGrid& grid, const RegionBox& box);

// Depth-dependent split probability gamma / (1 + depth)^delta.
double split_probability(int depth, double gamma, double delta);

struct TreeNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  int split_dim = -1;
  double split_value = 0.0;
  double intensity = 1.0;  // meaningful at leaves only

  bool is_leaf() const { return left < 0; }
};

// Binary decision tree over the unit cube. Internal nodes route points by
// `coord < split_value` (left) versus `>=` (right), matching the half-open
// box convention; leaves carry positive intensities. Value semantics: copies
// are cheap (trees stay small under the regularizing prior) and proposals
// operate on copies.
class DecisionTree {
 public:
  explicit DecisionTree(int dim = 1);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_[id]; }
  int root() const { return 0; }

  int depth(int id) const;
  int leaf_count() const;
  std::vector<int> leaves() const;    // depth-first order
  std::vector<int> cherries() const;  // internal nodes whose children are both leaves

  RegionBox node_box(int id) const;
  int find_leaf(std::span<const double> point) const;
  double value_at(std::span<const double> point) const;

  void set_intensity(int leaf_id, double value) { nodes_[leaf_id].intensity = value; }

  // Splits a leaf in place; the children inherit the parent's intensity
  // until the next leaf draw overwrites it.
  void grow(int leaf_id, int split_dim, double split_value);
  // Collapses a cherry back into a leaf with the given intensity.
  void prune(int cherry_id, double merged_intensity);
  // Reassigns the rule of a cherry (children keep their intensities).
  void change_rule(int cherry_id, int split_dim, double split_value);

  // Leaf (box, intensity) pairs in leaves() order.
  std::vector<WeightedCell> leaf_cells() const;

 private:
  void collect(int id, std::vector<int>& out, bool leaves_only) const;

  int dim_;
  std::vector<TreeNode> nodes_;
};

struct EnsembleState {
  std::vector<DecisionTree> trees;

  int tree_count() const { return static_cast<int>(trees.size()); }
};

// Draws a tree topology from the branching prior: each node splits with
// probability gamma/(1+depth)^delta, the rule uniform over usable dimensions
// then values. A node with no usable split becomes a leaf regardless of the
// coin flip. Leaf intensities are left at 1; see draw_prior_intensities.
DecisionTree sample_prior_tree(const SplitGrid& grid, double gamma, double delta, Rng& rng);

void draw_prior_intensities(DecisionTree& tree, double alpha, double beta, Rng& rng);

// Log prior probability of the topology (split/stop coin flips and rule
// choices). Testing aid; the sampler itself only ever needs ratios.
double log_tree_prior(const DecisionTree& tree, const SplitGrid& grid, double gamma, double delta);

// Product over trees of the leaf intensity covering the point.
double evaluate_intensity(const EnsembleState& state, std::span<const double> point);

std::vector<int> leaf_point_counts(const DecisionTree& tree, const PointSet& points);

// Global partition of the unit cube induced by every tree except
// `exclude_index` (pass -1 to use all): cells are the nonempty intersections
// of one leaf box per tree, weights the products of the leaf intensities.
// With no trees the result is the unit box with weight 1.
WeightedPartition build_global_partition(std::span<const DecisionTree> trees, int exclude_index = -1);

}  // namespace bartpp

#endif
