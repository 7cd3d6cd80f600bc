#include "bartpp/tree.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>

#include "bartpp/errors.hpp"
#include "bartpp/rng.hpp"

namespace bartpp {

SplitGrid::SplitGrid(int dim, int values_per_dim) : dim_(dim) {
  values_.resize(values_per_dim);
  for (int i = 0; i < values_per_dim; ++i) {
    values_[i] = static_cast<double>(i + 1) / static_cast<double>(values_per_dim + 1);
  }
}

SplitGrid::IndexRange SplitGrid::interior_range(double lo, double hi) const {
  // Box bounds are either 0/1 or earlier grid values, so strict comparisons
  // against the stored doubles are exact.
  auto first = std::upper_bound(values_.begin(), values_.end(), lo);
  auto last = std::lower_bound(values_.begin(), values_.end(), hi);
  IndexRange r;
  r.first = static_cast<int>(first - values_.begin());
  r.count = static_cast<int>(last - first);
  if (r.count < 0) r.count = 0;
  return r;
}

AvailableSplits available_splits(const SplitGrid& grid, const RegionBox& box) {
  AvailableSplits out;
  out.per_dim.resize(box.dim());
  for (int j = 0; j < box.dim(); ++j) {
    out.per_dim[j] = grid.interior_range(box.lower[j], box.upper[j]);
    if (out.per_dim[j].count > 0) out.usable_dims.push_back(j);
  }
  return out;
}

double split_probability(int depth, double gamma, double delta) {
  return gamma / std::pow(1.0 + depth, delta);
}

DecisionTree::DecisionTree(int dim) : dim_(dim), nodes_(1) {}

int DecisionTree::depth(int id) const {
  int d = 0;
  while (nodes_[id].parent >= 0) {
    id = nodes_[id].parent;
    ++d;
  }
  return d;
}

void DecisionTree::collect(int id, std::vector<int>& out, bool leaves_only) const {
  const TreeNode& n = nodes_[id];
  if (n.is_leaf()) {
    out.push_back(id);
    return;
  }
  if (!leaves_only) out.push_back(id);
  collect(n.left, out, leaves_only);
  collect(n.right, out, leaves_only);
}

int DecisionTree::leaf_count() const {
  // Every internal node has exactly two children.
  return (size() + 1) / 2;
}

std::vector<int> DecisionTree::leaves() const {
  std::vector<int> out;
  out.reserve(leaf_count());
  collect(root(), out, true);
  return out;
}

std::vector<int> DecisionTree::cherries() const {
  std::vector<int> out;
  for (int id = 0; id < size(); ++id) {
    const TreeNode& n = nodes_[id];
    if (!n.is_leaf() && nodes_[n.left].is_leaf() && nodes_[n.right].is_leaf()) {
      out.push_back(id);
    }
  }
  return out;
}

RegionBox DecisionTree::node_box(int id) const {
  RegionBox box = RegionBox::unit(dim_);
  // Tighten bounds walking root -> node.
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = nodes_[cur].parent) path.push_back(cur);
  for (std::size_t i = path.size(); i-- > 1;) {
    const TreeNode& parent = nodes_[path[i]];
    const bool went_left = parent.left == path[i - 1];
    if (went_left) {
      box.upper[parent.split_dim] = parent.split_value;
    } else {
      box.lower[parent.split_dim] = parent.split_value;
    }
  }
  return box;
}

int DecisionTree::find_leaf(std::span<const double> point) const {
  int id = root();
  while (!nodes_[id].is_leaf()) {
    const TreeNode& n = nodes_[id];
    id = point[n.split_dim] < n.split_value ? n.left : n.right;
  }
  return id;
}

double DecisionTree::value_at(std::span<const double> point) const {
  return nodes_[find_leaf(point)].intensity;
}

void DecisionTree::grow(int leaf_id, int split_dim, double split_value) {
  assert(nodes_[leaf_id].is_leaf());
#ifndef NDEBUG
  const RegionBox check = node_box(leaf_id);
  assert(check.lower[split_dim] < split_value && split_value < check.upper[split_dim]);
#endif
  const int left = size();
  const int right = left + 1;
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[left].parent = leaf_id;
  nodes_[right].parent = leaf_id;
  nodes_[left].intensity = nodes_[leaf_id].intensity;
  nodes_[right].intensity = nodes_[leaf_id].intensity;
  TreeNode& n = nodes_[leaf_id];
  n.left = left;
  n.right = right;
  n.split_dim = split_dim;
  n.split_value = split_value;
}

void DecisionTree::prune(int cherry_id, double merged_intensity) {
  TreeNode& n = nodes_[cherry_id];
  n.left = -1;
  n.right = -1;
  n.split_dim = -1;
  n.split_value = 0.0;
  n.intensity = merged_intensity;
  // Rebuild to drop the orphaned children and keep ids dense.
  std::vector<TreeNode> fresh;
  fresh.reserve(nodes_.size() - 2);
  std::function<int(int, int)> copy_subtree = [&](int old_id, int parent) {
    const int new_id = static_cast<int>(fresh.size());
    fresh.push_back(nodes_[old_id]);
    fresh[new_id].parent = parent;
    if (!nodes_[old_id].is_leaf()) {
      fresh[new_id].left = copy_subtree(nodes_[old_id].left, new_id);
      fresh[new_id].right = copy_subtree(nodes_[old_id].right, new_id);
    }
    return new_id;
  };
  copy_subtree(root(), -1);
  nodes_ = std::move(fresh);
}

void DecisionTree::change_rule(int cherry_id, int split_dim, double split_value) {
  assert(!nodes_[cherry_id].is_leaf());
#ifndef NDEBUG
  const RegionBox check = node_box(cherry_id);
  assert(check.lower[split_dim] < split_value && split_value < check.upper[split_dim]);
#endif
  nodes_[cherry_id].split_dim = split_dim;
  nodes_[cherry_id].split_value = split_value;
}

std::vector<WeightedCell> DecisionTree::leaf_cells() const {
  std::vector<WeightedCell> out;
  out.reserve(leaf_count());
  for (int id : leaves()) out.push_back({node_box(id), nodes_[id].intensity});
  return out;
}

namespace {

void sample_subtree(DecisionTree& tree, int node_id, int depth, const SplitGrid& grid,
                    double gamma, double delta, Rng& rng) {
  if (rng.uniform() >= split_probability(depth, gamma, delta)) return;
  const AvailableSplits avail = available_splits(grid, tree.node_box(node_id));
  if (avail.empty()) return;  // exhausted grid: the node stays a leaf
  const int dim = avail.usable_dims[rng.uniform_int(avail.usable_dims.size())];
  const auto& range = avail.per_dim[dim];
  const int index = range.first + static_cast<int>(rng.uniform_int(range.count));
  tree.grow(node_id, dim, grid.value(index));
  const int left = tree.node(node_id).left;
  const int right = tree.node(node_id).right;
  sample_subtree(tree, left, depth + 1, grid, gamma, delta, rng);
  sample_subtree(tree, right, depth + 1, grid, gamma, delta, rng);
}

}  // namespace

DecisionTree sample_prior_tree(const SplitGrid& grid, double gamma, double delta, Rng& rng) {
  DecisionTree tree(grid.dim());
  sample_subtree(tree, tree.root(), 0, grid, gamma, delta, rng);
  return tree;
}

void draw_prior_intensities(DecisionTree& tree, double alpha, double beta, Rng& rng) {
  for (int id : tree.leaves()) tree.set_intensity(id, rng.gamma(alpha, beta));
}

double log_tree_prior(const DecisionTree& tree, const SplitGrid& grid, double gamma, double delta) {
  double total = 0.0;
  for (int id = 0; id < tree.size(); ++id) {
    const TreeNode& n = tree.node(id);
    const double p = split_probability(tree.depth(id), gamma, delta);
    if (n.is_leaf()) {
      total += std::log1p(-p);
    } else {
      const AvailableSplits avail = available_splits(grid, tree.node_box(id));
      total += std::log(p) - std::log(static_cast<double>(avail.card_dims())) -
               std::log(static_cast<double>(avail.card_values(n.split_dim)));
    }
  }
  return total;
}

double evaluate_intensity(const EnsembleState& state, std::span<const double> point) {
  double value = 1.0;
  for (const auto& tree : state.trees) value *= tree.value_at(point);
  return value;
}

std::vector<int> leaf_point_counts(const DecisionTree& tree, const PointSet& points) {
  const std::vector<int> leaf_ids = tree.leaves();
  std::vector<int> id_to_slot(tree.size(), -1);
  for (std::size_t k = 0; k < leaf_ids.size(); ++k) id_to_slot[leaf_ids[k]] = static_cast<int>(k);
  std::vector<int> counts(leaf_ids.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    ++counts[id_to_slot[tree.find_leaf(points[i])]];
  }
  return counts;
}

WeightedPartition build_global_partition(std::span<const DecisionTree> trees, int exclude_index) {
  WeightedPartition partition = WeightedPartition::unit(trees.empty() ? 1 : trees.front().dim());
  for (std::size_t h = 0; h < trees.size(); ++h) {
    if (static_cast<int>(h) == exclude_index) continue;
    const auto layer = trees[h].leaf_cells();
    partition = partition.refine(layer);
  }
  return partition;
}

}  // namespace bartpp
