#ifndef BARTPP_GEOMETRY_HPP
#define BARTPP_GEOMETRY_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bartpp {

// Events in d dimensions, row-major. All sampling code works in unit-cube
// coordinates; Domain carries the affine map to and from the native units.
struct PointSet {
  int dim = 1;
  std::vector<double> coords;  // size() * dim

  std::size_t size() const { return dim > 0 ? coords.size() / dim : 0; }
  std::span<const double> operator[](std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  void push_back(std::span<const double> p) { coords.insert(coords.end(), p.begin(), p.end()); }
};

// Axis-aligned observation window in native units.
struct Domain {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double range(int j) const { return upper[j] - lower[j]; }
  // Product of per-dimension ranges; the Jacobian of the unit-cube map.
  double volume() const;

  static Domain unit(int d);
};

// Half-open box prod_j [lower_j, upper_j) inside the unit cube. Every point
// belongs to exactly one box of a partition; split values are exact
// boundaries. Degenerate boxes are never constructed; emptiness is signalled
// by absence (std::nullopt).
struct RegionBox {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(std::span<const double> p) const;

  static RegionBox unit(int d);
};

double volume(const RegionBox& box);

std::optional<RegionBox> intersect(const RegionBox& a, const RegionBox& b);

struct WeightedCell {
  RegionBox box;
  double weight = 1.0;
};

// Disjoint cover of the unit cube with a positive weight per cell; the
// piecewise-constant representation of a product of tree step functions.
// Cells live in flat arrays because partitions are rebuilt once per tree
// update, which dominates the sampler's inner loop.
class WeightedPartition {
 public:
  explicit WeightedPartition(int dim) : dim_(dim) {}

  // The trivial cover: one unit cell, weight 1 (the empty tree product).
  static WeightedPartition unit(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> cell_lower(std::size_t i) const {
    return {lower_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> cell_upper(std::size_t i) const {
    return {upper_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  RegionBox cell_box(std::size_t i) const;
  double cell_volume(std::size_t i) const;

  void add_cell(const RegionBox& box, double weight);
  void reserve(std::size_t cells);

  double total_volume() const;
  // Integral of the step function over the whole cube: sum_k w_k |cell_k|.
  double total_mass() const;
  // Weight of the cell containing the point (points are covered exactly once).
  double weight_at(std::span<const double> point) const;

  // Refinement against one more layer of disjoint weighted boxes: keeps
  // every nonempty pairwise intersection, multiplying the weights.
  WeightedPartition refine(std::span<const WeightedCell> layer) const;

 private:
  int dim_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> weights_;
};

// Integral of the partition's step function over leaf_box:
// sum_k weight_k * |cell_k ∩ leaf_box|.
double leaf_exposure(const RegionBox& leaf_box, const WeightedPartition& global);

// Affine map of each coordinate onto [0,1). Points exactly at the upper
// bound clamp to the largest double below 1; points outside the bounds are
// rejected with the offending row index.
PointSet normalize_points(const PointSet& points, const Domain& domain);

// Inverse of normalize_points for a single point.
std::vector<double> denormalize_point(std::span<const double> unit_point, const Domain& domain);

}  // namespace bartpp

#endif
