#include "bartpp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bartpp/errors.hpp"

namespace bartpp {

double Domain::volume() const {
  double v = 1.0;
  for (int j = 0; j < dim(); ++j) v *= range(j);
  return v;
}

Domain Domain::unit(int d) {
  Domain dom;
  dom.lower.assign(d, 0.0);
  dom.upper.assign(d, 1.0);
  return dom;
}

RegionBox RegionBox::unit(int d) {
  RegionBox box;
  box.lower.assign(d, 0.0);
  box.upper.assign(d, 1.0);
  return box;
}

bool RegionBox::contains(std::span<const double> p) const {
  for (int j = 0; j < dim(); ++j) {
    if (p[j] < lower[j] || p[j] >= upper[j]) return false;
  }
  return true;
}

double volume(const RegionBox& box) {
  double v = 1.0;
  for (int j = 0; j < box.dim(); ++j) v *= box.upper[j] - box.lower[j];
  return v;
}

std::optional<RegionBox> intersect(const RegionBox& a, const RegionBox& b) {
  RegionBox out;
  const int d = a.dim();
  out.lower.resize(d);
  out.upper.resize(d);
  for (int j = 0; j < d; ++j) {
    out.lower[j] = std::max(a.lower[j], b.lower[j]);
    out.upper[j] = std::min(a.upper[j], b.upper[j]);
    if (!(out.lower[j] < out.upper[j])) return std::nullopt;
  }
  return out;
}

WeightedPartition WeightedPartition::unit(int dim) {
  WeightedPartition p(dim);
  p.add_cell(RegionBox::unit(dim), 1.0);
  return p;
}

RegionBox WeightedPartition::cell_box(std::size_t i) const {
  RegionBox box;
  const auto lo = cell_lower(i);
  const auto hi = cell_upper(i);
  box.lower.assign(lo.begin(), lo.end());
  box.upper.assign(hi.begin(), hi.end());
  return box;
}

double WeightedPartition::cell_volume(std::size_t i) const {
  const auto lo = cell_lower(i);
  const auto hi = cell_upper(i);
  double v = 1.0;
  for (int j = 0; j < dim_; ++j) v *= hi[j] - lo[j];
  return v;
}

void WeightedPartition::add_cell(const RegionBox& box, double weight) {
  lower_.insert(lower_.end(), box.lower.begin(), box.lower.end());
  upper_.insert(upper_.end(), box.upper.begin(), box.upper.end());
  weights_.push_back(weight);
}

void WeightedPartition::reserve(std::size_t cells) {
  lower_.reserve(cells * dim_);
  upper_.reserve(cells * dim_);
  weights_.reserve(cells);
}

double WeightedPartition::total_volume() const {
  double v = 0.0;
  for (std::size_t i = 0; i < size(); ++i) v += cell_volume(i);
  return v;
}

double WeightedPartition::total_mass() const {
  double v = 0.0;
  for (std::size_t i = 0; i < size(); ++i) v += weights_[i] * cell_volume(i);
  return v;
}

double WeightedPartition::weight_at(std::span<const double> point) const {
  for (std::size_t i = 0; i < size(); ++i) {
    const double* lo = lower_.data() + i * dim_;
    const double* hi = upper_.data() + i * dim_;
    bool inside = true;
    for (int j = 0; j < dim_; ++j) {
      if (point[j] < lo[j] || point[j] >= hi[j]) {
        inside = false;
        break;
      }
    }
    if (inside) return weights_[i];
  }
  return 0.0;
}

WeightedPartition WeightedPartition::refine(std::span<const WeightedCell> layer) const {
  WeightedPartition out(dim_);
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const double* lo = lower_.data() + i * dim_;
    const double* hi = upper_.data() + i * dim_;
    for (const auto& piece : layer) {
      // Append the intersection in place, rolling back if it is empty.
      const std::size_t mark = out.lower_.size();
      bool nonempty = true;
      for (int j = 0; j < dim_; ++j) {
        const double l = std::max(lo[j], piece.box.lower[j]);
        const double u = std::min(hi[j], piece.box.upper[j]);
        if (!(l < u)) {
          nonempty = false;
          break;
        }
        out.lower_.push_back(l);
        out.upper_.push_back(u);
      }
      if (nonempty) {
        out.weights_.push_back(weights_[i] * piece.weight);
      } else {
        out.lower_.resize(mark);
        out.upper_.resize(mark);
      }
    }
  }
  return out;
}

double leaf_exposure(const RegionBox& leaf_box, const WeightedPartition& global) {
  double total = 0.0;
  const int d = global.dim();
  for (std::size_t i = 0; i < global.size(); ++i) {
    const auto lo = global.cell_lower(i);
    const auto hi = global.cell_upper(i);
    double vol = 1.0;
    for (int j = 0; j < d; ++j) {
      const double l = std::max(lo[j], leaf_box.lower[j]);
      const double u = std::min(hi[j], leaf_box.upper[j]);
      if (!(l < u)) {
        vol = 0.0;
        break;
      }
      vol *= u - l;
    }
    total += global.weight(i) * vol;
  }
  return total;
}

PointSet normalize_points(const PointSet& points, const Domain& domain) {
  const int d = domain.dim();
  if (points.dim != d) {
    throw DataError("normalize_points: point dimension " + std::to_string(points.dim) +
                    " does not match domain dimension " + std::to_string(d));
  }
  const double below_one = std::nextafter(1.0, 0.0);
  PointSet out;
  out.dim = d;
  out.coords.resize(points.coords.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points[i];
    for (int j = 0; j < d; ++j) {
      if (p[j] < domain.lower[j] || p[j] > domain.upper[j]) {
        throw DataError("normalize_points: point " + std::to_string(i) + " coordinate " +
                        std::to_string(j) + " = " + std::to_string(p[j]) + " outside domain [" +
                        std::to_string(domain.lower[j]) + ", " + std::to_string(domain.upper[j]) + "]");
      }
      double u = (p[j] - domain.lower[j]) / domain.range(j);
      if (u >= 1.0) u = below_one;
      out.coords[i * d + j] = u;
    }
  }
  return out;
}

std::vector<double> denormalize_point(std::span<const double> unit_point, const Domain& domain) {
  std::vector<double> out(unit_point.size());
  for (int j = 0; j < domain.dim(); ++j) {
    out[j] = domain.lower[j] + unit_point[j] * domain.range(j);
  }
  return out;
}

}  // namespace bartpp
