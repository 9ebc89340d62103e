#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cshield/common.hpp"

namespace cshield {

using Vec = std::vector<double>;

// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

// Axis-aligned box: one closed interval per input dimension.
using Box = std::vector<Interval>;

inline bool box_contains(const Box& b, std::span<const double> x) {
  for (size_t d = 0; d < b.size(); ++d) {
    if (!b[d].contains(x[d])) return false;
  }
  return true;
}

// Closed region given as a finite union of axis-aligned boxes. The closure is
// what makes distance(x) > 0 exactly when x lies outside.
class InputRegion {
 public:
  InputRegion() = default;

  explicit InputRegion(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
    if (!boxes_.empty()) dim_ = static_cast<int>(boxes_.front().size());
    for (const Box& b : boxes_) {
      if (static_cast<int>(b.size()) != dim_ || b.empty()) {
        throw SpecError("InputRegion: all boxes must share one positive dimensionality");
      }
      for (const Interval& iv : b) {
        if (!(iv.lo <= iv.hi)) throw SpecError("InputRegion: interval with lo > hi");
      }
    }
  }

  static InputRegion single_box(Box b) {
    std::vector<Box> bs;
    bs.push_back(std::move(b));
    return InputRegion(std::move(bs));
  }

  int dim() const { return dim_; }
  bool empty() const { return boxes_.empty(); }
  const std::vector<Box>& boxes() const { return boxes_; }

  bool contains(std::span<const double> x) const {
    if (empty()) return false;
    check_dim(x.size());
    for (const Box& b : boxes_) {
      if (box_contains(b, x)) return true;
    }
    return false;
  }

  // Min over boxes of the per-dimension-scaled Euclidean distance to the box.
  // Zero exactly when contains(x); the per-dimension deficits are exact at
  // box boundaries, so no tolerance is involved.
  double distance(std::span<const double> x, std::span<const double> scale) const {
    if (empty()) throw SpecError("InputRegion::distance: empty region");
    check_dim(x.size());
    if (scale.size() != static_cast<size_t>(dim_)) {
      throw SpecError("InputRegion::distance: scale dimensionality mismatch");
    }
    for (double s : scale) {
      if (!(s > 0.0)) throw SpecError("InputRegion::distance: scale must be strictly positive");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Box& b : boxes_) {
      double sq = 0.0;
      for (int d = 0; d < dim_; ++d) {
        const double deficit = std::max({b[d].lo - x[d], x[d] - b[d].hi, 0.0});
        const double w = deficit * scale[d];
        sq += w * w;
      }
      best = std::min(best, sq);
      if (best == 0.0) return 0.0;
    }
    return std::sqrt(best);
  }

  double distance(std::span<const double> x) const {
    const Vec ones(static_cast<size_t>(dim_), 1.0);
    return distance(x, ones);
  }

  Box bounding_box() const {
    if (empty()) throw SpecError("InputRegion::bounding_box: empty region");
    Box bb = boxes_.front();
    for (const Box& b : boxes_) {
      for (int d = 0; d < dim_; ++d) {
        bb[d].lo = std::min(bb[d].lo, b[d].lo);
        bb[d].hi = std::max(bb[d].hi, b[d].hi);
      }
    }
    return bb;
  }

  // Diagonal length of the bounding box in scaled coordinates.
  double scaled_diagonal(std::span<const double> scale) const {
    const Box bb = bounding_box();
    double sq = 0.0;
    for (int d = 0; d < dim_; ++d) {
      const double w = bb[d].width() * scale[d];
      sq += w * w;
    }
    return std::sqrt(sq);
  }

 private:
  void check_dim(size_t n) const {
    if (empty() || n != static_cast<size_t>(dim_)) {
      throw SpecError("InputRegion: point dimensionality mismatch");
    }
  }

  std::vector<Box> boxes_;
  int dim_ = 0;
};

}  // namespace cshield
