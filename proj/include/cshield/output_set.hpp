#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cshield/common.hpp"
#include "cshield/geometry.hpp"

namespace cshield {

// Overlapping constraints whose output sets have an empty intersection cannot
// be given a constrained predictor; callers reject the specification.
class InfeasibleIntersection : public SpecError {
 public:
  explicit InfeasibleIntersection(const std::string& what) : SpecError(what) {}
};

enum class OutputSetKind {
  kUnconstrained,
  kInterval,       // (lo, hi), projected strictly inside
  kHalfLineAbove,  // [lo, inf)
  kHalfLineBelow,  // (-inf, hi]
  kScoreNotHighest
};

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// A convex subset of the output space together with a differentiable map from
// raw network outputs into it. Interval/half-line variants apply elementwise;
// ScoreNotHighest pins each unsafe coordinate to (min over the remaining
// coordinates) - epsilon.
class ConvexOutputSet {
 public:
  ConvexOutputSet() = default;

  static ConvexOutputSet unconstrained() { return ConvexOutputSet(); }

  static ConvexOutputSet interval(double lo, double hi) {
    if (!(lo < hi)) throw SpecError("ConvexOutputSet::interval: requires lo < hi");
    ConvexOutputSet s;
    s.kind_ = OutputSetKind::kInterval;
    s.lo_ = lo;
    s.hi_ = hi;
    return s;
  }

  static ConvexOutputSet half_line_above(double lo) {
    ConvexOutputSet s;
    s.kind_ = OutputSetKind::kHalfLineAbove;
    s.lo_ = lo;
    return s;
  }

  static ConvexOutputSet half_line_below(double hi) {
    ConvexOutputSet s;
    s.kind_ = OutputSetKind::kHalfLineBelow;
    s.hi_ = hi;
    return s;
  }

  static ConvexOutputSet score_not_highest(std::vector<int> unsafe, double epsilon) {
    if (unsafe.empty()) throw SpecError("score_not_highest: needs at least one unsafe index");
    if (!(epsilon > 0.0)) throw SpecError("score_not_highest: epsilon must be positive");
    std::sort(unsafe.begin(), unsafe.end());
    unsafe.erase(std::unique(unsafe.begin(), unsafe.end()), unsafe.end());
    if (unsafe.front() < 0) throw SpecError("score_not_highest: negative index");
    ConvexOutputSet s;
    s.kind_ = OutputSetKind::kScoreNotHighest;
    s.unsafe_ = std::move(unsafe);
    s.epsilon_ = epsilon;
    return s;
  }

  OutputSetKind kind() const { return kind_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<int>& unsafe_indices() const { return unsafe_; }
  double epsilon() const { return epsilon_; }

  bool is_unsafe_index(int i) const {
    return std::binary_search(unsafe_.begin(), unsafe_.end(), i);
  }

  // Throws when the variant cannot host a vector of this arity (all
  // coordinates unsafe leaves no score to take the min over).
  void validate_arity(int m) const {
    if (m < 1) throw SpecError("ConvexOutputSet: output arity must be positive");
    if (kind_ == OutputSetKind::kScoreNotHighest) {
      if (unsafe_.back() >= m) throw SpecError("score_not_highest: index out of range");
      if (static_cast<int>(unsafe_.size()) >= m) {
        throw SpecError("score_not_highest: every coordinate unsafe is unsatisfiable");
      }
    }
  }

  // Differentiable projection of a raw head output into the set.
  Vec project(std::span<const double> raw) const {
    validate_arity(static_cast<int>(raw.size()));
    Vec out(raw.begin(), raw.end());
    switch (kind_) {
      case OutputSetKind::kUnconstrained:
        break;
      case OutputSetKind::kInterval:
        for (double& v : out) v = lo_ + (hi_ - lo_) * logistic(v);
        break;
      case OutputSetKind::kHalfLineAbove:
        for (double& v : out) v = lo_ + softplus(v);
        break;
      case OutputSetKind::kHalfLineBelow:
        for (double& v : out) v = hi_ - softplus(v);
        break;
      case OutputSetKind::kScoreNotHighest: {
        const double m = safe_min(out);
        for (int i : unsafe_) out[static_cast<size_t>(i)] = m - epsilon_;
        break;
      }
    }
    return out;
  }

  // Smallest signed constraint margin of y; negative means outside. For
  // ScoreNotHighest the margin of unsafe index i is max_{j != i} y_j - y_i,
  // so a violation is exactly margin <= 0 (the unsafe score is the highest).
  double margin(std::span<const double> y) const {
    validate_arity(static_cast<int>(y.size()));
    double worst = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case OutputSetKind::kUnconstrained:
        break;
      case OutputSetKind::kInterval:
        for (double v : y) worst = std::min({worst, v - lo_, hi_ - v});
        break;
      case OutputSetKind::kHalfLineAbove:
        for (double v : y) worst = std::min(worst, v - lo_);
        break;
      case OutputSetKind::kHalfLineBelow:
        for (double v : y) worst = std::min(worst, hi_ - v);
        break;
      case OutputSetKind::kScoreNotHighest:
        for (int i : unsafe_) {
          double best_other = -std::numeric_limits<double>::infinity();
          for (size_t j = 0; j < y.size(); ++j) {
            if (static_cast<int>(j) != i) best_other = std::max(best_other, y[j]);
          }
          worst = std::min(worst, best_other - y[static_cast<size_t>(i)]);
        }
        break;
    }
    return worst;
  }

  // Membership test. Interval-style bounds allow `tol` slack for accumulated
  // rounding; ScoreNotHighest is an exact score comparison.
  bool contains(std::span<const double> y, double tol = 0.0) const {
    if (kind_ == OutputSetKind::kScoreNotHighest) return margin(y) > 0.0;
    return margin(y) >= -tol;
  }

  std::string describe() const {
    char buf[96];
    switch (kind_) {
      case OutputSetKind::kUnconstrained:
        return "unconstrained";
      case OutputSetKind::kInterval:
        std::snprintf(buf, sizeof(buf), "interval(%g, %g)", lo_, hi_);
        return buf;
      case OutputSetKind::kHalfLineAbove:
        std::snprintf(buf, sizeof(buf), "half_line_above(%g)", lo_);
        return buf;
      case OutputSetKind::kHalfLineBelow:
        std::snprintf(buf, sizeof(buf), "half_line_below(%g)", hi_);
        return buf;
      case OutputSetKind::kScoreNotHighest: {
        std::string s = "score_not_highest({";
        for (size_t i = 0; i < unsafe_.size(); ++i) {
          if (i) s += ",";
          s += std::to_string(unsafe_[i]);
        }
        std::snprintf(buf, sizeof(buf), "}, %g)", epsilon_);
        return s + buf;
      }
    }
    return "?";
  }

 private:
  double safe_min(const Vec& y) const {
    double m = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < y.size(); ++j) {
      if (!is_unsafe_index(static_cast<int>(j))) m = std::min(m, y[j]);
    }
    return m;
  }

  OutputSetKind kind_ = OutputSetKind::kUnconstrained;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<int> unsafe_;
  double epsilon_ = 0.0;
};

// Convex intersection of output sets. Interval-style sets merge into the
// tightest bounds; ScoreNotHighest sets merge by index-set union. An empty
// result raises InfeasibleIntersection; mixing the two families is not
// representable and is rejected.
inline ConvexOutputSet intersect_output_sets(const std::vector<ConvexOutputSet>& sets) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool bounds_seen = false;
  std::vector<int> unsafe;
  double eps = 0.0;
  bool snh_seen = false;

  for (const ConvexOutputSet& s : sets) {
    switch (s.kind()) {
      case OutputSetKind::kUnconstrained:
        break;
      case OutputSetKind::kInterval:
        lo = std::max(lo, s.lo());
        hi = std::min(hi, s.hi());
        bounds_seen = true;
        break;
      case OutputSetKind::kHalfLineAbove:
        lo = std::max(lo, s.lo());
        bounds_seen = true;
        break;
      case OutputSetKind::kHalfLineBelow:
        hi = std::min(hi, s.hi());
        bounds_seen = true;
        break;
      case OutputSetKind::kScoreNotHighest:
        if (snh_seen && eps != s.epsilon()) {
          throw InfeasibleIntersection(
              "intersect_output_sets: score_not_highest epsilons differ");
        }
        eps = s.epsilon();
        unsafe.insert(unsafe.end(), s.unsafe_indices().begin(), s.unsafe_indices().end());
        snh_seen = true;
        break;
    }
  }

  if (snh_seen && bounds_seen) {
    throw SpecError("intersect_output_sets: cannot mix score and bound constraints");
  }
  if (snh_seen) return ConvexOutputSet::score_not_highest(std::move(unsafe), eps);
  if (!bounds_seen) return ConvexOutputSet::unconstrained();

  const bool lo_finite = std::isfinite(lo);
  const bool hi_finite = std::isfinite(hi);
  if (lo_finite && hi_finite) {
    if (!(lo < hi)) {
      throw InfeasibleIntersection("intersect_output_sets: empty interval intersection");
    }
    return ConvexOutputSet::interval(lo, hi);
  }
  if (lo_finite) return ConvexOutputSet::half_line_above(lo);
  return ConvexOutputSet::half_line_below(hi);
}

}  // namespace cshield
