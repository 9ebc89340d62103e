#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cshield/constraints.hpp"
#include "cshield/dataset.hpp"

namespace cshield {

using Predictor = std::function<Vec(std::span<const double>)>;

struct ConstraintViolationStat {
  std::string name;
  long applicable = 0;
  long violations = 0;
};

struct ViolationReport {
  long total_probes = 0;
  long probes_with_violation = 0;
  long total_violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<ConstraintViolationStat> per_constraint;
  std::string probe_spec;

  double violation_percent() const {
    return total_probes == 0
               ? 0.0
               : 100.0 * static_cast<double>(probes_with_violation) / static_cast<double>(total_probes);
  }
  double constraint_percent(size_t i) const {
    return total_probes == 0 ? 0.0
                             : 100.0 * static_cast<double>(per_constraint[i].violations) /
                                   static_cast<double>(total_probes);
  }
};

// Evaluates the predictor on every probe and tests membership of the output
// in each applicable output set. Interval-style membership allows `tol`
// slack for accumulated rounding; score constraints are compared exactly.
inline ViolationReport check_violations(const Predictor& predict,
                                        const std::vector<ConstraintSpec>& constraints,
                                        const std::vector<Vec>& probes, double tol = 1e-9) {
  ViolationReport report;
  report.total_probes = static_cast<long>(probes.size());
  report.per_constraint.resize(constraints.size());
  for (size_t i = 0; i < constraints.size(); ++i) {
    report.per_constraint[i].name = constraints[i].name;
  }
  for (const Vec& x : probes) {
    bool violated = false;
    Vec y;
    bool evaluated = false;
    for (size_t i = 0; i < constraints.size(); ++i) {
      if (!constraints[i].region.contains(x)) continue;
      if (!evaluated) {
        y = predict(x);
        evaluated = true;
      }
      report.per_constraint[i].applicable += 1;
      const double margin = constraints[i].output_set.margin(y);
      report.worst_margin = std::min(report.worst_margin, margin);
      if (!constraints[i].output_set.contains(y, tol)) {
        report.per_constraint[i].violations += 1;
        report.total_violations += 1;
        violated = true;
      }
    }
    if (violated) report.probes_with_violation += 1;
  }
  return report;
}

struct AccuracyResult {
  double percent = 0.0;
  bool is_r2 = false;  // regression datasets report an R^2-style fit instead
  const char* label() const { return is_r2 ? "r2" : "accuracy"; }
};

// Percent of samples whose predicted argmax matches the stratum label (ties
// resolved toward the lowest index); regression datasets get 100 * R^2.
inline AccuracyResult accuracy(const Predictor& predict, const Dataset& ds) {
  if (ds.size() == 0) throw SpecError("accuracy: empty dataset");
  AccuracyResult res;
  if (ds.classification()) {
    long hits = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
      const Vec y = predict(ds.input(i));
      int arg = 0;
      for (int j = 1; j < static_cast<int>(y.size()); ++j) {
        if (y[static_cast<size_t>(j)] > y[static_cast<size_t>(arg)]) arg = j;
      }
      if (arg == ds.strata[i]) ++hits;
    }
    res.percent = 100.0 * static_cast<double>(hits) / static_cast<double>(ds.size());
    return res;
  }
  res.is_r2 = true;
  double mean = 0.0;
  for (double v : ds.targets) mean += v;
  mean /= static_cast<double>(ds.targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < ds.size(); ++i) {
    const Vec y = predict(ds.input(i));
    for (size_t j = 0; j < y.size(); ++j) {
      const double t = ds.target(i)[j];
      ss_res += (y[j] - t) * (y[j] - t);
      ss_tot += (t - mean) * (t - mean);
    }
  }
  res.percent = ss_tot > 0.0 ? 100.0 * (1.0 - ss_res / ss_tot) : 100.0;
  return res;
}

struct ContinuityProfile {
  double max_jump = 0.0;
  Vec jumps;  // per-step max-coordinate jump along the segment
};

// Evaluates the predictor at `steps + 1` uniform points from xa to xb and
// reports adjacent output jumps. A continuous predictor's max jump shrinks in
// proportion to the step size.
inline ContinuityProfile continuity_probe(const Predictor& predict, const Vec& xa, const Vec& xb,
                                          int steps) {
  if (steps < 2) throw SpecError("continuity_probe: needs at least 2 steps");
  if (xa.size() != xb.size()) throw SpecError("continuity_probe: endpoint dimension mismatch");
  ContinuityProfile prof;
  prof.jumps.reserve(static_cast<size_t>(steps));
  Vec x(xa.size());
  Vec prev;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps);
    for (size_t d = 0; d < x.size(); ++d) x[d] = xa[d] + t * (xb[d] - xa[d]);
    Vec y = predict(x);
    if (s > 0) {
      double jump = 0.0;
      for (size_t d = 0; d < y.size(); ++d) jump = std::max(jump, std::fabs(y[d] - prev[d]));
      prof.jumps.push_back(jump);
      prof.max_jump = std::max(prof.max_jump, jump);
    }
    prev = std::move(y);
  }
  return prof;
}

struct RunSummary {
  std::string name;
  double accuracy_percent = 0.0;
  double violation_percent = 0.0;
};

struct ReportTable {
  std::string text;
  std::string csv;
};

// Accuracy/violation summary table; console text and CSV carry identical
// two-decimal values.
inline ReportTable report_table(const std::vector<RunSummary>& runs) {
  ReportTable out;
  out.csv = "Network,Acc,Violations\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %10s %12s\n", "Network", "Acc", "Violations");
  out.text = line;
  for (const RunSummary& r : runs) {
    char acc[32], vio[32];
    std::snprintf(acc, sizeof(acc), "%.2f", r.accuracy_percent);
    std::snprintf(vio, sizeof(vio), "%.2f", r.violation_percent);
    out.csv += r.name + "," + acc + "," + vio + "\n";
    std::snprintf(line, sizeof(line), "%-24s %10s %12s\n", r.name.c_str(), acc, vio);
    out.text += line;
  }
  return out;
}

// --- probe construction -----------------------------------------------------

inline std::vector<Vec> grid_probes_from_axes(const std::vector<Vec>& axes) {
  size_t total = 1;
  for (const Vec& a : axes) {
    if (a.empty()) throw SpecError("grid_probes_from_axes: empty axis");
    total *= a.size();
  }
  std::vector<Vec> probes;
  probes.reserve(total);
  std::vector<size_t> idx(axes.size(), 0);
  for (size_t f = 0; f < total; ++f) {
    Vec x(axes.size());
    for (size_t d = 0; d < axes.size(); ++d) x[d] = axes[d][idx[d]];
    probes.push_back(std::move(x));
    for (size_t d = axes.size(); d-- > 0;) {
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
    }
  }
  return probes;
}

inline std::vector<Vec> grid_probes(const Box& bounds, const std::vector<int>& counts) {
  if (bounds.size() != counts.size()) throw SpecError("grid_probes: dimension mismatch");
  std::vector<Vec> axes(bounds.size());
  for (size_t d = 0; d < bounds.size(); ++d) {
    const int n = counts[d];
    if (n < 1) throw SpecError("grid_probes: counts must be positive");
    for (int i = 0; i < n; ++i) {
      axes[d].push_back(n == 1 ? 0.5 * (bounds[d].lo + bounds[d].hi)
                               : bounds[d].lo + (bounds[d].hi - bounds[d].lo) * i / (n - 1));
    }
  }
  return grid_probes_from_axes(axes);
}

// Uniform samples over a box-union region, boxes weighted by volume.
inline std::vector<Vec> random_probes(const InputRegion& region, size_t n, Rng& rng) {
  if (region.empty()) throw SpecError("random_probes: empty region");
  std::vector<double> cumulative;
  double total = 0.0;
  for (const Box& b : region.boxes()) {
    double vol = 1.0;
    for (const Interval& iv : b) vol *= std::max(iv.width(), 1e-12);
    total += vol;
    cumulative.push_back(total);
  }
  std::vector<Vec> probes;
  probes.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform01() * total;
    size_t bi = 0;
    while (bi + 1 < cumulative.size() && pick > cumulative[bi]) ++bi;
    const Box& b = region.boxes()[bi];
    Vec x(b.size());
    for (size_t d = 0; d < b.size(); ++d) x[d] = rng.uniform(b[d].lo, b[d].hi);
    probes.push_back(std::move(x));
  }
  return probes;
}

// Corners, centers, and face centers of every constraint box: the boundary
// points where the safety guarantee's edge cases live.
inline std::vector<Vec> boundary_probes(const std::vector<ConstraintSpec>& constraints) {
  std::vector<Vec> probes;
  for (const ConstraintSpec& c : constraints) {
    for (const Box& b : c.region.boxes()) {
      const size_t dim = b.size();
      if (dim > 16) continue;
      Vec center(dim);
      for (size_t d = 0; d < dim; ++d) center[d] = 0.5 * (b[d].lo + b[d].hi);
      probes.push_back(center);
      for (size_t d = 0; d < dim; ++d) {
        Vec lo = center, hi = center;
        lo[d] = b[d].lo;
        hi[d] = b[d].hi;
        probes.push_back(lo);
        probes.push_back(hi);
      }
      for (size_t corner = 0; corner < (size_t{1} << dim); ++corner) {
        Vec x(dim);
        for (size_t d = 0; d < dim; ++d) x[d] = (corner >> d) & 1 ? b[d].hi : b[d].lo;
        probes.push_back(std::move(x));
      }
    }
  }
  return probes;
}

inline void keep_probes_in_region(std::vector<Vec>& probes, const InputRegion& region) {
  std::vector<Vec> kept;
  kept.reserve(probes.size());
  for (Vec& x : probes) {
    if (region.contains(x)) kept.push_back(std::move(x));
  }
  probes.swap(kept);
}

}  // namespace cshield
