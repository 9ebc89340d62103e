#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cshield/constraints.hpp"
#include "cshield/dataset.hpp"
#include "cshield/net.hpp"
#include "cshield/safe_predictor.hpp"

namespace cshield {

// Everything needed to run one experiment: data, constraints, domain, and the
// network shapes for the baseline and the safe predictor.
struct BenchmarkBundle {
  std::string name;
  Dataset dataset;
  std::vector<ConstraintSpec> constraints;
  InputRegion domain;
  Vec distance_scale;
  std::vector<Vec> probe_axes;  // grid axis values for grid-structured benchmarks
  LossKind default_loss = LossKind::kMse;
  DenseNetSpec standard_spec;
  DenseNetSpec trunk_spec;
  DenseNetSpec head_spec;
};

// 1-D regression with the single constraint x >= 0 -> F(x) > 0.
inline BenchmarkBundle gen_synthetic_1d(int n, uint64_t seed) {
  if (n < 2) throw SpecError("gen_synthetic_1d: n must be at least 2");
  BenchmarkBundle b;
  b.name = "synthetic1d";
  b.dataset.input_dim = 1;
  b.dataset.target_dim = 1;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = std::tanh(2.0 * x) + 0.05 * rng.normal();
    b.dataset.push({{x}}, {{y}});
  }
  b.constraints.push_back(
      {"positive_output", InputRegion::single_box({{0.0, 2.0}}), ConvexOutputSet::half_line_above(0.0)});
  b.domain = InputRegion::single_box({{-2.0, 2.0}});
  b.distance_scale = {1.0};
  b.standard_spec = {{1, 10, 1}, false};
  b.trunk_spec = {{1, 10}, true};
  b.head_spec = {{10, 1}, false};
  return b;
}

// 2-D regression with two overlapping band constraints.
inline BenchmarkBundle gen_synthetic_2d(int n, uint64_t seed) {
  if (n < 4) throw SpecError("gen_synthetic_2d: n must be at least 4");
  BenchmarkBundle b;
  b.name = "synthetic2d";
  b.dataset.input_dim = 2;
  b.dataset.target_dim = 1;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double x0 = rng.uniform01();
    const double x1 = rng.uniform01();
    double y = 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * x0) *
                         std::sin(2.0 * std::numbers::pi * x1);
    y = std::min(1.0, std::max(0.0, y)) + 0.02 * rng.normal();
    b.dataset.push({{x0, x1}}, {{y}});
  }
  b.constraints.push_back({"band_07_10",
                           InputRegion::single_box({{0.1, 0.45}, {0.3, 0.7}}),
                           ConvexOutputSet::interval(0.7, 1.0)});
  b.constraints.push_back({"band_05_08",
                           InputRegion::single_box({{0.35, 0.7}, {0.3, 0.7}}),
                           ConvexOutputSet::interval(0.5, 0.8)});
  b.domain = InputRegion::single_box({{0.0, 1.0}, {0.0, 1.0}});
  b.distance_scale = {1.0, 1.0};
  b.standard_spec = {{2, 20, 20, 1}, false};
  b.trunk_spec = {{2, 20, 20}, true};
  b.head_spec = {{20, 20, 1}, false};
  return b;
}

// ---------------------------------------------------------------------------
// CAS-lite: a self-contained vertical collision-avoidance MDP on a small
// grid. State is (vertical rate vO - vI, relative altitude h, time to loss of
// horizontal separation tau) with the intruder level (vI = 0).
// ---------------------------------------------------------------------------

enum AdvisoryIndex : int {
  kCOC = 0,
  kDNC,
  kDND,
  kDES1500,
  kCL1500,
  kSDES1500,
  kSCL1500,
  kSDES2500,
  kSCL2500,
};

// Compliant vertical-rate windows in velocity-grid units (one unit is
// 500 ft/min = 25/3 ft/s).
struct Advisory {
  const char* name;
  int min_iv;
  int max_iv;
};

inline const std::array<Advisory, 9>& advisories() {
  static const std::array<Advisory, 9> kAdvisories = {{
      {"COC", -5, 5},
      {"DNC", -5, 0},
      {"DND", 0, 5},
      {"DES1500", -5, -3},
      {"CL1500", 3, 5},
      {"SDES1500", -5, -3},
      {"SCL1500", 3, 5},
      {"SDES2500", -5, -5},
      {"SCL2500", 5, 5},
  }};
  return kAdvisories;
}

// Grid geometry. Velocities live on an 11-point grid (+-2500 ft/min in
// 500 ft/min steps); altitude is reported on a 41-point grid (+-2000 ft in
// 100 ft steps) but evolves internally on the exact velocity sub-lattice
// (25/3 ft), since one second of any grid velocity moves h by less than half
// an altitude cell. Off-grid values are clamped to the nearest cell at the
// grid boundary.
struct CasLiteGrid {
  static constexpr int kHCells = 41;
  static constexpr int kVCells = 11;
  static constexpr int kTauCells = 21;
  static constexpr double kUnit = 25.0 / 3.0;  // ft/s per velocity step; fine h step in ft
  static constexpr int kFineMax = 240;         // 2000 ft in fine units
  static constexpr int kCoarseStride = 12;     // 100 ft in fine units
  static constexpr int kVMax = 5;
  static constexpr int kNmacUnits = 12;  // NMAC when |h| < 100 ft at tau = 0

  static double h_ft(int ih) { return 100.0 * (ih - 20); }
  static double v_fps(int iv) { return kUnit * (iv - 5); }
  static constexpr int cell_count() { return kHCells * kVCells * kTauCells; }
  static int cell_index(int ih, int iv, int it) { return (it * kVCells + iv) * kHCells + ih; }
};

struct CasLiteRewards {
  double nmac = -1.0;
  double alert = -0.01;            // per step with a non-COC advisory
  double advisory_switch = -0.02;  // per change of advisory
};

namespace caslite_detail {

constexpr int kFineWidth = 2 * CasLiteGrid::kFineMax + 1;

inline int fine_index(int hf, int vi) {
  return (vi + CasLiteGrid::kVMax) * kFineWidth + (hf + CasLiteGrid::kFineMax);
}

inline int clamp_int(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// One second of dynamics: h moves by the current velocity, then the commanded
// acceleration (+-8 ft/s^2, about one velocity-grid step per second) shifts
// the velocity.
inline void step(int& hf, int& vi, int dir) {
  hf = clamp_int(hf - vi, -CasLiteGrid::kFineMax, CasLiteGrid::kFineMax);
  vi = clamp_int(vi + dir, -CasLiteGrid::kVMax, CasLiteGrid::kVMax);
}

// Pilot choices: free when compliant with the advisory, otherwise forced one
// step toward the compliant window.
inline std::pair<const int*, int> allowed_dirs(int advisory, int vi) {
  static constexpr int kAll[3] = {-1, 0, 1};
  static constexpr int kUp[1] = {1};
  static constexpr int kDown[1] = {-1};
  const Advisory& a = advisories()[static_cast<size_t>(advisory)];
  if (vi < a.min_iv) return {kUp, 1};
  if (vi > a.max_iv) return {kDown, 1};
  return {kAll, 3};
}

inline bool nmac(int hf) { return hf < CasLiteGrid::kNmacUnits && -hf < CasLiteGrid::kNmacUnits; }

}  // namespace caslite_detail

// Per-advisory unsafeable cells: following the advisory compliantly for one
// step, no sequence of future advisories avoids an NMAC.
struct CasLiteReach {
  std::array<std::vector<uint8_t>, 9> unsafeable;
  std::vector<uint8_t> safeable_none;
};

inline CasLiteReach caslite_unsafeable() {
  using namespace caslite_detail;
  CasLiteReach reach;
  for (auto& m : reach.unsafeable) m.assign(CasLiteGrid::cell_count(), 0);
  reach.safeable_none.assign(CasLiteGrid::cell_count(), 0);

  const int states = CasLiteGrid::kVCells * kFineWidth;
  std::vector<uint8_t> any_prev(states), any_cur(states);

  // tau = 0: a state is safe exactly when |h| >= 100 ft; no advisory can act.
  for (int vi = -CasLiteGrid::kVMax; vi <= CasLiteGrid::kVMax; ++vi) {
    for (int hf = -CasLiteGrid::kFineMax; hf <= CasLiteGrid::kFineMax; ++hf) {
      any_prev[static_cast<size_t>(fine_index(hf, vi))] = !nmac(hf);
    }
  }
  for (int iv = 0; iv < CasLiteGrid::kVCells; ++iv) {
    for (int ih = 0; ih < CasLiteGrid::kHCells; ++ih) {
      const int hf = (ih - 20) * CasLiteGrid::kCoarseStride;
      const bool unsafe = nmac(hf);
      const int cell = CasLiteGrid::cell_index(ih, iv, 0);
      for (int i = 0; i < 9; ++i) reach.unsafeable[static_cast<size_t>(i)][static_cast<size_t>(cell)] = unsafe;
      reach.safeable_none[static_cast<size_t>(cell)] = unsafe;
    }
  }

  for (int tau = 1; tau < CasLiteGrid::kTauCells; ++tau) {
    for (int vi = -CasLiteGrid::kVMax; vi <= CasLiteGrid::kVMax; ++vi) {
      for (int hf = -CasLiteGrid::kFineMax; hf <= CasLiteGrid::kFineMax; ++hf) {
        bool any = false;
        bool safeable[9];
        for (int i = 0; i < 9; ++i) {
          const auto [dirs, ndirs] = allowed_dirs(i, vi);
          bool ok = false;
          for (int d = 0; d < ndirs && !ok; ++d) {
            int hf2 = hf, vi2 = vi;
            step(hf2, vi2, dirs[d]);
            ok = any_prev[static_cast<size_t>(fine_index(hf2, vi2))] != 0;
          }
          safeable[i] = ok;
          any = any || ok;
        }
        any_cur[static_cast<size_t>(fine_index(hf, vi))] = any;
        if (hf % CasLiteGrid::kCoarseStride == 0) {
          const int ih = hf / CasLiteGrid::kCoarseStride + 20;
          const int cell = CasLiteGrid::cell_index(ih, vi + CasLiteGrid::kVMax, tau);
          for (int i = 0; i < 9; ++i) {
            reach.unsafeable[static_cast<size_t>(i)][static_cast<size_t>(cell)] = !safeable[i];
          }
          reach.safeable_none[static_cast<size_t>(cell)] = !any;
        }
      }
    }
    any_prev.swap(any_cur);
  }
  return reach;
}

// Advisory score tables from backward induction: the score of issuing
// advisory i is its immediate penalty plus the best achievable future value
// when the pilot may pick any compliant acceleration and the system may issue
// any advisory afterwards.
struct CasLiteScores {
  // scores[(cell * 9 + a_prev) * 9 + advisory]
  std::vector<double> q;

  double at(int cell, int a_prev, int advisory) const {
    return q[static_cast<size_t>((cell * 9 + a_prev) * 9 + advisory)];
  }
  std::span<const double> row(int cell, int a_prev) const {
    return {q.data() + static_cast<size_t>((cell * 9 + a_prev) * 9), 9};
  }
};

inline CasLiteScores caslite_solve(const CasLiteRewards& rewards = {}) {
  using namespace caslite_detail;
  CasLiteScores tables;
  tables.q.assign(static_cast<size_t>(CasLiteGrid::cell_count()) * 9 * 9, 0.0);

  const int states = CasLiteGrid::kVCells * kFineWidth;
  std::vector<double> w_prev(static_cast<size_t>(states) * 9), w_cur(static_cast<size_t>(states) * 9);
  std::vector<double> future(static_cast<size_t>(states) * 9);

  auto penalty = [&](int advisory, int a_prev) {
    double p = 0.0;
    if (advisory != kCOC) p += rewards.alert;
    if (advisory != a_prev) p += rewards.advisory_switch;
    return p;
  };
  auto record_coarse = [&](int tau, auto&& value_of) {
    for (int iv = 0; iv < CasLiteGrid::kVCells; ++iv) {
      for (int ih = 0; ih < CasLiteGrid::kHCells; ++ih) {
        const int hf = (ih - 20) * CasLiteGrid::kCoarseStride;
        const int cell = CasLiteGrid::cell_index(ih, iv, tau);
        for (int ap = 0; ap < 9; ++ap) {
          for (int i = 0; i < 9; ++i) {
            tables.q[static_cast<size_t>((cell * 9 + ap) * 9 + i)] =
                value_of(hf, iv - CasLiteGrid::kVMax, ap, i);
          }
        }
      }
    }
  };

  // tau = 0: only the NMAC outcome and the immediate advisory penalties.
  for (int vi = -CasLiteGrid::kVMax; vi <= CasLiteGrid::kVMax; ++vi) {
    for (int hf = -CasLiteGrid::kFineMax; hf <= CasLiteGrid::kFineMax; ++hf) {
      const double terminal = nmac(hf) ? rewards.nmac : 0.0;
      for (int ap = 0; ap < 9; ++ap) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 9; ++i) best = std::max(best, penalty(i, ap) + terminal);
        w_prev[static_cast<size_t>(fine_index(hf, vi)) * 9 + static_cast<size_t>(ap)] = best;
      }
    }
  }
  record_coarse(0, [&](int hf, int vi, int ap, int i) {
    (void)vi;
    return penalty(i, ap) + (nmac(hf) ? rewards.nmac : 0.0);
  });

  for (int tau = 1; tau < CasLiteGrid::kTauCells; ++tau) {
    for (int vi = -CasLiteGrid::kVMax; vi <= CasLiteGrid::kVMax; ++vi) {
      for (int hf = -CasLiteGrid::kFineMax; hf <= CasLiteGrid::kFineMax; ++hf) {
        const size_t base = static_cast<size_t>(fine_index(hf, vi)) * 9;
        for (int i = 0; i < 9; ++i) {
          const auto [dirs, ndirs] = allowed_dirs(i, vi);
          double best = -std::numeric_limits<double>::infinity();
          for (int d = 0; d < ndirs; ++d) {
            int hf2 = hf, vi2 = vi;
            step(hf2, vi2, dirs[d]);
            best = std::max(best, w_prev[static_cast<size_t>(fine_index(hf2, vi2)) * 9 + static_cast<size_t>(i)]);
          }
          future[base + static_cast<size_t>(i)] = best;
        }
        for (int ap = 0; ap < 9; ++ap) {
          double best = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < 9; ++i) {
            best = std::max(best, penalty(i, ap) + future[base + static_cast<size_t>(i)]);
          }
          w_cur[base + static_cast<size_t>(ap)] = best;
        }
      }
    }
    record_coarse(tau, [&](int hf, int vi, int ap, int i) {
      return penalty(i, ap) +
             future[static_cast<size_t>(fine_index(hf, vi)) * 9 + static_cast<size_t>(i)];
    });
    w_prev.swap(w_cur);
  }
  return tables;
}

struct CasLiteTables {
  CasLiteScores scores;
  CasLiteReach reach;
};

inline CasLiteTables caslite_tables(const CasLiteRewards& rewards = {}) {
  return {caslite_solve(rewards), caslite_unsafeable()};
}

enum class APrev { kCoc, kCl1500 };

inline int a_prev_index(APrev p) { return p == APrev::kCoc ? kCOC : kCL1500; }
inline const char* a_prev_name(APrev p) { return p == APrev::kCoc ? "coc" : "cl1500"; }

namespace caslite_detail {

// Merge a coarse cell mask into maximal axis-aligned boxes: runs along h,
// rectangles across v, slabs across tau.
inline std::vector<Box> cells_to_boxes(const std::vector<uint8_t>& mask) {
  struct Rect {
    int ih0, ih1, iv0, iv1, it0, it1;
  };
  std::vector<Rect> slabs;

  std::map<std::array<int, 4>, Rect> open_rects;
  for (int it = 0; it < CasLiteGrid::kTauCells; ++it) {
    // runs along h per v row, merged into rectangles across consecutive v
    std::map<std::array<int, 2>, Rect> open_runs;
    std::vector<Rect> rects;
    for (int iv = 0; iv < CasLiteGrid::kVCells; ++iv) {
      std::map<std::array<int, 2>, Rect> next_runs;
      int ih = 0;
      while (ih < CasLiteGrid::kHCells) {
        if (!mask[static_cast<size_t>(CasLiteGrid::cell_index(ih, iv, it))]) {
          ++ih;
          continue;
        }
        int end = ih;
        while (end + 1 < CasLiteGrid::kHCells &&
               mask[static_cast<size_t>(CasLiteGrid::cell_index(end + 1, iv, it))]) {
          ++end;
        }
        const std::array<int, 2> span{ih, end};
        auto it_open = open_runs.find(span);
        if (it_open != open_runs.end() && it_open->second.iv1 == iv - 1) {
          Rect r = it_open->second;
          r.iv1 = iv;
          next_runs.emplace(span, r);
          open_runs.erase(it_open);
        } else {
          next_runs.emplace(span, Rect{ih, end, iv, iv, it, it});
        }
        ih = end + 1;
      }
      for (auto& [k, r] : open_runs) rects.push_back(r);
      open_runs.swap(next_runs);
    }
    for (auto& [k, r] : open_runs) rects.push_back(r);

    // merge rectangles into slabs across consecutive tau
    std::map<std::array<int, 4>, Rect> next_rects;
    for (const Rect& r : rects) {
      const std::array<int, 4> key{r.ih0, r.ih1, r.iv0, r.iv1};
      auto it_open = open_rects.find(key);
      if (it_open != open_rects.end() && it_open->second.it1 == it - 1) {
        Rect s = it_open->second;
        s.it1 = it;
        next_rects.emplace(key, s);
        open_rects.erase(it_open);
      } else {
        next_rects.emplace(key, Rect{r.ih0, r.ih1, r.iv0, r.iv1, it, it});
      }
    }
    for (auto& [k, r] : open_rects) slabs.push_back(r);
    open_rects.swap(next_rects);
  }
  for (auto& [k, r] : open_rects) slabs.push_back(r);

  std::vector<Box> boxes;
  boxes.reserve(slabs.size());
  for (const Rect& r : slabs) {
    Box b(3);
    b[0] = {CasLiteGrid::v_fps(r.iv0) - CasLiteGrid::kUnit / 2.0,
            CasLiteGrid::v_fps(r.iv1) + CasLiteGrid::kUnit / 2.0};
    b[1] = {CasLiteGrid::h_ft(r.ih0) - 50.0, CasLiteGrid::h_ft(r.ih1) + 50.0};
    b[2] = {static_cast<double>(r.it0) - 0.5, static_cast<double>(r.it1) + 0.5};
    boxes.push_back(std::move(b));
  }
  return boxes;
}

}  // namespace caslite_detail

// One sample per grid cell for the chosen previous advisory; constraints are
// the per-advisory unsafeable regions (minus the cells where no advisory is
// safeable) with a ScoreNotHighest output set.
inline BenchmarkBundle caslite_dataset(const CasLiteTables& tables, APrev a_prev) {
  BenchmarkBundle b;
  b.name = std::string("caslite-") + a_prev_name(a_prev);
  b.default_loss = LossKind::kAsymmetric;
  b.dataset.input_dim = 3;
  b.dataset.target_dim = 9;
  const int ap = a_prev_index(a_prev);

  for (int it = 0; it < CasLiteGrid::kTauCells; ++it) {
    for (int iv = 0; iv < CasLiteGrid::kVCells; ++iv) {
      for (int ih = 0; ih < CasLiteGrid::kHCells; ++ih) {
        const int cell = CasLiteGrid::cell_index(ih, iv, it);
        const Vec x{CasLiteGrid::v_fps(iv), CasLiteGrid::h_ft(ih), static_cast<double>(it)};
        const auto scores = tables.scores.row(cell, ap);
        int best = 0;
        for (int j = 1; j < 9; ++j) {
          if (scores[static_cast<size_t>(j)] > scores[static_cast<size_t>(best)]) best = j;
        }
        b.dataset.push(x, scores, best);
      }
    }
  }

  for (int i = 0; i < 9; ++i) {
    std::vector<uint8_t> cells(CasLiteGrid::cell_count(), 0);
    bool any = false;
    for (int cell = 0; cell < CasLiteGrid::cell_count(); ++cell) {
      const bool member = tables.reach.unsafeable[static_cast<size_t>(i)][static_cast<size_t>(cell)] &&
                          !tables.reach.safeable_none[static_cast<size_t>(cell)];
      cells[static_cast<size_t>(cell)] = member;
      any = any || member;
    }
    if (!any) continue;
    b.constraints.push_back({std::string("unsafeable_") + advisories()[static_cast<size_t>(i)].name,
                             InputRegion(caslite_detail::cells_to_boxes(cells)),
                             ConvexOutputSet::score_not_highest({i}, 0.0001)});
  }

  b.domain = InputRegion::single_box(
      {{CasLiteGrid::v_fps(0) - CasLiteGrid::kUnit / 2.0,
        CasLiteGrid::v_fps(CasLiteGrid::kVCells - 1) + CasLiteGrid::kUnit / 2.0},
       {CasLiteGrid::h_ft(0) - 50.0, CasLiteGrid::h_ft(CasLiteGrid::kHCells - 1) + 50.0},
       {-0.5, CasLiteGrid::kTauCells - 1 + 0.5}});
  b.distance_scale = {1.0 / CasLiteGrid::kUnit, 1.0 / 100.0, 1.0};

  b.probe_axes.resize(3);
  for (int iv = 0; iv < CasLiteGrid::kVCells; ++iv) b.probe_axes[0].push_back(CasLiteGrid::v_fps(iv));
  for (int ih = 0; ih < CasLiteGrid::kHCells; ++ih) b.probe_axes[1].push_back(CasLiteGrid::h_ft(ih));
  for (int it = 0; it < CasLiteGrid::kTauCells; ++it) b.probe_axes[2].push_back(static_cast<double>(it));

  b.standard_spec = {{3, 45, 45, 45, 45, 45, 45, 9}, false};
  b.trunk_spec = {{3, 45, 45, 45, 45}, true};
  b.head_spec = {{45, 45, 45, 9}, false};
  return b;
}

}  // namespace cshield
