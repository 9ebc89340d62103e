#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cshield/geometry.hpp"
#include "cshield/output_set.hpp"

namespace cshield {

// One declared guarantee: inputs in `region` must produce outputs in
// `output_set`.
struct ConstraintSpec {
  std::string name;
  InputRegion region;
  ConvexOutputSet output_set;
};

inline void validate_constraints(const std::vector<ConstraintSpec>& cs, int input_dim) {
  if (cs.size() > 30) throw SpecError("too many constraints (max 30)");
  for (size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].region.empty()) {
      throw SpecError("constraint '" + cs[i].name + "': empty input region");
    }
    if (cs[i].region.dim() != input_dim) {
      throw SpecError("constraint '" + cs[i].name + "': region dimensionality mismatch");
    }
    for (size_t j = i + 1; j < cs.size(); ++j) {
      if (cs[i].name == cs[j].name) throw SpecError("duplicate constraint name '" + cs[i].name + "'");
    }
  }
}

// Membership pattern across c constraints; bit i set means the point lies in
// region i. Rendered with constraint 0 first, e.g. "10" = in region 0 only.
class OverlapKey {
 public:
  OverlapKey() = default;
  OverlapKey(uint32_t bits, int size) : bits_(bits), size_(size) {
    if (size < 0 || size > 30) throw SpecError("OverlapKey: size out of range");
    if (size < 30 && (bits >> size) != 0) throw SpecError("OverlapKey: bits exceed size");
  }

  static OverlapKey from_string(const std::string& s) {
    uint32_t bits = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '1') {
        bits |= (1u << i);
      } else if (s[i] != '0') {
        throw SpecError("OverlapKey: invalid bit character");
      }
    }
    return OverlapKey(bits, static_cast<int>(s.size()));
  }

  bool test(int i) const { return ((bits_ >> i) & 1u) != 0; }
  uint32_t bits() const { return bits_; }
  int size() const { return size_; }

  std::string to_string() const {
    std::string s(static_cast<size_t>(size_), '0');
    for (int i = 0; i < size_; ++i) {
      if (test(i)) s[static_cast<size_t>(i)] = '1';
    }
    return s;
  }

  friend bool operator==(const OverlapKey& a, const OverlapKey& b) = default;

 private:
  uint32_t bits_ = 0;
  int size_ = 0;
};

// The non-empty overlap regions, each with a witness point that realizes its
// membership pattern. Keys are sorted ascending by bit value (constraint 0 is
// the least-significant bit), so "00", "10", "01", "11" for two constraints.
struct OverlapPartition {
  std::vector<OverlapKey> keys;
  std::vector<Vec> witnesses;
  int constraint_count = 0;

  int k() const { return static_cast<int>(keys.size()); }

  int index_of(uint32_t bits) const {
    for (size_t i = 0; i < keys.size(); ++i) {
      if (keys[i].bits() == bits) return static_cast<int>(i);
    }
    return -1;
  }
};

inline OverlapKey overlap_key_of(const std::vector<ConstraintSpec>& cs,
                                 std::span<const double> x) {
  uint32_t bits = 0;
  for (size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].region.contains(x)) bits |= (1u << i);
  }
  return OverlapKey(bits, static_cast<int>(cs.size()));
}

namespace detail {

// 1-D pieces of the arrangement induced by a sorted breakpoint list:
// alternating breakpoint singletons and open gaps between them. Membership of
// a closed interval is constant on each piece, so evaluating one
// representative per piece enumerates every realizable pattern, including the
// patterns that occur only on shared box faces.
struct AxisPieces {
  std::vector<double> reps;      // representative coordinate per piece
  std::vector<double> breaks;    // sorted unique breakpoints
  size_t count() const { return reps.size(); }

  explicit AxisPieces(std::vector<double> bs) : breaks(std::move(bs)) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.empty()) throw SpecError("enumerate_overlaps: axis without breakpoints");
    reps.reserve(breaks.size() * 2 - 1);
    for (size_t j = 0; j < breaks.size(); ++j) {
      reps.push_back(breaks[j]);
      if (j + 1 < breaks.size()) reps.push_back(0.5 * (breaks[j] + breaks[j + 1]));
    }
  }

  // Piece-index range [first, last] fully covered by [lo, hi]. Bounds are
  // required to be breakpoints, so pieces never straddle them.
  std::pair<int, int> covered(double lo, double hi) const {
    const auto it_lo = std::lower_bound(breaks.begin(), breaks.end(), lo);
    const auto it_hi = std::lower_bound(breaks.begin(), breaks.end(), hi);
    const int first = 2 * static_cast<int>(it_lo - breaks.begin());
    const int last = 2 * static_cast<int>(it_hi - breaks.begin());
    return {first, last};
  }
};

}  // namespace detail

// Exact enumeration of the non-empty overlap regions inside `domain`. The
// arrangement of all box faces is rasterized piece by piece; every piece has
// a constant membership pattern, and the observed patterns form the key set.
inline OverlapPartition enumerate_overlaps(const std::vector<ConstraintSpec>& cs,
                                           const InputRegion& domain) {
  if (domain.empty()) throw SpecError("enumerate_overlaps: empty domain");
  const int dim = domain.dim();
  validate_constraints(cs, dim);
  const int c = static_cast<int>(cs.size());

  std::vector<detail::AxisPieces> axes;
  axes.reserve(static_cast<size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    std::vector<double> bs;
    for (const Box& b : domain.boxes()) {
      bs.push_back(b[d].lo);
      bs.push_back(b[d].hi);
    }
    for (const ConstraintSpec& spec : cs) {
      for (const Box& b : spec.region.boxes()) {
        bs.push_back(b[d].lo);
        bs.push_back(b[d].hi);
      }
    }
    axes.emplace_back(std::move(bs));
  }

  size_t total = 1;
  for (const auto& ax : axes) {
    if (ax.count() > (size_t(1) << 26) / std::max<size_t>(total, 1)) {
      throw SpecError("enumerate_overlaps: arrangement too large");
    }
    total *= ax.count();
  }

  std::vector<size_t> stride(static_cast<size_t>(dim), 1);
  for (int d = dim - 2; d >= 0; --d) {
    stride[static_cast<size_t>(d)] = stride[static_cast<size_t>(d + 1)] * axes[static_cast<size_t>(d + 1)].count();
  }

  constexpr uint32_t kDomainBit = 1u << 31;
  std::vector<uint32_t> mask(total, 0u);

  auto paint = [&](const Box& b, uint32_t bit) {
    std::vector<std::pair<int, int>> ranges(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      ranges[static_cast<size_t>(d)] = axes[static_cast<size_t>(d)].covered(b[d].lo, b[d].hi);
    }
    std::vector<int> idx(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) idx[static_cast<size_t>(d)] = ranges[static_cast<size_t>(d)].first;
    for (;;) {
      size_t flat = 0;
      for (int d = 0; d < dim; ++d) flat += stride[static_cast<size_t>(d)] * static_cast<size_t>(idx[static_cast<size_t>(d)]);
      mask[flat] |= bit;
      int d = dim - 1;
      while (d >= 0) {
        if (++idx[static_cast<size_t>(d)] <= ranges[static_cast<size_t>(d)].second) break;
        idx[static_cast<size_t>(d)] = ranges[static_cast<size_t>(d)].first;
        --d;
      }
      if (d < 0) break;
    }
  };

  for (const Box& b : domain.boxes()) paint(b, kDomainBit);
  for (int i = 0; i < c; ++i) {
    for (const Box& b : cs[static_cast<size_t>(i)].region.boxes()) paint(b, 1u << i);
  }

  std::map<uint32_t, size_t> first_piece;
  for (size_t f = 0; f < total; ++f) {
    if ((mask[f] & kDomainBit) == 0) continue;
    first_piece.emplace(mask[f] & ~kDomainBit, f);
  }
  if (first_piece.empty()) throw SpecError("enumerate_overlaps: domain rasterized to nothing");

  OverlapPartition part;
  part.constraint_count = c;
  for (const auto& [bits, flat] : first_piece) {
    part.keys.emplace_back(bits, c);
    Vec w(static_cast<size_t>(dim));
    size_t rem = flat;
    for (int d = 0; d < dim; ++d) {
      const size_t id = rem / stride[static_cast<size_t>(d)];
      rem %= stride[static_cast<size_t>(d)];
      w[static_cast<size_t>(d)] = axes[static_cast<size_t>(d)].reps[id];
    }
    part.witnesses.push_back(std::move(w));
  }
  return part;
}

}  // namespace cshield
