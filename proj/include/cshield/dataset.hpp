#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cshield/common.hpp"
#include "cshield/geometry.hpp"

namespace cshield {

// Row-major supervised dataset. Strata labels (the optimal-advisory index)
// are present for classification-style data and drive stratified splitting.
struct Dataset {
  int input_dim = 0;
  int target_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<int> strata;

  size_t size() const {
    return input_dim == 0 ? 0 : inputs.size() / static_cast<size_t>(input_dim);
  }
  bool classification() const { return !strata.empty(); }

  std::span<const double> input(size_t i) const {
    return {inputs.data() + i * static_cast<size_t>(input_dim), static_cast<size_t>(input_dim)};
  }
  std::span<const double> target(size_t i) const {
    return {targets.data() + i * static_cast<size_t>(target_dim), static_cast<size_t>(target_dim)};
  }

  void push(std::span<const double> x, std::span<const double> y, int stratum = -1) {
    inputs.insert(inputs.end(), x.begin(), x.end());
    targets.insert(targets.end(), y.begin(), y.end());
    if (stratum >= 0) strata.push_back(stratum);
  }

  void validate() const {
    if (input_dim < 1 || target_dim < 1) throw SpecError("Dataset: dimensions must be positive");
    if (inputs.size() != size() * static_cast<size_t>(input_dim) ||
        targets.size() != size() * static_cast<size_t>(target_dim)) {
      throw SpecError("Dataset: ragged storage");
    }
    if (!strata.empty() && strata.size() != size()) {
      throw SpecError("Dataset: strata length mismatch");
    }
    for (double v : inputs) {
      if (!std::isfinite(v)) throw SpecError("Dataset: non-finite input value");
    }
    for (double v : targets) {
      if (!std::isfinite(v)) throw SpecError("Dataset: non-finite target value");
    }
  }
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int d = 0; d < ds.input_dim; ++d) out << (d ? "," : "") << "x" << d;
  for (int d = 0; d < ds.target_dim; ++d) out << ",y" << d;
  if (ds.classification()) out << ",stratum";
  out << "\n";
  for (size_t i = 0; i < ds.size(); ++i) {
    for (int d = 0; d < ds.input_dim; ++d) {
      out << (d ? "," : "") << format_double(ds.input(i)[static_cast<size_t>(d)]);
    }
    for (int d = 0; d < ds.target_dim; ++d) {
      out << "," << format_double(ds.target(i)[static_cast<size_t>(d)]);
    }
    if (ds.classification()) out << "," << ds.strata[i];
    out << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header row");

  Dataset ds;
  bool has_stratum = false;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("x", 0) == 0) {
        ++ds.input_dim;
      } else if (col.rfind("y", 0) == 0) {
        ++ds.target_dim;
      } else if (col == "stratum") {
        has_stratum = true;
      } else {
        throw IoError(path + ": unknown column '" + col + "'");
      }
    }
  }
  if (ds.input_dim < 1 || ds.target_dim < 1) throw IoError(path + ": no data columns");

  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    const int expected = ds.input_dim + ds.target_dim + (has_stratum ? 1 : 0);
    int got = 0;
    while (std::getline(ss, cell, ',')) {
      ++got;
      if (got > expected) break;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw IoError(path + ": bad number in row " + std::to_string(row));
      if (got <= ds.input_dim) {
        ds.inputs.push_back(v);
      } else if (got <= ds.input_dim + ds.target_dim) {
        ds.targets.push_back(v);
      } else {
        ds.strata.push_back(static_cast<int>(v));
      }
    }
    if (got != expected) throw IoError(path + ": wrong column count in row " + std::to_string(row));
  }
  ds.validate();
  return ds;
}

namespace detail {

inline Dataset take_rows(const Dataset& ds, const std::vector<size_t>& rows) {
  Dataset out;
  out.input_dim = ds.input_dim;
  out.target_dim = ds.target_dim;
  for (size_t i : rows) {
    out.push(ds.input(i), ds.target(i), ds.classification() ? ds.strata[i] : -1);
  }
  return out;
}

}  // namespace detail

// Deterministic train/test split. With strata present the shuffle happens
// inside each stratum, so per-stratum proportions are preserved within one
// sample; strata smaller than 2 degrade the whole split to unstratified.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                                 uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw SpecError("split_dataset: fraction must be in (0, 1)");
  }
  const size_t n = ds.size();
  if (n < 2) throw SpecError("split_dataset: needs at least two samples");

  std::vector<std::vector<size_t>> groups;
  if (ds.classification()) {
    std::vector<int> labels;
    for (size_t i = 0; i < n; ++i) {
      const int s = ds.strata[i];
      size_t g = 0;
      for (; g < labels.size(); ++g) {
        if (labels[g] == s) break;
      }
      if (g == labels.size()) {
        labels.push_back(s);
        groups.emplace_back();
      }
      groups[g].push_back(i);
    }
    for (const auto& g : groups) {
      if (g.size() < 2) {
        std::cerr << "split_dataset: stratum with fewer than 2 samples; "
                     "falling back to unstratified split\n";
        groups.clear();
        break;
      }
    }
  }
  if (groups.empty()) {
    groups.emplace_back(n);
    std::iota(groups.front().begin(), groups.front().end(), size_t{0});
  }

  Rng rng(seed);
  std::vector<size_t> train_rows, test_rows;
  for (auto& g : groups) {
    for (size_t i = g.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.below(i));
      std::swap(g[i - 1], g[j]);
    }
    const size_t k = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(g.size())));
    for (size_t i = 0; i < g.size(); ++i) {
      (i < k ? train_rows : test_rows).push_back(g[i]);
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {detail::take_rows(ds, train_rows), detail::take_rows(ds, test_rows)};
}

}  // namespace cshield
