#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cshield/common.hpp"
#include "cshield/tape.hpp"

namespace cshield {

// Fully connected feed-forward network: affine layers with rectified-linear
// activations on hidden layers. `final_relu` keeps a nonlinearity on the last
// layer too, which is how trunks expose a latent representation.
struct DenseNetSpec {
  std::vector<int> dims;
  bool final_relu = false;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(dims.size()) - 1; }

  int param_count() const {
    int n = 0;
    for (int l = 0; l < layer_count(); ++l) n += (dims[l] + 1) * dims[l + 1];
    return n;
  }

  // Hidden units only; matches how network sizes are conventionally reported.
  int node_count() const {
    int n = 0;
    for (size_t i = 1; i + 1 < dims.size(); ++i) n += dims[i];
    if (final_relu) n += dims.back();
    return n;
  }

  void validate() const {
    if (dims.size() < 2) throw SpecError("DenseNetSpec: needs at least one layer");
    for (int d : dims) {
      if (d < 1) throw SpecError("DenseNetSpec: dimensions must be positive");
    }
  }
};

struct LayerView {
  int w_off = 0;
  int b_off = 0;
  int in = 0;
  int out = 0;
};

inline std::vector<LayerView> layer_views(const DenseNetSpec& spec, int base) {
  std::vector<LayerView> views;
  views.reserve(static_cast<size_t>(spec.layer_count()));
  int off = base;
  for (int l = 0; l < spec.layer_count(); ++l) {
    LayerView v;
    v.in = spec.dims[static_cast<size_t>(l)];
    v.out = spec.dims[static_cast<size_t>(l) + 1];
    v.w_off = off;
    v.b_off = off + v.in * v.out;
    off = v.b_off + v.out;
    views.push_back(v);
  }
  return views;
}

// Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)), biases zero.
inline void init_dense_params(const DenseNetSpec& spec, std::span<double> params, int base,
                              Rng& rng) {
  for (const LayerView& v : layer_views(spec, base)) {
    const double r = std::sqrt(6.0 / (v.in + v.out));
    for (int i = 0; i < v.in * v.out; ++i) {
      params[static_cast<size_t>(v.w_off + i)] = rng.uniform(-r, r);
    }
    for (int i = 0; i < v.out; ++i) params[static_cast<size_t>(v.b_off + i)] = 0.0;
  }
}

// Plain forward pass (no recording); `scratch` is reusable to avoid allocs.
inline void dense_forward(const DenseNetSpec& spec, std::span<const double> params, int base,
                          std::span<const double> x, Vec& out, Vec& scratch) {
  if (static_cast<int>(x.size()) != spec.input_dim()) {
    throw SpecError("dense_forward: input dimensionality mismatch");
  }
  out.assign(x.begin(), x.end());
  int off = base;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.dims[static_cast<size_t>(l)];
    const int rows = spec.dims[static_cast<size_t>(l) + 1];
    scratch.resize(static_cast<size_t>(rows));
    const double* w = params.data() + off;
    const double* b = params.data() + off + in * rows;
    off += (in + 1) * rows;
    const bool relu_here = l + 1 < spec.layer_count() || spec.final_relu;
    for (int r = 0; r < rows; ++r) {
      double acc = b[r];
      const double* wr = w + static_cast<size_t>(r) * static_cast<size_t>(in);
      for (int c = 0; c < in; ++c) acc += wr[c] * out[static_cast<size_t>(c)];
      scratch[static_cast<size_t>(r)] = relu_here && acc < 0.0 ? 0.0 : acc;
    }
    out.swap(scratch);
  }
}

// Recorded forward pass; returns the output node id.
inline int dense_forward_taped(Tape& tape, const DenseNetSpec& spec, int base, int x_node) {
  int cur = x_node;
  int off = base;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.dims[static_cast<size_t>(l)];
    const int rows = spec.dims[static_cast<size_t>(l) + 1];
    cur = tape.affine(cur, off, off + in * rows, rows, in);
    off += (in + 1) * rows;
    if (l + 1 < spec.layer_count() || spec.final_relu) cur = tape.relu(cur);
  }
  return cur;
}

}  // namespace cshield
