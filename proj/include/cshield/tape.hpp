#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cshield/common.hpp"
#include "cshield/output_set.hpp"
#include "cshield/proximity.hpp"

namespace cshield {

enum class Op : uint8_t {
  kConst,
  kAffine,
  kRelu,
  kLogistic,
  kSoftplus,
  kExp,
  kPower,
  kSum,
  kProduct,
  kMin,
  kIntervalMap,
  kHalfLineAboveMap,
  kHalfLineBelowMap,
  kScoreNotHighest,
  kProximity,
  kWeightProduct,
  kConvexCombine,
  kMseLoss,
  kAsymLoss,
};

// Eagerly evaluated computation record over a flat value arena. Parameters
// live outside the tape (a flat vector shared with the optimizer); backward
// accumulates into an equally shaped gradient vector, so one tape can be
// replayed per sample while gradients sum across a batch.
//
// Reduction ties (min nodes, score projections) take the lowest index, and
// every operation runs in a fixed order, so replays are bit-deterministic.
class Tape {
 public:
  Tape() = default;

  void bind(std::span<const double> params, std::span<double> grad) {
    params_ = params;
    grad_ = grad;
  }

  // Keeps arena capacity so per-sample replays do not allocate.
  void reset() {
    nodes_.clear();
    vals_.clear();
    aux_.clear();
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  int length(int node) const { return nodes_[static_cast<size_t>(node)].len; }

  std::span<const double> value(int node) const {
    const Node& n = nodes_[static_cast<size_t>(node)];
    return {vals_.data() + n.out, static_cast<size_t>(n.len)};
  }

  double scalar(int node) const {
    const Node& n = nodes_[static_cast<size_t>(node)];
    if (n.len != 1) throw SpecError("Tape::scalar: node is not scalar");
    return vals_[static_cast<size_t>(n.out)];
  }

  int constant(std::span<const double> v) {
    const int id = new_node(Op::kConst, static_cast<int>(v.size()));
    double* out = out_ptr(id);
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return id;
  }

  int constant1(double v) { return constant(std::span<const double>(&v, 1)); }

  // out = W x + b with W row-major (rows x cols) at params[w_off] and b at
  // params[b_off].
  int affine(int x, int w_off, int b_off, int rows, int cols) {
    if (length(x) != cols) throw SpecError("Tape::affine: input arity mismatch");
    const int id = new_node(Op::kAffine, rows, x);
    Node& n = nodes_.back();
    n.i0 = w_off;
    n.i1 = b_off;
    n.i2 = rows;
    n.i3 = cols;
    const double* in = in_ptr(x);
    const double* w = params_.data() + w_off;
    const double* b = params_.data() + b_off;
    double* out = out_ptr(id);
    for (int r = 0; r < rows; ++r) {
      double acc = b[r];
      const double* wr = w + static_cast<size_t>(r) * static_cast<size_t>(cols);
      for (int c = 0; c < cols; ++c) acc += wr[c] * in[c];
      out[r] = acc;
    }
    return id;
  }

  int relu(int x) {
    return elementwise(Op::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; });
  }

  int logistic_node(int x) {
    return elementwise(Op::kLogistic, x, [](double v) { return logistic(v); });
  }

  int softplus_node(int x) {
    return elementwise(Op::kSoftplus, x, [](double v) { return softplus(v); });
  }

  int exp_node(int x) {
    return elementwise(Op::kExp, x, [](double v) { return std::exp(v); });
  }

  int power(int x, double exponent) {
    const int id = elementwise(Op::kPower, x, [&](double v) { return std::pow(v, exponent); });
    nodes_.back().x0 = exponent;
    return id;
  }

  int sum(int x) {
    const int id = new_node(Op::kSum, 1, x);
    const double* in = in_ptr(x);
    double acc = 0.0;
    for (int i = 0; i < length(x); ++i) acc += in[i];
    *out_ptr(id) = acc;
    return id;
  }

  int product(int x) {
    const int id = new_node(Op::kProduct, 1, x);
    const double* in = in_ptr(x);
    double acc = 1.0;
    for (int i = 0; i < length(x); ++i) acc *= in[i];
    *out_ptr(id) = acc;
    return id;
  }

  // Min reduction; the subgradient goes to the lowest index attaining the min.
  int min_reduce(int x) {
    if (length(x) < 1) throw SpecError("Tape::min_reduce: empty input");
    const int id = new_node(Op::kMin, 1, x);
    const double* in = in_ptr(x);
    double m = in[0];
    for (int i = 1; i < length(x); ++i) m = std::min(m, in[i]);
    *out_ptr(id) = m;
    return id;
  }

  int interval_map(int x, double lo, double hi) {
    const int id = elementwise(Op::kIntervalMap, x,
                               [&](double v) { return lo + (hi - lo) * logistic(v); });
    nodes_.back().x0 = lo;
    nodes_.back().x1 = hi;
    return id;
  }

  int half_line_above_map(int x, double lo) {
    const int id = elementwise(Op::kHalfLineAboveMap, x, [&](double v) { return lo + softplus(v); });
    nodes_.back().x0 = lo;
    return id;
  }

  int half_line_below_map(int x, double hi) {
    const int id = elementwise(Op::kHalfLineBelowMap, x, [&](double v) { return hi - softplus(v); });
    nodes_.back().x0 = hi;
    return id;
  }

  // Unsafe coordinates become (min over the other coordinates) - eps; the
  // rest pass through.
  int score_not_highest(int x, std::span<const int> unsafe, double eps) {
    const int m = length(x);
    const int id = new_node(Op::kScoreNotHighest, m, x);
    Node& n = nodes_.back();
    n.i0 = push_aux(unsafe);
    n.i1 = static_cast<int>(unsafe.size());
    n.x0 = eps;
    const double* in = in_ptr(x);
    double* out = out_ptr(id);
    for (int i = 0; i < m; ++i) out[i] = in[i];
    const double safe_min = in[safe_argmin(in, m, unsafe)];
    for (int u : unsafe) out[u] = safe_min - eps;
    return id;
  }

  // Proximity of a fixed distance d under trainable (a, b) at params[p_off],
  // params[p_off + 1].
  int proximity(double d, int p_off) {
    const int id = new_node(Op::kProximity, 1);
    Node& n = nodes_.back();
    n.i0 = p_off;
    n.x0 = d;
    const ProximityParams p{params_[static_cast<size_t>(p_off)],
                            params_[static_cast<size_t>(p_off) + 1]};
    *out_ptr(id) = proximity_eval(p, d);
    return id;
  }

  // w = prod over bit-0 constraints of prox_i times prod over bit-1
  // constraints of (1 - prox_i).
  int weight_product(std::span<const int> prox_nodes, uint32_t key_bits) {
    const int id = new_node(Op::kWeightProduct, 1);
    Node& n = nodes_.back();
    n.i0 = push_aux(prox_nodes);
    n.i1 = static_cast<int>(prox_nodes.size());
    n.i2 = static_cast<int>(key_bits);
    double acc = 1.0;
    for (size_t i = 0; i < prox_nodes.size(); ++i) {
      const double s = scalar_at(prox_nodes[i]);
      acc *= ((key_bits >> i) & 1u) ? (1.0 - s) : s;
    }
    *out_ptr(id) = acc;
    return id;
  }

  // Normalized convex combination of head outputs. When the weight sum
  // underflows below 1e-300 the combination degrades to the fallback head,
  // which by construction maps into every applicable output set.
  int convex_combine(std::span<const int> weights, std::span<const int> heads, int fallback) {
    if (weights.size() != heads.size() || weights.empty()) {
      throw SpecError("Tape::convex_combine: needs matching weight/head lists");
    }
    const int m = length(heads[0]);
    const int id = new_node(Op::kConvexCombine, m);
    Node& n = nodes_.back();
    n.i0 = push_aux(weights);
    push_aux(heads);
    n.i1 = static_cast<int>(weights.size());
    n.i2 = fallback;
    double wsum = 0.0;
    for (int wn : weights) wsum += scalar_at(wn);
    double* out = out_ptr(id);
    if (wsum < 1e-300) {
      const double* h = in_ptr(heads[static_cast<size_t>(fallback)]);
      for (int i = 0; i < m; ++i) out[i] = h[i];
      return id;
    }
    for (int i = 0; i < m; ++i) out[i] = 0.0;
    for (size_t b = 0; b < heads.size(); ++b) {
      const double w = scalar_at(weights[b]) / wsum;
      const double* h = in_ptr(heads[b]);
      for (int i = 0; i < m; ++i) out[i] += w * h[i];
    }
    return id;
  }

  // Mean squared error against a constant target.
  int mse_loss(int pred, std::span<const double> target) {
    if (length(pred) != static_cast<int>(target.size())) {
      throw SpecError("Tape::mse_loss: arity mismatch");
    }
    const int tgt = constant(target);
    const int id = new_node(Op::kMseLoss, 1, pred, tgt);
    const double* p = in_ptr(pred);
    const double* t = in_ptr(tgt);
    const int m = length(pred);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double r = p[i] - t[i];
      acc += r * r;
    }
    *out_ptr(id) = acc / m;
    return id;
  }

  // Weighted squared error that penalizes undershooting the optimal score and
  // overshooting the others; `weight` applies to the penalized residuals.
  int asym_loss(int pred, std::span<const double> target, double weight) {
    if (length(pred) != static_cast<int>(target.size())) {
      throw SpecError("Tape::asym_loss: arity mismatch");
    }
    const int tgt = constant(target);
    const int id = new_node(Op::kAsymLoss, 1, pred, tgt);
    Node& n = nodes_.back();
    n.i0 = argmax_lowest(target);
    n.x0 = weight;
    const double* p = in_ptr(pred);
    const double* t = in_ptr(tgt);
    const int m = length(pred);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double r = p[i] - t[i];
      acc += asym_weight(i, n.i0, r, weight) * r * r;
    }
    *out_ptr(id) = acc;
    return id;
  }

  void backward(int node, double seed = 1.0) {
    if (length(node) != 1) throw SpecError("Tape::backward: scalar seed on non-scalar node");
    adj_.assign(vals_.size(), 0.0);
    adj_[static_cast<size_t>(nodes_[static_cast<size_t>(node)].out)] = seed;
    run_backward(node);
  }

  void backward_seeded(int node, std::span<const double> seed) {
    if (length(node) != static_cast<int>(seed.size())) {
      throw SpecError("Tape::backward_seeded: seed arity mismatch");
    }
    adj_.assign(vals_.size(), 0.0);
    const Node& n = nodes_[static_cast<size_t>(node)];
    for (int i = 0; i < n.len; ++i) adj_[static_cast<size_t>(n.out + i)] = seed[static_cast<size_t>(i)];
    run_backward(node);
  }

  // Adjoint of an input node after backward(); useful for input-gradients.
  std::span<const double> adjoint(int node) const {
    const Node& n = nodes_[static_cast<size_t>(node)];
    return {adj_.data() + n.out, static_cast<size_t>(n.len)};
  }

 private:
  struct Node {
    Op op;
    int32_t out = 0;
    int32_t len = 0;
    int32_t a = -1;
    int32_t b = -1;
    int32_t i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    double x0 = 0.0, x1 = 0.0;
  };

  static int argmax_lowest(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
      if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    }
    return best;
  }

  static double asym_weight(int i, int optimal, double residual, double w) {
    if (i == optimal) return residual < 0.0 ? w : 1.0;
    return residual > 0.0 ? w : 1.0;
  }

  static int safe_argmin(const double* v, int m, std::span<const int> unsafe) {
    int arg = -1;
    for (int j = 0; j < m; ++j) {
      bool is_unsafe = false;
      for (int u : unsafe) {
        if (u == j) {
          is_unsafe = true;
          break;
        }
      }
      if (is_unsafe) continue;
      if (arg < 0 || v[j] < v[arg]) arg = j;
    }
    if (arg < 0) throw SpecError("score_not_highest: every coordinate unsafe is unsatisfiable");
    return arg;
  }

  int new_node(Op op, int len, int a = -1, int b = -1) {
    Node n;
    n.op = op;
    n.len = len;
    n.a = a;
    n.b = b;
    n.out = static_cast<int32_t>(vals_.size());
    vals_.resize(vals_.size() + static_cast<size_t>(len));
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <typename Fn>
  int elementwise(Op op, int x, Fn&& fn) {
    const int id = new_node(op, length(x), x);
    const double* in = in_ptr(x);
    double* out = out_ptr(id);
    for (int i = 0; i < length(x); ++i) out[i] = fn(in[i]);
    return id;
  }

  double* out_ptr(int node) { return vals_.data() + nodes_[static_cast<size_t>(node)].out; }
  const double* in_ptr(int node) const {
    return vals_.data() + nodes_[static_cast<size_t>(node)].out;
  }
  double scalar_at(int node) const { return vals_[static_cast<size_t>(nodes_[static_cast<size_t>(node)].out)]; }

  int push_aux(std::span<const int> xs) {
    const int off = static_cast<int>(aux_.size());
    aux_.insert(aux_.end(), xs.begin(), xs.end());
    return off;
  }

  void run_backward(int last) {
    for (int idx = last; idx >= 0; --idx) {
      const Node& n = nodes_[static_cast<size_t>(idx)];
      const double* gy = adj_.data() + n.out;
      switch (n.op) {
        case Op::kConst:
          break;
        case Op::kAffine: {
          const Node& xn = nodes_[static_cast<size_t>(n.a)];
          const double* x = vals_.data() + xn.out;
          double* gx = adj_.data() + xn.out;
          const double* w = params_.data() + n.i0;
          double* gw = grad_.data() + n.i0;
          double* gb = grad_.data() + n.i1;
          const int rows = n.i2, cols = n.i3;
          for (int r = 0; r < rows; ++r) {
            const double g = gy[r];
            if (g == 0.0) continue;
            const double* wr = w + static_cast<size_t>(r) * static_cast<size_t>(cols);
            double* gwr = gw + static_cast<size_t>(r) * static_cast<size_t>(cols);
            for (int c = 0; c < cols; ++c) {
              gx[c] += wr[c] * g;
              gwr[c] += x[c] * g;
            }
            gb[r] += g;
          }
          break;
        }
        case Op::kRelu: {
          const Node& xn = nodes_[static_cast<size_t>(n.a)];
          const double* x = vals_.data() + xn.out;
          double* gx = adj_.data() + xn.out;
          for (int i = 0; i < n.len; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
          break;
        }
        case Op::kLogistic: {
          const double* y = vals_.data() + n.out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) gx[i] += y[i] * (1.0 - y[i]) * gy[i];
          break;
        }
        case Op::kSoftplus: {
          const double* x = vals_.data() + nodes_[static_cast<size_t>(n.a)].out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) gx[i] += logistic(x[i]) * gy[i];
          break;
        }
        case Op::kExp: {
          const double* y = vals_.data() + n.out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) gx[i] += y[i] * gy[i];
          break;
        }
        case Op::kPower: {
          const double* x = vals_.data() + nodes_[static_cast<size_t>(n.a)].out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) {
            gx[i] += x[i] > 0.0 ? n.x0 * std::pow(x[i], n.x0 - 1.0) * gy[i] : 0.0;
          }
          break;
        }
        case Op::kSum: {
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          const int m = nodes_[static_cast<size_t>(n.a)].len;
          for (int i = 0; i < m; ++i) gx[i] += gy[0];
          break;
        }
        case Op::kProduct: {
          const Node& xn = nodes_[static_cast<size_t>(n.a)];
          const double* x = vals_.data() + xn.out;
          double* gx = adj_.data() + xn.out;
          partial_products(x, xn.len);
          for (int i = 0; i < xn.len; ++i) gx[i] += scratch_[static_cast<size_t>(i)] * gy[0];
          break;
        }
        case Op::kMin: {
          const Node& xn = nodes_[static_cast<size_t>(n.a)];
          const double* x = vals_.data() + xn.out;
          double* gx = adj_.data() + xn.out;
          int arg = 0;
          for (int i = 1; i < xn.len; ++i) {
            if (x[i] < x[arg]) arg = i;
          }
          gx[arg] += gy[0];
          break;
        }
        case Op::kIntervalMap: {
          const double* y = vals_.data() + n.out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          const double span = n.x1 - n.x0;
          for (int i = 0; i < n.len; ++i) {
            const double s = (y[i] - n.x0) / span;
            gx[i] += span * s * (1.0 - s) * gy[i];
          }
          break;
        }
        case Op::kHalfLineAboveMap: {
          const double* x = vals_.data() + nodes_[static_cast<size_t>(n.a)].out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) gx[i] += logistic(x[i]) * gy[i];
          break;
        }
        case Op::kHalfLineBelowMap: {
          const double* x = vals_.data() + nodes_[static_cast<size_t>(n.a)].out;
          double* gx = adj_.data() + nodes_[static_cast<size_t>(n.a)].out;
          for (int i = 0; i < n.len; ++i) gx[i] -= logistic(x[i]) * gy[i];
          break;
        }
        case Op::kScoreNotHighest: {
          const Node& xn = nodes_[static_cast<size_t>(n.a)];
          const double* x = vals_.data() + xn.out;
          double* gx = adj_.data() + xn.out;
          const std::span<const int> unsafe{aux_.data() + n.i0, static_cast<size_t>(n.i1)};
          const int arg = safe_argmin(x, xn.len, unsafe);
          double carried = 0.0;
          for (int u : unsafe) carried += gy[u];
          for (int i = 0; i < n.len; ++i) {
            bool is_unsafe = false;
            for (int u : unsafe) {
              if (u == i) {
                is_unsafe = true;
                break;
              }
            }
            if (!is_unsafe) gx[i] += gy[i];
          }
          gx[arg] += carried;
          break;
        }
        case Op::kProximity: {
          const ProximityParams p{params_[static_cast<size_t>(n.i0)],
                                  params_[static_cast<size_t>(n.i0) + 1]};
          const ProximityGrad g = proximity_grad(p, n.x0);
          grad_[static_cast<size_t>(n.i0)] += g.wrt_a * gy[0];
          grad_[static_cast<size_t>(n.i0) + 1] += g.wrt_b * gy[0];
          break;
        }
        case Op::kWeightProduct: {
          const std::span<const int> prox{aux_.data() + n.i0, static_cast<size_t>(n.i1)};
          const uint32_t bits = static_cast<uint32_t>(n.i2);
          terms_.resize(prox.size());
          for (size_t i = 0; i < prox.size(); ++i) {
            const double s = scalar_at(prox[i]);
            terms_[i] = ((bits >> i) & 1u) ? (1.0 - s) : s;
          }
          partial_products(terms_.data(), static_cast<int>(terms_.size()));
          for (size_t i = 0; i < prox.size(); ++i) {
            const double d_term = scratch_[i] * gy[0];
            const double d_prox = ((bits >> i) & 1u) ? -d_term : d_term;
            adj_[static_cast<size_t>(nodes_[static_cast<size_t>(prox[i])].out)] += d_prox;
          }
          break;
        }
        case Op::kConvexCombine: {
          const int k = n.i1;
          const int* wids = aux_.data() + n.i0;
          const int* hids = wids + k;
          double wsum = 0.0;
          for (int b = 0; b < k; ++b) wsum += scalar_at(wids[b]);
          if (wsum < 1e-300) {
            const Node& hn = nodes_[static_cast<size_t>(hids[n.i2])];
            double* gh = adj_.data() + hn.out;
            for (int i = 0; i < n.len; ++i) gh[i] += gy[i];
            break;
          }
          const double* y = vals_.data() + n.out;
          for (int b = 0; b < k; ++b) {
            const Node& hn = nodes_[static_cast<size_t>(hids[b])];
            const double* h = vals_.data() + hn.out;
            double* gh = adj_.data() + hn.out;
            const double w = scalar_at(wids[b]) / wsum;
            double gw = 0.0;
            for (int i = 0; i < n.len; ++i) {
              gh[i] += w * gy[i];
              gw += gy[i] * (h[i] - y[i]);
            }
            adj_[static_cast<size_t>(nodes_[static_cast<size_t>(wids[b])].out)] += gw / wsum;
          }
          break;
        }
        case Op::kMseLoss: {
          const Node& pn = nodes_[static_cast<size_t>(n.a)];
          const Node& tn = nodes_[static_cast<size_t>(n.b)];
          const double* p = vals_.data() + pn.out;
          const double* t = vals_.data() + tn.out;
          double* gp = adj_.data() + pn.out;
          for (int i = 0; i < pn.len; ++i) gp[i] += 2.0 * (p[i] - t[i]) / pn.len * gy[0];
          break;
        }
        case Op::kAsymLoss: {
          const Node& pn = nodes_[static_cast<size_t>(n.a)];
          const Node& tn = nodes_[static_cast<size_t>(n.b)];
          const double* p = vals_.data() + pn.out;
          const double* t = vals_.data() + tn.out;
          double* gp = adj_.data() + pn.out;
          for (int i = 0; i < pn.len; ++i) {
            const double r = p[i] - t[i];
            gp[i] += 2.0 * asym_weight(i, n.i0, r, n.x0) * r * gy[0];
          }
          break;
        }
      }
    }
  }

  // scratch_[i] = product of all inputs except i (stable when terms are 0).
  void partial_products(const double* x, int m) {
    scratch_.assign(static_cast<size_t>(m), 1.0);
    double pre = 1.0;
    for (int i = 0; i < m; ++i) {
      scratch_[static_cast<size_t>(i)] = pre;
      pre *= x[i];
    }
    double post = 1.0;
    for (int i = m - 1; i >= 0; --i) {
      scratch_[static_cast<size_t>(i)] *= post;
      post *= x[i];
    }
  }

  std::span<const double> params_;
  std::span<double> grad_;
  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> adj_;
  std::vector<int> aux_;
  std::vector<double> scratch_;
  std::vector<double> terms_;
};

}  // namespace cshield
