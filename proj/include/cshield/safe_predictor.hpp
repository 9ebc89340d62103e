#pragma once

#include <span>
#include <string>
#include <vector>

#include "cshield/constraints.hpp"
#include "cshield/net.hpp"
#include "cshield/proximity.hpp"
#include "cshield/tape.hpp"

namespace cshield {

enum class LossKind { kMse, kAsymmetric };

struct LossNodes {
  int loss = -1;
  int pred = -1;
};

// One head per overlap region: a dense net over the shared latent space whose
// raw output is projected into the intersection of the active output sets.
struct ConstrainedPredictor {
  OverlapKey key;
  ConvexOutputSet codomain;
  int param_off = 0;
};

// Baseline network with no overlap structure or projection.
class StandardModel {
 public:
  StandardModel() = default;
  StandardModel(DenseNetSpec spec, uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    params_.assign(static_cast<size_t>(spec_.param_count()), 0.0);
    Rng rng(seed);
    init_dense_params(spec_, params_, 0, rng);
  }

  const DenseNetSpec& spec() const { return spec_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim(); }

  Vec predict(std::span<const double> x) const {
    Vec out, scratch;
    dense_forward(spec_, params_, 0, x, out, scratch);
    return out;
  }

  LossNodes record_loss(Tape& tape, std::span<const double> x, std::span<const double> target,
                        LossKind loss, double asym_weight) const {
    const int xn = tape.constant(x);
    const int yn = dense_forward_taped(tape, spec_, 0, xn);
    const int ln = loss == LossKind::kMse ? tape.mse_loss(yn, target)
                                          : tape.asym_loss(yn, target, asym_weight);
    return {ln, yn};
  }

  std::string constraint_hash;

 private:
  DenseNetSpec spec_;
  Vec params_;
};

// The safe predictor F: a shared trunk, one constrained head per overlap
// region, per-constraint proximity functions, and the normalized
// proximity-weighted convex combination of the head outputs. Membership of
// F(x) in every applicable output set holds for all parameter values.
class SafePredictorModel {
 public:
  SafePredictorModel() = default;

  const std::vector<ConstraintSpec>& constraints() const { return constraints_; }
  const InputRegion& domain() const { return domain_; }
  const Vec& distance_scale() const { return scale_; }
  const OverlapPartition& partition() const { return partition_; }
  const DenseNetSpec& trunk_spec() const { return trunk_spec_; }
  const DenseNetSpec& head_spec() const { return head_spec_; }
  const std::vector<ConstrainedPredictor>& heads() const { return heads_; }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  int net_param_count() const { return prox_base_; }
  int input_dim() const { return trunk_spec_.input_dim(); }
  int output_dim() const { return head_spec_.output_dim(); }
  int constraint_count() const { return static_cast<int>(constraints_.size()); }

  int prox_offset(int constraint) const { return prox_base_ + 2 * constraint; }

  ProximityParams proximity_of(int constraint) const {
    const int off = prox_offset(constraint);
    return ProximityParams{params_[static_cast<size_t>(off)],
                           params_[static_cast<size_t>(off) + 1]};
  }

  void set_proximity(int constraint, const ProximityParams& p) {
    const int off = prox_offset(constraint);
    params_[static_cast<size_t>(off)] = p.a;
    params_[static_cast<size_t>(off) + 1] = p.b;
  }

  // Scaled distance from x to each constraint region.
  Vec distances(std::span<const double> x) const {
    Vec d(constraints_.size());
    for (size_t i = 0; i < constraints_.size(); ++i) {
      d[i] = constraints_[i].region.distance(x, scale_);
    }
    return d;
  }

  Vec proximities(std::span<const double> x) const {
    Vec p = distances(x);
    for (size_t i = 0; i < p.size(); ++i) p[i] = proximity_eval(proximity_of(static_cast<int>(i)), p[i]);
    return p;
  }

  // w_key = prod over inactive constraints of prox_i times prod over active
  // constraints of (1 - prox_i).
  static double weight_of(std::span<const double> prox, const OverlapKey& key) {
    double acc = 1.0;
    for (int i = 0; i < key.size(); ++i) {
      acc *= key.test(i) ? (1.0 - prox[static_cast<size_t>(i)]) : prox[static_cast<size_t>(i)];
    }
    return acc;
  }

  // Trunk latent for x.
  Vec latent(std::span<const double> x) const {
    Vec out, scratch;
    dense_forward(trunk_spec_, params_, 0, x, out, scratch);
    return out;
  }

  // G_key(x): trunk, head net, projection into the head codomain.
  Vec constrained_forward(int head_index, std::span<const double> x) const {
    const Vec z = latent(x);
    Vec raw, scratch;
    const ConstrainedPredictor& h = heads_[static_cast<size_t>(head_index)];
    dense_forward(head_spec_, params_, h.param_off, z, raw, scratch);
    return h.codomain.project(raw);
  }

  int head_index_at(std::span<const double> x) const {
    const OverlapKey key = overlap_key_of(constraints_, x);
    const int idx = partition_.index_of(key.bits());
    if (idx < 0) {
      throw std::logic_error("safe predictor: point pattern " + key.to_string() +
                             " missing from overlap partition");
    }
    return idx;
  }

  Vec safe_forward(std::span<const double> x) const {
    const int fallback = head_index_at(x);
    const Vec prox = proximities(x);
    const Vec z = latent(x);

    Vec raw, scratch;
    const int m = output_dim();
    Vec acc(static_cast<size_t>(m), 0.0);
    Vec fallback_out;
    double wsum = 0.0;
    for (size_t b = 0; b < heads_.size(); ++b) {
      dense_forward(head_spec_, params_, heads_[b].param_off, z, raw, scratch);
      const Vec y = heads_[b].codomain.project(raw);
      const double w = weight_of(prox, heads_[b].key);
      wsum += w;
      for (int i = 0; i < m; ++i) acc[static_cast<size_t>(i)] += w * y[static_cast<size_t>(i)];
      if (static_cast<int>(b) == fallback) fallback_out = y;
    }
    if (wsum < 1e-300) return fallback_out;
    for (double& v : acc) v /= wsum;
    return acc;
  }

  Vec predict(std::span<const double> x) const { return safe_forward(x); }

  // Records F(x) on the tape; returns the output node.
  int record_output(Tape& tape, std::span<const double> x) const {
    const int fallback = head_index_at(x);
    const Vec d = distances(x);

    prox_nodes_.clear();
    for (size_t i = 0; i < constraints_.size(); ++i) {
      prox_nodes_.push_back(tape.proximity(d[i], prox_offset(static_cast<int>(i))));
    }
    weight_nodes_.clear();
    for (const ConstrainedPredictor& h : heads_) {
      weight_nodes_.push_back(tape.weight_product(prox_nodes_, h.key.bits()));
    }

    const int xn = tape.constant(x);
    const int zn = dense_forward_taped(tape, trunk_spec_, 0, xn);
    head_nodes_.clear();
    for (const ConstrainedPredictor& h : heads_) {
      const int raw = dense_forward_taped(tape, head_spec_, h.param_off, zn);
      head_nodes_.push_back(record_projection(tape, h.codomain, raw));
    }
    return tape.convex_combine(weight_nodes_, head_nodes_, fallback);
  }

  LossNodes record_loss(Tape& tape, std::span<const double> x, std::span<const double> target,
                        LossKind loss, double asym_weight) const {
    const int yn = record_output(tape, x);
    const int ln = loss == LossKind::kMse ? tape.mse_loss(yn, target)
                                          : tape.asym_loss(yn, target, asym_weight);
    return {ln, yn};
  }

  std::string constraint_hash;

 private:
  static int record_projection(Tape& tape, const ConvexOutputSet& set, int raw) {
    switch (set.kind()) {
      case OutputSetKind::kUnconstrained:
        return raw;
      case OutputSetKind::kInterval:
        return tape.interval_map(raw, set.lo(), set.hi());
      case OutputSetKind::kHalfLineAbove:
        return tape.half_line_above_map(raw, set.lo());
      case OutputSetKind::kHalfLineBelow:
        return tape.half_line_below_map(raw, set.hi());
      case OutputSetKind::kScoreNotHighest:
        return tape.score_not_highest(raw, set.unsafe_indices(), set.epsilon());
    }
    throw SpecError("record_projection: unknown output set kind");
  }

  friend SafePredictorModel build_safe_predictor(std::vector<ConstraintSpec> constraints,
                                                 InputRegion domain, DenseNetSpec trunk,
                                                 DenseNetSpec head, uint64_t seed,
                                                 Vec distance_scale);

  std::vector<ConstraintSpec> constraints_;
  InputRegion domain_;
  Vec scale_;
  OverlapPartition partition_;
  DenseNetSpec trunk_spec_;
  DenseNetSpec head_spec_;
  std::vector<ConstrainedPredictor> heads_;
  Vec params_;
  int prox_base_ = 0;

  // Recording scratch; models are immutable during concurrent inference, and
  // taped recording happens on the single training thread.
  mutable std::vector<int> prox_nodes_;
  mutable std::vector<int> weight_nodes_;
  mutable std::vector<int> head_nodes_;
};

// Enumerates the overlap partition, intersects codomains, lays out and
// initializes all parameters. Fails when some overlap has an empty codomain
// intersection, listing the offending keys.
inline SafePredictorModel build_safe_predictor(std::vector<ConstraintSpec> constraints,
                                               InputRegion domain, DenseNetSpec trunk,
                                               DenseNetSpec head, uint64_t seed,
                                               Vec distance_scale = {}) {
  trunk.validate();
  head.validate();
  if (domain.empty()) throw SpecError("build_safe_predictor: empty domain");
  if (trunk.input_dim() != domain.dim()) {
    throw SpecError("build_safe_predictor: trunk input dim must match domain");
  }
  if (head.input_dim() != trunk.output_dim()) {
    throw SpecError("build_safe_predictor: head input dim must match trunk latent dim");
  }
  validate_constraints(constraints, domain.dim());
  for (const ConstraintSpec& c : constraints) {
    c.output_set.validate_arity(head.output_dim());
  }
  if (distance_scale.empty()) distance_scale.assign(static_cast<size_t>(domain.dim()), 1.0);
  if (static_cast<int>(distance_scale.size()) != domain.dim()) {
    throw SpecError("build_safe_predictor: distance scale dimensionality mismatch");
  }

  SafePredictorModel m;
  m.constraints_ = std::move(constraints);
  m.domain_ = std::move(domain);
  m.scale_ = std::move(distance_scale);
  m.trunk_spec_ = std::move(trunk);
  m.head_spec_ = std::move(head);
  m.partition_ = enumerate_overlaps(m.constraints_, m.domain_);

  std::string infeasible;
  int off = m.trunk_spec_.param_count();
  for (const OverlapKey& key : m.partition_.keys) {
    std::vector<ConvexOutputSet> active;
    for (int i = 0; i < key.size(); ++i) {
      if (key.test(i)) active.push_back(m.constraints_[static_cast<size_t>(i)].output_set);
    }
    ConstrainedPredictor h;
    h.key = key;
    try {
      h.codomain = intersect_output_sets(active);
      h.codomain.validate_arity(m.head_spec_.output_dim());
    } catch (const SpecError&) {
      infeasible += infeasible.empty() ? key.to_string() : ", " + key.to_string();
      continue;
    }
    h.param_off = off;
    off += m.head_spec_.param_count();
    m.heads_.push_back(std::move(h));
  }
  if (!infeasible.empty()) {
    throw InfeasibleIntersection("build_safe_predictor: empty codomain for overlap keys: " +
                                 infeasible);
  }

  m.prox_base_ = off;
  m.params_.assign(static_cast<size_t>(off + 2 * m.constraint_count()), 0.0);

  Rng rng(seed);
  init_dense_params(m.trunk_spec_, m.params_, 0, rng);
  for (const ConstrainedPredictor& h : m.heads_) {
    init_dense_params(m.head_spec_, m.params_, h.param_off, rng);
  }
  const double diag = m.domain_.scaled_diagonal(m.scale_);
  const ProximityParams init = ProximityParams::from_sigmas(0.1 * diag, 2.0);
  for (int i = 0; i < m.constraint_count(); ++i) m.set_proximity(i, init);
  return m;
}

}  // namespace cshield
