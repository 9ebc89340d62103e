#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cshield/dataset.hpp"
#include "cshield/safe_predictor.hpp"
#include "cshield/tape.hpp"

namespace cshield {

struct TrainConfig {
  double learning_rate = 0.0003;
  int batch_size = 1 << 16;
  int epochs = 500;
  uint64_t seed = 0;
  LossKind loss = LossKind::kMse;
  double asym_weight = 10.0;
  int check_every = 1;  // violation-callback cadence in epochs

  void validate() const {
    if (!(learning_rate > 0.0)) throw SpecError("TrainConfig: learning_rate must be positive");
    if (batch_size < 1) throw SpecError("TrainConfig: batch_size must be positive");
    if (epochs < 0) throw SpecError("TrainConfig: epochs must be nonnegative");
    if (check_every < 1) throw SpecError("TrainConfig: check_every must be positive");
  }
};

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw SpecError("loss_mse: arity mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    acc += r * r;
  }
  return acc / static_cast<double>(pred.size());
}

// Weighted squared error over advisory scores: undershooting the optimal
// advisory or overshooting any other advisory is penalized `weight` times as
// much, which pushes the learned ranking toward the optimal advisory.
inline double loss_asymmetric(std::span<const double> pred, std::span<const double> target,
                              double weight = 10.0) {
  if (pred.size() != 9 || target.size() != 9) {
    throw SpecError("loss_asymmetric: expects 9 advisory scores");
  }
  size_t optimal = 0;
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] > target[optimal]) optimal = i;
  }
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    const bool penalized = (i == optimal) ? r < 0.0 : r > 0.0;
    acc += (penalized ? weight : 1.0) * r * r;
  }
  return acc;
}

// Adam with bias correction.
struct AdamState {
  Vec m, v;
  int64_t t = 0;

  explicit AdamState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(Vec& params, std::span<const double> grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw SpecError("adam_step: size mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw SpecError("adam_step: non-finite gradient");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // percent argmax accuracy, or 100 * R^2 for regression
  long violations = 0;
};

struct TrainHooks {
  // Counts safety violations of the current model state; invoked at epoch 0
  // (initialization) and every `check_every` epochs thereafter.
  std::function<long()> count_violations;
  // Observes the model after each epoch's update.
  std::function<void(int epoch, const EpochMetrics&)> on_epoch;
};

// Deterministic mini-batch gradient descent over the model's flat parameter
// vector. Batch order is a fixed function of the seed and samples are
// accumulated sequentially, so identical configs produce bit-identical
// parameters. Per-epoch loss and accuracy are measured from the training
// pass itself (pre-update predictions).
template <typename Model>
std::vector<EpochMetrics> train(Model& model, const Dataset& ds, const TrainConfig& config,
                                const TrainHooks& hooks = {}) {
  config.validate();
  ds.validate();
  const size_t n = ds.size();
  if (n == 0) throw SpecError("train: empty dataset");
  const size_t batch = std::min<size_t>(static_cast<size_t>(config.batch_size), n);

  Vec grad(static_cast<size_t>(model.param_count()), 0.0);
  AdamState adam(grad.size());
  Tape tape;
  Rng shuffle_rng(config.seed);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  double ss_tot = 0.0;
  if (!ds.classification()) {
    double mean = 0.0;
    for (double v : ds.targets) mean += v;
    mean /= static_cast<double>(ds.targets.size());
    for (double v : ds.targets) ss_tot += (v - mean) * (v - mean);
  }

  std::vector<EpochMetrics> history;
  long last_violations = hooks.count_violations ? hooks.count_violations() : 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (batch < n) {
      for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(shuffle_rng.below(i));
        std::swap(order[i - 1], order[j]);
      }
    }

    double epoch_loss = 0.0;
    double ss_res = 0.0;
    long hits = 0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(n, start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      tape.bind(model.params(), grad);
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const size_t row = order[i];
        tape.reset();
        const LossNodes nodes =
            model.record_loss(tape, ds.input(row), ds.target(row), config.loss, config.asym_weight);
        batch_loss += tape.scalar(nodes.loss);
        const auto pred = tape.value(nodes.pred);
        if (ds.classification()) {
          size_t arg = 0;
          for (size_t j = 1; j < pred.size(); ++j) {
            if (pred[j] > pred[arg]) arg = j;
          }
          if (static_cast<int>(arg) == ds.strata[row]) ++hits;
        } else {
          const auto tgt = ds.target(row);
          for (size_t j = 0; j < pred.size(); ++j) ss_res += (pred[j] - tgt[j]) * (pred[j] - tgt[j]);
        }
        tape.backward(nodes.loss, inv);
      }
      epoch_loss += batch_loss;
      if (!std::isfinite(batch_loss)) {
        throw SpecError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_step(model.params(), grad, adam, config.learning_rate);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = epoch_loss / static_cast<double>(n);
    m.accuracy = ds.classification()
                     ? 100.0 * static_cast<double>(hits) / static_cast<double>(n)
                     : (ss_tot > 0.0 ? 100.0 * (1.0 - ss_res / ss_tot) : 100.0);
    if (hooks.count_violations && (epoch % config.check_every == 0 || epoch == config.epochs)) {
      last_violations = hooks.count_violations();
    }
    m.violations = last_violations;
    history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(epoch, m);
  }
  return history;
}

inline void save_metrics_csv(const std::vector<EpochMetrics>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss,accuracy,violations\n";
  for (const EpochMetrics& m : history) {
    out << m.epoch << "," << format_double(m.loss) << "," << format_double(m.accuracy) << ","
        << m.violations << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace cshield
