#include "cshield/net.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "cshield/benchmarks.hpp"
#include "cshield/serialize.hpp"
#include "cshield/tape.hpp"
#include "test_support.hpp"

using namespace cshield;
using cshield::testutil::fd_gradient;
using cshield::testutil::max_relative_error;
using cshield::testutil::TempDir;

namespace {

TEST(DenseForward, ZeroParamsGiveZeroOutput) {
  const DenseNetSpec spec{{3, 4, 2}, false};
  const Vec params(static_cast<size_t>(spec.param_count()), 0.0);
  Vec out, scratch;
  dense_forward(spec, params, 0, Vec{1.0, -2.0, 3.0}, out, scratch);
  EXPECT_EQ(out, (Vec{0.0, 0.0}));
}

TEST(DenseForward, SingleAffineLayer) {
  const DenseNetSpec spec{{1, 1}, false};
  const Vec params{2.0, -1.0};  // weight 2, bias -1
  Vec out, scratch;
  dense_forward(spec, params, 0, Vec{3.0}, out, scratch);
  EXPECT_DOUBLE_EQ(out[0], 5.0);
}

TEST(DenseForward, ReluKillsNegativePreactivation) {
  const DenseNetSpec spec{{1, 1, 1}, false};
  const Vec params{1.0, 0.0, 1.0, 0.0};  // hidden w=1 b=0, output w=1 b=0
  Vec out, scratch;
  dense_forward(spec, params, 0, Vec{-4.0}, out, scratch);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
}

TEST(DenseForward, DeterministicBitIdentical) {
  const DenseNetSpec spec{{2, 8, 8, 1}, false};
  StandardModel m(spec, 42);
  const Vec x{0.3, -1.2};
  const Vec a = m.predict(x);
  const Vec b = m.predict(x);
  EXPECT_EQ(a, b);
}

TEST(DenseForward, RecordingDoesNotChangeValues) {
  const DenseNetSpec spec{{2, 6, 3}, true};
  StandardModel m(spec, 9);
  Vec grad(m.params().size(), 0.0);
  Tape tape;
  tape.bind(m.params(), grad);
  const Vec x{0.5, -0.25};
  const int xn = tape.constant(x);
  const int yn = dense_forward_taped(tape, spec, 0, xn);
  Vec plain, scratch;
  dense_forward(spec, m.params(), 0, x, plain, scratch);
  const auto taped = tape.value(yn);
  ASSERT_EQ(taped.size(), plain.size());
  for (size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(taped[i], plain[i]);
}

TEST(DenseSpec, ParamAndNodeCounts) {
  const DenseNetSpec standard{{3, 45, 45, 45, 45, 45, 45, 9}, false};
  EXPECT_EQ(standard.node_count(), 270);
  const DenseNetSpec trunk{{3, 45, 45, 45, 45}, true};
  const DenseNetSpec head{{45, 45, 45, 9}, false};
  EXPECT_EQ(trunk.node_count() + 30 * head.node_count(), 2880);
  const DenseNetSpec small{{1, 10, 1}, false};
  EXPECT_EQ(small.param_count(), 31);
}

// Routes parameters into a vector node via an affine layer so each primitive
// can be finite-difference checked end to end.
struct PrimitiveHarness {
  explicit PrimitiveHarness(int r) : rows(r) {}
  int rows;

  double eval(const Vec& params, const std::function<int(Tape&, int)>& wrap, Vec* grad_out = nullptr) {
    Vec grad(params.size(), 0.0);
    Tape tape;
    tape.bind(params, grad);
    const Vec one{1.0};
    const int x = tape.constant(one);
    const int v = tape.affine(x, 0, rows, rows, 1);
    const int out = wrap(tape, v);
    const int scalar = tape.length(out) == 1 ? out : tape.sum(out);
    const double value = tape.scalar(scalar);
    tape.backward(scalar);
    if (grad_out) *grad_out = grad;
    return value;
  }
};

void check_primitive(const std::function<int(Tape&, int)>& wrap, const Vec& params, int rows,
                     double tol = 1e-6) {
  PrimitiveHarness h(rows);
  Vec analytic;
  h.eval(params, wrap, &analytic);
  const Vec fd = fd_gradient([&](const Vec& p) { return PrimitiveHarness(rows).eval(p, wrap); },
                             params);
  EXPECT_LE(max_relative_error(analytic, fd), tol);
}

TEST(TapePrimitives, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  auto rand_params = [&](int n) {
    Vec p(static_cast<size_t>(n));
    for (double& v : p) v = rng.uniform(-1.5, 1.5);
    return p;
  };
  const int r = 5;
  check_primitive([](Tape& t, int v) { return t.logistic_node(v); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.softplus_node(v); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.exp_node(v); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.interval_map(v, 0.7, 1.0); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.half_line_above_map(v, -0.5); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.half_line_below_map(v, 2.0); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.sum(v); }, rand_params(2 * r), r);
  check_primitive([](Tape& t, int v) { return t.product(v); }, rand_params(2 * r), r);

  // relu and min away from their kinks; power on a positive domain
  Vec p = rand_params(2 * r);
  for (int i = 0; i < r; ++i) {
    if (std::fabs(p[static_cast<size_t>(i)] + p[static_cast<size_t>(r + i)]) < 0.1) {
      p[static_cast<size_t>(i)] += 0.5;
    }
  }
  check_primitive([](Tape& t, int v) { return t.relu(v); }, p, r);
  check_primitive([](Tape& t, int v) { return t.min_reduce(v); }, p, r);
  Vec pos = rand_params(2 * r);
  for (double& v : pos) v = std::fabs(v) + 0.5;
  check_primitive([](Tape& t, int v) { return t.power(v, 2.7); }, pos, r);

  const std::vector<int> unsafe{1, 3};
  check_primitive([&](Tape& t, int v) { return t.score_not_highest(v, unsafe, 1e-4); },
                  rand_params(2 * r), r);

  const Vec target{0.3, -0.2, 0.8, 0.1, -0.4};
  check_primitive([&](Tape& t, int v) { return t.mse_loss(v, target); }, rand_params(2 * r), r);
  check_primitive([&](Tape& t, int v) { return t.asym_loss(v, target, 10.0); }, rand_params(2 * r), r);
}

TEST(TapePrimitives, MinTieBreaksToLowestIndex) {
  const Vec params{1.0, 1.0, 2.0, 0.0, 0.0, 0.0};  // v = (1, 1, 2)
  Vec grad(params.size(), 0.0);
  Tape tape;
  tape.bind(params, grad);
  const int x = tape.constant(Vec{1.0});
  const int v = tape.affine(x, 0, 3, 3, 1);
  const int m = tape.min_reduce(v);
  EXPECT_DOUBLE_EQ(tape.scalar(m), 1.0);
  tape.backward(m);
  EXPECT_DOUBLE_EQ(grad[0], 1.0);  // lowest tied index gets the subgradient
  EXPECT_DOUBLE_EQ(grad[1], 0.0);
  EXPECT_DOUBLE_EQ(grad[2], 0.0);
}

TEST(TapePrimitives, ProductBackwardHandlesZeros) {
  const Vec params{0.0, 2.0, 3.0, 0.0, 0.0, 0.0};  // v = (0, 2, 3)
  Vec grad(params.size(), 0.0);
  Tape tape;
  tape.bind(params, grad);
  const int x = tape.constant(Vec{1.0});
  const int v = tape.affine(x, 0, 3, 3, 1);
  const int p = tape.product(v);
  EXPECT_DOUBLE_EQ(tape.scalar(p), 0.0);
  tape.backward(p);
  EXPECT_DOUBLE_EQ(grad[0], 6.0);
  EXPECT_DOUBLE_EQ(grad[1], 0.0);
  EXPECT_DOUBLE_EQ(grad[2], 0.0);
}

TEST(FullNet, GradientMatchesFiniteDifferences) {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseNetSpec spec{{2, 7, 3}, false};
    StandardModel m(spec, 1000 + static_cast<uint64_t>(trial));
    const Vec x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const Vec target{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    Vec grad(m.params().size(), 0.0);
    Tape tape;
    tape.bind(m.params(), grad);
    const LossNodes nodes = m.record_loss(tape, x, target, LossKind::kMse, 10.0);
    tape.backward(nodes.loss);

    const Vec fd = fd_gradient(
        [&](const Vec& p) {
          StandardModel probe = m;
          probe.params() = p;
          Tape t2;
          Vec g2(p.size(), 0.0);
          t2.bind(probe.params(), g2);
          return t2.scalar(probe.record_loss(t2, x, target, LossKind::kMse, 10.0).loss);
        },
        m.params());
    EXPECT_LE(max_relative_error(grad, fd), 1e-4) << "trial " << trial;
  }
}

TEST(TapeErrors, ArityMismatches) {
  Vec params{1.0, 0.0};
  Vec grad(params.size(), 0.0);
  Tape tape;
  tape.bind(params, grad);
  const int x = tape.constant(Vec{1.0, 2.0});
  EXPECT_THROW(tape.affine(x, 0, 1, 1, 1), SpecError);
  const int y = tape.constant(Vec{1.0});
  EXPECT_THROW(tape.mse_loss(y, Vec{1.0, 2.0}), SpecError);
  EXPECT_THROW(tape.backward_seeded(y, Vec{1.0, 2.0}), SpecError);
}

TEST(ModelFiles, StandardRoundTripIsExact) {
  StandardModel m({{2, 5, 3}, false}, 77);
  m.constraint_hash = "fnv1a64:0000000000000000";
  TempDir dir("model_roundtrip");
  const std::string path = (dir.path() / "model.json").string();
  save_json_file(model_to_json(m), path);
  const StandardModel loaded = standard_model_from_json(parse_json_file(path));
  EXPECT_EQ(loaded.params(), m.params());
  const Vec x{0.123456789, -0.987654321};
  EXPECT_EQ(loaded.predict(x), m.predict(x));
}

TEST(ModelFiles, SafeRoundTripIsExact) {
  const auto bundle = gen_synthetic_2d(16, 3);
  auto m = build_safe_predictor(bundle.constraints, bundle.domain, bundle.trunk_spec,
                                bundle.head_spec, 5, bundle.distance_scale);
  const json cj = constraint_file_to_json(constraint_file_of(bundle));
  m.constraint_hash = canonical_json_hash(cj);
  // nudge proximity parameters away from their defaults
  m.set_proximity(0, ProximityParams::from_sigmas(0.2, 3.0));

  TempDir dir("safe_roundtrip");
  const std::string path = (dir.path() / "model.json").string();
  save_json_file(model_to_json(m), path);
  const SafePredictorModel loaded =
      safe_model_from_json(parse_json_file(path), constraint_file_from_json(cj));
  EXPECT_EQ(loaded.params(), m.params());
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vec x{rng.uniform01(), rng.uniform01()};
    EXPECT_EQ(loaded.safe_forward(x), m.safe_forward(x));
  }
}

TEST(ModelFiles, CorruptFieldNamesThePath) {
  StandardModel m({{1, 2, 1}, false}, 1);
  json j = model_to_json(m);
  j.erase("params");
  try {
    standard_model_from_json(j);
    FAIL() << "expected a parse error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("params"), std::string::npos);
  }
}

TEST(ModelFiles, VersionMismatchIsRejected) {
  StandardModel m({{1, 2, 1}, false}, 1);
  json j = model_to_json(m);
  j["format_version"] = 999;
  EXPECT_THROW(standard_model_from_json(j), IoError);
}

}  // namespace
