#include <gtest/gtest.h>

#include <cmath>

#include "mecoff/errors.hpp"
#include "mecoff/harness.hpp"
#include "mecoff/mlp.hpp"

using namespace mecoff;

TEST(Forward, ZeroParamsGiveZero) {
  MlpParams p(4, 6, 3);
  const std::vector<double> x{0.3, -1, 2, 0.5};
  const Vector out = mlp_forward(p, x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i], 0.0);
}

TEST(Forward, ScalarTanh) {
  MlpParams p(1, 1, 1);
  p.w1(0, 0) = 1.0;
  p.w2(0, 0) = 1.0;
  const std::vector<double> x{0.5};
  EXPECT_NEAR(mlp_forward(p, x)[0], 0.46211715726000976, 1e-15);
}

TEST(Forward, TanhMatchesStdTanh) {
  Matrix m(3, 4);
  m << -30, -2, -1e-9, 0, 1e-9, 0.5, 3, 40, -0.7, 0.7, 1e-300, -19;
  Matrix ref = m.array().tanh();
  detail::tanh_inplace(m);
  for (Eigen::Index i = 0; i < m.size(); ++i) EXPECT_NEAR(m.data()[i], ref.data()[i], 1e-15);
}

TEST(Forward, ZeroInputDependsOnlyOnBiases) {
  Rng rng(1);
  const MlpParams p = mlp_init(5, 8, 4, rng);
  const std::vector<double> x(5, 0.0);
  const Vector expected = p.w2 * p.b1.array().tanh().matrix() + p.b2;
  const Vector out = mlp_forward(p, x);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out[i], expected[i], 1e-14);
}

TEST(Forward, BatchMatchesSingle) {
  Rng rng(2);
  const MlpParams p = mlp_init(3, 7, 5, rng);
  Matrix xs(3, 4);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = uniform(rng, -1, 1);
  const Matrix out = mlp_forward_batch(p, xs);
  for (int c = 0; c < 4; ++c) {
    const std::vector<double> x(xs.col(c).data(), xs.col(c).data() + 3);
    const Vector single = mlp_forward(p, x);
    for (int r = 0; r < 5; ++r) EXPECT_NEAR(out(r, c), single[r], 1e-14);
  }
}

TEST(Forward, ShapeMismatchRejected) {
  MlpParams p(4, 6, 3);
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(mlp_forward(p, x), ContractViolation);
}

TEST(Init, UniformFanInBoundsAndDeterminism) {
  Rng a(3), b(3);
  const MlpParams p = mlp_init(14, 40, 35, a);
  const MlpParams q = mlp_init(14, 40, 35, b);
  EXPECT_EQ(p.w1, q.w1);
  EXPECT_EQ(p.b2, q.b2);
  EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), 1 / std::sqrt(14.0));
  EXPECT_LE(p.b1.cwiseAbs().maxCoeff(), 1 / std::sqrt(14.0));
  EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), 1 / std::sqrt(40.0));
  EXPECT_TRUE(p.all_finite());
}

TEST(Gradient, ZeroSignalZeroGradient) {
  Rng rng(4);
  const MlpParams p = mlp_init(3, 5, 2, rng);
  const std::vector<double> x{0.1, 0.2, 0.3}, s{0.0, 0.0};
  MlpParams g = mlp_gradient(p, x, s);
  g.for_each([](double& v) { EXPECT_EQ(v, 0.0); });
}

TEST(Gradient, OutputBiasGradientIsSignal) {
  Rng rng(5);
  const MlpParams p = mlp_init(3, 5, 2, rng);
  const std::vector<double> x{0.1, 0.2, 0.3}, s{0.7, -1.3};
  const MlpParams g = mlp_gradient(p, x, s);
  EXPECT_EQ(g.b2[0], 0.7);
  EXPECT_EQ(g.b2[1], -1.3);
}

TEST(Gradient, FiniteDifferenceAgreement) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto small = gradient_audit(14, 40, 35, seed);
    EXPECT_LT(small.max_relative_error, 1e-4);
    EXPECT_GT(small.compared, 2000u);
    EXPECT_LT(gradient_audit(14, 200, 35, seed).max_relative_error, 1e-4);
  }
}

TEST(Gradient, SparseMatchesDense) {
  Rng rng(6);
  const MlpParams p = mlp_init(4, 9, 6, rng);
  Matrix xs(4, 5);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = uniform(rng, -1, 1);
  const std::vector<int> slot{0, 3, 3, 5, 1};
  const std::vector<double> err{0.5, -0.25, 1.0, 2.0, -1.5};
  Matrix signal = Matrix::Zero(6, 5);
  for (int i = 0; i < 5; ++i) signal(slot[i], i) = err[i];
  const MlpParams dense = mlp_gradient_batch(p, xs, signal);
  const MlpParams sparse = mlp_gradient_sparse(p, xs, mlp_hidden(p, xs), slot, err);
  EXPECT_LT((dense.w1 - sparse.w1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((dense.b1 - sparse.b1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((dense.w2 - sparse.w2).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((dense.b2 - sparse.b2).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Rng rng(7);
  MlpParams p = mlp_init(3, 4, 2, rng);
  const MlpParams before = p;
  AdamState st(p, {});
  adam_step(p, st, p.zeros_like());
  EXPECT_EQ(p.w1, before.w1);
  EXPECT_EQ(p.b2, before.b2);
  EXPECT_EQ(st.steps, 1);
}

TEST(Adam, FirstStepHasStepSizeMagnitude) {
  MlpParams p(1, 1, 1);
  AdamState st(p, {1e-3, 0.9, 0.999, 1e-8});
  MlpParams g = p.zeros_like();
  g.b2[0] = 1.0;
  adam_step(p, st, g);
  EXPECT_NEAR(p.b2[0], -1e-3, 1e-10);
  EXPECT_EQ(p.w1(0, 0), 0.0);
}

TEST(Adam, Deterministic) {
  Rng rng(8);
  MlpParams p = mlp_init(3, 4, 2, rng);
  MlpParams g = mlp_init(3, 4, 2, rng);
  MlpParams a = p, b = p;
  AdamState sa(p, {}), sb(p, {});
  adam_step(a, sa, g);
  adam_step(b, sb, g);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(sa.v.w2, sb.v.w2);
}

TEST(Adam, DescendsOnRegression) {
  Rng rng(9);
  MlpParams p = mlp_init(6, 20, 3, rng);
  Matrix xs(6, 64), ys(3, 64);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < ys.size(); ++i) ys.data()[i] = uniform(rng, -1, 1);
  auto loss = [&] { return (mlp_forward_batch(p, xs) - ys).squaredNorm() / 64; };
  AdamState st(p, {1e-2, 0.9, 0.999, 1e-8});
  const double start = loss();
  for (int i = 0; i < 100; ++i) {
    const Matrix err = (mlp_forward_batch(p, xs) - ys) / 64.0;
    adam_step(p, st, mlp_gradient_batch(p, xs, err));
  }
  EXPECT_LT(loss(), 0.5 * start);
}

TEST(Checkpoint, JsonRoundTrip) {
  Rng rng(10);
  MlpParams p = mlp_init(3, 4, 2, rng);
  AdamState st(p, {2e-3, 0.8, 0.99, 1e-7});
  adam_step(p, st, mlp_init(3, 4, 2, rng));
  const MlpParams back = mlp_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(back.w1, p.w1);
  EXPECT_EQ(back.b1, p.b1);
  EXPECT_EQ(back.w2, p.w2);
  EXPECT_EQ(back.b2, p.b2);
  const AdamState sb = adam_from_json(nlohmann::json::parse(to_json(st).dump()));
  EXPECT_EQ(sb.steps, 1);
  EXPECT_EQ(sb.m.w1, st.m.w1);
  EXPECT_EQ(sb.v.b2, st.v.b2);
  EXPECT_EQ(sb.hyper.beta2, 0.99);
}

TEST(Checkpoint, WrongLengthRejected) {
  auto j = to_json(MlpParams(2, 2, 2));
  j["w1"].erase(0);
  EXPECT_THROW(mlp_from_json(j), ConfigError);
}
