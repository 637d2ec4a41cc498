#include "mflqr/system.hpp"

#include "support.hpp"

namespace mflqr {
namespace {

using testing::scalar;

MfSystem scalar_system(double a, double b) {
  const MatrixXd z = scalar(0.0);
  return MfSystem({scalar(a), z, z, z, scalar(b), z, z, z});
}

GTEST_TEST(Weights, ZeroStateWeightIsValidBoundary) {
  const WeightSpec w(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Identity(1, 1),
                     MatrixXd::Zero(1, 1));
  const WeightReport rep = validate_weights(w);
  EXPECT_TRUE(rep.valid);
  EXPECT_NEAR(rep.min_eig_Q, 0.0, 1e-15);
}

GTEST_TEST(Weights, ExampleWeightsAreValid) {
  const WeightReport rep = validate_weights(example::weights());
  EXPECT_TRUE(rep.valid);
  EXPECT_NEAR(rep.min_eig_Q, 0.0, 1e-15);
  EXPECT_NEAR(rep.min_eig_Qhat, 1.0, 1e-12);
  EXPECT_NEAR(rep.min_eig_R, 1.0, 1e-12);
  EXPECT_NEAR(rep.min_eig_Rhat, 2.0, 1e-12);
}

GTEST_TEST(Weights, NegativeInputWeightRejected) {
  const WeightSpec w(MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1), -MatrixXd::Identity(1, 1),
                     MatrixXd::Zero(1, 1));
  EXPECT_FALSE(weight_report(w).valid);
  try {
    validate_weights(w);
    FAIL() << "expected IndefiniteWeight";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndefiniteWeight);
    EXPECT_NE(std::string(e.what()).find("R > 0"), std::string::npos);
  }
}

GTEST_TEST(Weights, IndefiniteMeanInputWeightRejected) {
  const WeightSpec w(MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1),
                     scalar(-2.0));
  try {
    validate_weights(w);
    FAIL() << "expected IndefiniteWeight";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndefiniteWeight);
    EXPECT_NE(std::string(e.what()).find("R + Rbar"), std::string::npos);
  }
}

GTEST_TEST(Weights, ShapeAndSymmetryChecked) {
  EXPECT_THROW(WeightSpec(MatrixXd::Identity(2, 2), MatrixXd::Zero(3, 3),
                          MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1)),
               Error);
  MatrixXd q(2, 2);
  q << 1, 2, 0, 1;
  EXPECT_THROW(WeightSpec(q, MatrixXd::Zero(2, 2), MatrixXd::Identity(1, 1),
                          MatrixXd::Zero(1, 1)),
               Error);
}

GTEST_TEST(Weights, LambdaTildeLayout) {
  const WeightSpec w = example::weights();
  const MatrixXd Lt = w.Lambda_tilde();
  ASSERT_EQ(Lt.rows(), 10);
  EXPECT_EQ(Lt.block(0, 0, 3, 3), w.Qhat());
  EXPECT_EQ(Lt.block(3, 3, 2, 2), w.Rhat());
  EXPECT_EQ(Lt.block(5, 5, 3, 3), w.Q());
  EXPECT_EQ(Lt.block(8, 8, 2, 2), w.R());
  EXPECT_EQ(Lt.block(0, 5, 5, 5), MatrixXd::Zero(5, 5));
}

GTEST_TEST(System, DimensionMismatchRejected) {
  SystemMatrices s = MfSystem::zero(2, 1).matrices();
  s.B2 = MatrixXd::Zero(3, 1);
  try {
    MfSystem bad(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

GTEST_TEST(System, HatsAreLinear) {
  std::mt19937_64 gen(3);
  auto rand_sys = [&] {
    SystemMatrices s;
    s.A1 = testing::random_matrix(gen, 3, 3);
    s.A1bar = testing::random_matrix(gen, 3, 3);
    s.A2 = testing::random_matrix(gen, 3, 3);
    s.A2bar = testing::random_matrix(gen, 3, 3);
    s.B1 = testing::random_matrix(gen, 3, 2);
    s.B1bar = testing::random_matrix(gen, 3, 2);
    s.B2 = testing::random_matrix(gen, 3, 2);
    s.B2bar = testing::random_matrix(gen, 3, 2);
    return MfSystem(s);
  };
  const MfSystem a = rand_sys();
  const MfSystem b = rand_sys();
  const MfSystem c({a.A1() + b.A1(), a.A1bar() + b.A1bar(), a.A2() + b.A2(),
                    a.A2bar() + b.A2bar(), a.B1() + b.B1(), a.B1bar() + b.B1bar(),
                    a.B2() + b.B2(), a.B2bar() + b.B2bar()});
  EXPECT_LT(testing::max_abs_diff(c.A1hat(), a.A1hat() + b.A1hat()), 1e-14);
  EXPECT_LT(testing::max_abs_diff(c.A2hat(), a.A2hat() + b.A2hat()), 1e-14);
  EXPECT_LT(testing::max_abs_diff(c.B1hat(), a.B1hat() + b.B1hat()), 1e-14);
  EXPECT_LT(testing::max_abs_diff(c.B2hat(), a.B2hat() + b.B2hat()), 1e-14);
}

GTEST_TEST(ClosedLoop, ZeroSystemGivesZeroMatrices) {
  const MfSystem sys = MfSystem::zero(3, 2);
  std::mt19937_64 gen(1);
  const GainPair g(testing::random_matrix(gen, 2, 3), testing::random_matrix(gen, 2, 3));
  const ClosedLoopOps2n ops = closed_loop_2n(sys, g);
  EXPECT_TRUE(ops.A1cl.isZero(0.0));
  EXPECT_TRUE(ops.A2cl.isZero(0.0));
  EXPECT_TRUE(ops.A3cl.isZero(0.0));
}

GTEST_TEST(ClosedLoop, ScalarDeterministic) {
  const double a = 0.7, b = 0.5, f = -0.4;
  const ClosedLoopOps2n ops =
      closed_loop_2n(scalar_system(a, b), GainPair(scalar(f), scalar(0.0)));
  MatrixXd expect = MatrixXd::Zero(2, 2);
  expect.diagonal().setConstant(a + b * f);
  EXPECT_EQ(ops.A1cl, expect);
  EXPECT_TRUE(ops.A2cl.isZero(0.0));
  EXPECT_TRUE(ops.A3cl.isZero(0.0));
}

GTEST_TEST(ClosedLoop, ExampleBlockPattern) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const ClosedLoopOps2n ops = closed_loop_2n(sys, g);
  EXPECT_EQ(ops.A1cl.topLeftCorner(3, 3), sys.A1hat() + sys.B1hat() * g.Fhat());
  EXPECT_EQ(ops.A1cl.bottomRightCorner(3, 3), sys.A1() + sys.B1() * g.F());
  EXPECT_TRUE(ops.A1cl.topRightCorner(3, 3).isZero(0.0));
  EXPECT_TRUE(ops.A1cl.bottomLeftCorner(3, 3).isZero(0.0));
  EXPECT_EQ(ops.A2cl.bottomRightCorner(3, 3), sys.A2() + sys.B2() * g.F());
  EXPECT_TRUE(ops.A2cl.topRows(3).isZero(0.0));
  EXPECT_TRUE(ops.A2cl.bottomLeftCorner(3, 3).isZero(0.0));
  EXPECT_EQ(ops.A3cl.bottomLeftCorner(3, 3), sys.A2hat() + sys.B2hat() * g.Fhat());
  EXPECT_TRUE(ops.A3cl.topRows(3).isZero(0.0));
  EXPECT_TRUE(ops.A3cl.bottomRightCorner(3, 3).isZero(0.0));
}

GTEST_TEST(Augmented, ZeroSystemInjections) {
  const MfSystem sys = MfSystem::zero(3, 2);
  std::mt19937_64 gen(2);
  const GainPair g(testing::random_matrix(gen, 2, 3), testing::random_matrix(gen, 2, 3));
  const AugmentedOps ops = augmented_ops(sys, g);
  EXPECT_TRUE(ops.S1.isZero(0.0));
  EXPECT_TRUE(ops.S2.isZero(0.0));
  EXPECT_TRUE(ops.S3.isZero(0.0));
  MatrixXd F1 = MatrixXd::Zero(10, 3), F2 = MatrixXd::Zero(10, 3);
  F1.topRows(3).setIdentity();
  F1.middleRows(3, 2) = g.Fhat();
  F2.middleRows(5, 3).setIdentity();
  F2.bottomRows(2) = g.F();
  EXPECT_EQ(ops.Fmap1, F1);
  EXPECT_EQ(ops.Fmap2, F2);
}

GTEST_TEST(Augmented, ScalarHandExpansion) {
  const double a = 0.7, b = 0.5, f = -0.4;
  const AugmentedOps ops = augmented_ops(scalar_system(a, b), GainPair(scalar(f), scalar(0.0)));
  MatrixXd blk(2, 2);
  blk << a, b, f * a, f * b;
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect.topLeftCorner(2, 2) = blk;
  expect.bottomRightCorner(2, 2) = blk;
  EXPECT_LT(testing::max_abs_diff(ops.S1, expect), 1e-15);
}

GTEST_TEST(Augmented, ExampleBlockPatternAndStateExtraction) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const AugmentedOps ops = augmented_ops(sys, g);
  EXPECT_TRUE(ops.S1.topRightCorner(5, 5).isZero(0.0));
  EXPECT_TRUE(ops.S1.bottomLeftCorner(5, 5).isZero(0.0));
  EXPECT_TRUE(ops.S2.topRows(5).isZero(0.0));
  EXPECT_TRUE(ops.S2.bottomLeftCorner(5, 5).isZero(0.0));
  EXPECT_TRUE(ops.S3.topRows(5).isZero(0.0));
  EXPECT_TRUE(ops.S3.bottomRightCorner(5, 5).isZero(0.0));
  EXPECT_EQ(ops.S1.block(0, 0, 3, 3), sys.A1hat());
  EXPECT_EQ(ops.S1.block(0, 3, 3, 2), sys.B1hat());
  EXPECT_LT(testing::max_abs_diff(ops.S1.block(3, 0, 2, 3), g.Fhat() * sys.A1hat()), 1e-15);

  // Extracting the state rows of each block and injecting through the gain
  // maps recovers the 2n closed-loop matrices.
  MatrixXd E = MatrixXd::Zero(6, 10);
  E.block(0, 0, 3, 3).setIdentity();
  E.block(3, 5, 3, 3).setIdentity();
  MatrixXd inject(10, 6);
  inject << ops.Fmap1, ops.Fmap2;
  const ClosedLoopOps2n cl = closed_loop_2n(sys, g);
  EXPECT_LT(testing::max_abs_diff(E * ops.S1 * inject, cl.A1cl), 1e-14);
  EXPECT_LT(testing::max_abs_diff(E * ops.S2 * inject, cl.A2cl), 1e-14);
  EXPECT_LT(testing::max_abs_diff(E * ops.S3 * inject, cl.A3cl), 1e-14);
}

GTEST_TEST(Gains, ShapeMismatchRejected) {
  EXPECT_THROW(GainPair(MatrixXd::Zero(2, 3), MatrixXd::Zero(3, 2)), Error);
  EXPECT_THROW(closed_loop_2n(example::system(), GainPair::zero(2, 2)), Error);
}

GTEST_TEST(Ensemble, MomentSums) {
  MatrixXd mu(2, 2), d(2, 2);
  mu << 1, 0, 0, 2;
  d << 0.5, 0, 0, 0.1;
  const InitialStateEnsemble ens(mu, d);
  MatrixXd z2(2, 2);
  z2 << 1, 0, 0, 4;
  EXPECT_LT(testing::max_abs_diff(ens.Z2(2), z2), 1e-15);
  MatrixXd z1 = z2;
  z1(0, 0) += 0.25;
  z1(1, 1) += 0.01;
  EXPECT_LT(testing::max_abs_diff(ens.Z1(2), z1), 1e-15);
  EXPECT_THROW(ens.aleph(2), Error);
}

GTEST_TEST(Ensemble, UniformInputsAreSeededAndBounded) {
  const InitialStateEnsemble ens = example::initial_states();
  const InitialStateEnsemble a = ens.with_uniform_inputs(2, 1.0, 7);
  const InitialStateEnsemble b = ens.with_uniform_inputs(2, 1.0, 7);
  const InitialStateEnsemble c = ens.with_uniform_inputs(2, 1.0, 8);
  ASSERT_EQ(a.dim(), 5);
  EXPECT_EQ(a.means(), b.means());
  EXPECT_EQ(a.deviations(), b.deviations());
  EXPECT_NE(a.means(), c.means());
  EXPECT_LE(a.means().bottomRows(2).cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(a.means().topRows(3), ens.means());
  const MatrixXd aleph = a.aleph(3);
  EXPECT_TRUE(aleph.topRightCorner(5, 5).isZero(0.0));
  EXPECT_GT(min_eigenvalue(aleph), 0.0);
}

}  // namespace
}  // namespace mflqr
