#include "mflqr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>

#include "support.hpp"

namespace mflqr {
namespace {

using testing::max_abs_diff;

const GainPair& optimal_gains() {
  static const GainPair g =
      run_pi(example::system(), example::weights(), example::initial_gains()).final_gains;
  return g;
}

InitialStateEnsemble example_augmented() {
  return example::initial_states().with_uniform_inputs(2, 5.0, 7);
}

MfSystem without_noise(const MfSystem& sys) {
  SystemMatrices s = sys.matrices();
  s.A2.setZero();
  s.A2bar.setZero();
  s.B2.setZero();
  s.B2bar.setZero();
  return MfSystem(std::move(s));
}

RolloutOptions options(int M, int H, std::uint64_t seed,
                       MeanMode mode = MeanMode::kSampleMean) {
  RolloutOptions o;
  o.horizon = M;
  o.rollouts = H;
  o.mean_mode = mode;
  o.noise.seed = seed;
  return o;
}

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

class ScopedThreads {
 public:
  explicit ScopedThreads(const char* value) {
    if (const char* old = std::getenv("MFLQR_THREADS")) old_ = old;
    setenv("MFLQR_THREADS", value, 1);
  }
  ~ScopedThreads() {
    if (old_.empty()) {
      unsetenv("MFLQR_THREADS");
    } else {
      setenv("MFLQR_THREADS", old_.c_str(), 1);
    }
  }

 private:
  std::string old_;
};

GTEST_TEST(Rollout, ZeroSystemVanishesAfterFirstStep) {
  const auto batches = rollout(MfSystem::zero(3, 2), example::initial_gains(),
                               example::initial_states(), options(5, 4, 1));
  for (const auto& b : batches) {
    for (int h = 0; h < b.H; ++h) {
      EXPECT_FALSE(b.x[h].col(0).isZero(0.0));
      EXPECT_TRUE(b.x[h].rightCols(b.M + 1).isZero(0.0));
    }
  }
}

GTEST_TEST(Rollout, NoiseFreeRolloutsFollowTheAntitheticPair) {
  const MfSystem sys = without_noise(example::system());
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example::initial_states();
  const auto batches = rollout(sys, g, ens, options(10, 6, 3));
  for (const auto& b : batches) {
    for (int h = 2; h < b.H; ++h) EXPECT_EQ(b.x[h], b.x[h % 2]);
    // Sample mean of the +/- pair is the exact mean trajectory.
    VectorXd mean = ens.means().col(b.l);
    const MatrixXd Acl = sys.A1hat() + sys.B1hat() * g.Fhat();
    for (int k = 0; k <= b.M + 1; ++k) {
      EXPECT_LT((b.mean_x.col(k) - mean).norm(), 1e-10 * (1.0 + mean.norm()));
      mean = Acl * mean;
    }
  }
  const InitialStateEnsemble point(ens.means(), MatrixXd::Zero(3, ens.r()));
  for (const auto& b : rollout(sys, g, point, options(10, 4, 3))) {
    for (int h = 1; h < b.H; ++h) EXPECT_EQ(b.x[h], b.x[0]);
    EXPECT_LT(max_abs_diff(b.mean_x, b.x[0]), 1e-12 * b.x[0].cwiseAbs().maxCoeff());
  }
}

GTEST_TEST(Rollout, PreconditionsRaise) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example::initial_states();
  auto code_of = [&](const RolloutOptions& o) -> std::optional<ErrorCode> {
    try {
      rollout(sys, g, ens, o);
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code_of(options(0, 4, 1)), ErrorCode::kInvalidHorizon);
  EXPECT_EQ(code_of(options(5, 1, 1)), ErrorCode::kInsufficientRollouts);
  EXPECT_EQ(code_of(options(5, 3, 1)), ErrorCode::kInsufficientRollouts);
  RolloutOptions free = options(5, 4, 1);
  free.free_initial_input = true;
  EXPECT_EQ(code_of(free), ErrorCode::kDimensionMismatch);
}

GTEST_TEST(Rollout, UnstableGainsReportDivergence) {
  const MfSystem sys = example::system();
  const GainPair g(MatrixXd::Constant(2, 3, 5.0), MatrixXd::Zero(2, 3));
  try {
    rollout(sys, g, example::initial_states(), options(200, 4, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kDivergence || e.code() == ErrorCode::kNonFiniteState);
    EXPECT_NE(std::string(e.what()).find("k="), std::string::npos);
  }
}

GTEST_TEST(Rollout, DeterministicAcrossThreadCounts) {
  const MfSystem sys = example::system();
  const InitialStateEnsemble ens = example_augmented();
  RolloutOptions o = options(20, 6, 42);
  o.free_initial_input = true;
  o.stream = 3;
  std::vector<TrajectoryBatch> one, many;
  {
    ScopedThreads t("1");
    one = rollout(sys, example::initial_gains(), ens, o);
  }
  {
    ScopedThreads t("4");
    many = rollout(sys, example::initial_gains(), ens, o);
  }
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t l = 0; l < one.size(); ++l) {
    for (int h = 0; h < o.rollouts; ++h) {
      EXPECT_EQ(one[l].x[h], many[l].x[h]);
      EXPECT_EQ(one[l].u[h], many[l].u[h]);
      EXPECT_EQ(one[l].w[h], many[l].w[h]);
    }
  }
  o.stream = 4;
  const auto other = rollout(sys, example::initial_gains(), ens, o);
  EXPECT_NE(other[0].w[0], one[0].w[0]);
}

GTEST_TEST(Rollout, NoiseMoments) {
  for (NoiseKind kind : {NoiseKind::kNormal, NoiseKind::kRademacher}) {
    RolloutOptions o = options(200, 50, 9);
    o.noise.kind = kind;
    const InitialStateEnsemble one(example::initial_states().means().leftCols(1),
                                   example::initial_states().deviations().leftCols(1));
    const auto b = rollout(example::system(), optimal_gains(), one, o).front();
    double sum = 0.0, sq = 0.0;
    const double count = static_cast<double>(o.rollouts) * o.horizon;
    for (int h = 0; h < o.rollouts; ++h) {
      for (int k = 0; k < o.horizon; ++k) {
        sum += b.w[h](k);
        sq += b.w[h](k) * b.w[h](k);
      }
    }
    const double mean = sum / count;
    const double var = sq / count - mean * mean;
    EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(count));
    EXPECT_LE(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / count));
  }
}

GTEST_TEST(Rollout, ExactMeanRecursion) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example::initial_states();
  const MatrixXd Acl = sys.A1hat() + sys.B1hat() * g.Fhat();
  for (const auto& b : rollout(sys, g, ens, options(30, 4, 2, MeanMode::kExactMean))) {
    EXPECT_EQ(b.mode, MeanMode::kExactMean);
    VectorXd mean = ens.means().col(b.l);
    for (int k = 0; k <= b.M + 1; ++k) {
      EXPECT_LT((b.mean_x.col(k) - mean).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + mean.norm()));
      EXPECT_LT((b.mean_u.col(k) - g.Fhat() * mean).cwiseAbs().maxCoeff(),
                1e-12 * (1.0 + mean.norm()));
      mean = Acl * mean;
    }
  }
}

// Centered second moments of one ensemble member, summed over the horizon,
// against the exact moment recursion of the 2n closed loop, elementwise within
// 3 standard errors.
GTEST_TEST(Rollout, SecondMomentsTrackExactRecursion) {
  const MfSystem sys = example::system();
  const GainPair& g = optimal_gains();
  const InitialStateEnsemble ens = example::initial_states();
  const InitialStateEnsemble one(ens.means().leftCols(1), ens.deviations().leftCols(1));
  const int H = 1000;
  const int M = 50;
  const auto b = rollout(sys, g, one, options(M, H, 5, MeanMode::kExactMean)).front();
  const OperatorTriple t = make_triple(closed_loop_2n(sys, g));
  const VectorXd mu = one.means().col(0), d = one.deviations().col(0);
  MatrixXd Y = block_diag(mu * mu.transpose(), d * d.transpose());
  MatrixXd exact = MatrixXd::Zero(3, 3);
  for (int k = 0; k <= M; ++k) {
    exact += Y.bottomRightCorner(3, 3);
    Y = apply_primal(t, Y);
  }
  // Antithetic pairs are the independent units.
  std::vector<MatrixXd> pairs(H / 2, MatrixXd::Zero(3, 3));
  for (int h = 0; h < H; ++h) {
    for (int k = 0; k <= M; ++k) {
      const VectorXd c = b.x[h].col(k) - b.mean_x.col(k);
      pairs[h / 2] += 0.5 * c * c.transpose();
    }
  }
  MatrixXd avg = MatrixXd::Zero(3, 3);
  for (const auto& p : pairs) avg += p;
  avg /= static_cast<double>(pairs.size());
  MatrixXd ss = MatrixXd::Zero(3, 3);
  for (const auto& p : pairs) ss += (p - avg).cwiseAbs2();
  const MatrixXd se = (ss / ((pairs.size() - 1.0) * pairs.size())).cwiseSqrt();
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      EXPECT_GT(se(i, j), 0.0);
      EXPECT_LE(std::abs(avg(i, j) - exact(i, j)), 3.0 * se(i, j)) << "(" << i << "," << j << ")";
    }
  }
}

GTEST_TEST(ExactMoments, ZeroHorizon) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example_augmented();
  const MomentSequence seq = exact_moments(sys, g, ens, 0);
  const MatrixXd aleph = ens.aleph(3);
  EXPECT_LT(max_abs_diff(seq.data.SM, aleph), 1e-12 * aleph.norm());
  EXPECT_LT(max_abs_diff(seq.data.WM, aleph * augmented_ops(sys, g).S1.transpose()),
            1e-12 * aleph.norm());
  EXPECT_EQ(seq.second_moments.size(), 1u);
}

GTEST_TEST(ExactMoments, LongHorizonReachesGleSolution) {
  const MfSystem sys = example::system();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example_augmented();
  const MomentSequence seq = exact_moments(sys, g, ens, 500);
  const MatrixXd S = solve_gle_primal(augmented_triple(sys, g), ens.aleph(3));
  EXPECT_LT(max_abs_diff(seq.data.SM, S), 1e-6);
}

GTEST_TEST(ExactMoments, ZeroDriftGivesZeroShiftedMoments) {
  SystemMatrices s = example::system().matrices();
  s.A1.setZero();
  s.A1bar.setZero();
  s.B1.setZero();
  s.B1bar.setZero();
  const MomentSequence seq =
      exact_moments(MfSystem(std::move(s)), example::initial_gains(), example_augmented(), 20);
  EXPECT_TRUE(seq.data.WM.isZero(0.0));
}

GTEST_TEST(ExactMoments, StateEnsembleRaises) {
  try {
    exact_moments(example::system(), example::initial_gains(), example::initial_states(), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

GTEST_TEST(DataMatrices, NoiseFreeMatchesExactMoments) {
  const MfSystem sys = without_noise(example::system());
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example_augmented();
  RolloutOptions o = options(40, 2, 1);
  o.free_initial_input = true;
  const DataMatrices d = data_matrices(rollout(sys, g, ens, o));
  const MomentSequence seq = exact_moments(sys, g, ens, 40);
  EXPECT_LT(max_abs_diff(d.SM, seq.data.SM), 1e-9 * seq.data.SM.norm());
  EXPECT_LT(max_abs_diff(d.WM, seq.data.WM), 1e-9 * seq.data.SM.norm());
  EXPECT_EQ(d.M, 40);
  EXPECT_EQ(d.H, 2);
  EXPECT_EQ(d.r, 20);
}

GTEST_TEST(DataMatrices, CrossBlocksZeroAndSymmetric) {
  RolloutOptions o = options(1, 4, 12);
  o.free_initial_input = true;
  const DataMatrices d =
      data_matrices(rollout(example::system(), example::initial_gains(), example_augmented(), o));
  EXPECT_TRUE(d.SM.topRightCorner(5, 5).isZero(0.0));
  EXPECT_TRUE(d.WM.bottomLeftCorner(5, 5).isZero(0.0));
  EXPECT_EQ(d.SM, d.SM.transpose());
  EXPECT_GT(min_eigenvalue(d.SM), 0.0);
}

GTEST_TEST(DataMatrices, ZeroDriftOneStepIsEnsembleMoment) {
  // With no dynamics beyond k = 0 the data sum is the empirical ensemble moment.
  RolloutOptions o = options(1, 2, 12);
  o.free_initial_input = true;
  const InitialStateEnsemble ens = example_augmented();
  const auto batches = rollout(MfSystem::zero(3, 2), GainPair::zero(3, 2), ens, o);
  MatrixXd aleph = ens.aleph(3);
  // The k = 1 term vanishes: states and feedback inputs are zero there.
  EXPECT_LT(max_abs_diff(data_matrices(batches).SM, aleph), 1e-12 * aleph.norm());
}

GTEST_TEST(DataMatrices, RankDeficientAndShortBatchesRaise) {
  const InitialStateEnsemble ens = example_augmented();
  const InitialStateEnsemble one(ens.means().leftCols(1), ens.deviations().leftCols(1));
  RolloutOptions o = options(3, 2, 1);
  o.free_initial_input = true;
  try {
    data_matrices(rollout(MfSystem::zero(3, 2), GainPair::zero(3, 2), one, o));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
  }
  EXPECT_THROW(data_matrices({}), Error);
}

// Evaluated at the optimal gains: at the starting gains the fourth moments of
// the multiplicative-noise loop are large and H = 30 samples are far too few.
double sampled_relative_error(int H, std::uint64_t seed, int M) {
  const MfSystem sys = example::system();
  const GainPair& g = optimal_gains();
  const InitialStateEnsemble ens = example_augmented();
  RolloutOptions o = options(M, H, seed);
  o.free_initial_input = true;
  const DataMatrices d = data_matrices(rollout(sys, g, ens, o));
  const MatrixXd exact = exact_moments(sys, g, ens, M).data.SM;
  return (d.SM - exact).norm() / exact.norm();
}

GTEST_TEST(DataMatrices, SampledWithinStatisticalBound) {
  const double med = median3(sampled_relative_error(30, 1, 100),
                             sampled_relative_error(30, 2, 100),
                             sampled_relative_error(30, 3, 100));
  EXPECT_LE(med, 0.35);
}

GTEST_TEST(DataMatrices, ErrorShrinksWithRollouts) {
  double prev = std::numeric_limits<double>::infinity();
  for (int H : {10, 100, 1000}) {
    const double med = median3(sampled_relative_error(H, 11, 50),
                               sampled_relative_error(H, 12, 50),
                               sampled_relative_error(H, 13, 50));
    EXPECT_LE(med, prev) << "H=" << H;
    prev = med;
  }
}

GTEST_TEST(McCost, ZeroEnsembleIsZero) {
  const InitialStateEnsemble zero(MatrixXd::Zero(3, 4), MatrixXd::Zero(3, 4));
  const CostEstimate c = mc_cost(example::system(), example::weights(), example::initial_gains(),
                                 zero, 20, 4, NoiseModel{});
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(c.std_error, 0.0);
}

GTEST_TEST(McCost, ZeroSystemIsFirstStageCost) {
  const WeightSpec w = example::weights();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example::initial_states();
  const CostEstimate c = mc_cost(MfSystem::zero(3, 2), w, g, ens, 10, 2, NoiseModel{});
  double expect = 0.0;
  for (int l = 0; l < ens.r(); ++l) {
    const VectorXd mu = ens.means().col(l), d = ens.deviations().col(l);
    const VectorXd umu = g.Fhat() * mu, ud = g.F() * d;
    expect += mu.dot(w.Qhat() * mu) + d.dot(w.Q() * d) + umu.dot(w.Rhat() * umu) +
              ud.dot(w.R() * ud);
  }
  EXPECT_NEAR(c.value, expect, 1e-10 * expect);
  EXPECT_NEAR(expected_cost(MfSystem::zero(3, 2), w, g, ens, 10), expect, 1e-10 * expect);
}

GTEST_TEST(McCost, MatchesAnalyticOptimalCost) {
  const MfSystem sys = example::system();
  const WeightSpec w = example::weights();
  const PiTrace tr = run_pi(sys, w, example::initial_gains());
  const InitialStateEnsemble ens = example::initial_states();
  const double J = optimal_cost(tr.final_values, ens.Z1(3), ens.Z2(3));
  const CostEstimate c = mc_cost(sys, w, tr.final_gains, ens, 200, 2000, NoiseModel{NoiseKind::kNormal, 21});
  EXPECT_GT(c.std_error, 0.0);
  EXPECT_LE(std::abs(c.value - J), 3.0 * c.std_error + c.truncation_tail)
      << "estimate " << c.value << " analytic " << J << " se " << c.std_error;
}

GTEST_TEST(McCost, TruncationTailBoundedByGeometricSeries) {
  const MfSystem sys = example::system();
  const WeightSpec w = example::weights();
  const GainPair g = example::initial_gains();
  const InitialStateEnsemble ens = example::initial_states();
  const CostEstimate c = mc_cost(sys, w, g, ens, 10, 2, NoiseModel{});
  const double total = expected_cost(sys, w, g, ens, -1);
  EXPECT_GT(c.truncation_tail, 0.0);
  EXPECT_NEAR(c.truncation_tail, total - expected_cost(sys, w, g, ens, 10), 1e-9 * total);
  // Tail after k = M is a fraction of the full cost decaying like radius^(M+1).
  const double rho = c.radius;
  EXPECT_LT(c.truncation_tail, total * 50.0 * std::pow(rho, 11) / (1.0 - rho));
  const CostEstimate longer = mc_cost(sys, w, g, ens, 40, 2, NoiseModel{});
  EXPECT_LT(longer.truncation_tail, c.truncation_tail);
}

GTEST_TEST(McCost, UnstableGainsRaise) {
  const GainPair g(MatrixXd::Constant(2, 3, 5.0), MatrixXd::Zero(2, 3));
  try {
    mc_cost(example::system(), example::weights(), g, example::initial_states(), 10, 2,
            NoiseModel{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotStabilizing);
  }
}

GTEST_TEST(IdentifyDrift, ExactRecoveryWithoutNoise) {
  const MfSystem sys = without_noise(example::system());
  RolloutOptions o = options(10, 2, 1);
  o.free_initial_input = true;
  const auto batches = rollout(sys, example::initial_gains(), example_augmented(), o);
  const DriftEstimate est = identify_drift(batches);
  EXPECT_LT(max_abs_diff(est.A1, sys.A1()), 1e-10);
  EXPECT_LT(max_abs_diff(est.A1bar, sys.A1bar()), 1e-10);
  EXPECT_LT(max_abs_diff(est.B1, sys.B1()), 1e-10);
  EXPECT_LT(max_abs_diff(est.B1bar, sys.B1bar()), 1e-10);
  EXPECT_LT(est.mean_residual, 1e-10);
  EXPECT_EQ(est.mean_samples, 20 * 11);
  EXPECT_EQ(est.deviation_samples, 20 * 11 * 2);
}

GTEST_TEST(IdentifyDrift, TooFewInitialConditionsRaise) {
  const MfSystem sys = without_noise(example::system());
  const InitialStateEnsemble ens = example::initial_states();
  const InitialStateEnsemble two(ens.means().leftCols(2), ens.deviations().leftCols(2));
  try {
    identify_drift(rollout(sys, example::initial_gains(), two, options(10, 2, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficientRegressor);
  }
}

GTEST_TEST(IdentifyDrift, NoisyEstimateIsClose) {
  RolloutOptions o = options(50, 30, 8);
  o.free_initial_input = true;
  const MfSystem sys = example::system();
  const DriftEstimate est =
      identify_drift(rollout(sys, example::initial_gains(), example_augmented(), o));
  EXPECT_LT((est.A1 - sys.A1()).norm(), 0.5);
  EXPECT_LT((est.A1 + est.A1bar - sys.A1hat()).norm(), 0.5);
}

GTEST_TEST(TrajectoryCsv, HeaderAndRows) {
  const InitialStateEnsemble ens = example::initial_states();
  const InitialStateEnsemble one(ens.means().leftCols(1), ens.deviations().leftCols(1));
  const auto batches = rollout(example::system(), example::initial_gains(), one, options(2, 2, 1));
  std::ostringstream os;
  write_trajectory_csv(os, batches);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "l,h,k,x_1,x_2,x_3,u_1,u_2,w\r");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 2 * 4);
  EXPECT_EQ(last.substr(0, 6), "0,1,3,");
  EXPECT_EQ(last.substr(last.size() - 2), ",\r");
}

}  // namespace
}  // namespace mflqr
