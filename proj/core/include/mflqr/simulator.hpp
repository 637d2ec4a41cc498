#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "mflqr/primal_dual.hpp"

namespace mflqr {

enum class NoiseKind { kNormal, kRademacher };

/// Zero-mean, unit-variance scalar noise source.
struct NoiseModel {
  NoiseKind kind = NoiseKind::kNormal;
  std::uint64_t seed = 0;
};

/// How Ex_k and Eu_k enter the controller and dynamics.
enum class MeanMode {
  kSampleMean,  ///< average over the H coupled rollouts, recomputed every step
  kExactMean,   ///< deterministic mean recursion
};

struct RolloutOptions {
  int horizon = 100;  ///< M; states are produced for k = 0..M+1
  int rollouts = 30;  ///< H, must be even
  MeanMode mean_mode = MeanMode::kSampleMean;
  NoiseModel noise;
  std::uint64_t stream = 0;  ///< extra seed tag, e.g. the learning iteration
  /// Use the ensemble's input rows as u_0 instead of the feedback law.
  bool free_initial_input = false;
  double divergence_threshold = 1e8;
};

/// H rollouts from one ensemble member. Rollout h starts at
/// mean + s_h * deviation with s_h = +1 for even h and -1 for odd h.
struct TrajectoryBatch {
  int l = 0;
  int H = 0;
  int M = 0;
  MeanMode mode = MeanMode::kSampleMean;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<MatrixXd> x;  ///< per rollout, n x (M+2)
  std::vector<MatrixXd> u;  ///< per rollout, m x (M+2)
  std::vector<VectorXd> w;  ///< per rollout, M+1 noise samples
  MatrixXd mean_x;          ///< n x (M+2), mean used by the controller
  MatrixXd mean_u;          ///< m x (M+2)
};

/// Truncated second-moment sums of the augmented vector and their shifted
/// counterpart: SM = sum_{k<=M} E[V_k V_k'], WM = sum_{k<=M} E[V_k V_{k+1}'].
struct DataMatrices {
  MatrixXd SM;
  MatrixXd WM;
  int M = 0;
  int H = 0;
  int r = 0;
};

struct MomentSequence {
  std::vector<MatrixXd> second_moments;  ///< E[V_k V_k'], k = 0..M
  DataMatrices data;
};

struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Exact infinite-horizon cost minus exact cost truncated at M.
  double truncation_tail = 0.0;
  double radius = 0.0;
};

struct DriftEstimate {
  MatrixXd A1, A1bar, B1, B1bar;
  double mean_residual = 0.0;       ///< RMS residual of the mean regression
  double deviation_residual = 0.0;  ///< RMS residual of the centered regression
  long long mean_samples = 0;
  long long deviation_samples = 0;
};

/// Worker count for rollouts: MFLQR_THREADS if set, else hardware threads.
int simulation_threads();

/// Simulates every ensemble member (dimension n, or n+m with
/// free_initial_input). Members run in parallel; results do not depend on
/// the thread count. Throws kInvalidHorizon, kInsufficientRollouts,
/// kDivergence (state norm above threshold) or kNonFiniteState.
std::vector<TrajectoryBatch> rollout(const MfSystem& sys, const GainPair& g,
                                     const InitialStateEnsemble& ensemble,
                                     const RolloutOptions& opts);

/// Exact augmented moments from blockdiag(sum mu mu', sum d d') of an
/// augmented ensemble, propagated by the primal Lyapunov map.
MomentSequence exact_moments(const MfSystem& sys, const GainPair& g,
                             const InitialStateEnsemble& ensemble, int M);

/// Empirical SM, WM from sample-mean batches with mean/centered cross blocks
/// zeroed. Throws kInsufficientRollouts or kRankDeficient.
DataMatrices data_matrices(const std::vector<TrajectoryBatch>& batches);

/// Exact cost of a state ensemble truncated at M (M < 0 for infinite).
double expected_cost(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                     const InitialStateEnsemble& ensemble, int M);

/// Monte Carlo estimate of the ensemble cost truncated at M, in exact-mean
/// mode. Throws kNotStabilizing for non-stabilizing gains.
CostEstimate mc_cost(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                     const InitialStateEnsemble& ensemble, int M, int H,
                     const NoiseModel& noise);

/// Least-squares normal-equation accumulator for Y ~ Theta' Z.
class DriftRegression {
 public:
  DriftRegression(int regressors, int outputs);

  void add(const Eigen::Ref<const VectorXd>& z, const Eigen::Ref<const VectorXd>& y);

  long long samples() const { return count_; }

  /// Returns Theta' (outputs x regressors). Throws kRankDeficientRegressor.
  MatrixXd solve() const;

  /// Root-mean-square residual of a coefficient matrix.
  double rms_residual(const Eigen::Ref<const MatrixXd>& coef) const;

 private:
  MatrixXd ZtZ_, ZtY_, YtY_;
  long long count_ = 0;
};

/// Estimates the drift matrices from mean and centered one-step regressions.
DriftEstimate identify_drift(const std::vector<TrajectoryBatch>& batches);

/// Writes columns l,h,k,x_1..x_n,u_1..u_m,w.
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryBatch>& batches);

}  // namespace mflqr
