#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mflqr/lyapunov.hpp"

namespace mflqr {

/// Coupled Riccati values: P weighs the centered state, Pbar the mean.
struct ValuePair {
  MatrixXd P;
  MatrixXd Pbar;
};

struct RiccatiTerms {
  MatrixXd Ups1;  ///< R + B1' P B1 + B2' P B2
  MatrixXd M1;    ///< B1' P A1 + B2' P A2
  MatrixXd Ups2;  ///< Rhat + B1h' Pbar B1h + B2h' P B2h
  MatrixXd M2;    ///< B1h' Pbar A1h + B2h' P A2h
  double min_eig_Ups1 = 0.0;
  double min_eig_Ups2 = 0.0;
};

/// Q-function kernels over (x, u): X for centered parts, Xbar for means.
struct QMatrices {
  MatrixXd X;
  MatrixXd Xbar;
};

/// Named blocks of an (n+m) x (n+m) kernel.
inline auto block11(const MatrixXd& K, int n) { return K.topLeftCorner(n, n); }
inline auto block12(const MatrixXd& K, int n) {
  return K.topRightCorner(n, K.cols() - n);
}
inline auto block22(const MatrixXd& K, int n) {
  return K.bottomRightCorner(K.rows() - n, K.cols() - n);
}

struct GareResidual {
  MatrixXd R1;  ///< residual of the centered equation
  MatrixXd R2;  ///< residual of the mean equation

  double norm() const { return R1.norm() + R2.norm(); }
};

struct PiRecord {
  int iteration = 0;
  GainPair gains;   ///< gains evaluated at this iteration
  ValuePair values; ///< their cost kernels
  GainPair next;    ///< improved gains
  double gain_change = 0.0;
  double radius = 0.0;
};

struct PiTrace {
  std::vector<PiRecord> records;
  GainPair final_gains;
  ValuePair final_values;
  bool converged = false;

  int iterations() const { return static_cast<int>(records.size()); }
};

struct IterationOptions {
  double eps = 1e-10;
  int max_iter = 500;
};

RiccatiTerms riccati_terms(const MfSystem& sys, const WeightSpec& w, const ValuePair& v);

/// F = -Ups1^{-1} M1, Fbar = -(Ups2^{-1} M2 - Ups1^{-1} M1). Throws
/// kSingularUps when either Ups is not positive definite.
GainPair gain_from_values(const MfSystem& sys, const WeightSpec& w, const ValuePair& v);

GareResidual gare_residual(const MfSystem& sys, const WeightSpec& w, const ValuePair& v);

/// Stage weight blockdiag(Qh + Fh' Rh Fh, Q + F' R F) of the 2n closed loop.
MatrixXd closed_loop_weight(const WeightSpec& w, const GainPair& g);

/// Cost kernels of gains g from the block-diagonal 2n Lyapunov equation.
/// Throws kNotStabilizing when g is not mean-square stabilizing.
ValuePair policy_evaluation(const MfSystem& sys, const WeightSpec& w, const GainPair& g);

/// Policy iteration. Throws kNotStabilizing if g0 is not stabilizing. An
/// exhausted iteration budget is reported through converged == false.
PiTrace run_pi(const MfSystem& sys, const WeightSpec& w, const GainPair& g0,
               const IterationOptions& opts = {});

/// Jacobi sweeps of both Riccati right-hand sides from P = Pbar = 0. Throws
/// kDivergence once a norm exceeds 1e12.
ValuePair value_iteration_oracle(const MfSystem& sys, const WeightSpec& w, int sweeps);

QMatrices q_matrices(const MfSystem& sys, const WeightSpec& w, const ValuePair& v);

/// Expected cost over an initial ensemble with sum E[z z'] = Z1 and
/// sum Ez Ez' = Z2: Tr(Z2 Pbar) + Tr((Z1 - Z2) P).
double optimal_cost(const ValuePair& v, const Eigen::Ref<const MatrixXd>& Z1,
                    const Eigen::Ref<const MatrixXd>& Z2);

struct GainSearchOptions {
  int attempts = 2000;
  double initial_scale = 1.0;
  double shrink = 0.7;
  int attempts_per_scale = 50;
  std::uint64_t seed = 0;
};

/// Samples gains from a shrinking zero-mean Gaussian until one stabilizes.
/// Zero gains are tried first.
std::optional<GainPair> find_stabilizing_gains(const MfSystem& sys,
                                               const GainSearchOptions& opts = {});

}  // namespace mflqr
