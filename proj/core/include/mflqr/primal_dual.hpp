#pragma once

#include <vector>

#include "mflqr/riccati.hpp"

namespace mflqr {

/// Sign applied to X22^{-1} X12' in the primal gain update. Negative so that
/// the update coincides with the Riccati gain -Ups^{-1} M.
inline constexpr int kPrimalUpdateSign = -1;

/// Block-diagonal moment variable blockdiag(Sbar, S) over the augmented
/// vector; each block is (n+m) x (n+m).
struct PrimalVar {
  MatrixXd Stilde;
  int n = 0;
  int m = 0;

  MatrixXd Sbar() const { return Stilde.topLeftCorner(n + m, n + m); }
  MatrixXd S() const { return Stilde.bottomRightCorner(n + m, n + m); }
};

/// Block-diagonal dual variable blockdiag(Xbar, X).
struct DualVar {
  MatrixXd Xtilde;
  int n = 0;
  int m = 0;

  MatrixXd Xbar() const { return Xtilde.topLeftCorner(n + m, n + m); }
  MatrixXd X() const { return Xtilde.bottomRightCorner(n + m, n + m); }
};

struct KktResiduals {
  double r1 = 0.0;  ///< primal equation residual
  double r2 = 0.0;  ///< smallest eigenvalue of Stilde
  double r3 = 0.0;  ///< dual equation residual
  double r4 = 0.0;  ///< stationarity in Fbar
  double r5 = 0.0;  ///< stationarity in F
  MatrixXd Psi;
};

struct PdRecord {
  int iteration = 0;
  GainPair gains;
  DualVar dual;
  GainPair next;
  double gain_change = 0.0;
  double radius = 0.0;
};

struct PdTrace {
  std::vector<PdRecord> records;
  GainPair final_gains;
  DualVar final_dual;
  bool converged = false;
  int primal_update_sign = kPrimalUpdateSign;

  int iterations() const { return static_cast<int>(records.size()); }
};

/// Augmented operator triple of gains g.
OperatorTriple augmented_triple(const MfSystem& sys, const GainPair& g);

/// Solves the augmented dual equation with weight blockdiag(Lambda+Lambdabar,
/// Lambda). Throws kNotStabilizing for non-stabilizing g.
DualVar dual_update(const MfSystem& sys, const WeightSpec& w, const GainPair& g);

/// F = -X22^{-1} X12', Fhat = -Xbar22^{-1} Xbar12', Fbar = Fhat - F. Throws
/// kSingular22Block when a 22 block is not positive definite.
GainPair primal_update(const DualVar& x);

struct RepairedUpdate {
  GainPair gains;
  bool repaired = false;
};

/// primal_update after lifting 22-block eigenvalues below `floor` to `floor`.
RepairedUpdate primal_update_repaired(const DualVar& x, double floor);

/// Algorithm alternating dual_update and primal_update. Throws
/// kNotStabilizing if g0 is not stabilizing.
PdTrace run_pd(const MfSystem& sys, const WeightSpec& w, const GainPair& g0,
               const IterationOptions& opts = {});

/// Constant Fmap1 Z2 Fmap1' + Fmap2 (Z1 - Z2) Fmap2' of the state-ensemble
/// primal equation.
MatrixXd state_ensemble_constant(const MfSystem& sys, const GainPair& g,
                                 const Eigen::Ref<const MatrixXd>& Z1,
                                 const Eigen::Ref<const MatrixXd>& Z2);

/// Solves Stilde = Theta(Stilde) + N at gains g.
PrimalVar primal_solution(const MfSystem& sys, const GainPair& g,
                          const Eigen::Ref<const MatrixXd>& N);

/// Tr(blockdiag(Lambda+Lambdabar, Lambda) Stilde).
double primal_objective(const PrimalVar& s, const WeightSpec& w);

/// Tr(N Xtilde).
double dual_objective(const DualVar& x, const Eigen::Ref<const MatrixXd>& N);

/// F = S12' S11^{-1}, Fbar = Sbar12' Sbar11^{-1} - F. Throws
/// kSingular11Block when an 11 block is not positive definite.
GainPair gains_from_primal(const PrimalVar& s);

KktResiduals kkt_residuals(const MfSystem& sys, const WeightSpec& w, const PrimalVar& s,
                           const GainPair& g, const DualVar& x,
                           const Eigen::Ref<const MatrixXd>& aleph);

/// Tr(LambdaTilde S) + Tr((Theta(S) + N - S) X) at gains g.
double lagrangian(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                  const PrimalVar& s, const DualVar& x,
                  const Eigen::Ref<const MatrixXd>& N);

/// J_P - J_D with J_P = primal_objective(s) and J_D = Tr(aleph Xtilde), the
/// Lagrangian once the dual equation holds. Nonnegative whenever x is dual
/// feasible for every stabilizing gain (weak duality).
double duality_gap(const WeightSpec& w, const Eigen::Ref<const MatrixXd>& aleph,
                   const PrimalVar& s, const DualVar& x);

}  // namespace mflqr
