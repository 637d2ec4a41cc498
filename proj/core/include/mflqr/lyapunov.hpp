#pragma once

#include "mflqr/system.hpp"

namespace mflqr {

/// Coefficients of the generalized Lyapunov map
///   dual:   X -> M1' X M1 + M2' X M2 + M3' X M3
///   primal: S -> M1 S M1' + M2 S M2' + M3 S M3'
struct OperatorTriple {
  MatrixXd M1, M2, M3;

  Eigen::Index dim() const { return M1.rows(); }
};

OperatorTriple make_triple(const ClosedLoopOps2n& ops);
OperatorTriple make_triple(const AugmentedOps& ops);

/// d^2 x d^2 matrix of the dual map acting on column-stacked X. The primal
/// map is represented by its transpose.
MatrixXd operator_matrix(const OperatorTriple& t);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Eigen::Ref<const MatrixXd>& T);

/// Spectral radius of the generalized Lyapunov operator of t.
double operator_radius(const OperatorTriple& t);

MatrixXd apply_dual(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& X);
MatrixXd apply_primal(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& S);

/// Gains count as stabilizing when the radius is below 1 - kStabilityMargin.
inline constexpr double kStabilityMargin = 1e-9;

struct StabilityReport {
  bool stabilizing = false;
  double radius = 0.0;
};

/// Mean-square stability of the 2n closed loop under g.
StabilityReport is_stabilizing(const MfSystem& sys, const GainPair& g);

/// Optional restriction of the unknown to blockdiag(X11, X22) where X11 is
/// split x split. Only valid when the map preserves that block pattern.
struct GleOptions {
  bool block_diagonal = false;
  Eigen::Index split = 0;
};

/// Solves X = sum Mi' X Mi + Q by a dense vectorized solve. Throws kUnstable
/// when the operator radius is >= 1 and kSingularSystem if the solve fails.
MatrixXd solve_gle_dual(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& Q,
                        const GleOptions& opts = {});

/// Solves S = sum Mi S Mi' + N.
MatrixXd solve_gle_primal(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& N,
                          const GleOptions& opts = {});

}  // namespace mflqr
