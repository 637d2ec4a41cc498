#pragma once

#include <cstdint>
#include <vector>

#include "mflqr/linalg.hpp"

namespace mflqr {

/// The eight coefficient matrices of
///   x+ = (A1 x + A1bar Ex + B1 u + B1bar Eu)
///      + (A2 x + A2bar Ex + B2 u + B2bar Eu) w.
struct SystemMatrices {
  MatrixXd A1, A1bar, A2, A2bar;
  MatrixXd B1, B1bar, B2, B2bar;
};

/// Mean-field system with scalar multiplicative noise. Dimensions and
/// finiteness are checked on construction; hat matrices are derived on access.
class MfSystem {
 public:
  explicit MfSystem(SystemMatrices mats);

  static MfSystem zero(int n, int m);

  int n() const { return n_; }
  int m() const { return m_; }
  const SystemMatrices& matrices() const { return mats_; }

  const MatrixXd& A1() const { return mats_.A1; }
  const MatrixXd& A1bar() const { return mats_.A1bar; }
  const MatrixXd& A2() const { return mats_.A2; }
  const MatrixXd& A2bar() const { return mats_.A2bar; }
  const MatrixXd& B1() const { return mats_.B1; }
  const MatrixXd& B1bar() const { return mats_.B1bar; }
  const MatrixXd& B2() const { return mats_.B2; }
  const MatrixXd& B2bar() const { return mats_.B2bar; }

  MatrixXd A1hat() const { return mats_.A1 + mats_.A1bar; }
  MatrixXd A2hat() const { return mats_.A2 + mats_.A2bar; }
  MatrixXd B1hat() const { return mats_.B1 + mats_.B1bar; }
  MatrixXd B2hat() const { return mats_.B2 + mats_.B2bar; }

 private:
  SystemMatrices mats_;
  int n_;
  int m_;
};

/// Cost weights Q, Qbar (n x n) and R, Rbar (m x m). Symmetry and shape are
/// checked on construction; definiteness is checked by validate_weights().
class WeightSpec {
 public:
  WeightSpec(MatrixXd Q, MatrixXd Qbar, MatrixXd R, MatrixXd Rbar);

  int n() const { return static_cast<int>(Q_.rows()); }
  int m() const { return static_cast<int>(R_.rows()); }

  const MatrixXd& Q() const { return Q_; }
  const MatrixXd& Qbar() const { return Qbar_; }
  const MatrixXd& R() const { return R_; }
  const MatrixXd& Rbar() const { return Rbar_; }

  MatrixXd Qhat() const { return Q_ + Qbar_; }
  MatrixXd Rhat() const { return R_ + Rbar_; }
  /// blockdiag(Q, R).
  MatrixXd Lambda() const;
  /// blockdiag(Qbar, Rbar).
  MatrixXd Lambdabar() const;
  /// blockdiag(Lambda + Lambdabar, Lambda), the augmented stage weight.
  MatrixXd Lambda_tilde() const;

 private:
  MatrixXd Q_, Qbar_, R_, Rbar_;
};

struct WeightReport {
  double min_eig_Q = 0.0;
  double min_eig_Qhat = 0.0;
  double min_eig_R = 0.0;
  double min_eig_Rhat = 0.0;
  bool valid = false;
};

/// Eigenvalue report without throwing.
WeightReport weight_report(const WeightSpec& w);

/// Requires Q, Q+Qbar PSD and R, R+Rbar positive definite. Throws
/// kIndefiniteWeight naming the failed condition and its eigenvalue.
WeightReport validate_weights(const WeightSpec& w);

/// Feedback u = F x + Fbar Ex.
class GainPair {
 public:
  GainPair() = default;
  GainPair(MatrixXd F, MatrixXd Fbar);

  static GainPair zero(int n, int m);

  const MatrixXd& F() const { return F_; }
  const MatrixXd& Fbar() const { return Fbar_; }
  MatrixXd Fhat() const { return F_ + Fbar_; }

  int n() const { return static_cast<int>(F_.cols()); }
  int m() const { return static_cast<int>(F_.rows()); }

 private:
  MatrixXd F_, Fbar_;
};

/// ||F1 - F2||_F + ||Fbar1 - Fbar2||_F.
double gain_distance(const GainPair& a, const GainPair& b);

/// Ensemble of r initial conditions split into mean and centered parts,
/// stored column-wise. dim() is n for a state ensemble and n+m for an
/// augmented ensemble whose trailing m rows carry the free initial input.
class InitialStateEnsemble {
 public:
  InitialStateEnsemble(MatrixXd means, MatrixXd deviations);

  int r() const { return static_cast<int>(means_.cols()); }
  int dim() const { return static_cast<int>(means_.rows()); }
  const MatrixXd& means() const { return means_; }
  const MatrixXd& deviations() const { return deviations_; }

  /// Sum of E[z z'] = sum (mu mu' + d d') over the leading n rows.
  MatrixXd Z1(int n) const;
  /// Sum of mu mu' over the leading n rows.
  MatrixXd Z2(int n) const;

  /// blockdiag(sum mu mu', sum d d') for an augmented ensemble of state
  /// dimension n. Requires dim() == n + m for some m > 0.
  MatrixXd aleph(int n) const;

  /// Leading n rows as a state ensemble.
  InitialStateEnsemble state_part(int n) const;

  /// Appends input rows (m x r each) to a state ensemble.
  InitialStateEnsemble augmented(const Eigen::Ref<const MatrixXd>& input_means,
                                 const Eigen::Ref<const MatrixXd>& input_devs)
      const;

  /// Appends inputs drawn uniformly from [-amplitude, amplitude]^m with a
  /// seeded generator: first all input means, then all input deviations.
  InitialStateEnsemble with_uniform_inputs(int m, double amplitude,
                                           std::uint64_t seed) const;

 private:
  MatrixXd means_, deviations_;
};

/// 2n-dimensional closed-loop matrices acting on [Ex; x - Ex].
struct ClosedLoopOps2n {
  MatrixXd A1cl;  ///< blockdiag(A1hat + B1hat Fhat, A1 + B1 F)
  MatrixXd A2cl;  ///< lower-right block A2 + B2 F
  MatrixXd A3cl;  ///< lower-left block A2hat + B2hat Fhat
};

ClosedLoopOps2n closed_loop_2n(const MfSystem& sys, const GainPair& g);

/// (2n+2m)-dimensional matrices acting on the augmented vector
/// [Ex; Eu; x - Ex; u - Eu].
struct AugmentedOps {
  MatrixXd S1;  ///< blockdiag([[A1h, B1h], [Fh A1h, Fh B1h]], [[A1, B1], [F A1, F B1]])
  MatrixXd S2;  ///< lower-right block [[A2, B2], [F A2, F B2]]
  MatrixXd S3;  ///< lower-left block [[A2h, B2h], [F A2h, F B2h]]
  MatrixXd Fmap1;  ///< [I; Fhat; 0; 0]
  MatrixXd Fmap2;  ///< [0; 0; I; F]
};

AugmentedOps augmented_ops(const MfSystem& sys, const GainPair& g);

/// Noise-channel matrices only; used where the drift is unknown.
struct DiffusionOps {
  MatrixXd S2;
  MatrixXd S3;
};

DiffusionOps diffusion_ops(const Eigen::Ref<const MatrixXd>& A2,
                           const Eigen::Ref<const MatrixXd>& A2bar,
                           const Eigen::Ref<const MatrixXd>& B2,
                           const Eigen::Ref<const MatrixXd>& B2bar,
                           const GainPair& g);

/// [[A, B], [G A, G B]].
MatrixXd gain_block(const Eigen::Ref<const MatrixXd>& A,
                    const Eigen::Ref<const MatrixXd>& B,
                    const Eigen::Ref<const MatrixXd>& G);

}  // namespace mflqr
