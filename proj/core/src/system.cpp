#include "mflqr/system.hpp"

#include <random>
#include <sstream>

namespace mflqr {
namespace {

void require_finite(const MatrixXd& x, const char* name) {
  if (!x.allFinite()) {
    raise(ErrorCode::kInvariantError, std::string(name) + " has non-finite entries");
  }
}

void require_symmetric(const MatrixXd& x, const char* name) {
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  if ((x - x.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    raise(ErrorCode::kInvariantError, std::string(name) + " is not symmetric");
  }
}

}  // namespace

MfSystem::MfSystem(SystemMatrices mats)
    : mats_(std::move(mats)),
      n_(static_cast<int>(mats_.A1.rows())),
      m_(static_cast<int>(mats_.B1.cols())) {
  if (n_ <= 0 || m_ <= 0) {
    raise(ErrorCode::kDimensionMismatch, "system needs n > 0 and m > 0");
  }
  require_shape(mats_.A1, n_, n_, "A1");
  require_shape(mats_.A1bar, n_, n_, "A1bar");
  require_shape(mats_.A2, n_, n_, "A2");
  require_shape(mats_.A2bar, n_, n_, "A2bar");
  require_shape(mats_.B1, n_, m_, "B1");
  require_shape(mats_.B1bar, n_, m_, "B1bar");
  require_shape(mats_.B2, n_, m_, "B2");
  require_shape(mats_.B2bar, n_, m_, "B2bar");
  require_finite(mats_.A1, "A1");
  require_finite(mats_.A1bar, "A1bar");
  require_finite(mats_.A2, "A2");
  require_finite(mats_.A2bar, "A2bar");
  require_finite(mats_.B1, "B1");
  require_finite(mats_.B1bar, "B1bar");
  require_finite(mats_.B2, "B2");
  require_finite(mats_.B2bar, "B2bar");
}

MfSystem MfSystem::zero(int n, int m) {
  const MatrixXd a = MatrixXd::Zero(n, n);
  const MatrixXd b = MatrixXd::Zero(n, m);
  return MfSystem({a, a, a, a, b, b, b, b});
}

WeightSpec::WeightSpec(MatrixXd Q, MatrixXd Qbar, MatrixXd R, MatrixXd Rbar)
    : Q_(std::move(Q)), Qbar_(std::move(Qbar)), R_(std::move(R)),
      Rbar_(std::move(Rbar)) {
  const auto n = Q_.rows();
  const auto m = R_.rows();
  if (n <= 0 || m <= 0) {
    raise(ErrorCode::kDimensionMismatch, "weights need n > 0 and m > 0");
  }
  require_shape(Q_, n, n, "Q");
  require_shape(Qbar_, n, n, "Qbar");
  require_shape(R_, m, m, "R");
  require_shape(Rbar_, m, m, "Rbar");
  require_finite(Q_, "Q");
  require_finite(Qbar_, "Qbar");
  require_finite(R_, "R");
  require_finite(Rbar_, "Rbar");
  require_symmetric(Q_, "Q");
  require_symmetric(Qbar_, "Qbar");
  require_symmetric(R_, "R");
  require_symmetric(Rbar_, "Rbar");
}

MatrixXd WeightSpec::Lambda() const { return block_diag(Q_, R_); }

MatrixXd WeightSpec::Lambdabar() const { return block_diag(Qbar_, Rbar_); }

MatrixXd WeightSpec::Lambda_tilde() const {
  return block_diag(Lambda() + Lambdabar(), Lambda());
}

WeightReport weight_report(const WeightSpec& w) {
  WeightReport rep;
  rep.min_eig_Q = min_eigenvalue(w.Q());
  rep.min_eig_Qhat = min_eigenvalue(w.Qhat());
  rep.min_eig_R = min_eigenvalue(w.R());
  rep.min_eig_Rhat = min_eigenvalue(w.Rhat());
  rep.valid = rep.min_eig_Q >= -kPsdTolerance &&
              rep.min_eig_Qhat >= -kPsdTolerance && rep.min_eig_R > 0.0 &&
              rep.min_eig_Rhat > 0.0;
  return rep;
}

WeightReport validate_weights(const WeightSpec& w) {
  const WeightReport rep = weight_report(w);
  auto fail = [](const char* what, double eig) {
    std::ostringstream os;
    os << what << " violated, min eigenvalue " << eig;
    raise(ErrorCode::kIndefiniteWeight, os.str());
  };
  if (rep.min_eig_Q < -kPsdTolerance) fail("Q >= 0", rep.min_eig_Q);
  if (rep.min_eig_Qhat < -kPsdTolerance) fail("Q + Qbar >= 0", rep.min_eig_Qhat);
  if (!(rep.min_eig_R > 0.0)) fail("R > 0", rep.min_eig_R);
  if (!(rep.min_eig_Rhat > 0.0)) fail("R + Rbar > 0", rep.min_eig_Rhat);
  return rep;
}

GainPair::GainPair(MatrixXd F, MatrixXd Fbar)
    : F_(std::move(F)), Fbar_(std::move(Fbar)) {
  require_shape(Fbar_, F_.rows(), F_.cols(), "Fbar");
  require_finite(F_, "F");
  require_finite(Fbar_, "Fbar");
}

GainPair GainPair::zero(int n, int m) {
  return GainPair(MatrixXd::Zero(m, n), MatrixXd::Zero(m, n));
}

double gain_distance(const GainPair& a, const GainPair& b) {
  return (a.F() - b.F()).norm() + (a.Fbar() - b.Fbar()).norm();
}

InitialStateEnsemble::InitialStateEnsemble(MatrixXd means, MatrixXd deviations)
    : means_(std::move(means)), deviations_(std::move(deviations)) {
  require_shape(deviations_, means_.rows(), means_.cols(), "deviations");
  if (means_.cols() == 0 || means_.rows() == 0) {
    raise(ErrorCode::kInvariantError, "ensemble must be non-empty");
  }
  require_finite(means_, "ensemble means");
  require_finite(deviations_, "ensemble deviations");
}

MatrixXd InitialStateEnsemble::Z1(int n) const {
  const auto mu = means_.topRows(n);
  const auto d = deviations_.topRows(n);
  return symmetrize(mu * mu.transpose() + d * d.transpose());
}

MatrixXd InitialStateEnsemble::Z2(int n) const {
  const auto mu = means_.topRows(n);
  return symmetrize(mu * mu.transpose());
}

MatrixXd InitialStateEnsemble::aleph(int n) const {
  if (dim() <= n) {
    raise(ErrorCode::kDimensionMismatch,
          "aleph needs an augmented ensemble with input rows");
  }
  return block_diag(symmetrize(means_ * means_.transpose()),
                    symmetrize(deviations_ * deviations_.transpose()));
}

InitialStateEnsemble InitialStateEnsemble::state_part(int n) const {
  if (n > dim()) raise(ErrorCode::kDimensionMismatch, "state_part beyond dim");
  return InitialStateEnsemble(means_.topRows(n), deviations_.topRows(n));
}

InitialStateEnsemble InitialStateEnsemble::augmented(
    const Eigen::Ref<const MatrixXd>& input_means,
    const Eigen::Ref<const MatrixXd>& input_devs) const {
  require_shape(input_means, input_means.rows(), r(), "input means");
  require_shape(input_devs, input_means.rows(), r(), "input deviations");
  MatrixXd mu(dim() + input_means.rows(), r());
  MatrixXd d(dim() + input_means.rows(), r());
  mu << means_, input_means;
  d << deviations_, input_devs;
  return InitialStateEnsemble(std::move(mu), std::move(d));
}

InitialStateEnsemble InitialStateEnsemble::with_uniform_inputs(
    int m, double amplitude, std::uint64_t seed) const {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  MatrixXd um(m, r());
  MatrixXd ud(m, r());
  for (int l = 0; l < r(); ++l) {
    for (int j = 0; j < m; ++j) um(j, l) = dist(gen);
  }
  for (int l = 0; l < r(); ++l) {
    for (int j = 0; j < m; ++j) ud(j, l) = dist(gen);
  }
  return augmented(um, ud);
}

MatrixXd gain_block(const Eigen::Ref<const MatrixXd>& A,
                    const Eigen::Ref<const MatrixXd>& B,
                    const Eigen::Ref<const MatrixXd>& G) {
  const auto n = A.rows();
  const auto m = B.cols();
  MatrixXd out(n + m, n + m);
  out.topLeftCorner(n, n) = A;
  out.topRightCorner(n, m) = B;
  out.bottomLeftCorner(m, n) = G * A;
  out.bottomRightCorner(m, m) = G * B;
  return out;
}

namespace {

void require_gain_shape(const MfSystem& sys, const GainPair& g) {
  require_shape(g.F(), sys.m(), sys.n(), "F");
}

}  // namespace

ClosedLoopOps2n closed_loop_2n(const MfSystem& sys, const GainPair& g) {
  require_gain_shape(sys, g);
  const int n = sys.n();
  const MatrixXd Fh = g.Fhat();
  ClosedLoopOps2n ops;
  ops.A1cl = block_diag(sys.A1hat() + sys.B1hat() * Fh, sys.A1() + sys.B1() * g.F());
  ops.A2cl = MatrixXd::Zero(2 * n, 2 * n);
  ops.A2cl.bottomRightCorner(n, n) = sys.A2() + sys.B2() * g.F();
  ops.A3cl = MatrixXd::Zero(2 * n, 2 * n);
  ops.A3cl.bottomLeftCorner(n, n) = sys.A2hat() + sys.B2hat() * Fh;
  return ops;
}

DiffusionOps diffusion_ops(const Eigen::Ref<const MatrixXd>& A2,
                           const Eigen::Ref<const MatrixXd>& A2bar,
                           const Eigen::Ref<const MatrixXd>& B2,
                           const Eigen::Ref<const MatrixXd>& B2bar,
                           const GainPair& g) {
  const auto n = A2.rows();
  const auto m = B2.cols();
  require_shape(A2bar, n, n, "A2bar");
  require_shape(B2bar, n, m, "B2bar");
  require_shape(g.F(), m, n, "F");
  const auto d = n + m;
  DiffusionOps ops;
  ops.S2 = MatrixXd::Zero(2 * d, 2 * d);
  ops.S2.bottomRightCorner(d, d) = gain_block(A2, B2, g.F());
  ops.S3 = MatrixXd::Zero(2 * d, 2 * d);
  ops.S3.bottomLeftCorner(d, d) = gain_block(A2 + A2bar, B2 + B2bar, g.F());
  return ops;
}

AugmentedOps augmented_ops(const MfSystem& sys, const GainPair& g) {
  require_gain_shape(sys, g);
  const int n = sys.n();
  const int m = sys.m();
  const MatrixXd Fh = g.Fhat();
  AugmentedOps ops;
  ops.S1 = block_diag(gain_block(sys.A1hat(), sys.B1hat(), Fh),
                      gain_block(sys.A1(), sys.B1(), g.F()));
  DiffusionOps diff = diffusion_ops(sys.A2(), sys.A2bar(), sys.B2(), sys.B2bar(), g);
  ops.S2 = std::move(diff.S2);
  ops.S3 = std::move(diff.S3);
  const int d = 2 * (n + m);
  ops.Fmap1 = MatrixXd::Zero(d, n);
  ops.Fmap1.topRows(n).setIdentity();
  ops.Fmap1.middleRows(n, m) = Fh;
  ops.Fmap2 = MatrixXd::Zero(d, n);
  ops.Fmap2.middleRows(n + m, n).setIdentity();
  ops.Fmap2.bottomRows(m) = g.F();
  return ops;
}

}  // namespace mflqr
