#include "mflqr/lyapunov.hpp"

#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

namespace mflqr {
namespace {

void require_triple(const OperatorTriple& t) {
  const auto d = t.M1.rows();
  require_shape(t.M1, d, d, "M1");
  require_shape(t.M2, d, d, "M2");
  require_shape(t.M3, d, d, "M3");
}

// Column-stacked indices of the entries of blockdiag(X11, X22).
std::vector<Eigen::Index> block_indices(Eigen::Index d, Eigen::Index split) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < d; ++j) {
    const bool upper = j < split;
    const Eigen::Index lo = upper ? 0 : split;
    const Eigen::Index hi = upper ? split : d;
    for (Eigen::Index i = lo; i < hi; ++i) idx.push_back(j * d + i);
  }
  return idx;
}

// Solves (I - T) vec X = vec rhs, optionally on a block-diagonal subspace.
MatrixXd solve_vectorized(const MatrixXd& T, const Eigen::Ref<const MatrixXd>& rhs,
                          const GleOptions& opts) {
  const double radius = spectral_radius(T);
  if (!(radius < 1.0)) {
    std::ostringstream os;
    os << "operator spectral radius " << radius << " >= 1";
    raise(ErrorCode::kUnstable, os.str());
  }
  const auto d = rhs.rows();
  const auto d2 = d * d;
  const VectorXd b = Eigen::Map<const VectorXd>(MatrixXd(rhs).data(), d2);
  VectorXd x = VectorXd::Zero(d2);
  if (opts.block_diagonal) {
    if (opts.split <= 0 || opts.split >= d) {
      raise(ErrorCode::kInvalidArgument, "block split out of range");
    }
    const auto idx = block_indices(d, opts.split);
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd A(k, k);
    VectorXd bb(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      bb(r) = b(idx[r]);
      for (Eigen::Index c = 0; c < k; ++c) {
        A(r, c) = (r == c ? 1.0 : 0.0) - T(idx[r], idx[c]);
      }
    }
    Eigen::PartialPivLU<MatrixXd> lu(A);
    const VectorXd y = lu.solve(bb);
    if (!y.allFinite()) raise(ErrorCode::kSingularSystem, "GLE solve failed");
    for (Eigen::Index r = 0; r < k; ++r) x(idx[r]) = y(r);
  } else {
    MatrixXd A = MatrixXd::Identity(d2, d2) - T;
    Eigen::PartialPivLU<MatrixXd> lu(A);
    x = lu.solve(b);
    if (!x.allFinite()) raise(ErrorCode::kSingularSystem, "GLE solve failed");
  }
  return symmetrize(Eigen::Map<const MatrixXd>(x.data(), d, d));
}

}  // namespace

OperatorTriple make_triple(const ClosedLoopOps2n& ops) {
  return {ops.A1cl, ops.A2cl, ops.A3cl};
}

OperatorTriple make_triple(const AugmentedOps& ops) {
  return {ops.S1, ops.S2, ops.S3};
}

MatrixXd operator_matrix(const OperatorTriple& t) {
  require_triple(t);
  const auto d = t.dim();
  MatrixXd T = MatrixXd::Zero(d * d, d * d);
  // vec(M' X M) = kron(M', M') vec(X) for column-major vec.
  for (const MatrixXd* M : {&t.M1, &t.M2, &t.M3}) {
    if (M->isZero(0.0)) continue;
    const MatrixXd Mt = M->transpose();
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double a = Mt(i, j);
        if (a != 0.0) T.block(i * d, j * d, d, d) += a * Mt;
      }
    }
  }
  return T;
}

double spectral_radius(const Eigen::Ref<const MatrixXd>& T) {
  if (T.rows() != T.cols()) {
    raise(ErrorCode::kDimensionMismatch, "spectral_radius needs a square matrix");
  }
  if (T.size() == 0 || T.isZero(0.0)) return 0.0;
  if (!T.allFinite()) raise(ErrorCode::kEigenFailure, "non-finite operator");
  Eigen::EigenSolver<MatrixXd> es(T, false);
  if (es.info() != Eigen::Success) {
    raise(ErrorCode::kEigenFailure, "eigenvalue iteration did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double operator_radius(const OperatorTriple& t) {
  return spectral_radius(operator_matrix(t));
}

MatrixXd apply_dual(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& X) {
  return t.M1.transpose() * X * t.M1 + t.M2.transpose() * X * t.M2 +
         t.M3.transpose() * X * t.M3;
}

MatrixXd apply_primal(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& S) {
  return t.M1 * S * t.M1.transpose() + t.M2 * S * t.M2.transpose() +
         t.M3 * S * t.M3.transpose();
}

StabilityReport is_stabilizing(const MfSystem& sys, const GainPair& g) {
  StabilityReport rep;
  rep.radius = operator_radius(make_triple(closed_loop_2n(sys, g)));
  rep.stabilizing = rep.radius < 1.0 - kStabilityMargin;
  return rep;
}

MatrixXd solve_gle_dual(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& Q,
                        const GleOptions& opts) {
  require_triple(t);
  require_shape(Q, t.dim(), t.dim(), "GLE weight");
  return solve_vectorized(operator_matrix(t), symmetrize(Q), opts);
}

MatrixXd solve_gle_primal(const OperatorTriple& t, const Eigen::Ref<const MatrixXd>& N,
                          const GleOptions& opts) {
  require_triple(t);
  require_shape(N, t.dim(), t.dim(), "GLE constant");
  MatrixXd T = operator_matrix(t).transpose();
  return solve_vectorized(T, symmetrize(N), opts);
}

}  // namespace mflqr
