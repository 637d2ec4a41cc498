#include "mflqr/linalg.hpp"

#include <sstream>

namespace mflqr {

MatrixXd symmetrize(const Eigen::Ref<const MatrixXd>& x) {
  return 0.5 * (x + x.transpose());
}

double min_eigenvalue(const Eigen::Ref<const MatrixXd>& x) {
  if (x.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(x),
                                             Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    raise(ErrorCode::kEigenFailure, "symmetric eigensolver did not converge");
  }
  return es.eigenvalues()(0);
}

bool is_psd(const Eigen::Ref<const MatrixXd>& x, double tol) {
  return min_eigenvalue(x) >= -tol;
}

MatrixXd block_diag(const Eigen::Ref<const MatrixXd>& a,
                    const Eigen::Ref<const MatrixXd>& b) {
  MatrixXd out = MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

bool all_finite(const Eigen::Ref<const MatrixXd>& x) {
  return x.allFinite();
}

void require_shape(const Eigen::Ref<const MatrixXd>& x, Eigen::Index rows,
                   Eigen::Index cols, const std::string& name) {
  if (x.rows() != rows || x.cols() != cols) {
    std::ostringstream os;
    os << name << " is " << x.rows() << "x" << x.cols() << ", expected "
       << rows << "x" << cols;
    raise(ErrorCode::kDimensionMismatch, os.str());
  }
}

MatrixXd spd_solve(const Eigen::Ref<const MatrixXd>& a,
                   const Eigen::Ref<const MatrixXd>& b, ErrorCode code,
                   const std::string& what) {
  Eigen::LLT<MatrixXd> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    raise(code, what + " is not positive definite");
  }
  return llt.solve(b);
}

}  // namespace mflqr
