#pragma once

#include <string>

#include <Eigen/Dense>

#include "mflqr/errors.hpp"

namespace mflqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Eigenvalues at or above -kPsdTolerance count as nonnegative.
inline constexpr double kPsdTolerance = 1e-10;

MatrixXd symmetrize(const Eigen::Ref<const MatrixXd>& x);

/// Smallest eigenvalue of the symmetric part of x.
double min_eigenvalue(const Eigen::Ref<const MatrixXd>& x);

bool is_psd(const Eigen::Ref<const MatrixXd>& x, double tol = kPsdTolerance);

MatrixXd block_diag(const Eigen::Ref<const MatrixXd>& a,
                    const Eigen::Ref<const MatrixXd>& b);

bool all_finite(const Eigen::Ref<const MatrixXd>& x);

/// Throws kDimensionMismatch unless x is rows x cols.
void require_shape(const Eigen::Ref<const MatrixXd>& x, Eigen::Index rows,
                   Eigen::Index cols, const std::string& name);

/// Solves a x = b for symmetric positive definite a by Cholesky. Throws
/// `code` when the factorization fails.
MatrixXd spd_solve(const Eigen::Ref<const MatrixXd>& a,
                   const Eigen::Ref<const MatrixXd>& b, ErrorCode code,
                   const std::string& what);

}  // namespace mflqr
