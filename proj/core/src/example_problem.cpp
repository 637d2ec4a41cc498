#include "mflqr/example_problem.hpp"

namespace mflqr::example {

MfSystem system() {
  SystemMatrices s;
  s.A1.resize(3, 3);
  s.A1 << 0.2, 0.4, 0.2,
          0.0, 0.2, 0.6,
          0.6, 0.4, 0.2;
  s.A1bar.resize(3, 3);
  s.A1bar << 0.3, 0.4, 0.2,
             0.0, 0.2, 0.7,
             0.6, 0.5, 0.2;
  s.A2.resize(3, 3);
  s.A2 << 0.2, 0.4, 0.6,
          0.4, 0.2, 0.6,
          0.2, 0.4, 0.2;
  s.A2bar.resize(3, 3);
  s.A2bar << 0.3, 0.4, 0.6,
             0.4, 0.3, 0.6,
             0.2, 0.4, 0.3;
  s.B1.resize(3, 2);
  s.B1 << 0.4, 0.2,
          0.2, 0.4,
          0.3, 0.3;
  s.B1bar.resize(3, 2);
  s.B1bar << 0.5, 0.2,
             0.2, 0.5,
             0.2, 0.3;
  s.B2.resize(3, 2);
  s.B2 << 0.2, 0.6,
          0.6, 0.4,
          0.3, 0.1;
  s.B2bar.resize(3, 2);
  s.B2bar << 0.3, 0.5,
             0.5, 0.4,
             0.3, 0.3;
  return MfSystem(std::move(s));
}

WeightSpec weights() {
  MatrixXd Q = Eigen::Vector3d(0.0, 1.5, 1.0).asDiagonal();
  MatrixXd Qbar = Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal();
  MatrixXd R = MatrixXd::Identity(2, 2);
  MatrixXd Rbar = Eigen::Vector2d(1.5, 1.0).asDiagonal();
  return WeightSpec(Q, Qbar, R, Rbar);
}

GainPair initial_gains() {
  MatrixXd F(2, 3), Fbar(2, 3);
  F << -0.73, -1.50, -1.30,
        0.23,  0.97, -0.26;
  Fbar << 1.21, 1.81, 0.66,
         -0.18, -0.16, -1.50;
  return GainPair(F, Fbar);
}

InitialStateEnsemble initial_states() {
  MatrixXd mu(3, 20), dev(3, 20);
  mu << 9.59, 8.74, 3.71, 6.90, 2.54, 5.04, 1.32, 7.58, 2.55, 1.74,
        1.45, 4.90, 5.65, 6.02, 5.31, 3.62, 8.98, 2.85, 7.35, 9.50,
        1.55, 2.85, 1.71, 2.52, 2.49, 1.32, 7.40, 7.55, 2.97, 1.72,
        5.21, 0.70, 6.15, 5.13, 6.65, 0.09, 3.18, 3.58, 3.72, 4.54,
        3.15, 2.85, 7.35, 5.17, 6.13, 1.67, 6.21, 0.93, 2.34, 0.72,
        0.30, 2.58, 3.05, 7.47, 6.87, 1.45, 9.92, 2.57, 7.35, 4.02;
  dev << -5.50, -3.05, 8.58, -4.92, 11.51, 8.66, 3.69, -3.62, -1.04, 3.57,
          8.54, -0.64, 7.51, 5.09, 1.49, 11.17, 5.00, 5.80, -3.16, -6.89,
          6.65, 3.85, 12.14, 7.72, 4.60, 1.77, 6.37, -4.21, 10.41, 3.39,
         -2.21, 1.39, 4.67, -1.92, -4.78, 11.02, 11.70, 1.03, 0.33, 9.02,
         11.47, -3.65, 7.27, -3.98, -2.93, -1.64, 0.35, 0.29, 6.30, 7.02,
          3.30, 3.37, 7.87, 0.92, 2.09, 11.89, -8.55, 10.92, 1.54, 6.52;
  return InitialStateEnsemble(mu, dev);
}

}  // namespace mflqr::example
