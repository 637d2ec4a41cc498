#include "mflqr/riccati.hpp"

#include <random>
#include <sstream>

namespace mflqr {
namespace {

void require_values(const MfSystem& sys, const WeightSpec& w, const ValuePair& v) {
  const int n = sys.n();
  require_shape(v.P, n, n, "P");
  require_shape(v.Pbar, n, n, "Pbar");
  require_shape(w.Q(), n, n, "Q");
  require_shape(w.R(), sys.m(), sys.m(), "R");
}

}  // namespace

RiccatiTerms riccati_terms(const MfSystem& sys, const WeightSpec& w, const ValuePair& v) {
  require_values(sys, w, v);
  const MatrixXd B1h = sys.B1hat();
  const MatrixXd B2h = sys.B2hat();
  RiccatiTerms t;
  t.Ups1 = symmetrize(w.R() + sys.B1().transpose() * v.P * sys.B1() +
                      sys.B2().transpose() * v.P * sys.B2());
  t.M1 = sys.B1().transpose() * v.P * sys.A1() + sys.B2().transpose() * v.P * sys.A2();
  t.Ups2 = symmetrize(w.Rhat() + B1h.transpose() * v.Pbar * B1h +
                      B2h.transpose() * v.P * B2h);
  t.M2 = B1h.transpose() * v.Pbar * sys.A1hat() + B2h.transpose() * v.P * sys.A2hat();
  t.min_eig_Ups1 = min_eigenvalue(t.Ups1);
  t.min_eig_Ups2 = min_eigenvalue(t.Ups2);
  return t;
}

GainPair gain_from_values(const MfSystem& sys, const WeightSpec& w, const ValuePair& v) {
  const RiccatiTerms t = riccati_terms(sys, w, v);
  const MatrixXd K1 = spd_solve(t.Ups1, t.M1, ErrorCode::kSingularUps, "Ups1");
  const MatrixXd K2 = spd_solve(t.Ups2, t.M2, ErrorCode::kSingularUps, "Ups2");
  return GainPair(-K1, -(K2 - K1));
}

GareResidual gare_residual(const MfSystem& sys, const WeightSpec& w, const ValuePair& v) {
  const RiccatiTerms t = riccati_terms(sys, w, v);
  const MatrixXd K1 = spd_solve(t.Ups1, t.M1, ErrorCode::kSingularUps, "Ups1");
  const MatrixXd K2 = spd_solve(t.Ups2, t.M2, ErrorCode::kSingularUps, "Ups2");
  const MatrixXd A1h = sys.A1hat();
  const MatrixXd A2h = sys.A2hat();
  GareResidual r;
  r.R1 = w.Q() + sys.A1().transpose() * v.P * sys.A1() +
         sys.A2().transpose() * v.P * sys.A2() - t.M1.transpose() * K1 - v.P;
  r.R2 = w.Qhat() + A1h.transpose() * v.Pbar * A1h + A2h.transpose() * v.P * A2h -
         t.M2.transpose() * K2 - v.Pbar;
  return r;
}

MatrixXd closed_loop_weight(const WeightSpec& w, const GainPair& g) {
  const MatrixXd Fh = g.Fhat();
  return block_diag(w.Qhat() + Fh.transpose() * w.Rhat() * Fh,
                    w.Q() + g.F().transpose() * w.R() * g.F());
}

ValuePair policy_evaluation(const MfSystem& sys, const WeightSpec& w, const GainPair& g) {
  const int n = sys.n();
  const OperatorTriple t = make_triple(closed_loop_2n(sys, g));
  const MatrixXd T = operator_matrix(t);
  const double radius = spectral_radius(T);
  if (!(radius < 1.0 - kStabilityMargin)) {
    std::ostringstream os;
    os << "gains are not mean-square stabilizing, radius " << radius;
    raise(ErrorCode::kNotStabilizing, os.str());
  }
  const MatrixXd X = solve_gle_dual(t, closed_loop_weight(w, g), {true, n});
  return {symmetrize(X.bottomRightCorner(n, n)), symmetrize(X.topLeftCorner(n, n))};
}

PiTrace run_pi(const MfSystem& sys, const WeightSpec& w, const GainPair& g0,
               const IterationOptions& opts) {
  const StabilityReport start = is_stabilizing(sys, g0);
  if (!start.stabilizing) {
    std::ostringstream os;
    os << "initial gains are not stabilizing, radius " << start.radius;
    raise(ErrorCode::kNotStabilizing, os.str());
  }
  PiTrace trace;
  GainPair g = g0;
  double radius = start.radius;
  for (int i = 0; i < opts.max_iter; ++i) {
    if (i > 0) radius = is_stabilizing(sys, g).radius;
    PiRecord rec;
    rec.iteration = i;
    rec.gains = g;
    rec.values = policy_evaluation(sys, w, g);
    rec.next = gain_from_values(sys, w, rec.values);
    rec.gain_change = gain_distance(rec.gains, rec.next);
    rec.radius = radius;
    trace.records.push_back(rec);
    g = rec.next;
    if (rec.gain_change <= opts.eps) {
      trace.converged = true;
      break;
    }
  }
  trace.final_gains = trace.records.back().next;
  trace.final_values = trace.records.back().values;
  return trace;
}

ValuePair value_iteration_oracle(const MfSystem& sys, const WeightSpec& w, int sweeps) {
  const int n = sys.n();
  ValuePair v{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
  const MatrixXd A1h = sys.A1hat();
  const MatrixXd A2h = sys.A2hat();
  for (int s = 0; s < sweeps; ++s) {
    const RiccatiTerms t = riccati_terms(sys, w, v);
    const MatrixXd K1 = spd_solve(t.Ups1, t.M1, ErrorCode::kSingularUps, "Ups1");
    const MatrixXd K2 = spd_solve(t.Ups2, t.M2, ErrorCode::kSingularUps, "Ups2");
    ValuePair next;
    next.P = symmetrize(w.Q() + sys.A1().transpose() * v.P * sys.A1() +
                        sys.A2().transpose() * v.P * sys.A2() - t.M1.transpose() * K1);
    next.Pbar = symmetrize(w.Qhat() + A1h.transpose() * v.Pbar * A1h +
                           A2h.transpose() * v.P * A2h - t.M2.transpose() * K2);
    if (!(next.P.norm() <= 1e12) || !(next.Pbar.norm() <= 1e12)) {
      std::ostringstream os;
      os << "value iteration diverged at sweep " << s;
      raise(ErrorCode::kDivergence, os.str());
    }
    v = std::move(next);
  }
  return v;
}

QMatrices q_matrices(const MfSystem& sys, const WeightSpec& w, const ValuePair& v) {
  const RiccatiTerms t = riccati_terms(sys, w, v);
  const int n = sys.n();
  const int m = sys.m();
  const MatrixXd A1h = sys.A1hat();
  const MatrixXd A2h = sys.A2hat();
  QMatrices q;
  q.X.resize(n + m, n + m);
  q.X.topLeftCorner(n, n) = w.Q() + sys.A1().transpose() * v.P * sys.A1() +
                            sys.A2().transpose() * v.P * sys.A2();
  q.X.topRightCorner(n, m) = t.M1.transpose();
  q.X.bottomLeftCorner(m, n) = t.M1;
  q.X.bottomRightCorner(m, m) = t.Ups1;
  q.Xbar.resize(n + m, n + m);
  q.Xbar.topLeftCorner(n, n) =
      w.Qhat() + A1h.transpose() * v.Pbar * A1h + A2h.transpose() * v.P * A2h;
  q.Xbar.topRightCorner(n, m) = t.M2.transpose();
  q.Xbar.bottomLeftCorner(m, n) = t.M2;
  q.Xbar.bottomRightCorner(m, m) = t.Ups2;
  q.X = symmetrize(q.X);
  q.Xbar = symmetrize(q.Xbar);
  return q;
}

double optimal_cost(const ValuePair& v, const Eigen::Ref<const MatrixXd>& Z1,
                    const Eigen::Ref<const MatrixXd>& Z2) {
  const auto n = v.P.rows();
  require_shape(v.Pbar, n, n, "Pbar");
  require_shape(Z1, n, n, "Z1");
  require_shape(Z2, n, n, "Z2");
  return (Z2 * v.Pbar).trace() + ((Z1 - Z2) * v.P).trace();
}

std::optional<GainPair> find_stabilizing_gains(const MfSystem& sys,
                                               const GainSearchOptions& opts) {
  const GainPair zero = GainPair::zero(sys.n(), sys.m());
  if (is_stabilizing(sys, zero).stabilizing) return zero;
  std::mt19937_64 gen(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double scale = opts.initial_scale;
  for (int a = 0; a < opts.attempts; ++a) {
    if (a > 0 && a % opts.attempts_per_scale == 0) scale *= opts.shrink;
    MatrixXd F(sys.m(), sys.n());
    MatrixXd Fbar(sys.m(), sys.n());
    for (Eigen::Index k = 0; k < F.size(); ++k) F(k) = scale * normal(gen);
    for (Eigen::Index k = 0; k < Fbar.size(); ++k) Fbar(k) = scale * normal(gen);
    GainPair g(std::move(F), std::move(Fbar));
    if (is_stabilizing(sys, g).stabilizing) return g;
  }
  return std::nullopt;
}

}  // namespace mflqr
