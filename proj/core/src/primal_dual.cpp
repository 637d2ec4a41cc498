#include "mflqr/primal_dual.hpp"

#include <sstream>

namespace mflqr {
namespace {

void require_stabilizing(const MfSystem& sys, const GainPair& g) {
  const StabilityReport rep = is_stabilizing(sys, g);
  if (!rep.stabilizing) {
    std::ostringstream os;
    os << "gains are not mean-square stabilizing, radius " << rep.radius;
    raise(ErrorCode::kNotStabilizing, os.str());
  }
}

MatrixXd lift_spectrum(const MatrixXd& x, double floor, bool* lifted) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(x));
  if (es.info() != Eigen::Success) {
    raise(ErrorCode::kEigenFailure, "symmetric eigensolver did not converge");
  }
  VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() >= floor) return x;
  *lifted = true;
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

OperatorTriple augmented_triple(const MfSystem& sys, const GainPair& g) {
  return make_triple(augmented_ops(sys, g));
}

DualVar dual_update(const MfSystem& sys, const WeightSpec& w, const GainPair& g) {
  require_stabilizing(sys, g);
  const int n = sys.n();
  const int m = sys.m();
  MatrixXd X = solve_gle_dual(augmented_triple(sys, g), w.Lambda_tilde(), {true, n + m});
  return {std::move(X), n, m};
}

GainPair primal_update(const DualVar& x) {
  const MatrixXd X = x.X();
  const MatrixXd Xb = x.Xbar();
  const MatrixXd K = spd_solve(block22(X, x.n), block12(X, x.n).transpose(),
                               ErrorCode::kSingular22Block, "X22");
  const MatrixXd Kb = spd_solve(block22(Xb, x.n), block12(Xb, x.n).transpose(),
                                ErrorCode::kSingular22Block, "Xbar22");
  const MatrixXd F = kPrimalUpdateSign * K;
  const MatrixXd Fhat = kPrimalUpdateSign * Kb;
  return GainPair(F, Fhat - F);
}

RepairedUpdate primal_update_repaired(const DualVar& x, double floor) {
  RepairedUpdate out;
  DualVar fixed = x;
  const int n = x.n;
  const int m = x.m;
  const int d = n + m;
  MatrixXd Xb = x.Xbar();
  MatrixXd X = x.X();
  Xb.bottomRightCorner(m, m) = lift_spectrum(Xb.bottomRightCorner(m, m), floor, &out.repaired);
  X.bottomRightCorner(m, m) = lift_spectrum(X.bottomRightCorner(m, m), floor, &out.repaired);
  fixed.Xtilde.topLeftCorner(d, d) = Xb;
  fixed.Xtilde.bottomRightCorner(d, d) = X;
  out.gains = primal_update(fixed);
  return out;
}

PdTrace run_pd(const MfSystem& sys, const WeightSpec& w, const GainPair& g0,
               const IterationOptions& opts) {
  require_stabilizing(sys, g0);
  PdTrace trace;
  GainPair g = g0;
  for (int i = 0; i < opts.max_iter; ++i) {
    PdRecord rec;
    rec.iteration = i;
    rec.gains = g;
    rec.radius = is_stabilizing(sys, g).radius;
    rec.dual = dual_update(sys, w, g);
    rec.next = primal_update(rec.dual);
    rec.gain_change = gain_distance(rec.gains, rec.next);
    trace.records.push_back(rec);
    g = rec.next;
    if (rec.gain_change <= opts.eps) {
      trace.converged = true;
      break;
    }
  }
  trace.final_gains = trace.records.back().next;
  trace.final_dual = trace.records.back().dual;
  return trace;
}

MatrixXd state_ensemble_constant(const MfSystem& sys, const GainPair& g,
                                 const Eigen::Ref<const MatrixXd>& Z1,
                                 const Eigen::Ref<const MatrixXd>& Z2) {
  const AugmentedOps ops = augmented_ops(sys, g);
  require_shape(Z1, sys.n(), sys.n(), "Z1");
  require_shape(Z2, sys.n(), sys.n(), "Z2");
  return symmetrize(ops.Fmap1 * Z2 * ops.Fmap1.transpose() +
                    ops.Fmap2 * (Z1 - Z2) * ops.Fmap2.transpose());
}

PrimalVar primal_solution(const MfSystem& sys, const GainPair& g,
                          const Eigen::Ref<const MatrixXd>& N) {
  const int n = sys.n();
  const int m = sys.m();
  MatrixXd S = solve_gle_primal(augmented_triple(sys, g), N, {true, n + m});
  return {std::move(S), n, m};
}

double primal_objective(const PrimalVar& s, const WeightSpec& w) {
  const int d = 2 * (s.n + s.m);
  require_shape(s.Stilde, d, d, "Stilde");
  return (w.Lambda_tilde() * s.Stilde).trace();
}

double dual_objective(const DualVar& x, const Eigen::Ref<const MatrixXd>& N) {
  require_shape(N, x.Xtilde.rows(), x.Xtilde.cols(), "N");
  return (N * x.Xtilde).trace();
}

GainPair gains_from_primal(const PrimalVar& s) {
  const int n = s.n;
  const MatrixXd S = s.S();
  const MatrixXd Sb = s.Sbar();
  auto recover = [n](const MatrixXd& blk, const char* name) -> MatrixXd {
    const MatrixXd S11 = blk.topLeftCorner(n, n);
    const double scale = std::max(1.0, S11.cwiseAbs().maxCoeff());
    if (min_eigenvalue(S11) <= 1e-12 * scale) {
      raise(ErrorCode::kSingular11Block, std::string(name) + " is singular");
    }
    return spd_solve(S11, blk.topRightCorner(n, blk.cols() - n),
                     ErrorCode::kSingular11Block, name)
        .transpose();
  };
  const MatrixXd F = recover(S, "S11");
  const MatrixXd Fhat = recover(Sb, "Sbar11");
  return GainPair(F, Fhat - F);
}

KktResiduals kkt_residuals(const MfSystem& sys, const WeightSpec& w, const PrimalVar& s,
                           const GainPair& g, const DualVar& x,
                           const Eigen::Ref<const MatrixXd>& aleph) {
  const int n = sys.n();
  const int m = sys.m();
  const int d = 2 * (n + m);
  require_shape(s.Stilde, d, d, "Stilde");
  require_shape(x.Xtilde, d, d, "Xtilde");
  require_shape(aleph, d, d, "aleph");
  const OperatorTriple t = augmented_triple(sys, g);
  KktResiduals r;
  r.r1 = (apply_primal(t, s.Stilde) + aleph - s.Stilde).norm();
  r.r2 = min_eigenvalue(s.Stilde);
  r.r3 = (apply_dual(t, x.Xtilde) + w.Lambda_tilde() - x.Xtilde).norm();

  auto cat = [](const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
  };
  const MatrixXd AB1h = cat(sys.A1hat(), sys.B1hat());
  const MatrixXd AB1 = cat(sys.A1(), sys.B1());
  const MatrixXd AB2 = cat(sys.A2(), sys.B2());
  const MatrixXd AB2h = cat(sys.A2hat(), sys.B2hat());
  const MatrixXd Sb = s.Sbar();
  const MatrixXd S = s.S();
  const MatrixXd Xb = x.Xbar();
  const MatrixXd X = x.X();

  const MatrixXd stat_bar =
      block12(Xb, n).transpose() + block22(Xb, n) * g.Fhat();
  r.r4 = (stat_bar * AB1h * Sb * AB1h.transpose()).norm();
  r.Psi = AB1 * S * AB1.transpose() + AB2 * S * AB2.transpose() +
          AB2h * Sb * AB2h.transpose();
  const MatrixXd stat = block12(X, n).transpose() + block22(X, n) * g.F();
  r.r5 = (stat * r.Psi).norm();
  return r;
}

double lagrangian(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                  const PrimalVar& s, const DualVar& x,
                  const Eigen::Ref<const MatrixXd>& N) {
  const OperatorTriple t = augmented_triple(sys, g);
  const MatrixXd constraint = apply_primal(t, s.Stilde) + N - s.Stilde;
  return primal_objective(s, w) + (constraint * x.Xtilde).trace();
}

double duality_gap(const WeightSpec& w, const Eigen::Ref<const MatrixXd>& aleph,
                   const PrimalVar& s, const DualVar& x) {
  return primal_objective(s, w) - dual_objective(x, aleph);
}

}  // namespace mflqr
