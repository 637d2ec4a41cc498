#include "mflqr/model_free.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "mflqr/csv.hpp"

namespace mflqr {
namespace {

struct DataEquation {
  MatrixXd S2, S3, C;
};

DataEquation make_equation(const PartialModel& pm, const GainPair& g, const DataMatrices& d) {
  const int D = 2 * (pm.n() + pm.m());
  require_shape(d.SM, D, D, "SM");
  require_shape(d.WM, D, D, "WM");
  DiffusionOps ops = diffusion_ops(pm.A2, pm.A2bar, pm.B2, pm.B2bar, g);
  return {std::move(ops.S2), std::move(ops.S3),
          d.SM * pm.weights.Lambda_tilde() * d.SM};
}

MatrixXd apply_equation(const DataEquation& eq, const DataMatrices& d, const MatrixXd& X) {
  const MatrixXd inner = eq.S2.transpose() * X * eq.S2 + eq.S3.transpose() * X * eq.S3 - X;
  return d.WM * X * d.WM.transpose() + d.SM * inner * d.SM;
}

}  // namespace

PartialModel PartialModel::from_system(const MfSystem& sys, const WeightSpec& w) {
  return {sys.A2(), sys.A2bar(), sys.B2(), sys.B2bar(), w};
}

SampledPlant::SampledPlant(MfSystem truth, InitialStateEnsemble ensemble, RolloutOptions opts)
    : truth_(std::move(truth)), ensemble_(std::move(ensemble)), opts_(opts) {
  opts_.free_initial_input = true;
  if (ensemble_.dim() != truth_.n() + truth_.m()) {
    raise(ErrorCode::kDimensionMismatch, "learning needs an augmented ensemble");
  }
}

DataMatrices SampledPlant::collect(const GainPair& g, int iteration) {
  RolloutOptions opts = opts_;
  opts.stream = opts_.stream + static_cast<std::uint64_t>(iteration);
  const auto batches = rollout(truth_, g, ensemble_, opts);
  if (observer_) observer_(iteration, batches);
  return data_matrices(batches);
}

ExactMomentOracle::ExactMomentOracle(MfSystem truth, InitialStateEnsemble ensemble, int M)
    : truth_(std::move(truth)), ensemble_(std::move(ensemble)), M_(M) {}

DataMatrices ExactMomentOracle::collect(const GainPair& g, int /*iteration*/) {
  return exact_moments(truth_, g, ensemble_, M_).data;
}

DataDualResult data_dual_update(const PartialModel& pm, const GainPair& g,
                                const DataMatrices& d, double max_condition) {
  const int n = pm.n();
  const int dd = n + pm.m();
  const int D = 2 * dd;
  const DataEquation eq = make_equation(pm, g, d);

  DataDualResult out;
  out.sm_min_eig = min_eigenvalue(d.SM);
  if (!(out.sm_min_eig > 1e-12 * std::max(1.0, d.SM.norm()))) {
    std::ostringstream os;
    os << "SM is not positive definite, min eigenvalue " << out.sm_min_eig;
    raise(ErrorCode::kSingularData, os.str());
  }

  // Unknowns: upper triangles of the two diagonal blocks.
  std::vector<std::pair<int, int>> unknowns;
  for (int b = 0; b < 2; ++b) {
    for (int j = 0; j < dd; ++j) {
      for (int i = 0; i <= j; ++i) unknowns.emplace_back(b * dd + i, b * dd + j);
    }
  }
  // Equations: upper triangle of the symmetric D x D residual, off-diagonal
  // rows weighted by sqrt(2) so the least-squares norm is Frobenius.
  const int rows = D * (D + 1) / 2;
  const int cols = static_cast<int>(unknowns.size());
  auto stack = [&](const MatrixXd& R, Eigen::Ref<VectorXd> v) {
    int r = 0;
    for (int j = 0; j < D; ++j) {
      for (int i = 0; i <= j; ++i) {
        const double s = (i == j) ? 1.0 : std::sqrt(2.0);
        v(r++) = s * 0.5 * (R(i, j) + R(j, i));
      }
    }
  };
  MatrixXd A(rows, cols);
  MatrixXd E = MatrixXd::Zero(D, D);
  for (int c = 0; c < cols; ++c) {
    const auto [i, j] = unknowns[c];
    E(i, j) = 1.0;
    E(j, i) = 1.0;
    stack(apply_equation(eq, d, E), A.col(c));
    E(i, j) = 0.0;
    E(j, i) = 0.0;
  }
  VectorXd rhs(rows);
  stack(-eq.C, rhs);

  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                          : std::numeric_limits<double>::infinity();
  if (!(out.condition <= max_condition)) {
    std::ostringstream os;
    os << "data equation condition number " << out.condition << " exceeds "
       << max_condition;
    raise(ErrorCode::kIllConditioned, os.str());
  }
  const VectorXd theta = svd.solve(rhs);

  MatrixXd X = MatrixXd::Zero(D, D);
  for (int c = 0; c < cols; ++c) {
    const auto [i, j] = unknowns[c];
    X(i, j) = theta(c);
    X(j, i) = theta(c);
  }
  out.dual = {X, n, pm.m()};
  out.residual = data_equation_residual(pm, g, d, out.dual);
  return out;
}

double data_equation_residual(const PartialModel& pm, const GainPair& g,
                              const DataMatrices& d, const DualVar& x) {
  const DataEquation eq = make_equation(pm, g, d);
  const double scale = eq.C.norm();
  const double res = (apply_equation(eq, d, x.Xtilde) + eq.C).norm();
  return scale > 0.0 ? res / scale : res;
}

PdmfTrace run_pdmf(const PartialModel& pm, DataSource& source, const GainPair& g0,
                   const PdmfOptions& opts) {
  require_shape(g0.F(), pm.m(), pm.n(), "F");
  PdmfTrace trace;
  GainPair g = g0;
  for (int i = 0; i < opts.max_iter; ++i) {
    PdmfRecord rec;
    rec.iteration = i;
    rec.gains = g;
    DataMatrices data;
    try {
      data = source.collect(g, i);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDivergence && e.code() != ErrorCode::kNonFiniteState) throw;
      rec.diverged = true;
      rec.next = g;
      rec.kkt33_residual = std::numeric_limits<double>::quiet_NaN();
      rec.sm_min_eig = std::numeric_limits<double>::quiet_NaN();
      trace.records.push_back(rec);
      trace.diverged = true;
      trace.divergence_message = e.what();
      break;
    }
    DataDualResult res = data_dual_update(pm, g, data, opts.max_condition);
    RepairedUpdate upd = primal_update_repaired(res.dual, opts.repair_floor);
    rec.dual = std::move(res.dual);
    rec.kkt33_residual = res.residual;
    rec.condition = res.condition;
    rec.sm_min_eig = res.sm_min_eig;
    rec.repaired = upd.repaired;
    rec.next = std::move(upd.gains);
    rec.gain_change = gain_distance(rec.gains, rec.next);
    trace.records.push_back(rec);
    g = trace.records.back().next;
    if (rec.gain_change <= opts.eps) {
      trace.converged = true;
      break;
    }
  }
  trace.final_gains = g;
  return trace;
}

void write_pdmf_trace_csv(std::ostream& os, const PdmfTrace& trace,
                          const std::optional<GainPair>& reference) {
  CsvWriter csv(os);
  csv.header({"iter", "gain_err_F", "gain_err_Fbar", "kkt33_residual", "sm_min_eig",
              "diverged_flag"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto errors = [&](const GainPair& g) -> std::pair<double, double> {
    if (!reference) return {nan, nan};
    return {(g.F() - reference->F()).norm(), (g.Fbar() - reference->Fbar()).norm()};
  };
  if (trace.records.empty()) return;
  const auto [e0, eb0] = errors(trace.records.front().gains);
  csv.field(0).field(e0).field(eb0).field(nan).field(nan).field(0);
  csv.end_row();
  for (const auto& rec : trace.records) {
    const auto [e, eb] = errors(rec.next);
    csv.field(rec.iteration + 1).field(e).field(eb).field(rec.kkt33_residual);
    csv.field(rec.sm_min_eig).field(rec.diverged ? 1 : 0);
    csv.end_row();
  }
}

}  // namespace mflqr
