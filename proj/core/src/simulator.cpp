#include "mflqr/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "mflqr/csv.hpp"

namespace mflqr {
namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, int l, int h) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), static_cast<std::uint32_t>(l),
                    static_cast<std::uint32_t>(h)};
  return std::mt19937_64(seq);
}

class NoiseSampler {
 public:
  NoiseSampler(NoiseKind kind, std::mt19937_64 gen) : kind_(kind), gen_(std::move(gen)) {}

  double operator()() {
    if (kind_ == NoiseKind::kRademacher) return (gen_() >> 63) ? 1.0 : -1.0;
    return normal_(gen_);
  }

 private:
  NoiseKind kind_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void check_state(const VectorXd& x, double threshold, int l, int h, int k) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "non-finite state at l=" << l << " h=" << h << " k=" << k;
    raise(ErrorCode::kNonFiniteState, os.str());
  }
  if (x.norm() > threshold) {
    std::ostringstream os;
    os << "state norm " << x.norm() << " exceeds " << threshold << " at l=" << l
       << " h=" << h << " k=" << k;
    raise(ErrorCode::kDivergence, os.str());
  }
}

TrajectoryBatch simulate_member(const MfSystem& sys, const GainPair& g,
                                const InitialStateEnsemble& ens, int l,
                                const RolloutOptions& opts) {
  const int n = sys.n();
  const int m = sys.m();
  const int H = opts.rollouts;
  const int M = opts.horizon;
  const bool sample = opts.mean_mode == MeanMode::kSampleMean;
  const MatrixXd& F = g.F();
  const MatrixXd& Fbar = g.Fbar();
  const MatrixXd Fhat = g.Fhat();
  const MatrixXd A1h = sys.A1hat();
  const MatrixXd B1h = sys.B1hat();

  TrajectoryBatch b;
  b.l = l;
  b.H = H;
  b.M = M;
  b.mode = opts.mean_mode;
  b.seed = opts.noise.seed;
  b.stream = opts.stream;
  b.x.assign(H, MatrixXd(n, M + 2));
  b.u.assign(H, MatrixXd(m, M + 2));
  b.w.assign(H, VectorXd(M + 1));
  b.mean_x.resize(n, M + 2);
  b.mean_u.resize(m, M + 2);

  std::vector<NoiseSampler> noise;
  noise.reserve(H);
  for (int h = 0; h < H; ++h) {
    noise.emplace_back(opts.noise.kind, make_rng(opts.noise.seed, opts.stream, l, h));
  }

  const VectorXd mu = ens.means().col(l);
  const VectorXd dev = ens.deviations().col(l);
  for (int h = 0; h < H; ++h) {
    const double s = (h % 2 == 0) ? 1.0 : -1.0;
    b.x[h].col(0) = mu.head(n) + s * dev.head(n);
    if (opts.free_initial_input) b.u[h].col(0) = mu.tail(m) + s * dev.tail(m);
  }

  VectorXd exact_x = mu.head(n);
  VectorXd mx(n), mu_k(m), drift(n), diff(n), xk(n), uk(m), next(n), noise_term(n);
  for (int k = 0; k <= M + 1; ++k) {
    if (sample) {
      mx.setZero();
      for (int h = 0; h < H; ++h) mx += b.x[h].col(k);
      mx /= H;
    } else {
      mx = exact_x;
    }
    const bool free_input = k == 0 && opts.free_initial_input;
    if (!free_input) {
      const VectorXd common = Fbar * mx;
      for (int h = 0; h < H; ++h) b.u[h].col(k).noalias() = F * b.x[h].col(k) + common;
    }
    if (sample) {
      mu_k.setZero();
      for (int h = 0; h < H; ++h) mu_k += b.u[h].col(k);
      mu_k /= H;
    } else {
      mu_k = free_input ? VectorXd(mu.tail(m)) : VectorXd(Fhat * mx);
    }
    b.mean_x.col(k) = mx;
    b.mean_u.col(k) = mu_k;
    if (k == M + 1) break;

    drift.noalias() = sys.A1bar() * mx;
    drift.noalias() += sys.B1bar() * mu_k;
    diff.noalias() = sys.A2bar() * mx;
    diff.noalias() += sys.B2bar() * mu_k;
    for (int h = 0; h < H; ++h) {
      xk = b.x[h].col(k);
      uk = b.u[h].col(k);
      const double wk = noise[h]();
      b.w[h](k) = wk;
      next.noalias() = sys.A1() * xk;
      next.noalias() += sys.B1() * uk;
      next += drift;
      noise_term.noalias() = sys.A2() * xk;
      noise_term.noalias() += sys.B2() * uk;
      noise_term += diff;
      next += wk * noise_term;
      check_state(next, opts.divergence_threshold, l, h, k + 1);
      b.x[h].col(k + 1) = next;
    }
    if (!sample) exact_x = A1h * mx + B1h * mu_k;
  }
  return b;
}

// Runs fn(l) for l in [0, count) on up to `threads` workers and rethrows the
// failure of the lowest index.
template <class Fn>
void parallel_for(int count, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::atomic<int>& next) {
    for (int l = next++; l < count; l = next++) {
      try {
        fn(l);
      } catch (...) {
        errors[l] = std::current_exception();
      }
    }
  };
  std::atomic<int> next{0};
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    work(next);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, std::ref(next));
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

int simulation_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("MFLQR_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) return cap;
  }
  return hw;
}

std::vector<TrajectoryBatch> rollout(const MfSystem& sys, const GainPair& g,
                                     const InitialStateEnsemble& ensemble,
                                     const RolloutOptions& opts) {
  if (opts.horizon < 1) raise(ErrorCode::kInvalidHorizon, "horizon M must be >= 1");
  if (opts.rollouts < 2 || opts.rollouts % 2 != 0) {
    raise(ErrorCode::kInsufficientRollouts, "rollout count H must be even and >= 2");
  }
  require_shape(g.F(), sys.m(), sys.n(), "F");
  const int want = opts.free_initial_input ? sys.n() + sys.m() : sys.n();
  if (ensemble.dim() != want) {
    std::ostringstream os;
    os << "ensemble dimension " << ensemble.dim() << ", expected " << want;
    raise(ErrorCode::kDimensionMismatch, os.str());
  }
  std::vector<TrajectoryBatch> out(ensemble.r());
  parallel_for(ensemble.r(), simulation_threads(), [&](int l) {
    out[l] = simulate_member(sys, g, ensemble, l, opts);
  });
  return out;
}

MomentSequence exact_moments(const MfSystem& sys, const GainPair& g,
                             const InitialStateEnsemble& ensemble, int M) {
  if (M < 0) raise(ErrorCode::kInvalidHorizon, "horizon M must be >= 0");
  if (ensemble.dim() != sys.n() + sys.m()) {
    raise(ErrorCode::kDimensionMismatch, "exact_moments needs an augmented ensemble");
  }
  const AugmentedOps ops = augmented_ops(sys, g);
  const OperatorTriple t = make_triple(ops);
  MomentSequence seq;
  seq.second_moments.reserve(M + 1);
  MatrixXd S = ensemble.aleph(sys.n());
  MatrixXd sum = MatrixXd::Zero(S.rows(), S.cols());
  for (int k = 0; k <= M; ++k) {
    if (!S.allFinite() || S.norm() > 1e16) {
      std::ostringstream os;
      os << "moment recursion diverged at k=" << k;
      raise(ErrorCode::kDivergence, os.str());
    }
    sum += S;
    seq.second_moments.push_back(S);
    S = symmetrize(apply_primal(t, S));
  }
  seq.data.SM = symmetrize(sum);
  seq.data.WM = seq.data.SM * ops.S1.transpose();
  seq.data.M = M;
  seq.data.H = 0;
  seq.data.r = ensemble.r();
  return seq;
}

DataMatrices data_matrices(const std::vector<TrajectoryBatch>& batches) {
  if (batches.empty()) raise(ErrorCode::kInvalidArgument, "no trajectory batches");
  const int H = batches.front().H;
  const int M = batches.front().M;
  if (H < 2) raise(ErrorCode::kInsufficientRollouts, "need H >= 2 rollouts");
  const int n = static_cast<int>(batches.front().x.front().rows());
  const int m = static_cast<int>(batches.front().u.front().rows());
  const int d = n + m;
  MatrixXd SM = MatrixXd::Zero(2 * d, 2 * d);
  MatrixXd WM = MatrixXd::Zero(2 * d, 2 * d);
  MatrixXd V(2 * d, H), Vnext(2 * d, H);
  auto fill = [&](const TrajectoryBatch& b, int k, MatrixXd& out) {
    VectorXd mx = VectorXd::Zero(n), mu = VectorXd::Zero(m);
    for (int h = 0; h < H; ++h) {
      mx += b.x[h].col(k);
      mu += b.u[h].col(k);
    }
    mx /= H;
    mu /= H;
    for (int h = 0; h < H; ++h) {
      out.col(h) << mx, mu, b.x[h].col(k) - mx, b.u[h].col(k) - mu;
    }
  };
  for (const auto& b : batches) {
    if (b.H != H || b.M != M) {
      raise(ErrorCode::kInvalidArgument, "batches must share rollout count and horizon");
    }
    fill(b, 0, V);
    for (int k = 0; k <= M; ++k) {
      fill(b, k + 1, Vnext);
      SM.noalias() += V * V.transpose() / H;
      WM.noalias() += V * Vnext.transpose() / H;
      std::swap(V, Vnext);
    }
  }
  SM.topRightCorner(d, d).setZero();
  SM.bottomLeftCorner(d, d).setZero();
  WM.topRightCorner(d, d).setZero();
  WM.bottomLeftCorner(d, d).setZero();
  DataMatrices out;
  out.SM = symmetrize(SM);
  out.WM = WM;
  out.M = M;
  out.H = H;
  out.r = static_cast<int>(batches.size());
  const double min_eig = min_eigenvalue(out.SM);
  if (min_eig <= 1e-12 * std::max(1.0, out.SM.norm())) {
    std::ostringstream os;
    os << "data matrix SM is not positive definite (min eigenvalue " << min_eig
       << "); enlarge the ensemble or the horizon";
    raise(ErrorCode::kRankDeficient, os.str());
  }
  return out;
}

double expected_cost(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                     const InitialStateEnsemble& ensemble, int M) {
  const int n = sys.n();
  const OperatorTriple t = make_triple(closed_loop_2n(sys, g));
  const MatrixXd Qt = closed_loop_weight(w, g);
  const MatrixXd Z1 = ensemble.Z1(n);
  const MatrixXd Z2 = ensemble.Z2(n);
  MatrixXd Y = block_diag(Z2, Z1 - Z2);
  if (M < 0) {
    return (Qt * solve_gle_primal(t, Y, {true, n})).trace();
  }
  double total = 0.0;
  for (int k = 0; k <= M; ++k) {
    total += (Qt * Y).trace();
    Y = apply_primal(t, Y);
  }
  return total;
}

CostEstimate mc_cost(const MfSystem& sys, const WeightSpec& w, const GainPair& g,
                     const InitialStateEnsemble& ensemble, int M, int H,
                     const NoiseModel& noise) {
  const StabilityReport st = is_stabilizing(sys, g);
  if (!st.stabilizing) {
    std::ostringstream os;
    os << "Monte Carlo cost needs stabilizing gains, radius " << st.radius;
    raise(ErrorCode::kNotStabilizing, os.str());
  }
  RolloutOptions opts;
  opts.horizon = M;
  opts.rollouts = H;
  opts.mean_mode = MeanMode::kExactMean;
  opts.noise = noise;
  const auto batches = rollout(sys, g, ensemble, opts);
  CostEstimate est;
  est.radius = st.radius;
  double variance = 0.0;
  for (const auto& b : batches) {
    double mean_part = 0.0;
    for (int k = 0; k <= M; ++k) {
      mean_part += b.mean_x.col(k).dot(w.Qbar() * b.mean_x.col(k)) +
                   b.mean_u.col(k).dot(w.Rbar() * b.mean_u.col(k));
    }
    std::vector<double> pair(H / 2, 0.0);
    for (int h = 0; h < H; ++h) {
      double c = mean_part;
      for (int k = 0; k <= M; ++k) {
        c += b.x[h].col(k).dot(w.Q() * b.x[h].col(k)) +
             b.u[h].col(k).dot(w.R() * b.u[h].col(k));
      }
      pair[h / 2] += 0.5 * c;
    }
    double avg = 0.0;
    for (double p : pair) avg += p;
    avg /= static_cast<double>(pair.size());
    est.value += avg;
    if (pair.size() > 1) {
      double ss = 0.0;
      for (double p : pair) ss += (p - avg) * (p - avg);
      variance += ss / static_cast<double>(pair.size() - 1) / static_cast<double>(pair.size());
    }
  }
  est.std_error = std::sqrt(variance);
  est.truncation_tail =
      expected_cost(sys, w, g, ensemble, -1) - expected_cost(sys, w, g, ensemble, M);
  return est;
}

DriftRegression::DriftRegression(int regressors, int outputs)
    : ZtZ_(MatrixXd::Zero(regressors, regressors)),
      ZtY_(MatrixXd::Zero(regressors, outputs)),
      YtY_(MatrixXd::Zero(outputs, outputs)) {}

void DriftRegression::add(const Eigen::Ref<const VectorXd>& z,
                          const Eigen::Ref<const VectorXd>& y) {
  ZtZ_.noalias() += z * z.transpose();
  ZtY_.noalias() += z * y.transpose();
  YtY_.noalias() += y * y.transpose();
  ++count_;
}

MatrixXd DriftRegression::solve() const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ZtZ_, Eigen::EigenvaluesOnly);
  const VectorXd& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (count_ < ZtZ_.rows() || !(top > 0.0) || ev(0) <= 1e-12 * top) {
    std::ostringstream os;
    os << "regressor matrix is rank deficient (" << count_ << " samples, "
       << ZtZ_.rows() << " regressors, eigenvalue ratio " << (top > 0 ? ev(0) / top : 0.0)
       << ")";
    raise(ErrorCode::kRankDeficientRegressor, os.str());
  }
  return ZtZ_.ldlt().solve(ZtY_).transpose();
}

double DriftRegression::rms_residual(const Eigen::Ref<const MatrixXd>& coef) const {
  if (count_ == 0) return 0.0;
  const MatrixXd C = coef.transpose();
  const double sse = YtY_.trace() - 2.0 * (C.transpose() * ZtY_).trace() +
                     (C.transpose() * ZtZ_ * C).trace();
  return std::sqrt(std::max(0.0, sse) / static_cast<double>(count_));
}

DriftEstimate identify_drift(const std::vector<TrajectoryBatch>& batches) {
  if (batches.empty()) raise(ErrorCode::kInvalidArgument, "no trajectory batches");
  const int n = static_cast<int>(batches.front().x.front().rows());
  const int m = static_cast<int>(batches.front().u.front().rows());
  DriftRegression mean_reg(n + m, n);
  DriftRegression dev_reg(n + m, n);
  VectorXd z(n + m), y(n);
  for (const auto& b : batches) {
    const int H = b.H;
    MatrixXd mx = MatrixXd::Zero(n, b.M + 2);
    MatrixXd mu = MatrixXd::Zero(m, b.M + 2);
    for (int h = 0; h < H; ++h) {
      mx += b.x[h];
      mu += b.u[h];
    }
    mx /= H;
    mu /= H;
    for (int k = 0; k <= b.M; ++k) {
      z << mx.col(k), mu.col(k);
      mean_reg.add(z, mx.col(k + 1));
      for (int h = 0; h < H; ++h) {
        z << b.x[h].col(k) - mx.col(k), b.u[h].col(k) - mu.col(k);
        y = b.x[h].col(k + 1) - mx.col(k + 1);
        dev_reg.add(z, y);
      }
    }
  }
  const MatrixXd hat = mean_reg.solve();
  const MatrixXd cen = dev_reg.solve();
  DriftEstimate est;
  est.A1 = cen.leftCols(n);
  est.B1 = cen.rightCols(m);
  est.A1bar = hat.leftCols(n) - est.A1;
  est.B1bar = hat.rightCols(m) - est.B1;
  est.mean_residual = mean_reg.rms_residual(hat);
  est.deviation_residual = dev_reg.rms_residual(cen);
  est.mean_samples = mean_reg.samples();
  est.deviation_samples = dev_reg.samples();
  return est;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryBatch>& batches) {
  CsvWriter csv(os);
  if (batches.empty()) return;
  const int n = static_cast<int>(batches.front().x.front().rows());
  const int m = static_cast<int>(batches.front().u.front().rows());
  std::vector<std::string> cols{"l", "h", "k"};
  for (int i = 1; i <= n; ++i) cols.push_back("x_" + std::to_string(i));
  for (int j = 1; j <= m; ++j) cols.push_back("u_" + std::to_string(j));
  cols.push_back("w");
  csv.header(cols);
  for (const auto& b : batches) {
    for (int h = 0; h < b.H; ++h) {
      for (int k = 0; k <= b.M + 1; ++k) {
        csv.field(b.l).field(h).field(k);
        for (int i = 0; i < n; ++i) csv.field(b.x[h](i, k));
        for (int j = 0; j < m; ++j) csv.field(b.u[h](j, k));
        if (k <= b.M) {
          csv.field(b.w[h](k));
        } else {
          csv.empty();
        }
        csv.end_row();
      }
    }
  }
}

}  // namespace mflqr
