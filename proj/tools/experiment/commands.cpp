#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mflqr/csv.hpp"
#include "mflqr/model_free.hpp"

namespace mflqr::experiment {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Reporter {
 public:
  explicit Reporter(const CommandOptions& opts) : opts_(opts) {}

  void line(const std::string& text) const {
    if (!opts_.quiet && opts_.log) *opts_.log << text << '\n';
  }

 private:
  const CommandOptions& opts_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorCode::kIoError, "cannot create output directory " + dir.string());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorCode::kIoError, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

std::string fmt(double v) { return format_double(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end(), [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

json gains_json(const GainPair& g) {
  return {{"F", matrix_json(g.F())}, {"Fbar", matrix_json(g.Fbar())}};
}

/// Runs body(); a library failure is written to result.json and summary.txt
/// and mapped to its exit code.
template <class Body>
int guarded(const char* command, const fs::path& out, const Reporter& rep, Body body) {
  try {
    ensure_dir(out);
    return body();
  } catch (const Error& e) {
    const int code = exit_code(e.code());
    const std::string kind(to_string(e.code()));
    std::cerr << "mflqr " << command << ": " << kind << ": " << e.what() << '\n';
    rep.line(std::string("failed: ") + kind);
    try {
      json doc = {{"command", command},
                  {"status", "error"},
                  {"exit_code", code},
                  {"error", {{"code", kind}, {"message", e.what()}}}};
      write_json(out / "result.json", doc);
      std::ostringstream s;
      s << "command: " << command << "\nstatus: error\nerror: " << kind << "\nmessage: "
        << e.what() << "\nexit_code: " << code << "\n";
      write_file(out / "summary.txt", s.str());
    } catch (const Error&) {
    }
    return code;
  }
}

RolloutOptions rollout_options(const RunSpec& run, std::uint64_t seed) {
  RolloutOptions o;
  o.horizon = run.M;
  o.rollouts = run.H;
  o.mean_mode = MeanMode::kSampleMean;
  o.noise.kind = run.noise;
  o.noise.seed = seed;
  o.free_initial_input = true;
  o.divergence_threshold = run.divergence_threshold;
  return o;
}

void write_iteration_trace(const fs::path& path, const std::vector<GainPair>& gains,
                           const std::vector<double>& changes, const std::vector<double>& radii,
                           const std::vector<double>& costs, const GainPair& final_gains) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"iter", "gain_change", "radius", "cost", "gain_err_F", "gain_err_Fbar"});
  for (std::size_t i = 0; i < gains.size(); ++i) {
    csv.field(static_cast<long long>(i)).field(changes[i]).field(radii[i]).field(costs[i]);
    csv.field((gains[i].F() - final_gains.F()).norm());
    csv.field((gains[i].Fbar() - final_gains.Fbar()).norm());
    csv.end_row();
  }
  write_file(path, os.str());
}

int run_model_based(const ExperimentConfig& cfg, const fs::path& out, const Reporter& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  const MfSystem sys = cfg.make_system();
  const WeightSpec w = cfg.make_weights();
  const GainPair g0 = cfg.initial_gains();
  const InitialStateEnsemble states = cfg.states();
  const int n = sys.n();
  const MatrixXd Z1 = states.Z1(n), Z2 = states.Z2(n);
  IterationOptions it;
  it.eps = cfg.run.eps;
  it.max_iter = cfg.run.max_iter;
  const bool pd = cfg.run.algorithm == Algorithm::kPd;

  std::vector<GainPair> gains;
  std::vector<double> changes, radii, costs;
  GainPair final_gains;
  bool converged = false;
  json extra = json::object();
  if (pd) {
    const PdTrace tr = run_pd(sys, w, g0, it);
    for (const PdRecord& r : tr.records) {
      gains.push_back(r.gains);
      changes.push_back(r.gain_change);
      radii.push_back(r.radius);
      costs.push_back(dual_objective(r.dual, state_ensemble_constant(sys, r.gains, Z1, Z2)));
    }
    final_gains = tr.final_gains;
    converged = tr.converged;
    const MatrixXd N = cfg.inputs ? cfg.augmented().aleph(n)
                                  : state_ensemble_constant(sys, final_gains, Z1, Z2);
    const PrimalVar s = primal_solution(sys, final_gains, N);
    const DualVar x = dual_update(sys, w, final_gains);
    const KktResiduals kkt = kkt_residuals(sys, w, s, final_gains, x, N);
    extra["primal_update_sign"] = tr.primal_update_sign;
    extra["primal_objective"] = primal_objective(s, w);
    extra["dual_objective"] = dual_objective(x, N);
    extra["duality_gap"] = duality_gap(w, N, s, x);
    extra["duality_constant"] = cfg.inputs ? "augmented_ensemble" : "state_ensemble";
    extra["kkt_residuals"] = {{"r1", kkt.r1}, {"r2", kkt.r2}, {"r3", kkt.r3},
                              {"r4", kkt.r4}, {"r5", kkt.r5}};
  } else {
    const PiTrace tr = run_pi(sys, w, g0, it);
    for (const PiRecord& r : tr.records) {
      gains.push_back(r.gains);
      changes.push_back(r.gain_change);
      radii.push_back(r.radius);
      costs.push_back(optimal_cost(r.values, Z1, Z2));
    }
    final_gains = tr.final_gains;
    converged = tr.converged;
  }
  const double elapsed = seconds_since(t0);
  const ValuePair v = policy_evaluation(sys, w, final_gains);
  const double cost = optimal_cost(v, Z1, Z2);
  const double radius = is_stabilizing(sys, final_gains).radius;
  const double gare = gare_residual(sys, w, v).norm();
  write_iteration_trace(out / "trace.csv", gains, changes, radii, costs, final_gains);

  const int code = converged ? 0 : exit_code(ErrorCode::kMaxIterExceeded);
  json doc = {{"command", "run"},
              {"algorithm", std::string(to_string(cfg.run.algorithm))},
              {"status", converged ? "converged" : "max_iter"},
              {"exit_code", code},
              {"converged", converged},
              {"iterations", static_cast<int>(gains.size())},
              {"gains", gains_json(final_gains)},
              {"Fhat", matrix_json(final_gains.Fhat())},
              {"values", {{"P", matrix_json(v.P)}, {"Pbar", matrix_json(v.Pbar)}}},
              {"cost", cost},
              {"radius", radius},
              {"gare_residual", gare},
              {"timing_seconds", elapsed}};
  doc.update(extra);
  write_json(out / "result.json", doc);

  std::ostringstream s;
  s << "command: run\nalgorithm: " << to_string(cfg.run.algorithm)
    << "\nstatus: " << (converged ? "converged" : "max_iter") << "\niterations: " << gains.size()
    << "\ncost: " << fmt(cost) << "\nradius: " << fmt(radius) << "\ngare_residual: " << fmt(gare);
  if (pd) s << "\nduality_gap: " << fmt(extra["duality_gap"].get<double>());
  s << "\nexit_code: " << code << "\n";
  write_file(out / "summary.txt", s.str());
  rep.line(std::string(to_string(cfg.run.algorithm)) + ": " +
           (converged ? "converged" : "iteration limit") + " after " +
           std::to_string(gains.size()) + " iterations, cost " + fmt(cost));
  return code;
}

std::optional<GainPair> reference_optimum(const MfSystem& sys, const WeightSpec& w,
                                          const GainPair& g0) {
  try {
    return run_pi(sys, w, g0).final_gains;
  } catch (const Error&) {
    return std::nullopt;
  }
}

double hat_error(const GainPair& g, const std::optional<GainPair>& ref) {
  if (!ref) return kNaN;
  return (g.Fhat() - ref->Fhat()).norm();
}

int run_learning(const ExperimentConfig& cfg, const fs::path& out, const Reporter& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  const MfSystem truth = cfg.make_system();
  const WeightSpec w = cfg.make_weights();
  const GainPair g0 = cfg.initial_gains();
  const PartialModel pm = PartialModel::from_system(truth, w);
  const InitialStateEnsemble aug = cfg.augmented();
  std::unique_ptr<DataSource> source;
  if (cfg.run.exact_data) {
    source = std::make_unique<ExactMomentOracle>(truth, aug, cfg.run.M);
  } else {
    source = std::make_unique<SampledPlant>(truth, aug, rollout_options(cfg.run, cfg.run.seed));
  }
  PdmfOptions po;
  po.eps = cfg.run.eps;
  po.max_iter = cfg.run.max_iter;
  const PdmfTrace tr = run_pdmf(pm, *source, g0, po);
  const double elapsed = seconds_since(t0);
  const std::optional<GainPair> ref = reference_optimum(truth, w, g0);

  std::ostringstream csv;
  write_pdmf_trace_csv(csv, tr, ref);
  write_file(out / "trace.csv", csv.str());

  int repaired = 0;
  for (const auto& r : tr.records) repaired += r.repaired ? 1 : 0;
  const double err_hat = hat_error(tr.final_gains, ref);
  const int code = tr.diverged ? exit_code(ErrorCode::kDivergence) : 0;
  const char* status = tr.diverged ? "diverged" : (tr.converged ? "converged" : "max_iter");
  json doc = {{"command", "run"},
              {"algorithm", "pdmf"},
              {"status", status},
              {"exit_code", code},
              {"converged", tr.converged},
              {"diverged", tr.diverged},
              {"iterations", tr.iterations()},
              {"repaired_iterations", repaired},
              {"gains", gains_json(tr.final_gains)},
              {"Fhat", matrix_json(tr.final_gains.Fhat())},
              {"hat_gain_error", err_hat},
              {"seed", cfg.run.seed},
              {"H", cfg.run.H},
              {"M", cfg.run.M},
              {"exact_data", cfg.run.exact_data},
              {"timing_seconds", elapsed}};
  if (ref) doc["reference"] = gains_json(*ref);
  if (tr.diverged) doc["divergence_message"] = tr.divergence_message;
  write_json(out / "result.json", doc);

  std::ostringstream s;
  s << "command: run\nalgorithm: pdmf\nstatus: " << status << "\niterations: " << tr.iterations()
    << "\nhat_gain_error: " << fmt(err_hat) << "\nrepaired_iterations: " << repaired
    << "\nexit_code: " << code << "\n";
  if (tr.diverged) s << "divergence: " << tr.divergence_message << "\n";
  write_file(out / "summary.txt", s.str());
  rep.line(std::string("pdmf: ") + status + " after " + std::to_string(tr.iterations()) +
           " iterations, hat-gain error " + fmt(err_hat));
  return code;
}

struct CompareRow {
  int repetition = 0;
  std::uint64_t seed = 0;
  double identification_error = kNaN;
  double learned_error = kNaN;
  long long identification_transitions = 0;
  long long learning_transitions = 0;
  int learner_iterations = 0;
  bool learner_diverged = false;
  std::string note;
};

CompareRow compare_once(const ExperimentConfig& cfg, int repetition, const GainPair& reference) {
  const MfSystem truth = cfg.make_system();
  const WeightSpec w = cfg.make_weights();
  const GainPair g0 = cfg.initial_gains();
  const InitialStateEnsemble aug = cfg.augmented();
  CompareRow row;
  row.repetition = repetition;
  row.seed = cfg.run.seed + static_cast<std::uint64_t>(repetition);
  const RolloutOptions ro = rollout_options(cfg.run, row.seed);
  const long long per_collection =
      static_cast<long long>(aug.r()) * cfg.run.H * (cfg.run.M + 1);

  // Baseline: identify the drift from the learner's first data collection.
  const auto batches = rollout(truth, g0, aug, ro);
  const DriftEstimate est = identify_drift(batches);
  row.identification_transitions = per_collection;
  SystemMatrices sm = truth.matrices();
  sm.A1 = est.A1;
  sm.A1bar = est.A1bar;
  sm.B1 = est.B1;
  sm.B1bar = est.B1bar;
  const MfSystem model(std::move(sm));
  std::optional<GainPair> start;
  if (is_stabilizing(model, g0).stabilizing) {
    start = g0;
  } else {
    GainSearchOptions so;
    so.seed = row.seed;
    start = find_stabilizing_gains(model, so);
  }
  if (!start) {
    row.note = "no stabilizing gains for the identified model";
    row.identification_error = std::numeric_limits<double>::infinity();
  } else {
    try {
      const GainPair g_est = run_pi(model, w, *start).final_gains;
      row.identification_error = (g_est.Fhat() - reference.Fhat()).norm();
    } catch (const Error& e) {
      row.note = std::string("policy iteration on the identified model failed: ") + e.what();
      row.identification_error = std::numeric_limits<double>::infinity();
    }
  }

  SampledPlant plant(truth, aug, ro);
  PdmfOptions po;
  po.eps = cfg.run.eps;
  po.max_iter = cfg.run.max_iter;
  const PdmfTrace tr = run_pdmf(PartialModel::from_system(truth, w), plant, g0, po);
  row.learner_iterations = tr.iterations();
  row.learner_diverged = tr.diverged;
  row.learning_transitions = per_collection * tr.iterations();
  row.learned_error = tr.diverged ? std::numeric_limits<double>::infinity()
                                  : (tr.final_gains.Fhat() - reference.Fhat()).norm();
  return row;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts) {
  if (cfg.run.algorithm == Algorithm::kCompare) return cmd_compare(cfg, opts);
  const Reporter rep(opts);
  return guarded("run", opts.out_dir, rep, [&] {
    if (cfg.run.algorithm == Algorithm::kPdmf) return run_learning(cfg, opts.out_dir, rep);
    return run_model_based(cfg, opts.out_dir, rep);
  });
}

int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const Reporter rep(opts);
  return guarded("compare", opts.out_dir, rep, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const MfSystem truth = cfg.make_system();
    const WeightSpec w = cfg.make_weights();
    const GainPair reference = run_pi(truth, w, cfg.initial_gains()).final_gains;
    std::vector<CompareRow> rows;
    for (int rep_i = 0; rep_i < cfg.run.repetitions; ++rep_i) {
      rows.push_back(compare_once(cfg, rep_i, reference));
      const CompareRow& r = rows.back();
      rep.line("compare seed " + std::to_string(r.seed) + ": identification " +
               fmt(r.identification_error) + ", learned " + fmt(r.learned_error));
    }
    std::ostringstream os;
    CsvWriter csv(os);
    csv.header({"repetition", "seed", "identification_hat_error", "learned_hat_error", "ratio",
                "identification_transitions", "learning_transitions", "learner_iterations",
                "learner_diverged", "gare_solver", "note"});
    std::vector<double> ident, learned;
    json reps = json::array();
    for (const CompareRow& r : rows) {
      const double ratio = r.learned_error / r.identification_error;
      csv.field(r.repetition).field(static_cast<long long>(r.seed));
      csv.field(r.identification_error).field(r.learned_error).field(ratio);
      csv.field(r.identification_transitions).field(r.learning_transitions);
      csv.field(r.learner_iterations).field(r.learner_diverged ? 1 : 0);
      csv.field("policy_iteration").field(r.note);
      csv.end_row();
      ident.push_back(r.identification_error);
      learned.push_back(r.learned_error);
      reps.push_back({{"seed", r.seed},
                      {"identification_hat_error", r.identification_error},
                      {"learned_hat_error", r.learned_error},
                      {"learner_iterations", r.learner_iterations},
                      {"learner_diverged", r.learner_diverged},
                      {"note", r.note}});
    }
    write_file(opts.out_dir / "compare.csv", os.str());
    const double mi = median(ident), ml = median(learned);
    const bool ordering = ml < mi;
    json doc = {{"command", "compare"},
                {"status", "completed"},
                {"exit_code", 0},
                {"reference", gains_json(reference)},
                {"median_identification_hat_error", mi},
                {"median_learned_hat_error", ml},
                {"median_ratio", ml / mi},
                {"learned_below_identification", ordering},
                {"gare_solver", "policy_iteration"},
                {"repetitions", reps},
                {"timing_seconds", seconds_since(t0)}};
    write_json(opts.out_dir / "result.json", doc);
    std::ostringstream s;
    s << "command: compare\nrepetitions: " << rows.size()
      << "\nmedian_identification_hat_error: " << fmt(mi)
      << "\nmedian_learned_hat_error: " << fmt(ml) << "\nlearned_below_identification: "
      << (ordering ? "yes" : "no") << "\nexit_code: 0\n";
    write_file(opts.out_dir / "summary.txt", s.str());
    return 0;
  });
}

int cmd_check(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const Reporter rep(opts);
  return guarded("check", opts.out_dir, rep, [&] {
    const MfSystem sys = cfg.make_system();
    const WeightSpec w = cfg.make_weights();
    const int n = sys.n(), m = sys.m();
    json checks = json::array();
    bool all = true;
    auto add = [&](const std::string& name, bool pass, const std::string& detail) {
      checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
      all = all && pass;
      rep.line((pass ? "ok    " : "FLAG  ") + name + ": " + detail);
    };
    auto positive = [](const MatrixXd& M) {
      const double e = min_eigenvalue(M);
      return std::pair{e > 1e-12 * std::max(1.0, M.norm()), e};
    };

    const WeightReport wr = weight_report(w);
    add("weights", wr.valid,
        "min eig Q " + fmt(wr.min_eig_Q) + ", Q+Qbar " + fmt(wr.min_eig_Qhat) + ", R " +
            fmt(wr.min_eig_R) + ", R+Rbar " + fmt(wr.min_eig_Rhat));

    const StabilityReport st = is_stabilizing(sys, cfg.initial_gains());
    add("initial_gains_stabilizing", st.stabilizing, "operator radius " + fmt(st.radius));
    if (st.stabilizing) {
      add("stabilizable", true, "initial gains are stabilizing");
    } else {
      GainSearchOptions so;
      so.seed = cfg.run.seed;
      const auto found = find_stabilizing_gains(sys, so);
      add("stabilizable", found.has_value(),
          found ? "search found gains with radius " + fmt(is_stabilizing(sys, *found).radius)
                : "gain search found no stabilizing gains");
    }

    const InitialStateEnsemble states = cfg.states();
    const auto [z2_ok, z2_eig] = positive(states.Z2(n));
    add("Z2_positive", z2_ok, "min eig " + fmt(z2_eig));
    const auto [z12_ok, z12_eig] = positive(states.Z1(n) - states.Z2(n));
    add("Z1_minus_Z2_positive", z12_ok, "min eig " + fmt(z12_eig));

    const InitialStateEnsemble aug = cfg.augmented();
    const auto [al_ok, al_eig] = positive(aug.aleph(n));
    const int need = 2 * n + 2 * m;
    const bool enough = aug.r() >= need;
    add("aleph_positive", al_ok && enough,
        "min eig " + fmt(al_eig) + ", ensemble size " + std::to_string(aug.r()) +
            " (needs >= " + std::to_string(need) + ")");

    json doc = {{"command", "check"},
                {"status", "completed"},
                {"exit_code", 0},
                {"all_passed", all},
                {"checks", checks}};
    write_json(opts.out_dir / "result.json", doc);
    std::ostringstream s;
    s << "command: check\n";
    for (const auto& c : checks) {
      s << c["name"].get<std::string>() << ": " << (c["pass"].get<bool>() ? "pass" : "flagged")
        << " (" << c["detail"].get<std::string>() << ")\n";
    }
    s << "all_passed: " << (all ? "yes" : "no") << "\nexit_code: 0\n";
    write_file(opts.out_dir / "summary.txt", s.str());
    return 0;
  });
}

}  // namespace mflqr::experiment
