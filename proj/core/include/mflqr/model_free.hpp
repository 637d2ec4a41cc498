#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "mflqr/simulator.hpp"

namespace mflqr {

/// What the learner knows: the noise-channel matrices and the weights. The
/// drift matrices A1, A1bar, B1, B1bar have no representation here.
struct PartialModel {
  MatrixXd A2, A2bar, B2, B2bar;
  WeightSpec weights;

  int n() const { return static_cast<int>(A2.rows()); }
  int m() const { return static_cast<int>(B2.cols()); }

  /// Copies the diffusion part of a full system.
  static PartialModel from_system(const MfSystem& sys, const WeightSpec& w);
};

/// Supplier of moment data at given gains.
class DataSource {
 public:
  virtual ~DataSource() = default;

  /// Data collected while running gains g during learning iteration `iteration`.
  virtual DataMatrices collect(const GainPair& g, int iteration) = 0;
};

/// Simulated plant. The true system is only reachable through rollouts.
class SampledPlant : public DataSource {
 public:
  using Observer = std::function<void(int iteration, const std::vector<TrajectoryBatch>&)>;

  /// `ensemble` must be augmented (state rows then free-input rows).
  SampledPlant(MfSystem truth, InitialStateEnsemble ensemble, RolloutOptions opts);

  DataMatrices collect(const GainPair& g, int iteration) override;

  void set_observer(Observer obs) { observer_ = std::move(obs); }

 private:
  MfSystem truth_;
  InitialStateEnsemble ensemble_;
  RolloutOptions opts_;
  Observer observer_;
};

/// Noise-free data from the exact moment recursion.
class ExactMomentOracle : public DataSource {
 public:
  ExactMomentOracle(MfSystem truth, InitialStateEnsemble ensemble, int M);

  DataMatrices collect(const GainPair& g, int iteration) override;

 private:
  MfSystem truth_;
  InitialStateEnsemble ensemble_;
  int M_;
};

struct DataDualResult {
  DualVar dual;
  double residual = 0.0;           ///< ||equation residual||_F / ||S LambdaTilde S||_F
  double condition = 0.0;          ///< condition number of the least-squares matrix
  double sm_min_eig = 0.0;
};

/// Least-squares solution of
///   W X W' + S (S2' X S2 + S3' X S3 + LambdaTilde - X) S = 0
/// over symmetric block-diagonal X. Throws kSingularData when SM is not
/// positive definite and kIllConditioned above `max_condition`.
DataDualResult data_dual_update(const PartialModel& pm, const GainPair& g,
                                const DataMatrices& d, double max_condition = 1e14);

/// Residual of the data equation at a given X, relative to ||S LambdaTilde S||_F.
double data_equation_residual(const PartialModel& pm, const GainPair& g,
                              const DataMatrices& d, const DualVar& x);

struct PdmfRecord {
  int iteration = 0;
  GainPair gains;
  DualVar dual;
  GainPair next;
  double kkt33_residual = 0.0;
  double condition = 0.0;
  double gain_change = 0.0;
  double sm_min_eig = 0.0;
  bool repaired = false;
  bool diverged = false;
};

struct PdmfTrace {
  std::vector<PdmfRecord> records;
  GainPair final_gains;
  bool converged = false;
  bool diverged = false;
  std::string divergence_message;

  int iterations() const { return static_cast<int>(records.size()); }
};

struct PdmfOptions {
  double eps = 1e-10;
  int max_iter = 30;
  double repair_floor = 1e-10;
  double max_condition = 1e14;
};

/// Learning loop: collect data at the current gains, solve the data
/// equation, update the gains. A divergent rollout ends the run with
/// diverged == true and the trace so far.
PdmfTrace run_pdmf(const PartialModel& pm, DataSource& source, const GainPair& g0,
                   const PdmfOptions& opts = {});

/// Writes columns iter,gain_err_F,gain_err_Fbar,kkt33_residual,sm_min_eig,
/// diverged_flag with errors measured against `reference` (Frobenius).
void write_pdmf_trace_csv(std::ostream& os, const PdmfTrace& trace,
                          const std::optional<GainPair>& reference);

}  // namespace mflqr
