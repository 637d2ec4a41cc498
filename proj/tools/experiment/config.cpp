#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mflqr::experiment {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
  raise(ErrorCode::kSchemaError, field + ": " + what);
}

[[noreturn]] void invariant_error(const std::string& field, const std::string& what) {
  raise(ErrorCode::kInvariantError, field + ": " + what);
}

bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void reject_unknown(const json& obj, const std::string& field,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) schema_error(field + "." + key, "unknown field");
  }
}

const json& require(const json& obj, const std::string& parent, const std::string& key) {
  if (!obj.is_object()) schema_error(parent, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(parent + "." + key, "missing required field");
  return *it;
}

const json& require_object(const json& obj, const std::string& parent, const std::string& key) {
  const json& v = require(obj, parent, key);
  if (!v.is_object()) schema_error(parent + "." + key, "expected an object");
  return v;
}

double as_double(const json& v, const std::string& field) {
  if (!v.is_number()) schema_error(field, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) schema_error(field, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    schema_error(field, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) schema_error(field, "expected a string");
  return v.get<std::string>();
}

/// Array of equally long rows of numbers.
MatrixXd as_matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) schema_error(field, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array() || v[0].empty()) schema_error(field + "[0]", "expected a non-empty row");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[i];
    const std::string rname = field + "[" + std::to_string(i) + "]";
    if (!row.is_array()) schema_error(rname, "expected an array");
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      std::ostringstream os;
      os << "row has " << row.size() << " entries, expected " << cols;
      schema_error(rname, os.str());
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = as_double(row[j], rname + "[" + std::to_string(j) + "]");
    }
  }
  return out;
}

void expect_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                  const std::string& field) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
    invariant_error(field, os.str());
  }
}

NoiseKind parse_noise(const std::string& tag, const std::string& field) {
  if (tag == "normal") return NoiseKind::kNormal;
  if (tag == "rademacher") return NoiseKind::kRademacher;
  schema_error(field, "unknown noise tag '" + tag + "' (normal | rademacher)");
}

std::string noise_tag(NoiseKind k) { return k == NoiseKind::kNormal ? "normal" : "rademacher"; }

}  // namespace

nlohmann::json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kPi: return "pi";
    case Algorithm::kPd: return "pd";
    case Algorithm::kPdmf: return "pdmf";
    case Algorithm::kCompare: return "compare";
  }
  return "pi";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "pi") return Algorithm::kPi;
  if (text == "pd") return Algorithm::kPd;
  if (text == "pdmf") return Algorithm::kPdmf;
  if (text == "compare") return Algorithm::kCompare;
  schema_error("run.algorithm",
               "unknown algorithm '" + std::string(text) + "' (pi | pd | pdmf | compare)");
}

bool InputSpec::operator==(const InputSpec& o) const {
  return uniform == o.uniform && amplitude == o.amplitude && seed == o.seed &&
         same(means, o.means) && same(deviations, o.deviations);
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  const SystemMatrices& a = system;
  const SystemMatrices& b = o.system;
  return schema_version == o.schema_version && same(a.A1, b.A1) && same(a.A1bar, b.A1bar) &&
         same(a.A2, b.A2) && same(a.A2bar, b.A2bar) && same(a.B1, b.B1) &&
         same(a.B1bar, b.B1bar) && same(a.B2, b.B2) && same(a.B2bar, b.B2bar) &&
         same(Q, o.Q) && same(Qbar, o.Qbar) && same(R, o.R) && same(Rbar, o.Rbar) &&
         same(F0, o.F0) && same(F0bar, o.F0bar) && same(means, o.means) &&
         same(deviations, o.deviations) && inputs == o.inputs && run == o.run &&
         output == o.output;
}

MfSystem ExperimentConfig::make_system() const { return MfSystem(system); }

WeightSpec ExperimentConfig::make_weights() const { return WeightSpec(Q, Qbar, R, Rbar); }

GainPair ExperimentConfig::initial_gains() const { return GainPair(F0, F0bar); }

InitialStateEnsemble ExperimentConfig::states() const {
  return InitialStateEnsemble(means, deviations);
}

InitialStateEnsemble ExperimentConfig::augmented() const {
  const int m = static_cast<int>(system.B1.cols());
  if (!inputs) return states().with_uniform_inputs(m, 1.0, 0);
  if (inputs->uniform) return states().with_uniform_inputs(m, inputs->amplitude, inputs->seed);
  return states().augmented(inputs->means, inputs->deviations);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.schema_version != kSchemaVersion) {
    schema_error("schema_version", "unsupported version " + std::to_string(cfg.schema_version));
  }
  const auto n = cfg.system.A1.rows();
  const auto m = cfg.system.B1.cols();
  try {
    MfSystem sys(cfg.system);
  } catch (const Error& e) {
    invariant_error("system", e.what());
  }
  expect_shape(cfg.Q, n, n, "weights.Q");
  expect_shape(cfg.Qbar, n, n, "weights.Qbar");
  expect_shape(cfg.R, m, m, "weights.R");
  expect_shape(cfg.Rbar, m, m, "weights.Rbar");
  try {
    validate_weights(cfg.make_weights());
  } catch (const Error& e) {
    invariant_error("weights", e.what());
  }
  expect_shape(cfg.F0, m, n, "gains.F0");
  expect_shape(cfg.F0bar, m, n, "gains.F0bar");
  if (!all_finite(cfg.F0) || !all_finite(cfg.F0bar)) invariant_error("gains", "non-finite entry");
  if (cfg.means.rows() != n) invariant_error("ensemble.means", "rows must have n entries");
  if (cfg.deviations.rows() != n || cfg.deviations.cols() != cfg.means.cols()) {
    invariant_error("ensemble.deviations", "must match ensemble.means in shape");
  }
  if (!all_finite(cfg.means) || !all_finite(cfg.deviations)) {
    invariant_error("ensemble", "non-finite entry");
  }
  if (cfg.inputs && !cfg.inputs->uniform) {
    const auto r = cfg.means.cols();
    if (cfg.inputs->means.rows() != m || cfg.inputs->means.cols() != r ||
        cfg.inputs->deviations.rows() != m || cfg.inputs->deviations.cols() != r) {
      invariant_error("ensemble.u_psi", "needs one m-vector mean and deviation per member");
    }
  }
  if (cfg.inputs && cfg.inputs->uniform && !(cfg.inputs->amplitude > 0.0)) {
    invariant_error("ensemble.u_psi.amplitude", "must be positive");
  }
  const RunSpec& r = cfg.run;
  if (!(r.eps >= 0.0)) invariant_error("run.eps", "must be non-negative");
  if (r.max_iter < 1) invariant_error("run.maxIter", "must be >= 1");
  if (r.M < 1) invariant_error("run.M", "must be >= 1");
  if (r.H < 2 || r.H % 2 != 0) invariant_error("run.H", "must be even and >= 2");
  if (r.repetitions < 1) invariant_error("run.repetitions", "must be >= 1");
  if (!(r.divergence_threshold > 0.0)) invariant_error("run.divergence_threshold", "must be positive");
}

ExperimentConfig parse_config_text(std::string_view text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": malformed JSON";
    raise(ErrorCode::kParseError, os.str());
  }
  if (!doc.is_object()) schema_error("<root>", "expected an object");
  reject_unknown(doc, "<root>",
                 {"schema_version", "system", "weights", "gains", "ensemble", "run", "output"});

  ExperimentConfig cfg;
  cfg.schema_version = as_int(require(doc, "<root>", "schema_version"), "schema_version");
  if (cfg.schema_version != kSchemaVersion) {
    schema_error("schema_version", "unsupported version " + std::to_string(cfg.schema_version));
  }

  const json& sys = require_object(doc, "<root>", "system");
  reject_unknown(sys, "system", {"A1", "A1bar", "A2", "A2bar", "B1", "B1bar", "B2", "B2bar"});
  auto mat = [](const json& obj, const std::string& parent, const std::string& key) {
    return as_matrix(require(obj, parent, key), parent + "." + key);
  };
  cfg.system.A1 = mat(sys, "system", "A1");
  cfg.system.A1bar = mat(sys, "system", "A1bar");
  cfg.system.A2 = mat(sys, "system", "A2");
  cfg.system.A2bar = mat(sys, "system", "A2bar");
  cfg.system.B1 = mat(sys, "system", "B1");
  cfg.system.B1bar = mat(sys, "system", "B1bar");
  cfg.system.B2 = mat(sys, "system", "B2");
  cfg.system.B2bar = mat(sys, "system", "B2bar");

  const json& w = require_object(doc, "<root>", "weights");
  reject_unknown(w, "weights", {"Q", "Qbar", "R", "Rbar"});
  cfg.Q = mat(w, "weights", "Q");
  cfg.Qbar = mat(w, "weights", "Qbar");
  cfg.R = mat(w, "weights", "R");
  cfg.Rbar = mat(w, "weights", "Rbar");

  const json& g = require_object(doc, "<root>", "gains");
  reject_unknown(g, "gains", {"F0", "F0bar"});
  cfg.F0 = mat(g, "gains", "F0");
  cfg.F0bar = mat(g, "gains", "F0bar");

  const json& ens = require_object(doc, "<root>", "ensemble");
  reject_unknown(ens, "ensemble", {"means", "deviations", "u_psi"});
  cfg.means = mat(ens, "ensemble", "means").transpose();
  cfg.deviations = mat(ens, "ensemble", "deviations").transpose();
  if (const auto it = ens.find("u_psi"); it != ens.end()) {
    const json& u = *it;
    if (!u.is_object()) schema_error("ensemble.u_psi", "expected an object");
    reject_unknown(u, "ensemble.u_psi", {"amplitude", "seed", "means", "deviations"});
    InputSpec in;
    const bool listed = u.contains("means") || u.contains("deviations");
    if (listed) {
      if (u.contains("amplitude") || u.contains("seed")) {
        schema_error("ensemble.u_psi", "give either amplitude/seed or means/deviations");
      }
      in.uniform = false;
      in.means = mat(u, "ensemble.u_psi", "means").transpose();
      in.deviations = mat(u, "ensemble.u_psi", "deviations").transpose();
    } else {
      in.amplitude = as_double(require(u, "ensemble.u_psi", "amplitude"), "ensemble.u_psi.amplitude");
      in.seed = as_u64(require(u, "ensemble.u_psi", "seed"), "ensemble.u_psi.seed");
    }
    cfg.inputs = std::move(in);
  }

  const json& run = require_object(doc, "<root>", "run");
  reject_unknown(run, "run",
                 {"algorithm", "eps", "maxIter", "M", "H", "seed", "noise", "repetitions",
                  "exact_data", "divergence_threshold"});
  cfg.run.algorithm = parse_algorithm(as_string(require(run, "run", "algorithm"), "run.algorithm"));
  if (run.contains("eps")) cfg.run.eps = as_double(run["eps"], "run.eps");
  if (run.contains("maxIter")) cfg.run.max_iter = as_int(run["maxIter"], "run.maxIter");
  if (run.contains("M")) cfg.run.M = as_int(run["M"], "run.M");
  if (run.contains("H")) cfg.run.H = as_int(run["H"], "run.H");
  if (run.contains("seed")) cfg.run.seed = as_u64(run["seed"], "run.seed");
  if (run.contains("noise")) cfg.run.noise = parse_noise(as_string(run["noise"], "run.noise"), "run.noise");
  if (run.contains("repetitions")) cfg.run.repetitions = as_int(run["repetitions"], "run.repetitions");
  if (run.contains("exact_data")) {
    if (!run["exact_data"].is_boolean()) schema_error("run.exact_data", "expected a boolean");
    cfg.run.exact_data = run["exact_data"].get<bool>();
  }
  if (run.contains("divergence_threshold")) {
    cfg.run.divergence_threshold =
        as_double(run["divergence_threshold"], "run.divergence_threshold");
  }
  if (doc.contains("output")) cfg.output = as_string(doc["output"], "output");

  validate(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kIoError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["schema_version"] = cfg.schema_version;
  doc["system"] = {{"A1", matrix_json(cfg.system.A1)},       {"A1bar", matrix_json(cfg.system.A1bar)},
                   {"A2", matrix_json(cfg.system.A2)},       {"A2bar", matrix_json(cfg.system.A2bar)},
                   {"B1", matrix_json(cfg.system.B1)},       {"B1bar", matrix_json(cfg.system.B1bar)},
                   {"B2", matrix_json(cfg.system.B2)},       {"B2bar", matrix_json(cfg.system.B2bar)}};
  doc["weights"] = {{"Q", matrix_json(cfg.Q)},
                    {"Qbar", matrix_json(cfg.Qbar)},
                    {"R", matrix_json(cfg.R)},
                    {"Rbar", matrix_json(cfg.Rbar)}};
  doc["gains"] = {{"F0", matrix_json(cfg.F0)}, {"F0bar", matrix_json(cfg.F0bar)}};
  json ens = {{"means", matrix_json(cfg.means.transpose())},
              {"deviations", matrix_json(cfg.deviations.transpose())}};
  if (cfg.inputs) {
    if (cfg.inputs->uniform) {
      ens["u_psi"] = {{"amplitude", cfg.inputs->amplitude}, {"seed", cfg.inputs->seed}};
    } else {
      ens["u_psi"] = {{"means", matrix_json(cfg.inputs->means.transpose())},
                      {"deviations", matrix_json(cfg.inputs->deviations.transpose())}};
    }
  }
  doc["ensemble"] = std::move(ens);
  doc["run"] = {{"algorithm", std::string(to_string(cfg.run.algorithm))},
                {"eps", cfg.run.eps},
                {"maxIter", cfg.run.max_iter},
                {"M", cfg.run.M},
                {"H", cfg.run.H},
                {"seed", cfg.run.seed},
                {"noise", noise_tag(cfg.run.noise)},
                {"repetitions", cfg.run.repetitions},
                {"exact_data", cfg.run.exact_data},
                {"divergence_threshold", cfg.run.divergence_threshold}};
  if (!cfg.output.empty()) doc["output"] = cfg.output;
  return doc;
}

std::string serialize(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace mflqr::experiment
