#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment/commands.hpp"

namespace {

using mflqr::experiment::Algorithm;

struct Invocation {
  std::string config;
  std::vector<std::string> positional;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* sub, Invocation& inv, bool with_algorithm) {
  sub->add_option("--config", inv.config, "experiment config (JSON)");
  sub->add_option("--out", inv.out, "output directory");
  sub->add_option("--seed", inv.seed, "override run.seed");
  sub->add_flag("--quiet", inv.quiet, "suppress progress output");
  sub->add_option("args", inv.positional,
                  with_algorithm ? "[algorithm] [config]" : "[config]");
}

int dispatch(const std::string& command, Invocation inv) {
  std::optional<Algorithm> algorithm;
  for (const std::string& p : inv.positional) {
    if (command == "run" && (p == "pi" || p == "pd" || p == "pdmf" || p == "compare") &&
        !algorithm) {
      algorithm = mflqr::experiment::parse_algorithm(p);
    } else if (inv.config.empty()) {
      inv.config = p;
    } else {
      std::cerr << "mflqr " << command << ": unexpected argument '" << p << "'\n";
      return 1;
    }
  }
  if (inv.config.empty()) {
    std::cerr << "mflqr " << command << ": --config is required\n";
    return 1;
  }
  mflqr::experiment::ExperimentConfig cfg;
  try {
    cfg = mflqr::experiment::parse_config(inv.config);
  } catch (const mflqr::Error& e) {
    std::cerr << "mflqr " << command << ": " << mflqr::to_string(e.code()) << ": " << e.what()
              << '\n';
    return mflqr::exit_code(e.code());
  }
  if (algorithm) cfg.run.algorithm = *algorithm;
  if (inv.seed) cfg.run.seed = *inv.seed;

  mflqr::experiment::CommandOptions opts;
  opts.out_dir = !inv.out.empty() ? inv.out : (!cfg.output.empty() ? cfg.output : "out");
  opts.quiet = inv.quiet;
  opts.log = &std::cout;
  if (command == "compare") return mflqr::experiment::cmd_compare(cfg, opts);
  if (command == "check") return mflqr::experiment::cmd_check(cfg, opts);
  return mflqr::experiment::cmd_run(cfg, opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field stochastic LQR experiments"};
  app.require_subcommand(1);
  Invocation run, compare, check;
  add_common(app.add_subcommand("run", "run pi, pd or pdmf"), run, true);
  add_common(app.add_subcommand("compare", "identification baseline vs learning"), compare,
             false);
  add_common(app.add_subcommand("check", "assumption report"), check, false);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (app.got_subcommand("run")) return dispatch("run", run);
  if (app.got_subcommand("compare")) return dispatch("compare", compare);
  return dispatch("check", check);
}
