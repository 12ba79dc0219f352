// hyperlq: reduce, solve, verify, popov and simulate on a JSON system file.
// Exit codes: 0 ok, 1 validation, 2 convergence, 3 stability.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "hyperlq/cli.hpp"

namespace {

using namespace hyperlq;
using namespace hyperlq::cli;

hyperlq::cli::Pipeline load(const std::string& path) { return load_pipeline_checked(read_json_file(path)); }

void print(const ordered_json& report) { std::cout << report.dump() << '\n'; }

// Opens --out, or returns nullptr for stdout.
std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty() || path == "-") return nullptr;
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-quadratic boundary control of 1-D hyperbolic systems"};
  app.require_subcommand(1);

  std::string config;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "JSON system description")->required();
  };

  auto* reduce_cmd = app.add_subcommand("reduce", "print the reduced discrete quadruple");
  add_config(reduce_cmd);

  RiccatiOptions ropt;
  bool require_stable = false;
  auto* solve_cmd = app.add_subcommand("solve", "solve the control and filter Riccati equations");
  add_config(solve_cmd);
  solve_cmd->add_option("--tol", ropt.tol, "relative step tolerance")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--max-iter", ropt.max_iter, "value iteration budget");
  solve_cmd->add_flag("--require-stable", require_stable, "exit 3 unless A + B F is stable");

  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t degree = 8;
  auto* verify_cmd = app.add_subcommand("verify", "check the Riccati identities and the factorization");
  add_config(verify_cmd);
  verify_cmd->add_option("--trials", trials, "random test pairs");
  verify_cmd->add_option("--seed", seed, "seed of the first pair");
  verify_cmd->add_option("--degree", degree, "polynomial degree of test functions");

  double omega_min = 0.0;
  double omega_max = 0.0;
  std::size_t points = 1001;
  std::string out;
  auto* popov_cmd = app.add_subcommand("popov", "frequency sweep as CSV");
  add_config(popov_cmd);
  auto* omin_opt = popov_cmd->add_option("--omega-min", omega_min, "default -50/p1");
  auto* omax_opt = popov_cmd->add_option("--omega-max", omega_max, "default 50/p1");
  popov_cmd->add_option("--points", points, "grid points")->check(CLI::PositiveNumber);
  popov_cmd->add_option("--out", out, "CSV path (default stdout)");

  std::size_t periods = 40;
  std::size_t ppp = 512;
  std::string gain = "optimal";
  bool no_tail = false;
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop simulation along characteristics");
  add_config(sim_cmd);
  sim_cmd->add_option("--periods", periods, "number of travel-time periods");
  sim_cmd->add_option("--points-per-period", ppp, "samples per period")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--gain", gain, "optimal, zero, or a JSON matrix such as [[0.3]]");
  sim_cmd->add_option("--out", out, "trace CSV path (no trace when omitted)");
  sim_cmd->add_flag("--no-tail", no_tail, "skip the closed-form tail (allows unstable gains)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    const Pipeline pl = load(config);
    if (reduce_cmd->parsed()) {
      print(reduce_report(pl));
    } else if (solve_cmd->parsed()) {
      const ordered_json report = solve_report(pl, ropt);
      print(report);
      if (require_stable && !report["stable"].get<bool>()) {
        std::cerr << "error: " << to_string(ErrorCode::UnstableMatrix)
                  << ": closed loop is not stable\n";
        return kStability;
      }
    } else if (verify_cmd->parsed()) {
      print(verify_report(pl, trials, seed, degree));
    } else if (popov_cmd->parsed()) {
      const double lo = omin_opt->count() ? omega_min : -50.0 / pl.p1;
      const double hi = omax_opt->count() ? omega_max : 50.0 / pl.p1;
      if (!(lo <= hi)) throw Error(ErrorCode::InvalidConfig, "--omega-min exceeds --omega-max");
      auto file = open_out(out);
      std::ostream& os = file ? *file : std::cout;
      popov_csv(pl, lo, hi, points, os);
      if (!os) throw Error(ErrorCode::InvalidConfig, "write failed");
    } else if (sim_cmd->parsed()) {
      auto file = open_out(out);
      print(simulate_report(pl, periods, ppp, gain, !no_tail, file.get()));
      if (file && !*file) throw Error(ErrorCode::InvalidConfig, "write failed: " + out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
