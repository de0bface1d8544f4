#include <CLI11.hpp>
#include <iostream>

#include "radtomo/errors.hpp"
#include "radtomo/experiments.hpp"

using namespace radtomo;

int main(int argc, char** argv) {
  CLI::App app{"radtomo: transport tomography on a disk - forward solves, twin-data\n"
               "calibration, convergence-rate and fixed-alpha Gauss-Newton studies"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  double alpha = -1;
  long long seed = -1;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (defaults apply when omitted)");
    cmd->add_option("--out", out_dir, "output directory (overrides the config)");
    cmd->add_option("--seed", seed, "seed for randomized checks (overrides the config)");
  };

  CLI::App* check = app.add_subcommand("check", "run the consistency check suites");
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "generate phantom data and calibrate the twin target");
  CLI::App* rates =
      app.add_subcommand("rates", "convergence-rate study against the calibrated target");
  CLI::App* pgn = app.add_subcommand("pgn", "fixed-alpha Gauss-Newton convergence study");
  CLI::App* forward = app.add_subcommand("forward", "standalone forward solves and dumps");
  for (CLI::App* cmd : {check, calibrate, rates, pgn, forward}) add_common(cmd);
  pgn->add_option("--alpha", alpha, "fixed regularization parameter (default from config)");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    validate_config(cfg, config_path.empty() ? "defaults" : config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<unsigned>(seed);

    if (app.got_subcommand(check)) {
      const CheckReport report = run_check(cfg, cfg.seed, std::cout);
      if (!report.all_pass()) {
        std::cout << "check: FAILURES detected\n";
        return 3;
      }
      std::cout << "check: all " << report.lines.size() << " checks passed\n";
      return 0;
    }
    if (app.got_subcommand(calibrate)) {
      run_calibrate(cfg, cfg.out_dir, std::cout);
      return 0;
    }
    if (app.got_subcommand(rates)) {
      run_rates(cfg, cfg.out_dir, std::cout);
      return 0;
    }
    if (app.got_subcommand(pgn)) {
      run_pgn_study(cfg, cfg.out_dir, alpha > 0 ? alpha : cfg.alpha_pgn, std::cout);
      return 0;
    }
    if (app.got_subcommand(forward)) {
      run_forward_dump(cfg, cfg.out_dir, std::cout);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
