#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "dbose/config.hpp"
#include "dbose/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"delta-Bose gas semigroup laboratory"};
  app.set_version_flag("--version", dbose::kVersion);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--set", overrides,
                 "config override key=value (repeatable; wins over the file)");

  bool do_specfun = false, do_converge = false, do_normcheck = false,
       do_fkvd = false;
  app.add_subcommand("specfun-report",
                     "tabulate j, D, C_eps, b, c0 and B_eps cross-checks")
      ->callback([&] { do_specfun = true; });
  app.add_subcommand("converge",
                     "weighted distances ||S^eps(t) f - S(t) f||_{2,a}")
      ->callback([&] { do_converge = true; });
  app.add_subcommand("normcheck", "operator-norm bound shape verification")
      ->callback([&] { do_normcheck = true; });
  app.add_subcommand("fk-vs-duhamel",
                     "Feynman-Kac vs series evaluation at probe points")
      ->callback([&] { do_fkvd = true; });
  app.require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    const dbose::Config cfg = dbose::load_config(config_path, overrides);
    std::vector<std::string> files;
    if (do_specfun) files = dbose::run_specfun_report(cfg);
    if (do_converge) files = dbose::run_convergence(cfg);
    if (do_normcheck) files = dbose::run_normcheck(cfg);
    if (do_fkvd) files = dbose::run_fk_vs_duhamel(cfg);
    for (const auto& f : files) std::cout << f << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
