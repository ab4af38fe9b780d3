#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dbose {

// Flat key=value run configuration; CLI overrides > file > defaults.
struct Config {
  int n = 2;
  double theta = 0.0;
  double a = 0.5;
  std::vector<double> eps_list = {0.2, 0.1, 0.05};
  std::vector<double> t_list = {0.25, 0.5, 1.0};
  std::string mollifier_profile = "standard_bump";
  std::string mollifier_table;  // CSV path (user_table profile)
  double grid_L = 8.0;          // Delta-axis extent
  double grid_Lc = 6.0;         // Xbar-axis extent
  int grid_md = 37;             // Delta nodes per axis
  int grid_mc = 27;             // Xbar nodes per axis
  int grid_mr = 13;             // y_r nodes per axis
  int mmax = 1;
  int lmax = 60;
  int nsamples = 20000;
  int march_nu = 320;
  double dt = 0.002;
  std::uint64_t seed = 20240806;
  std::string out_dir = "out";

  void set(const std::string& key, const std::string& value);
  std::string canonical() const;  // sorted key=value lines
  std::uint64_t hash() const;     // FNV-1a over canonical()
};

Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides);

std::string format_double(double v);  // 17 significant digits

// Experiment runners (the CLI subcommands); return emitted file paths.
std::vector<std::string> run_specfun_report(const Config& cfg);
std::vector<std::string> run_convergence(const Config& cfg);
std::vector<std::string> run_normcheck(const Config& cfg);
std::vector<std::string> run_fk_vs_duhamel(const Config& cfg);

}  // namespace dbose
