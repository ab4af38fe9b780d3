#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbose/collision.hpp"
#include "dbose/config.hpp"
#include "dbose/normlab.hpp"
#include "dbose/quadrature_mc.hpp"
#include "dbose/specfun.hpp"
#include "dbose/version.hpp"

namespace dbose {

namespace {

using ordered_json = nlohmann::ordered_json;

MollifierHandle make_mollifier(const Config& cfg) {
  if (cfg.mollifier_profile == "standard_bump")
    return MollifierHandle::standard_bump();
  if (cfg.mollifier_profile == "user_table")
    return MollifierHandle::from_table(cfg.mollifier_table);
  throw std::invalid_argument("unknown mollifier profile " +
                              cfg.mollifier_profile);
}

std::string meta_line(const Config& cfg) {
  std::ostringstream os;
  os << "# " << kVersion << " config=" << std::hex << cfg.hash();
  return os.str();
}

std::ofstream open_out(const Config& cfg, const std::string& name,
                       std::vector<std::string>& files) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/" + name;
  files.push_back(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void write_json(const Config& cfg, const std::string& name, ordered_json& j,
                std::vector<std::string>& files) {
  j["version"] = kVersion;
  std::ostringstream hx;
  hx << std::hex << cfg.hash();
  j["config_hash"] = hx.str();
  auto out = open_out(cfg, name, files);
  out << j.dump(2) << "\n";
}

Axis delta_axis(const Config& cfg) {
  return Axis::symmetric(cfg.grid_L, cfg.grid_md);
}
Axis xbar_axis(const Config& cfg) {
  return Axis::symmetric(cfg.grid_Lc, cfg.grid_mc);
}

}  // namespace

std::vector<std::string> run_specfun_report(const Config& cfg) {
  std::vector<std::string> files;
  const MollifierHandle h = make_mollifier(cfg);
  const double c0 = fit_c0(h);
  ordered_json summary;
  summary["c0"] = c0;
  summary["k_phi"] = h.log_overlap_kphi();
  bool all_pass = true;

  {  // j(t) table
    auto out = open_out(cfg, "specfun_j.csv", files);
    out << meta_line(cfg) << "\n";
    out << "t,j_theta,tol\n";
    for (double t : cfg.t_list) {
      const JResult r = volterra_j(t, cfg.theta);
      out << format_double(t) << "," << format_double(r.value) << ","
          << format_double(r.rel_err) << "\n";
    }
  }
  {  // D(lambda)
    auto out = open_out(cfg, "specfun_dlambda.csv", files);
    out << meta_line(cfg) << "\n";
    out << "lambda,d_lambda\n";
    for (double lam : {0.0, 0.1, 1.0, 10.0, 100.0, 1e4, 1e8})
      out << format_double(lam) << "," << format_double(d_lambda(lam)) << "\n";
  }
  double max_ceps_delta = 0.0;
  {  // C_eps cross-mode
    auto out = open_out(cfg, "specfun_ceps.csv", files);
    out << meta_line(cfg) << "\n";
    out << "lambda,eps,c_integral,c_closed,rel_delta\n";
    for (double eps : cfg.eps_list) {
      const ScalarParams p = ScalarParams::make(cfg.theta, eps, h, c0);
      for (double lam : {0.5, 1.0, 2.0, 5.0, p.c1, 2.0 * p.c1, 50.0, 100.0}) {
        const double ci = c_eps(lam, p, CepsMode::integral);
        const double cc = c_eps(lam, p, CepsMode::closed);
        const double rel = std::abs(ci - cc) / std::abs(ci);
        max_ceps_delta = std::max(max_ceps_delta, rel);
        out << format_double(lam) << "," << format_double(eps) << ","
            << format_double(ci) << "," << format_double(cc) << ","
            << format_double(rel) << "\n";
      }
    }
  }
  summary["ceps_max_rel_delta"] = max_ceps_delta;
  all_pass = all_pass && max_ceps_delta < 1e-8;
  {  // b(u)
    auto out = open_out(cfg, "specfun_b.csv", files);
    out << meta_line(cfg) << "\n";
    out << "u,b\n";
    for (double u = 0.0; u <= 50.0; u += 2.5)
      out << format_double(u) << "," << format_double(b_overlap(u, h)) << "\n";
  }
  double max_beps_delta = 0.0;
  {  // B_eps series vs contour
    auto out = open_out(cfg, "specfun_beps.csv", files);
    out << meta_line(cfg) << "\n";
    out << "t,eps,series,series_stderr,series_tail,contour,rel_delta\n";
    for (double eps : cfg.eps_list) {
      const ScalarParams p = ScalarParams::make(cfg.theta, eps, h, c0);
      for (double t : cfg.t_list) {
        const BepsSeriesResult s =
            b_eps_series(t, p, cfg.lmax, cfg.nsamples, cfg.seed);
        const double contour = b_eps_contour(t, p);
        const double series = s.estimate.mean + s.truncation_tail;
        const double rel = std::abs(series - contour) / contour;
        max_beps_delta = std::max(max_beps_delta, rel);
        out << format_double(t) << "," << format_double(eps) << ","
            << format_double(s.estimate.mean) << ","
            << format_double(s.estimate.stderr_) << ","
            << format_double(s.truncation_tail) << ","
            << format_double(contour) << "," << format_double(rel) << "\n";
      }
    }
  }
  summary["beps_max_rel_delta"] = max_beps_delta;
  all_pass = all_pass && max_beps_delta < 0.02;
  summary["pass"] = all_pass;
  write_json(cfg, "specfun_summary.json", summary, files);
  return files;
}

std::vector<std::string> run_convergence(const Config& cfg) {
  std::vector<std::string> files;
  if (cfg.n != 2 && cfg.n != 3)
    throw std::domain_error("converge: n must be 2 or 3");
  const MollifierHandle h = make_mollifier(cfg);
  const double c0 = fit_c0(h);
  const JTable jtab(cfg.theta, 1e-7, 64.0, 420);
  const Axis dax = delta_axis(cfg);
  const Axis xax = xbar_axis(cfg);

  auto out = open_out(cfg, "converge.csv", files);
  out << meta_line(cfg) << "\n";
  out << "eps,t,dist_weighted,stderr,work_ops\n";
  ordered_json summary;
  summary["rows"] = ordered_json::array();
  for (double eps : cfg.eps_list) {
    const ScalarParams p = ScalarParams::make(cfg.theta, eps, h, c0);
    CollisionOptions opt;
    opt.mr = cfg.grid_mr;
    opt.nu = cfg.march_nu;
    const CollisionEvaluator ev(h, p, cfg.theta, &jtab, opt);
    for (double t : cfg.t_list) {
      double dist = 0.0, err = 0.0;
      if (t > 0.0) {
        const auto d = ev.convergence_distance(t, cfg.a, dax, xax);
        dist = d.value;
        err = d.err_est;
      }
      // deterministic work metric (kernel applications), not wall time
      const std::uint64_t work =
          static_cast<std::uint64_t>(cfg.march_nu) * cfg.grid_mr * cfg.grid_mr +
          static_cast<std::uint64_t>(cfg.grid_md) * cfg.grid_md * cfg.grid_mc;
      out << format_double(eps) << "," << format_double(t) << ","
          << format_double(dist) << "," << format_double(err) << "," << work
          << "\n";
      summary["rows"].push_back(
          {{"eps", eps}, {"t", t}, {"dist", dist}, {"err", err}});
    }
  }
  write_json(cfg, "converge_summary.json", summary, files);
  return files;
}

std::vector<std::string> run_normcheck(const Config& cfg) {
  std::vector<std::string> files;
  if (cfg.n != 2) throw std::domain_error("normcheck: n must be 2");
  const MollifierHandle h = make_mollifier(cfg);
  const double c0 = fit_c0(h);
  const JTable jtab(cfg.theta, 1e-7, 64.0, 420);

  ordered_json report;
  report["bounds"] = ordered_json::array();
  bool all_pass = true;
  VerifyGrids grids;
  grids.mr = cfg.grid_mr;
  grids.seed = cfg.seed;
  for (double eps : cfg.eps_list) {
    VerifyContext vctx;
    vctx.mollifier = &h;
    vctx.jtable = &jtab;
    vctx.theta = cfg.theta;
    vctx.params = ScalarParams::make(cfg.theta, eps, h, c0);
    const auto checks = verify_bounds(BoundFamily::bds_eps, grids, vctx);
    for (const auto& bc : checks) {
      ordered_json jb;
      jb["bound"] = bc.bound;
      jb["eps"] = eps;
      jb["t"] = bc.ts;
      jb["lhs"] = bc.lhs;
      jb["rhs_shape"] = bc.rhs_shape;
      jb["fitted_c"] = bc.fitted_c;
      jb["fitted_c_refined"] = bc.fitted_c_refined;
      jb["refinement_delta"] = bc.refinement_delta;
      jb["pass"] = bc.pass;
      report["bounds"].push_back(jb);
      all_pass = all_pass && bc.pass;
    }
  }
  {
    VerifyContext vctx;
    vctx.mollifier = &h;
    vctx.jtable = &jtab;
    vctx.theta = cfg.theta;
    vctx.params = ScalarParams::make(cfg.theta, cfg.eps_list.front(), h, c0);
    VerifyGrids hkg;
    hkg.seed = cfg.seed;
    const auto checks = verify_bounds(BoundFamily::hk_comp, hkg, vctx);
    ordered_json jb;
    jb["bound"] = checks[0].bound;
    jb["samples"] = checks[0].samples;
    jb["violations"] = checks[0].violations;
    jb["pass"] = checks[0].pass;
    report["bounds"].push_back(jb);
    all_pass = all_pass && checks[0].pass;
  }
  report["pass"] = all_pass;
  write_json(cfg, "normcheck.json", report, files);
  return files;
}

std::vector<std::string> run_fk_vs_duhamel(const Config& cfg) {
  std::vector<std::string> files;
  if (cfg.n != 2) throw std::domain_error("fk-vs-duhamel: n must be 2");
  const MollifierHandle h = make_mollifier(cfg);
  const double c0 = fit_c0(h);
  const JTable jtab(cfg.theta, 1e-7, 64.0, 420);
  const double eps = cfg.eps_list.front();
  const double t = cfg.t_list.front();
  const ScalarParams p = ScalarParams::make(cfg.theta, eps, h, c0);
  CollisionOptions opt;
  opt.mr = cfg.grid_mr;
  opt.nu = cfg.march_nu;
  const CollisionEvaluator ev(h, p, cfg.theta, &jtab, opt);
  const auto chain = ev.solve_eps_chain(t);

  // deterministic-route refinement delta as its error estimate
  CollisionOptions fine = opt;
  fine.nu = opt.nu * 3 / 2;
  fine.n_tau0 = opt.n_tau0 + 8;
  const CollisionEvaluator evf(h, p, cfg.theta, &jtab, fine);
  const auto chainf = evf.solve_eps_chain(t);

  const std::vector<std::pair<Vec2, Vec2>> probes = {
      {{0.0, 0.0}, {0.0, 0.0}},
      {{0.5, 0.0}, {0.0, 0.0}},
      {{0.0, 0.0}, {0.05, 0.05}},
      {{1.0, 0.5}, {0.5, 1.0}},
      {{0.3, -0.2}, {-0.1, 0.4}}};

  auto out = open_out(cfg, "fk_vs_duhamel.csv", files);
  out << meta_line(cfg) << "\n";
  out << "x1a,x1b,x2a,x2b,duhamel,duhamel_err,fk,fk_stderr,zscore\n";
  bool all_ok = true;
  const double sigma2 = 1.0;
  for (const auto& [x1, x2] : probes) {
    const Vec2 Delta{x1.x - x2.x, x1.y - x2.y};
    const Vec2 Xbar{0.5 * (x1.x + x2.x), 0.5 * (x1.y + x2.y)};
    const double dv = ev.s_eps_value(chain, Delta, Xbar);
    const double dvf = evf.s_eps_value(chainf, Delta, Xbar);
    const double derr = std::abs(dvf - dv);
    auto f = [&](const XPoint& xp) {
      double v = 1.0;
      for (const auto& pt : xp)
        v *= std::exp(-(pt.x * pt.x + pt.y * pt.y) / (2.0 * sigma2)) /
             (2.0 * M_PI * sigma2);
      return v;
    };
    const FeynmanKacResult fk = feynman_kac_estimate(
        f, {x1, x2}, t, eps, cfg.dt, cfg.nsamples, h, cfg.theta, cfg.seed);
    const double comb =
        std::sqrt(fk.estimate.stderr_ * fk.estimate.stderr_ + derr * derr);
    const double z = (dvf - fk.estimate.mean) / comb;
    all_ok = all_ok && std::abs(z) <= 3.0;
    out << format_double(x1.x) << "," << format_double(x1.y) << ","
        << format_double(x2.x) << "," << format_double(x2.y) << ","
        << format_double(dvf) << "," << format_double(derr) << ","
        << format_double(fk.estimate.mean) << ","
        << format_double(fk.estimate.stderr_) << "," << format_double(z)
        << "\n";
  }
  ordered_json summary;
  summary["pass"] = all_ok;
  write_json(cfg, "fk_vs_duhamel_summary.json", summary, files);
  return files;
}

}  // namespace dbose
