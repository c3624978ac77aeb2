#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otp/data.hpp"
#include "otp/homotopy.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFile = 2;
constexpr int kExitMismatch = 3;

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

bool is_power_of_two(int h) { return h >= 1 && (h & (h - 1)) == 0; }

otp::SvdMode parse_svd_mode(const std::string& s) {
  if (s == "full") {
    return otp::SvdMode::full();
  }
  if (s.rfind("randomized:", 0) == 0) {
    const std::string rest = s.substr(11);
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      const int k = std::stoi(rest.substr(0, colon));
      const std::uint64_t seed = std::stoull(rest.substr(colon + 1));
      return otp::SvdMode::randomized(k, seed);
    }
  }
  throw CLI::ValidationError("--svd", "expected 'full' or 'randomized:K:SEED'");
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(std::stoi(item));
    }
  }
  if (out.empty()) {
    throw CLI::ValidationError(flag, "expected a non-empty comma-separated list");
  }
  return out;
}

struct LoadedPair {
  otp::PointCloud x;
  otp::PointCloud y;
};

LoadedPair load_pair(const std::string& source, const std::string& target) {
  LoadedPair p{otp::load_cloud(source), otp::load_cloud(target)};
  if (p.x.rows() != p.y.rows() || p.x.cols() != p.y.cols()) {
    throw otp::DimensionError("source and target clouds differ in shape");
  }
  return p;
}

int cmd_gen(const std::string& family_str, int n, int d, std::uint64_t seed,
            double noise, std::optional<double> angle, const std::string& out_x,
            const std::string& out_y) {
  const auto family = otp::family_from_string(family_str);
  if (!family) {
    std::cerr << "error: unknown family '" << family_str << "'\n";
    return kExitUsage;
  }
  otp::InstanceSpec spec{*family, n, d, seed, noise, angle};
  const auto [x, y] = otp::generate(spec);
  otp::save_cloud(x, out_x);
  otp::save_cloud(y, out_y);
  std::cout << "family = " << otp::to_string(*family) << "\n"
            << "n = " << n << "\n"
            << "d = " << d << "\n"
            << "seed = " << seed << "\n"
            << "wrote " << out_x << " and " << out_y << "\n";
  return 0;
}

int cmd_solve(const std::string& source, const std::string& target, int steps,
              const std::string& solver, const std::string& svd,
              const std::string& out_report, const std::string& out_trace,
              bool compare_oracle) {
  const auto [x, y] = load_pair(source, target);

  otp::HomotopyConfig cfg;
  cfg.steps_h = steps;
  cfg.f_strategy = solver == "exact" ? otp::RefineStrategy::Exact : otp::RefineStrategy::Local;
  cfg.svd_mode = parse_svd_mode(svd);
  if (!is_power_of_two(steps)) {
    std::cout << "warning: steps = " << steps << " is not a power of 2\n";
  }

  const otp::SolveReport report = otp::solve(x, y, cfg);

  std::cout << "n = " << x.cols() << ", d = " << x.rows() << "\n"
            << "lower bound = " << fmt(report.lower_bound) << "\n"
            << "final kappa = " << fmt(report.kappa) << "\n";
  for (const auto& w : report.warnings) {
    std::cout << "warning: " << w << "\n";
  }
  std::cout << "timings: greedysort " << report.timings.greedysort_ms << " ms, procrustes "
            << report.timings.procrustes_ms << " ms, root " << report.timings.root_ms
            << " ms, path " << report.timings.path_ms << " ms, total "
            << report.timings.total_ms << " ms\n";

  nlohmann::json extra;
  if (compare_oracle) {
    const otp::Permutation oracle = otp::exact_assign(otp::build_cost_matrix(x, y));
    const double kappa_oracle = otp::cost(x, y, oracle);
    const double scale = std::max({1.0, report.kappa, kappa_oracle});
    const bool agree = std::abs(report.kappa - kappa_oracle) <= 1e-9 * scale;
    std::cout << "oracle kappa = " << fmt(kappa_oracle) << "\n"
              << "oracle agreement = " << (agree ? "yes" : "no") << "\n";
    extra["oracle_kappa"] = kappa_oracle;
    extra["oracle_agreement"] = agree;
  }

  if (!out_report.empty()) {
    otp::save_report(report, out_report);
    if (!extra.empty()) {
      std::ifstream in(out_report);
      nlohmann::json j = nlohmann::json::parse(in);
      j.update(extra);
      std::ofstream out(out_report);
      out << j.dump(2) << "\n";
    }
    std::cout << "wrote report to " << out_report << "\n";
  }
  if (!out_trace.empty()) {
    otp::save_trace(report.trace, out_trace);
    std::cout << "wrote trace to " << out_trace << "\n";
  }
  return 0;
}

int cmd_study(const std::string& source, const std::string& target,
              const std::string& steps_list, const std::string& solver,
              const std::string& out) {
  const auto [x, y] = load_pair(source, target);
  const std::vector<int> hs = parse_int_list(steps_list, "--steps-list");

  otp::HomotopyConfig cfg;
  cfg.f_strategy = solver == "exact" ? otp::RefineStrategy::Exact : otp::RefineStrategy::Local;
  const auto traces = otp::step_study(x, y, hs, cfg);

  std::ofstream file(out);
  if (!file) {
    throw otp::IoError("cannot open for writing: " + out);
  }
  file << "h,path_position,kappa\n";
  for (const auto& [h, trace] : traces) {
    const double jump = otp::max_path_jump(trace);
    std::cout << "h = " << h << ": max jump = " << fmt(jump) << "\n";
    file << "# h=" << h << " max_jump=" << fmt(jump) << "\n";
    for (const auto& rec : trace.records) {
      if (rec.kappa_before) {
        file << h << "," << otp::detail::format_double(rec.path_position) << ","
             << otp::detail::format_double(*rec.kappa_before) << "\n";
      }
      file << h << "," << otp::detail::format_double(rec.path_position) << ","
           << otp::detail::format_double(rec.kappa_after) << "\n";
    }
  }
  if (!file) {
    throw otp::IoError("write failed: " + out);
  }
  std::cout << "wrote study to " << out << "\n";
  return 0;
}

double fit_exponent(const std::vector<double>& ns, const std::vector<double>& ts) {
  // least-squares slope of log t against log n
  const int m = static_cast<int>(ns.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double lx = std::log(ns[i]);
    const double ly = std::log(std::max(ts[i], 1e-9));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = m * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (m * sxy - sx * sy) / denom;
}

int cmd_bench(const std::string& n_list, int d, const std::string& family_str,
              const std::string& solver, int repeats, const std::string& out) {
  const auto family = otp::family_from_string(family_str);
  if (!family) {
    std::cerr << "error: unknown family '" << family_str << "'\n";
    return kExitUsage;
  }
  const std::vector<int> ns = parse_int_list(n_list, "--n-list");
  if (repeats < 1) {
    std::cerr << "error: --repeats must be >= 1\n";
    return kExitUsage;
  }

  otp::HomotopyConfig cfg;
  cfg.f_strategy = solver == "exact" ? otp::RefineStrategy::Exact : otp::RefineStrategy::Local;

  std::ofstream file(out);
  if (!file) {
    throw otp::IoError("cannot open for writing: " + out);
  }
  file << "n,solver,t_homotopy_ms,t_exact_ms,kappa_homotopy,kappa_exact,match\n";
  std::cout << "n,solver,t_homotopy_ms,t_exact_ms,kappa_homotopy,kappa_exact,match\n";

  std::vector<double> nd, th, te;
  for (int n : ns) {
    double t_hom = 0.0, t_ex = 0.0, kappa_hom = 0.0, kappa_ex = 0.0;
    bool match = true;
    for (int r = 0; r < repeats; ++r) {
      otp::InstanceSpec spec{*family, n, d, 1000u + static_cast<std::uint64_t>(n) + r};
      const auto [x, y] = otp::generate(spec);

      auto t0 = std::chrono::steady_clock::now();
      const otp::SolveReport report = otp::solve(x, y, cfg);
      t_hom += otp::detail::ms_since(t0);

      t0 = std::chrono::steady_clock::now();
      const otp::Permutation oracle = otp::exact_assign(otp::build_cost_matrix(x, y));
      t_ex += otp::detail::ms_since(t0);

      kappa_hom = report.kappa;
      kappa_ex = otp::cost(x, y, oracle);
      const double scale = std::max({1.0, kappa_hom, kappa_ex});
      match = match && std::abs(kappa_hom - kappa_ex) <= 1e-9 * scale;
    }
    t_hom /= repeats;
    t_ex /= repeats;
    std::ostringstream row;
    row << n << "," << solver << "," << t_hom << "," << t_ex << "," << fmt(kappa_hom)
        << "," << fmt(kappa_ex) << "," << (match ? "true" : "false");
    file << row.str() << "\n";
    std::cout << row.str() << "\n";
    nd.push_back(n);
    th.push_back(t_hom);
    te.push_back(t_ex);
  }

  const double exp_hom = fit_exponent(nd, th);
  const double exp_ex = fit_exponent(nd, te);
  file << "# exponent_homotopy=" << fmt(exp_hom) << "\n"
       << "# exponent_exact=" << fmt(exp_ex) << "\n";
  std::cout << "empirical scaling exponent (homotopy) = " << fmt(exp_hom) << "\n"
            << "empirical scaling exponent (exact) = " << fmt(exp_ex) << "\n";
  if (!file) {
    throw otp::IoError("write failed: " + out);
  }
  std::cout << "wrote bench to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homotopy solver for assignment-form optimal transport"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a seeded instance pair");
  std::string g_family = "gaussian-toy";
  int g_n = 0, g_d = 0;
  std::uint64_t g_seed = 0;
  double g_noise = 0.0;
  double g_angle = 0.0;
  bool g_has_angle = false;
  std::string g_out_x, g_out_y;
  gen->add_option("--family", g_family, "gaussian-toy | uniform-random | rotated-copy");
  gen->add_option("--n", g_n, "samples per cloud")->required()->check(CLI::PositiveNumber);
  gen->add_option("--d", g_d, "features")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g_seed, "PRNG seed")->required();
  gen->add_option("--noise", g_noise, "noise sigma (rotated-copy)");
  gen->add_option("--angle", g_angle, "rotation angle in radians (rotated-copy, d=2)")
      ->each([&](const std::string&) { g_has_angle = true; });
  gen->add_option("--out-x", g_out_x, "source cloud path")->required();
  gen->add_option("--out-y", g_out_y, "target cloud path")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "run the homotopy solver");
  std::string s_source, s_target, s_solver = "local", s_svd = "full";
  std::string s_out_report, s_out_trace;
  int s_steps = 4;
  bool s_compare = false;
  solve->add_option("--source", s_source, "source cloud CSV")->required();
  solve->add_option("--target", s_target, "target cloud CSV")->required();
  solve->add_option("--steps", s_steps, "homotopy steps h")->check(CLI::PositiveNumber);
  solve->add_option("--solver", s_solver, "local | exact")
      ->check(CLI::IsMember({"local", "exact"}));
  solve->add_option("--svd", s_svd, "full | randomized:K:SEED");
  solve->add_option("--out-report", s_out_report, "JSON report path");
  solve->add_option("--out-trace", s_out_trace, "CSV trace path");
  solve->add_flag("--compare-oracle", s_compare, "also run the exact assignment oracle");

  // study
  auto* study = app.add_subcommand("study", "trace several discretizations");
  std::string u_source, u_target, u_steps_list, u_solver = "local", u_out;
  study->add_option("--source", u_source)->required();
  study->add_option("--target", u_target)->required();
  study->add_option("--steps-list", u_steps_list, "comma-separated h values")->required();
  study->add_option("--solver", u_solver)->check(CLI::IsMember({"local", "exact"}));
  study->add_option("--out", u_out, "merged plot-ready CSV")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "time homotopy vs direct exact assignment");
  std::string b_n_list, b_family = "uniform-random", b_solver = "local", b_out;
  int b_d = 0, b_repeats = 1;
  bench->add_option("--n-list", b_n_list, "comma-separated n values")->required();
  bench->add_option("--d", b_d, "features")->required()->check(CLI::PositiveNumber);
  bench->add_option("--family", b_family);
  bench->add_option("--solver", b_solver)->check(CLI::IsMember({"local", "exact"}));
  bench->add_option("--repeats", b_repeats);
  bench->add_option("--out", b_out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(g_family, g_n, g_d, g_seed, g_noise,
                     g_has_angle ? std::optional<double>(g_angle) : std::nullopt, g_out_x,
                     g_out_y);
    }
    if (solve->parsed()) {
      return cmd_solve(s_source, s_target, s_steps, s_solver, s_svd, s_out_report,
                       s_out_trace, s_compare);
    }
    if (study->parsed()) {
      return cmd_study(u_source, u_target, u_steps_list, u_solver, u_out);
    }
    if (bench->parsed()) {
      return cmd_bench(b_n_list, b_d, b_family, b_solver, b_repeats, b_out);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const otp::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const otp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFile;
  } catch (const otp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
