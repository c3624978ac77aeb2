#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otp/assignment.hpp"
#include "otp/linalg.hpp"
#include "otp/types.hpp"

namespace otp {

struct HomotopyConfig {
  int steps_h = 4;
  RefineStrategy f_strategy = RefineStrategy::Local;
  SvdMode svd_mode = SvdMode::full();
  bool use_greedysort = true;  // ablation switch for the greedy pre-permutation
};

struct TraceRecord {
  int iteration;                       // i, from h down to 0
  double path_position;                // (h - i) / h
  std::optional<double> kappa_before;  // absent at i = h
  double kappa_after;
};

struct HomotopyTrace {
  std::vector<TraceRecord> records;
};

struct PhaseTimings {
  double greedysort_ms = 0.0;
  double procrustes_ms = 0.0;
  double root_ms = 0.0;
  double path_ms = 0.0;
  double total_ms = 0.0;
};

struct SolveReport {
  Permutation plan;
  double kappa = 0.0;
  double lower_bound = 0.0;
  HomotopyTrace trace;
  std::vector<std::string> warnings;
  PhaseTimings timings;
};

namespace detail {
inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}
}  // namespace detail

// ||x - y Q*||_F with Q* from the Procrustes relaxation; no permutation can
// transport at lower cost.
inline double lower_bound(const PointCloud& x, const PointCloud& y,
                          const SvdMode& mode = SvdMode::full()) {
  const OrthogonalMatrix qstar = procrustes(gram(x, y), mode);
  return (x - y * qstar.matrix()).norm();
}

// Greedy pre-alignment, Procrustes rotation, discretized walk back to the
// original target with a refinement at every step.
inline SolveReport solve(const PointCloud& x, const PointCloud& y,
                         const HomotopyConfig& config) {
  require_same_shape(x, y);
  const int n = static_cast<int>(x.cols());
  if (n < 1) {
    throw std::invalid_argument("solve: empty point clouds");
  }
  if (config.steps_h < 1) {
    throw std::invalid_argument("solve: steps_h must be >= 1");
  }
  const int h = config.steps_h;
  const auto t_start = std::chrono::steady_clock::now();

  PhaseTimings timings;
  std::vector<std::string> warnings;

  auto t0 = std::chrono::steady_clock::now();
  const Permutation g = config.use_greedysort ? greedysort(x, y) : Permutation::identity(n);
  const PointCloud y_g = apply_permutation(y, g);
  timings.greedysort_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const OrthogonalMatrix qstar = procrustes(gram(x, y_g), config.svd_mode);
  const double lb = (x - y_g * qstar.matrix()).norm();
  timings.procrustes_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const OrthogonalMatrix t_delta = orthogonal_root(qstar, h);
  if (t_delta.has_warning()) {
    warnings.push_back(t_delta.warning());
  }
  timings.root_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  // Y_i = Y_g T_delta^i, built incrementally with one d x n product per step.
  std::vector<PointCloud> path(h);
  path[0] = y_g;
  for (int i = 1; i < h; ++i) {
    path[i] = path[i - 1] * t_delta.matrix();
  }

  HomotopyTrace trace;
  trace.records.push_back({h, 0.0, std::nullopt, lb});

  Permutation plan_i = Permutation::identity(n);
  for (int i = h - 1; i >= 0; --i) {
    const PointCloud& y_i = path[i];
    const double kappa_before = cost(x, y_i, plan_i);
    LocalImproveStats stats;
    plan_i = refine(x, y_i, plan_i, config.f_strategy, &stats);
    if (stats.cap_hit) {
      warnings.push_back("local refinement pass cap hit at path step " + std::to_string(i));
    }
    const double kappa_after = cost(x, y_i, plan_i);
    trace.records.push_back(
        {i, static_cast<double>(h - i) / h, kappa_before, kappa_after});
  }
  timings.path_ms = detail::ms_since(t0);

  const Permutation plan = compose(g, plan_i);
  const double kappa = cost(x, y, plan);
  timings.total_ms = detail::ms_since(t_start);

  return {plan, kappa, lb, std::move(trace), std::move(warnings), timings};
}

// Re-run the solve at several discretizations of the same instance; traces
// align on normalized path position for side-by-side plotting.
inline std::vector<std::pair<int, HomotopyTrace>> step_study(
    const PointCloud& x, const PointCloud& y, const std::vector<int>& h_values,
    const HomotopyConfig& base_config) {
  if (h_values.empty()) {
    throw std::invalid_argument("step_study: empty list of step counts");
  }
  std::vector<std::pair<int, HomotopyTrace>> out;
  out.reserve(h_values.size());
  for (int h : h_values) {
    HomotopyConfig cfg = base_config;
    cfg.steps_h = h;
    out.emplace_back(h, solve(x, y, cfg).trace);
  }
  return out;
}

// Largest rise in kappa when carrying a plan to the next path step:
// max over records of kappa_before minus the preceding kappa_after.
inline double max_path_jump(const HomotopyTrace& trace) {
  double best = 0.0;
  for (std::size_t r = 1; r < trace.records.size(); ++r) {
    if (trace.records[r].kappa_before) {
      best = std::max(best,
                      *trace.records[r].kappa_before - trace.records[r - 1].kappa_after);
    }
  }
  return best;
}

}  // namespace otp
