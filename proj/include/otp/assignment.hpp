#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "otp/types.hpp"

namespace otp {

// Transport plan as a permutation: map[i] = j matches source column i of X to
// target column j of Y, i.e. T(j, i) = 1.
class Permutation {
 public:
  explicit Permutation(std::vector<int> map) : map_(std::move(map)) {
    const int n = static_cast<int>(map_.size());
    if (n == 0) {
      throw std::invalid_argument("Permutation: empty map");
    }
    std::vector<char> seen(n, 0);
    for (int v : map_) {
      if (v < 0 || v >= n || seen[v]) {
        throw std::invalid_argument("Permutation: map is not a bijection on {0..n-1}");
      }
      seen[v] = 1;
    }
  }

  static Permutation identity(int n) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
  }

  int order() const { return static_cast<int>(map_.size()); }
  int operator[](int i) const { return map_[i]; }
  const std::vector<int>& map() const { return map_; }

  Permutation inverse() const {
    std::vector<int> inv(map_.size());
    for (int i = 0; i < order(); ++i) {
      inv[map_[i]] = i;
    }
    return Permutation(std::move(inv));
  }

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<int> map_;
};

// kappa = ||X - Y T||_F
inline double cost(const PointCloud& x, const PointCloud& y, const Permutation& t) {
  require_same_shape(x, y);
  if (t.order() != x.cols()) {
    throw DimensionError("cost: permutation order does not match sample count");
  }
  double sq = 0.0;
  for (int i = 0; i < t.order(); ++i) {
    sq += (x.col(i) - y.col(t[i])).squaredNorm();
  }
  return std::sqrt(sq);
}

inline CostMatrix build_cost_matrix(const PointCloud& x, const PointCloud& y) {
  require_same_shape(x, y);
  const int n = static_cast<int>(x.cols());
  CostMatrix c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      c(i, j) = (x.col(i) - y.col(j)).squaredNorm();
    }
  }
  return c;
}

// tr(T^T M) = sum_i M(map[i], i)
inline double trace_objective(const Permutation& t, const Matrix& m) {
  if (m.rows() != m.cols() || t.order() != m.rows()) {
    throw DimensionError("trace_objective: order mismatch");
  }
  double s = 0.0;
  for (int i = 0; i < t.order(); ++i) {
    s += m(t[i], i);
  }
  return s;
}

// Single pass over X columns in index order; each takes the nearest
// unassigned Y column, ties broken by lowest Y index. O(n^2 d).
inline Permutation greedysort(const PointCloud& x, const PointCloud& y) {
  require_same_shape(x, y);
  const int n = static_cast<int>(x.cols());
  std::vector<char> taken(n, 0);
  std::vector<int> map(n);
  for (int i = 0; i < n; ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (taken[j]) {
        continue;
      }
      const double d = (x.col(i) - y.col(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    taken[best] = 1;
    map[i] = best;
  }
  return Permutation(std::move(map));
}

// Hungarian algorithm (shortest augmenting paths with potentials), O(n^3).
// Deterministic: ties resolve to the lowest column index scanned first.
inline Permutation exact_assign(const CostMatrix& c) {
  if (c.rows() != c.cols() || c.rows() < 1) {
    throw DimensionError("exact_assign: cost matrix must be square and nonempty");
  }
  if (!c.allFinite()) {
    throw std::invalid_argument("exact_assign: non-finite cost entries");
  }
  const int n = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, n);  // match[j] = row assigned to column j, n = free
  std::vector<int> way(n + 1, 0);

  for (int i = 0; i < n; ++i) {
    match[n] = i;
    int j0 = n;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 0; j < n; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != n);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != n);
  }

  std::vector<int> map(n);
  for (int j = 0; j < n; ++j) {
    map[match[j]] = j;
  }
  return Permutation(std::move(map));
}

struct LocalImproveStats {
  int swaps = 0;
  int cycle_cancels = 0;
  bool cap_hit = false;
};

namespace detail {

// A plan admits an improving cyclic exchange iff the exchange graph with
// edge weights w(i -> j) = C(i, map[j]) - C(i, map[i]) has a negative cycle
// (this is the min-cost-flow optimality condition). Bellman-Ford from a
// virtual source, deterministic relaxation order. Returns the cycle as a
// node list with edges cycle[t] -> cycle[t + 1], or empty at optimality.
inline std::vector<int> find_negative_exchange_cycle(const CostMatrix& c,
                                                     const std::vector<int>& map,
                                                     double eps) {
  const int n = static_cast<int>(map.size());
  std::vector<double> dist(n, 0.0);
  std::vector<int> parent(n, -1);
  int touched = -1;
  for (int it = 0; it < n; ++it) {
    touched = -1;
    for (int i = 0; i < n; ++i) {
      const double base = dist[i] - c(i, map[i]);
      for (int j = 0; j < n; ++j) {
        if (j == i) {
          continue;
        }
        const double cand = base + c(i, map[j]);
        if (cand < dist[j] - eps) {
          dist[j] = cand;
          parent[j] = i;
          touched = j;
        }
      }
    }
    if (touched < 0) {
      return {};
    }
  }
  // walk n parent steps to land inside a cycle, then collect it
  int v = touched;
  for (int k = 0; k < n; ++k) {
    v = parent[v];
  }
  std::vector<int> reversed;
  for (int u = v;; u = parent[u]) {
    reversed.push_back(u);
    if (reversed.size() > 1 && u == v) {
      break;
    }
  }
  // parent edges run p(u) -> u; flip into forward order
  std::vector<int> cycle(reversed.rbegin(), reversed.rend());
  cycle.pop_back();  // drop the duplicated start
  return cycle;
}

}  // namespace detail

// Local refinement operator F: best-improvement 2-swap hill climbing until
// no pair exchange helps, then cancellation of longer negative cyclic
// exchanges until none remains, so a warm start close to the optimum
// finishes the job with a handful of local modifications. Swap passes are
// capped at 50 n and cycle cancels at 10 n; cap hits surface through stats.
inline Permutation local_improve(const PointCloud& x, const PointCloud& y,
                                 const Permutation& t_init,
                                 LocalImproveStats* stats = nullptr) {
  require_same_shape(x, y);
  const int n = t_init.order();
  if (n != x.cols()) {
    throw DimensionError("local_improve: permutation order does not match sample count");
  }
  const CostMatrix c = build_cost_matrix(x, y);
  const double eps = 1e-12 * (1.0 + c.maxCoeff());
  std::vector<int> map = t_init.map();

  LocalImproveStats local;
  const long max_passes = 50L * n;
  long pass = 0;
  for (; pass < max_passes; ++pass) {
    int bi = -1, bj = -1;
    double best_delta = -eps;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double delta = c(i, map[j]) + c(j, map[i]) - c(i, map[i]) - c(j, map[j]);
        if (delta < best_delta) {
          best_delta = delta;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) {
      break;
    }
    std::swap(map[bi], map[bj]);
    ++local.swaps;
  }
  local.cap_hit = pass >= max_passes;

  const long max_cancels = 10L * n;
  for (long round = 0; round < max_cancels && !local.cap_hit; ++round) {
    const std::vector<int> cycle = detail::find_negative_exchange_cycle(c, map, eps);
    if (cycle.empty()) {
      break;
    }
    const int len = static_cast<int>(cycle.size());
    double delta = 0.0;
    for (int t = 0; t < len; ++t) {
      const int i = cycle[t], j = cycle[(t + 1) % len];
      delta += c(i, map[j]) - c(i, map[i]);
    }
    if (delta >= -eps) {
      break;
    }
    std::vector<int> targets(len);
    for (int t = 0; t < len; ++t) {
      targets[t] = map[cycle[(t + 1) % len]];
    }
    for (int t = 0; t < len; ++t) {
      map[cycle[t]] = targets[t];
    }
    ++local.cycle_cancels;
    if (round + 1 == max_cancels) {
      local.cap_hit = true;
    }
  }

  if (stats) {
    *stats = local;
  }
  return Permutation(std::move(map));
}

enum class RefineStrategy { Local, Exact };

// F: improve a plan from a warm start. Exact ignores the warm start beyond
// tie determinism.
inline Permutation refine(const PointCloud& x, const PointCloud& y,
                          const Permutation& t_init, RefineStrategy strategy,
                          LocalImproveStats* stats = nullptr) {
  if (strategy == RefineStrategy::Local) {
    return local_improve(x, y, t_init, stats);
  }
  return exact_assign(build_cost_matrix(x, y));
}

// Matrix product G T: result.map[i] = g.map[t.map[i]].
inline Permutation compose(const Permutation& g, const Permutation& t) {
  if (g.order() != t.order()) {
    throw DimensionError("compose: order mismatch");
  }
  std::vector<int> map(g.order());
  for (int i = 0; i < g.order(); ++i) {
    map[i] = g[t[i]];
  }
  return Permutation(std::move(map));
}

// Y G: column i of the result is column g.map[i] of y.
inline PointCloud apply_permutation(const PointCloud& y, const Permutation& g) {
  if (g.order() != y.cols()) {
    throw DimensionError("apply_permutation: order mismatch");
  }
  PointCloud out(y.rows(), y.cols());
  for (int i = 0; i < g.order(); ++i) {
    out.col(i) = y.col(g[i]);
  }
  return out;
}

}  // namespace otp
