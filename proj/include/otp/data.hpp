#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "otp/homotopy.hpp"
#include "otp/rng.hpp"
#include "otp/types.hpp"

namespace otp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Family { GaussianToy, UniformRandom, RotatedCopy };

inline std::optional<Family> family_from_string(const std::string& s) {
  if (s == "gaussian-toy") return Family::GaussianToy;
  if (s == "uniform-random") return Family::UniformRandom;
  if (s == "rotated-copy") return Family::RotatedCopy;
  return std::nullopt;
}

inline const char* to_string(Family f) {
  switch (f) {
    case Family::GaussianToy: return "gaussian-toy";
    case Family::UniformRandom: return "uniform-random";
    case Family::RotatedCopy: return "rotated-copy";
  }
  return "?";
}

struct InstanceSpec {
  Family family = Family::GaussianToy;
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;          // rotated-copy only
  std::optional<double> angle;       // rotated-copy, d = 2 only
};

namespace detail {

inline Matrix gaussian_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  // column-major fill, matches the stored layout
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      m(i, j) = rng.gaussian();
    }
  }
  return m;
}

inline Matrix random_rotation(Rng& rng, int d) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rng, d, d));
  Matrix q = qr.householderQ();
  if (q.determinant() < 0.0) {
    q.col(d - 1) *= -1.0;
  }
  return q;
}

}  // namespace detail

// Seeded instance generation. rotated-copy builds Y as a column shuffle of X
// plus noise; the feature-space rotation is applied to both clouds so the
// zero-noise instance keeps an exactly zero-cost plan.
inline std::pair<PointCloud, PointCloud> generate(const InstanceSpec& spec) {
  if (spec.n < 1 || spec.d < 1) {
    throw std::invalid_argument("generate: n and d must be positive");
  }
  if (spec.noise_sigma < 0.0) {
    throw std::invalid_argument("generate: noise sigma must be nonnegative");
  }
  if (spec.angle && spec.d != 2) {
    throw std::invalid_argument("generate: explicit angle requires d = 2");
  }
  Rng rng(spec.seed);
  switch (spec.family) {
    case Family::GaussianToy: {
      // two visibly offset blobs
      PointCloud x = detail::gaussian_matrix(rng, spec.d, spec.n);
      PointCloud y = 1.5 * detail::gaussian_matrix(rng, spec.d, spec.n);
      y.row(0).array() += 3.0;
      for (int r = 1; r < spec.d; ++r) {
        y.row(r).array() += 0.5;
      }
      return {std::move(x), std::move(y)};
    }
    case Family::UniformRandom: {
      PointCloud x(spec.d, spec.n), y(spec.d, spec.n);
      for (int j = 0; j < spec.n; ++j) {
        for (int i = 0; i < spec.d; ++i) {
          x(i, j) = rng.uniform();
        }
      }
      for (int j = 0; j < spec.n; ++j) {
        for (int i = 0; i < spec.d; ++i) {
          y(i, j) = rng.uniform();
        }
      }
      return {std::move(x), std::move(y)};
    }
    case Family::RotatedCopy: {
      const PointCloud base = detail::gaussian_matrix(rng, spec.d, spec.n);
      std::vector<int> pi(spec.n);
      std::iota(pi.begin(), pi.end(), 0);
      rng.shuffle(pi.begin(), pi.end());
      PointCloud shuffled(spec.d, spec.n);
      for (int j = 0; j < spec.n; ++j) {
        shuffled.col(j) = base.col(pi[j]);
      }
      Matrix rot;
      if (spec.angle) {
        const double c = std::cos(*spec.angle), s = std::sin(*spec.angle);
        rot = Matrix{{c, -s}, {s, c}};
      } else {
        rot = detail::random_rotation(rng, spec.d);
      }
      PointCloud y = rot * shuffled;
      if (spec.noise_sigma > 0.0) {
        y += spec.noise_sigma * detail::gaussian_matrix(rng, spec.d, spec.n);
      }
      return {rot * base, std::move(y)};
    }
  }
  throw std::invalid_argument("generate: unknown family");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

}  // namespace detail

// On-disk clouds are sample-major: one header row of feature names, one row
// per sample. The loader transposes into the d x n column-sample layout.
inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  const int d = static_cast<int>(cloud.rows());
  const int n = static_cast<int>(cloud.cols());
  for (int k = 0; k < d; ++k) {
    out << (k ? "," : "") << "x" << k;
  }
  out << "\n";
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) {
      out << (i ? "," : "") << detail::format_double(cloud(i, j));
    }
    out << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

inline PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open for reading: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path + ": missing header row");
  }
  const auto header = detail::split_csv_line(line);
  const int d = static_cast<int>(header.size());
  if (d == 0 || header[0].empty()) {
    throw ParseError(path + ": malformed header row");
  }

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (static_cast<int>(fields.size()) != d) {
      throw ParseError(path + ": row " + std::to_string(lineno) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(d));
    }
    std::vector<double> vals(d);
    for (int k = 0; k < d; ++k) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[k], &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != fields[k].size() || fields[k].empty()) {
        throw ParseError(path + ": row " + std::to_string(lineno) + ", column " +
                         std::to_string(k + 1) + ": '" + fields[k] + "' is not a number");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path + ": row " + std::to_string(lineno) + ", column " +
                         std::to_string(k + 1) + ": non-finite value");
      }
      vals[k] = v;
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) {
    throw ParseError(path + ": no sample rows");
  }
  PointCloud cloud(d, static_cast<int>(rows.size()));
  for (int j = 0; j < static_cast<int>(rows.size()); ++j) {
    for (int i = 0; i < d; ++i) {
      cloud(i, j) = rows[j][i];
    }
  }
  return cloud;
}

// One row per trace record; kappa_before is empty on the i = h row.
inline void save_trace(const HomotopyTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << "iteration,path_position,kappa_before,kappa_after\n";
  for (const auto& rec : trace.records) {
    out << rec.iteration << "," << detail::format_double(rec.path_position) << ",";
    if (rec.kappa_before) {
      out << detail::format_double(*rec.kappa_before);
    }
    out << "," << detail::format_double(rec.kappa_after) << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

inline nlohmann::json trace_to_json(const HomotopyTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& rec : trace.records) {
    nlohmann::json row = {{"iteration", rec.iteration},
                          {"path_position", rec.path_position},
                          {"kappa_after", rec.kappa_after}};
    if (rec.kappa_before) {
      row["kappa_before"] = *rec.kappa_before;
    } else {
      row["kappa_before"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void save_report(const SolveReport& report, const std::string& path) {
  nlohmann::json j = {
      {"plan", report.plan.map()},
      {"kappa", report.kappa},
      {"lower_bound", report.lower_bound},
      {"warnings", report.warnings},
      {"trace", trace_to_json(report.trace)},
      {"timings_ms",
       {{"greedysort", report.timings.greedysort_ms},
        {"procrustes", report.timings.procrustes_ms},
        {"root", report.timings.root_ms},
        {"path", report.timings.path_ms},
        {"total", report.timings.total_ms}}}};
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace otp
