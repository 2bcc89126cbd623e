#pragma once

// Tabular experiment reports, log-log power-law fits and a small job pool
// whose results are keyed by job index, never by completion order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include "symc/io.hpp"

namespace symc {

inline constexpr const char* kVersion = "symc 0.1.0";

struct PowerLawFit {
  double alpha = 0.0;  // y ~ exp(intercept) * x^(-alpha)
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
  double alpha_stderr = 0.0;
};

inline PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 points");
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pts) {
    if (!(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y)))
      throw std::invalid_argument("fit_power_law: points must be finite and strictly positive");
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto [x, y] : pts) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_power_law: all x values are equal");
  const double slope = sxy / sxx;
  PowerLawFit f;
  f.alpha = -slope;
  f.intercept = my - slope * mx;
  f.n_points = pts.size();
  const double ss_res = std::max(0.0, syy - slope * sxy);
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  f.alpha_stderr = std::sqrt(ss_res / (n - 2.0) / sxx);
  return f;
}

inline json to_json(const PowerLawFit& f) {
  return json{{"alpha", f.alpha},
              {"intercept", f.intercept},
              {"r2", f.r2},
              {"n_points", f.n_points},
              {"alpha_stderr", f.alpha_stderr}};
}

/// Linear-interpolated quantile (numpy's default) of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Named numeric columns plus free-form metadata, fits and summary.
/// Wall time is the only field that differs between identical runs.
struct ExperimentReport {
  std::string experiment;
  json config = json::object();
  json metadata = json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  json fits = json::array();
  json summary = json::object();
  double wall_time_s = 0.0;

  void add_row(std::vector<double> row) {
    if (row.size() != columns.size()) throw std::logic_error("ExperimentReport: row width does not match columns");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("ExperimentReport: no column " + name);
    return static_cast<std::size_t>(it - columns.begin());
  }

  json to_json() const {
    return json{{"experiment", experiment},
                {"version", kVersion},
                {"config", config},
                {"metadata", metadata},
                {"columns", columns},
                {"rows", rows},
                {"fits", fits},
                {"summary", summary},
                {"wall_time_s", wall_time_s}};
  }

  void write_csv(std::ostream& out) const {
    out << "# experiment: " << experiment << '\n';
    out << "# version: " << kVersion << '\n';
    out << "# config: " << config.dump() << '\n';
    out << "# metadata: " << metadata.dump() << '\n';
    out << "# fits: " << fits.dump() << '\n';
    out << "# summary: " << summary.dump() << '\n';
    out << "# wall_time_s: " << wall_time_s << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << detail::fmt_double(r[i]);
      out << '\n';
    }
  }

  void write(std::ostream& out, const std::string& format) const {
    if (format == "json")
      out << to_json().dump(2) << '\n';
    else if (format == "csv")
      write_csv(out);
    else
      throw std::invalid_argument("unknown report format: " + format);
  }

  void save(const std::string& path, const std::string& format) const {
    auto f = detail::open_out(path);
    write(f, format);
  }
};

/// Runs fn(0..n-1) on up to `workers` threads. The first exception (by job
/// index) is rethrown after all jobs finish.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace symc
