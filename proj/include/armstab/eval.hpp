// Stability metrics, the motion-capture-style acceleration estimator, and
// the paired benchmark harness with CSV/markdown emitters.
#pragma once

#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include "armstab/sim.hpp"

namespace armstab {

struct StabilityMetrics {
  double mean_lin = 0.0;
  double max_lin = 0.0;
  double mean_ang = 0.0;
  double max_ang = 0.0;
};

// Mean and max of the global EE acceleration norms after a warm-up window
// that discards the initial transient.
inline StabilityMetrics compute_metrics(const RolloutLog& log, double warmup = 0.5) {
  if (log.records.empty()) throw std::invalid_argument("compute_metrics: empty log");
  const double t0 = log.records.front().t;
  StabilityMetrics m;
  int count = 0;
  for (const SimRecord& r : log.records) {
    if (r.t - t0 < warmup && log.records.back().t - t0 > warmup) continue;
    const double lin = r.a_glob.head<3>().norm();
    const double ang = r.a_glob.tail<3>().norm();
    m.mean_lin += lin;
    m.mean_ang += ang;
    m.max_lin = std::max(m.max_lin, lin);
    m.max_ang = std::max(m.max_ang, ang);
    ++count;
  }
  m.mean_lin /= count;
  m.mean_ang /= count;
  return m;
}

// --------------------------------------------------------------------------
// numerical double differentiation of pose series (hardware-protocol mirror)

struct AccelEstimate {
  std::vector<double> t;       // sample times of the estimates
  std::vector<Vec3> linear;    // m/s^2
  std::vector<Vec3> angular;   // rad/s^2
  std::vector<int> removed;    // indices flagged as outliers and infilled
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

// robust z-score flags against median absolute deviation
inline std::vector<bool> mad_outliers(const std::vector<double>& mags, double z_threshold) {
  std::vector<bool> flags(mags.size(), false);
  const double med = median_of(mags);
  std::vector<double> dev(mags.size());
  for (size_t i = 0; i < mags.size(); ++i) dev[i] = std::abs(mags[i] - med);
  const double mad = median_of(dev);
  const double scale = std::max(1.4826 * mad, 1e-9 * std::max(1.0, std::abs(med)));
  for (size_t i = 0; i < mags.size(); ++i)
    if (std::abs(mags[i] - med) > z_threshold * scale) flags[i] = true;
  return flags;
}

inline void infill_linear(std::vector<Vec3>& series, const std::vector<bool>& flags) {
  const int n = static_cast<int>(series.size());
  for (int i = 0; i < n; ++i) {
    if (!flags[i]) continue;
    int lo = i - 1;
    while (lo >= 0 && flags[lo]) --lo;
    int hi = i + 1;
    while (hi < n && flags[hi]) ++hi;
    if (lo < 0 && hi >= n) {
      series[i].setZero();
    } else if (lo < 0) {
      series[i] = series[hi];
    } else if (hi >= n) {
      series[i] = series[lo];
    } else {
      const double w = static_cast<double>(i - lo) / (hi - lo);
      series[i] = (1.0 - w) * series[lo] + w * series[hi];
    }
  }
}

}  // namespace detail

// Central second differences of positions plus first differences of
// quaternion-log rates; samples further than z_threshold MAD-scaled
// deviations from the median magnitude are removed and linearly infilled.
inline AccelEstimate double_diff_accel(const std::vector<Pose>& poses, double rate_hz,
                                       double z_threshold = 5.0) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("double_diff_accel: rate must be positive");
  if (poses.size() < 3) throw std::invalid_argument("double_diff_accel: need at least 3 samples");

  const int n = static_cast<int>(poses.size());
  const double f = rate_hz;

  // midpoint angular rates from quaternion logs
  std::vector<Vec3> omega(n - 1);
  for (int i = 0; i + 1 < n; ++i)
    omega[i] = quat_log(poses[i + 1].orientation * poses[i].orientation.conjugate()) * f;

  AccelEstimate out;
  out.t.resize(n - 2);
  out.linear.resize(n - 2);
  out.angular.resize(n - 2);
  for (int i = 1; i + 1 < n; ++i) {
    out.t[i - 1] = i / f;
    out.linear[i - 1] =
        (poses[i + 1].position - 2.0 * poses[i].position + poses[i - 1].position) * (f * f);
    out.angular[i - 1] = (omega[i] - omega[i - 1]) * f;
  }

  std::vector<double> lin_mag(out.linear.size()), ang_mag(out.angular.size());
  for (size_t i = 0; i < out.linear.size(); ++i) {
    lin_mag[i] = out.linear[i].norm();
    ang_mag[i] = out.angular[i].norm();
  }
  const auto lin_flags = detail::mad_outliers(lin_mag, z_threshold);
  const auto ang_flags = detail::mad_outliers(ang_mag, z_threshold);
  std::vector<bool> flags(out.linear.size());
  for (size_t i = 0; i < flags.size(); ++i) {
    flags[i] = lin_flags[i] || ang_flags[i];
    if (flags[i]) out.removed.push_back(static_cast<int>(i));
  }
  detail::infill_linear(out.linear, flags);
  detail::infill_linear(out.angular, flags);
  return out;
}

// --------------------------------------------------------------------------
// benchmark harness (paired profiles/seeds across methods)

struct BenchMethod {
  std::string name;
  std::function<std::unique_ptr<Controller>()> make;
};

struct BenchCell {
  std::string method;
  int profile_index = 0;
  int rollout_index = 0;
  bool failed = false;
  StabilityMetrics metrics;
};

struct BenchRow {
  std::string method;
  // aggregates over cells: mean and sample std of each per-rollout metric
  double mean_lin = 0.0, mean_lin_std = 0.0;
  double max_lin = 0.0, max_lin_std = 0.0;
  double mean_ang = 0.0, mean_ang_std = 0.0;
  double max_ang = 0.0, max_ang_std = 0.0;
  int cells = 0;
  int failed_cells = 0;
};

struct BenchConfig {
  int profiles = 20;
  int rollouts_per_cell = 3;  // the evaluation protocol's repeat count
  std::uint64_t profile_seed = 1;
  double warmup = 0.5;
  SampleRanges ranges;
  Vec6 axis_scale = Vec6::Ones();  // task shaping applied after sampling
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchCell> cells;
};

inline BenchResult benchmark(const ChainModel& model, const std::vector<BenchMethod>& methods,
                             const BenchConfig& bench, const TaskCommand& cmd,
                             const SimConfig& sim, const VecX& q0) {
  if (bench.rollouts_per_cell < 1) throw std::invalid_argument("benchmark: need rollouts >= 1");
  if (bench.profiles < 1) throw std::invalid_argument("benchmark: need profiles >= 1");

  BenchResult result;
  for (const BenchMethod& method : methods) {
    std::vector<StabilityMetrics> ok_cells;
    BenchRow row;
    row.method = method.name;
    for (int p = 0; p < bench.profiles; ++p) {
      // identical profile and seed set for every method (paired design)
      const DisturbanceProfile profile = scale_profile_axes(
          sample_profile(bench.profile_seed + static_cast<std::uint64_t>(p), bench.ranges),
          bench.axis_scale);
      for (int r = 0; r < bench.rollouts_per_cell; ++r) {
        SimConfig run = sim;
        run.seed = CounterRng(bench.profile_seed, static_cast<std::uint64_t>(p),
                              static_cast<std::uint64_t>(r))
                       .next_u64();
        BenchCell cell;
        cell.method = method.name;
        cell.profile_index = p;
        cell.rollout_index = r;
        auto controller = method.make();
        try {
          const RolloutLog log = rollout(model, *controller, profile, cmd, run, q0);
          cell.metrics = compute_metrics(log, bench.warmup);
          ok_cells.push_back(cell.metrics);
        } catch (const RolloutAbort&) {
          cell.failed = true;
          ++row.failed_cells;
        }
        ++row.cells;
        result.cells.push_back(cell);
      }
    }

    if (!ok_cells.empty()) {
      auto agg = [&ok_cells](auto field, double& mean, double& sd) {
        double s = 0.0;
        for (const StabilityMetrics& m : ok_cells) s += m.*field;
        mean = s / ok_cells.size();
        double v = 0.0;
        for (const StabilityMetrics& m : ok_cells) v += (m.*field - mean) * (m.*field - mean);
        sd = ok_cells.size() > 1 ? std::sqrt(v / (ok_cells.size() - 1)) : 0.0;
      };
      agg(&StabilityMetrics::mean_lin, row.mean_lin, row.mean_lin_std);
      agg(&StabilityMetrics::max_lin, row.max_lin, row.max_lin_std);
      agg(&StabilityMetrics::mean_ang, row.mean_ang, row.mean_ang_std);
      agg(&StabilityMetrics::max_ang, row.max_ang, row.max_ang_std);
    }
    result.rows.push_back(row);
  }
  return result;
}

// Fixed column order: method, mean_lin, std, max_lin, std, mean_ang, std,
// max_ang, std (then bookkeeping columns).
inline std::string bench_to_csv(const BenchResult& result) {
  std::string s =
      "method,mean_lin,mean_lin_std,max_lin,max_lin_std,mean_ang,mean_ang_std,max_ang,"
      "max_ang_std,cells,failed_cells\n";
  for (const BenchRow& r : result.rows) {
    s += r.method + "," + fmt_double(r.mean_lin) + "," + fmt_double(r.mean_lin_std) + "," +
         fmt_double(r.max_lin) + "," + fmt_double(r.max_lin_std) + "," + fmt_double(r.mean_ang) +
         "," + fmt_double(r.mean_ang_std) + "," + fmt_double(r.max_ang) + "," +
         fmt_double(r.max_ang_std) + "," + std::to_string(r.cells) + "," +
         std::to_string(r.failed_cells) + "\n";
  }
  return s;
}

inline std::vector<BenchRow> bench_rows_from_csv(const std::string& text) {
  std::vector<BenchRow> rows;
  size_t pos = text.find('\n');
  if (pos == std::string::npos) throw std::invalid_argument("bench csv: missing header");
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos + 1);
    std::string line = text.substr(pos + 1, (eol == std::string::npos ? text.size() : eol) - pos - 1);
    pos = (eol == std::string::npos) ? text.size() : eol;
    if (line.empty()) continue;
    std::vector<std::string> tok;
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      tok.push_back(line.substr(start, (comma == std::string::npos ? line.size() : comma) - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (tok.size() != 11) throw std::invalid_argument("bench csv: wrong column count");
    BenchRow r;
    r.method = tok[0];
    auto num = [&tok](int i) {
      double x;
      if (!parse_double(tok[i], x)) throw std::invalid_argument("bench csv: bad number");
      return x;
    };
    r.mean_lin = num(1);
    r.mean_lin_std = num(2);
    r.max_lin = num(3);
    r.max_lin_std = num(4);
    r.mean_ang = num(5);
    r.mean_ang_std = num(6);
    r.max_ang = num(7);
    r.max_ang_std = num(8);
    r.cells = static_cast<int>(num(9));
    r.failed_cells = static_cast<int>(num(10));
    rows.push_back(std::move(r));
  }
  return rows;
}

// Markdown table in the benchmark-report layout: one row per method, mean and
// max columns with +- spreads; rows whose every rollout failed print "--".
inline std::string bench_to_markdown(const BenchResult& result) {
  std::ostringstream os;
  os << "| Method | LinAcc mean (m/s^2) | LinAcc max (m/s^2) | AngAcc mean (rad/s^2) | AngAcc max (rad/s^2) |\n";
  os << "|---|---|---|---|---|\n";
  os << std::fixed << std::setprecision(3);
  for (const BenchRow& r : result.rows) {
    os << "| " << r.method << " ";
    if (r.failed_cells == r.cells) {
      os << "| -- | -- | -- | -- |\n";
      continue;
    }
    os << "| " << r.mean_lin << " +- " << r.mean_lin_std;
    os << " | " << r.max_lin << " +- " << r.max_lin_std;
    os << " | " << r.mean_ang << " +- " << r.mean_ang_std;
    os << " | " << r.max_ang << " +- " << r.max_ang_std << " |";
    if (r.failed_cells > 0) os << " (" << r.failed_cells << " failed)";
    os << "\n";
  }
  return os.str();
}

}  // namespace armstab
