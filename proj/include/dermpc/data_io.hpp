// Copyright 2026 The dermpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file data_io.hpp
 * @brief Time-series ingestion, resampling and rolling forecast windows.
 *
 * CSV schema: one header row, then one sample per row. The timestamp column
 * holds ISO-8601 date-times (`2020-08-14T00:05:00Z`, `2020-08-14 00:05`,
 * `2020-08-14T00:05:00-07:00`); a timestamp without offset is read as UTC.
 * The value column holds a floating-point number. An empty cell or `nan`
 * marks a missing sample. Lines starting with `#` are comments.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dermpc/battery_model.hpp"
#include "dermpc/errors.hpp"

namespace dermpc {

/// Uniformly sampled series. `start_time` is UTC seconds since the epoch.
struct ForecastSeries {
  std::int64_t start_time = 0;
  int step_seconds = 300;
  std::vector<double> values_gw;

  std::size_t size() const { return values_gw.size(); }
  std::int64_t time_at(std::size_t k) const {
    return start_time + static_cast<std::int64_t>(k) * step_seconds;
  }

  void validate() const {
    if (step_seconds <= 0) throw DataError("series step must be positive");
    for (std::size_t k = 0; k < values_gw.size(); ++k)
      if (!std::isfinite(values_gw[k])) throw DataError(fmt::format("series sample {} is not finite", k));
  }

  friend bool operator==(const ForecastSeries&, const ForecastSeries&) = default;
};

/// How to read a CSV file.
struct ColumnSpec {
  std::string timestamp_column = "timestamp";
  std::string value_column;    ///< empty: first column other than the timestamp
  double scale = 1.0;          ///< applied to every value, e.g. 1e-3 for MW -> GW
  int step_seconds = 0;        ///< 0: smallest spacing in the file (300 for one row)
  int max_gap_steps = 3;       ///< longer runs of missing samples are errors
};

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

namespace detail {

inline bool read_int(const std::string& s, std::size_t& pos, int digits, int& out) {
  if (pos + digits > s.size()) return false;
  out = 0;
  for (int i = 0; i < digits; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  pos += digits;
  return true;
}

inline bool expect_char(const std::string& s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace detail

/// Parses an ISO-8601 date-time with optional seconds and UTC offset.
inline std::optional<std::int64_t> parse_timestamp(const std::string& text) {
  using namespace std::chrono;
  const std::string s = detail::trim(text);
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!detail::read_int(s, pos, 4, y) || !detail::expect_char(s, pos, '-') ||
      !detail::read_int(s, pos, 2, mo) || !detail::expect_char(s, pos, '-') ||
      !detail::read_int(s, pos, 2, d))
    return std::nullopt;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    ++pos;
    if (!detail::read_int(s, pos, 2, h) || !detail::expect_char(s, pos, ':') ||
        !detail::read_int(s, pos, 2, mi))
      return std::nullopt;
    if (detail::expect_char(s, pos, ':') && !detail::read_int(s, pos, 2, sec)) return std::nullopt;
  }
  int offset_seconds = 0;
  if (pos < s.size()) {
    const char sign = s[pos];
    if (sign == 'Z') {
      ++pos;
    } else if (sign == '+' || sign == '-') {
      ++pos;
      int oh = 0, om = 0;
      if (!detail::read_int(s, pos, 2, oh) || !detail::expect_char(s, pos, ':') ||
          !detail::read_int(s, pos, 2, om) || oh > 23 || om > 59)
        return std::nullopt;
      offset_seconds = (sign == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    }
  }
  if (pos != s.size() || h > 23 || mi > 59 || sec > 59) return std::nullopt;
  const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  const auto midnight = sys_days{date}.time_since_epoch();
  return duration_cast<seconds>(midnight).count() + h * 3600 + mi * 60 + sec - offset_seconds;
}

/// `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_timestamp(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const sys_seconds t{seconds{epoch_seconds}};
  const sys_days day_start = floor<days>(t);
  const year_month_day date{day_start};
  const hh_mm_ss<seconds> clock{t - day_start};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(date.year()),
                     static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                     clock.hours().count(), clock.minutes().count(), clock.seconds().count());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell = trim(cell);
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA";
}

}  // namespace detail

/// Parses CSV text. `name` prefixes every diagnostic as `name:line`.
inline ForecastSeries parse_csv(std::istream& in, const ColumnSpec& spec = {},
                                const std::string& name = "csv") {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(line);
    if (!body.empty() && body[0] != '#') {
      header = detail::split_csv_row(body);
      break;
    }
  }
  if (header.empty()) throw DataError(name + ": missing header row");

  int time_col = -1, value_col = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == spec.timestamp_column) time_col = c;
  }
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c == time_col) continue;
    if (spec.value_column.empty() ? value_col < 0 : header[c] == spec.value_column) value_col = c;
  }
  if (time_col < 0) throw DataError(fmt::format("{}:{}: no column named '{}'", name, line_no, spec.timestamp_column));
  if (value_col < 0)
    throw DataError(fmt::format("{}:{}: no value column{}", name, line_no,
                                spec.value_column.empty() ? "" : " named '" + spec.value_column + "'"));

  struct Row {
    int line;
    std::int64_t time;
    double value;  // NaN when missing
  };
  std::vector<Row> rows;
  const std::size_t needed = static_cast<std::size_t>(std::max(time_col, value_col)) + 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto cells = detail::split_csv_row(body);
    if (cells.size() < needed)
      throw DataError(fmt::format("{}:{}: malformed row, expected at least {} fields, got {}", name, line_no,
                                  needed, cells.size()));
    const auto t = parse_timestamp(cells[time_col]);
    if (!t) throw DataError(fmt::format("{}:{}: cannot parse timestamp '{}'", name, line_no, cells[time_col]));
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!detail::is_missing(cells[value_col])) {
      try {
        value = detail::parse_double(cells[value_col], "") * spec.scale;
      } catch (const ConfigError&) {
        throw DataError(fmt::format("{}:{}: cannot parse number '{}'", name, line_no, cells[value_col]));
      }
    }
    if (!rows.empty() && *t <= rows.back().time)
      throw DataError(fmt::format("{}:{}: timestamp {} is not after the previous row ({})", name, line_no,
                                  cells[time_col], format_timestamp(rows.back().time)));
    rows.push_back({line_no, *t, value});
  }
  if (rows.empty()) throw DataError(name + ": no data rows");

  std::int64_t step = spec.step_seconds;
  if (step <= 0) {
    step = 300;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const std::int64_t dt = rows[k].time - rows[k - 1].time;
      if (k == 1 || dt < step) step = dt;
    }
  }

  ForecastSeries series;
  series.start_time = rows.front().time;
  series.step_seconds = static_cast<int>(step);
  std::vector<int> source_line;  // row line of each sample, or the next row for filled gaps
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0) {
      const std::int64_t dt = rows[k].time - rows[k - 1].time;
      if (dt % step != 0)
        throw DataError(fmt::format("{}:{}: timestamp is off the {} s grid", name, rows[k].line, step));
      for (std::int64_t missing = dt / step - 1; missing > 0; --missing) {
        series.values_gw.push_back(std::numeric_limits<double>::quiet_NaN());
        source_line.push_back(rows[k].line);
      }
    }
    series.values_gw.push_back(rows[k].value);
    source_line.push_back(rows[k].line);
  }

  // Bridge short runs of missing samples linearly.
  auto& v = series.values_gw;
  for (std::size_t k = 0; k < v.size();) {
    if (!std::isnan(v[k])) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < v.size() && std::isnan(v[end])) ++end;
    const std::size_t run = end - k;
    if (k == 0 || end == v.size())
      throw DataError(fmt::format("{}:{}: missing sample at the {} of the series", name, source_line[k],
                                  k == 0 ? "start" : "end"));
    if (static_cast<int>(run) > spec.max_gap_steps)
      throw DataError(fmt::format("{}:{}: gap of {} missing samples exceeds the limit of {}", name,
                                  source_line[k], run, spec.max_gap_steps));
    const double left = v[k - 1], right = v[end];
    for (std::size_t j = k; j < end; ++j)
      v[j] = left + (right - left) * static_cast<double>(j - k + 1) / static_cast<double>(run + 1);
    k = end;
  }
  series.validate();
  return series;
}

inline ForecastSeries load_csv(const std::string& path, const ColumnSpec& spec = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  return parse_csv(in, spec, path);
}

/// Writes `timestamp,<value_column>` rows with round-trip precision.
inline void write_csv(std::ostream& out, const ForecastSeries& series,
                      const std::string& value_column = "value_gw") {
  out << "timestamp," << value_column << '\n';
  for (std::size_t k = 0; k < series.size(); ++k)
    out << format_timestamp(series.time_at(k)) << ',' << fmt::format("{}", series.values_gw[k]) << '\n';
}

inline void write_csv(const std::string& path, const ForecastSeries& series,
                      const std::string& value_column = "value_gw") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file '" + path + "'");
  write_csv(out, series, value_column);
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/**
 * Changes the sampling step. A finer step interpolates linearly between
 * samples and keeps both endpoints. A coarser step averages consecutive bins
 * of the original samples; each output is stamped with its bin's first
 * sample and a trailing partial bin averages what it holds.
 */
inline ForecastSeries resample(const ForecastSeries& series, int target_step_seconds) {
  if (target_step_seconds <= 0) throw DataError("target step must be positive");
  if (series.values_gw.empty()) throw DataError("cannot resample an empty series");
  if (target_step_seconds == series.step_seconds) return series;

  ForecastSeries out{series.start_time, target_step_seconds, {}};
  const auto& v = series.values_gw;
  const std::int64_t src = series.step_seconds;
  if (target_step_seconds < series.step_seconds) {
    const std::int64_t span = src * static_cast<std::int64_t>(v.size() - 1);
    for (std::int64_t t = 0; t <= span; t += target_step_seconds) {
      const std::size_t k = static_cast<std::size_t>(t / src);
      const std::int64_t rem = t % src;
      if (rem == 0) {
        out.values_gw.push_back(v[k]);
      } else {
        const double w = static_cast<double>(rem) / static_cast<double>(src);
        out.values_gw.push_back(v[k] + w * (v[k + 1] - v[k]));
      }
    }
    return out;
  }
  if (target_step_seconds % series.step_seconds != 0)
    throw DataError(fmt::format("cannot average {} s samples into {} s bins", series.step_seconds,
                                target_step_seconds));
  const std::size_t ratio = static_cast<std::size_t>(target_step_seconds / series.step_seconds);
  for (std::size_t k = 0; k < v.size(); k += ratio) {
    const std::size_t end = std::min(v.size(), k + ratio);
    double sum = 0.0;
    for (std::size_t j = k; j < end; ++j) sum += v[j];
    out.values_gw.push_back(sum / static_cast<double>(end - k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rolling forecast windows
// ---------------------------------------------------------------------------

/**
 * Day-ahead net demand plus an optional near-real-time disturbance. Step
 * indices count from the start of `base`. Disturbance values are added in GW
 * as given; a positive value raises net demand.
 */
struct ForecastProvider {
  ForecastSeries base;
  std::optional<ForecastSeries> disturbance;
  int injection_window_steps = 6;
  bool perturb_whole_horizon = false;

  /// Index into `disturbance` of base step 0.
  std::int64_t disturbance_offset() const {
    if (!disturbance) return 0;
    if (disturbance->step_seconds != base.step_seconds)
      throw DataError(fmt::format("disturbance step ({} s) differs from net-demand step ({} s)",
                                  disturbance->step_seconds, base.step_seconds));
    const std::int64_t dt = base.start_time - disturbance->start_time;
    if (dt % base.step_seconds != 0) throw DataError("disturbance timestamps are off the net-demand grid");
    return dt / base.step_seconds;
  }

  /// Throws DataError unless both series cover base steps [0, steps).
  void require_coverage(long steps) const {
    if (steps > static_cast<long>(base.size()))
      throw DataError(fmt::format("net-demand series has {} samples, {} needed", base.size(), steps));
    if (disturbance) {
      const std::int64_t off = disturbance_offset();
      if (off < 0 || off + steps > static_cast<std::int64_t>(disturbance->size()))
        throw DataError(fmt::format("disturbance series does not cover steps [0, {})", steps));
    }
  }

  double disturbance_at(long t) const {
    if (!disturbance) return 0.0;
    const std::int64_t k = t + disturbance_offset();
    if (k < 0 || k >= static_cast<std::int64_t>(disturbance->size()))
      throw DataError(fmt::format("disturbance series does not cover step {}", t));
    return disturbance->values_gw[static_cast<std::size_t>(k)];
  }

  /// Forecast for steps [t0, t0 + tau). The disturbance perturbs the first
  /// `injection_window_steps` entries, or all of them when
  /// `perturb_whole_horizon` is set.
  std::vector<double> window(long t0, int tau) const {
    if (t0 < 0 || tau <= 0 || t0 + tau > static_cast<long>(base.size()))
      throw DataError(fmt::format("window [{}, {}) outside net-demand coverage [0, {})", t0, t0 + tau,
                                  base.size()));
    std::vector<double> out(base.values_gw.begin() + t0, base.values_gw.begin() + t0 + tau);
    if (disturbance) {
      const int head = perturb_whole_horizon ? tau : std::min(tau, injection_window_steps);
      for (int k = 0; k < head; ++k) out[k] += disturbance_at(t0 + k);
    }
    return out;
  }

  /// Realized net demand at step t: base plus disturbance.
  double realized(long t) const {
    if (t < 0 || t >= static_cast<long>(base.size()))
      throw DataError(fmt::format("step {} outside net-demand coverage", t));
    return base.values_gw[static_cast<std::size_t>(t)] + disturbance_at(t);
  }
};

}  // namespace dermpc
