#pragma once

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "contact_imm/estimator.hpp"
#include "contact_imm/measurements.hpp"
#include "contact_imm/sim.hpp"
#include "contact_imm/types.hpp"

namespace contact_imm {

/// Shortest text that parses back to the identical double.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw IoError("missing column '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw IoError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
  return v;
}

inline void write_row(std::ostream& out, const std::vector<double>& row) {
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << format_number(row[i]);
  }
  out << '\n';
}

inline void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
}

inline void append(std::vector<double>& row, const Vec3& v) {
  row.insert(row.end(), {v.x(), v.y(), v.z()});
}

inline Vec3 take3(const std::vector<double>& row, size_t& i) {
  const Vec3 v(row[i], row[i + 1], row[i + 2]);
  i += 3;
  return v;
}

inline void expect_header(const CsvTable& t, const std::vector<std::string>& expected, const std::string& what) {
  if (t.header != expected) throw IoError(what + ": unexpected header");
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw IoError("missing CSV header");
  if (line.back() == '\r') line.pop_back();
  t.header = detail::split(line, ',');
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != t.header.size()) {
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                    " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_double(c, line_no));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return read_csv(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// ---- sensors: t, theta(3), accel(3), omega(3), per leg q(3), q_dot(3), tau(3)

inline std::vector<std::string> sensor_header() {
  std::vector<std::string> h{"t", "theta_x", "theta_y", "theta_z", "accel_x", "accel_y", "accel_z",
                             "omega_x", "omega_y", "omega_z"};
  for (Leg leg : kLegs) {
    const std::string n(leg_name(leg));
    for (const char* ch : {"q", "qd", "tau"}) {
      for (int j = 0; j < 3; ++j) h.push_back(n + "_" + ch + std::to_string(j));
    }
  }
  return h;
}

inline void write_sensors(std::ostream& out, const std::vector<SensorSample>& samples) {
  detail::write_header(out, sensor_header());
  std::vector<double> row;
  for (const auto& s : samples) {
    row.assign(1, s.t);
    detail::append(row, s.theta);
    detail::append(row, s.accel);
    detail::append(row, s.omega);
    for (const auto& l : s.legs) {
      detail::append(row, l.q);
      detail::append(row, l.q_dot);
      detail::append(row, l.tau);
    }
    detail::write_row(out, row);
  }
}

inline std::vector<SensorSample> sensors_from_table(const CsvTable& t) {
  detail::expect_header(t, sensor_header(), "sensor stream");
  std::vector<SensorSample> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SensorSample s;
    size_t i = 0;
    s.t = row[i++];
    s.theta = detail::take3(row, i);
    s.accel = detail::take3(row, i);
    s.omega = detail::take3(row, i);
    for (auto& l : s.legs) {
      l.q = detail::take3(row, i);
      l.q_dot = detail::take3(row, i);
      l.tau = detail::take3(row, i);
    }
    out.push_back(s);
  }
  return out;
}

// ---- truth: t, 12-state, 4 contact flags, 12 forces (body frame), anchor x/y

inline const std::vector<std::string>& state_names() {
  static const std::vector<std::string> names{"roll", "pitch", "yaw", "px", "py", "pz",
                                              "wx",   "wy",    "wz",  "vx", "vy", "vz"};
  return names;
}

inline std::vector<std::string> truth_header() {
  std::vector<std::string> h{"t"};
  h.insert(h.end(), state_names().begin(), state_names().end());
  for (Leg leg : kLegs) h.push_back("contact_" + std::string(leg_name(leg)));
  for (Leg leg : kLegs) {
    for (const char* ax : {"x", "y", "z"}) h.push_back("f_" + std::string(leg_name(leg)) + "_" + ax);
  }
  h.insert(h.end(), {"anchor_x", "anchor_y"});
  return h;
}

inline void write_truth(std::ostream& out, const SimTrace& trace) {
  detail::write_header(out, truth_header());
  std::vector<double> row;
  for (size_t k = 0; k < trace.size(); ++k) {
    row.assign(1, trace.t[k]);
    for (int i = 0; i < kStateDim; ++i) row.push_back(trace.truth[k](i));
    for (bool c : trace.contacts[k]) row.push_back(c ? 1.0 : 0.0);
    for (const auto& f : trace.forces[k]) detail::append(row, f);
    row.push_back(trace.anchor[k].x());
    row.push_back(trace.anchor[k].y());
    detail::write_row(out, row);
  }
}

/// Truth columns of a trace; sensor samples are left empty.
inline SimTrace truth_from_table(const CsvTable& t, double ts) {
  detail::expect_header(t, truth_header(), "truth");
  SimTrace trace;
  trace.ts = ts;
  for (const auto& row : t.rows) {
    size_t i = 0;
    trace.t.push_back(row[i++]);
    StateVec x;
    for (int j = 0; j < kStateDim; ++j) x(j) = row[i++];
    trace.truth.push_back(x);
    PerLeg<bool> c{};
    for (auto& flag : c) flag = row[i++] != 0.0;
    trace.contacts.push_back(c);
    PerLeg<Vec3> f{};
    for (auto& v : f) v = detail::take3(row, i);
    trace.forces.push_back(f);
    trace.anchor.emplace_back(row[i], row[i + 1]);
  }
  return trace;
}

// ---- estimates: t, 12-state, 4 contact probabilities, M mode probabilities

inline std::vector<std::string> estimate_header(int num_modes) {
  std::vector<std::string> h{"t"};
  h.insert(h.end(), state_names().begin(), state_names().end());
  for (Leg leg : kLegs) h.push_back("p_" + std::string(leg_name(leg)));
  for (int k = 1; k <= num_modes; ++k) h.push_back("mu_" + std::to_string(k));
  return h;
}

inline void write_estimates(std::ostream& out, const std::vector<EstimateSample>& est, int num_modes) {
  detail::write_header(out, estimate_header(num_modes));
  std::vector<double> row;
  for (const auto& e : est) {
    if (e.mode_prob.size() != num_modes) throw LengthMismatch("mode probability vector has the wrong length");
    row.assign(1, e.t);
    for (int i = 0; i < kStateDim; ++i) row.push_back(e.state(i));
    for (int i = 0; i < kNumLegs; ++i) row.push_back(e.contact_prob(i));
    for (int k = 0; k < num_modes; ++k) row.push_back(e.mode_prob(k));
    detail::write_row(out, row);
  }
}

/// Estimates as stored; covariances are not part of the file.
inline std::vector<EstimateSample> estimates_from_table(const CsvTable& t) {
  const int fixed = 1 + kStateDim + kNumLegs;
  const int num_modes = static_cast<int>(t.header.size()) - fixed;
  if (num_modes < 1) throw IoError("estimate file has no mode columns");
  detail::expect_header(t, estimate_header(num_modes), "estimates");
  std::vector<EstimateSample> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    EstimateSample e;
    size_t i = 0;
    e.t = row[i++];
    for (int j = 0; j < kStateDim; ++j) e.state(j) = row[i++];
    for (int j = 0; j < kNumLegs; ++j) e.contact_prob(j) = row[i++];
    e.mode_prob.resize(num_modes);
    for (int k = 0; k < num_modes; ++k) e.mode_prob(k) = row[i++];
    out.push_back(e);
  }
  return out;
}

inline void write_sensors_file(const std::string& path, const std::vector<SensorSample>& s) {
  auto out = open_output(path);
  write_sensors(out, s);
  if (!out) throw IoError("failed writing " + path);
}

inline void write_truth_file(const std::string& path, const SimTrace& trace) {
  auto out = open_output(path);
  write_truth(out, trace);
  if (!out) throw IoError("failed writing " + path);
}

inline void write_estimates_file(const std::string& path, const std::vector<EstimateSample>& est, int num_modes) {
  auto out = open_output(path);
  write_estimates(out, est, num_modes);
  if (!out) throw IoError("failed writing " + path);
}

inline std::vector<SensorSample> read_sensors_file(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  try {
    return sensors_from_table(t);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline SimTrace read_truth_file(const std::string& path, double ts) {
  const CsvTable t = read_csv_file(path);
  try {
    return truth_from_table(t, ts);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline std::vector<EstimateSample> read_estimates_file(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  try {
    return estimates_from_table(t);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace contact_imm
