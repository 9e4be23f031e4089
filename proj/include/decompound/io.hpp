#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "decompound/csv.hpp"
#include "decompound/observations.hpp"
#include "decompound/sampler.hpp"

namespace decompound {

enum class DataFormat { PathCsv, IncrementCsv };

inline DataFormat parse_data_format(const std::string& name) {
  if (name == "path_csv") {
    return DataFormat::PathCsv;
  }
  if (name == "increment_csv") {
    return DataFormat::IncrementCsv;
  }
  throw std::invalid_argument("unknown data format: " + name);
}

inline const char* to_string(DataFormat f) {
  return f == DataFormat::PathCsv ? "path_csv" : "increment_csv";
}

/// Write observations as either `delta,z` increment rows or a `t,x`
/// cumulative path (the path form starts with the 0,0 origin row so that a
/// load reproduces the identical observation set).
inline void save_observations(const ObservationSet& obs,
                              const std::string& path, DataFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  if (format == DataFormat::IncrementCsv) {
    out << "delta,z\n";
    for (std::size_t i = 0; i < obs.size(); ++i) {
      out << format_double(obs.durations[i]) << ','
          << format_double(obs.increments[i]) << '\n';
    }
  } else {
    out << "t,x\n0,0\n";
    double t = 0.0;
    double x = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      t += obs.durations[i];
      x += obs.increments[i];
      out << format_double(t) << ',' << format_double(x) << '\n';
    }
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

/// Load observations. Path files need strictly increasing times; the first
/// row is the baseline and consecutive differences become the increments.
/// The nonzero index set is built with the given threshold (0 keeps exact
/// floating zeros out of it and nothing else).
inline ObservationSet load_observations(const std::string& path,
                                        DataFormat format,
                                        double zero_threshold = 0.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(path + ": empty file");
  }
  const std::string expected =
      format == DataFormat::IncrementCsv ? "delta,z" : "t,x";
  if (strip(line) != expected) {
    throw std::invalid_argument(path + ": expected header '" + expected +
                                "', got '" + strip(line) + "'");
  }
  std::vector<double> col0;
  std::vector<double> col1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(line);
    if (body.empty()) {
      continue;
    }
    const auto fields = split(body, ',');
    if (fields.size() != 2) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected two fields");
    }
    const std::string where = path + ":" + std::to_string(line_no);
    col0.push_back(parse_double(strip(fields[0]), where));
    col1.push_back(parse_double(strip(fields[1]), where));
  }
  if (col0.empty()) {
    throw std::invalid_argument(path + ": no data rows");
  }
  if (format == DataFormat::IncrementCsv) {
    return ObservationSet::from_increments(std::move(col0), std::move(col1),
                                           zero_threshold);
  }
  if (col0.size() < 2) {
    throw std::invalid_argument(path + ": a path file needs at least two rows");
  }
  std::vector<double> durations(col0.size() - 1);
  std::vector<double> increments(col0.size() - 1);
  for (std::size_t i = 1; i < col0.size(); ++i) {
    if (!(col0[i] > col0[i - 1])) {
      throw std::invalid_argument(path + ": observation times must be "
                                         "strictly increasing");
    }
    durations[i - 1] = col0[i] - col0[i - 1];
    increments[i - 1] = col1[i] - col1[i - 1];
  }
  return ObservationSet::from_increments(std::move(durations),
                                         std::move(increments),
                                         zero_threshold);
}

/// Trace CSV: header iter,psi_1..psi_J,mu_1..mu_J,tau,lambda.
inline void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << "iter";
  for (std::size_t j = 1; j <= trace.component_count; ++j) {
    out << ",psi_" << j;
  }
  for (std::size_t j = 1; j <= trace.component_count; ++j) {
    out << ",mu_" << j;
  }
  out << ",tau,lambda\n";
  for (const TraceRow& row : trace.rows) {
    out << row.iteration;
    for (const double p : row.psi) {
      out << ',' << format_double(p);
    }
    for (const double m : row.means) {
      out << ',' << format_double(m);
    }
    out << ',' << format_double(row.precision) << ','
        << format_double(row.intensity) << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(path + ": empty file");
  }
  const auto header = split(strip(line), ',');
  if (header.size() < 4 || header[0] != "iter") {
    throw std::invalid_argument(path + ": not a trace file");
  }
  std::size_t j_count = 0;
  while (1 + j_count < header.size() &&
         header[1 + j_count] == "psi_" + std::to_string(j_count + 1)) {
    ++j_count;
  }
  if (j_count == 0 || header.size() != 2 * j_count + 3 ||
      header[2 * j_count + 1] != "tau" || header[2 * j_count + 2] != "lambda") {
    throw std::invalid_argument(path + ": malformed trace header");
  }
  for (std::size_t j = 0; j < j_count; ++j) {
    if (header[1 + j_count + j] != "mu_" + std::to_string(j + 1)) {
      throw std::invalid_argument(path + ": malformed trace header");
    }
  }
  Trace trace;
  trace.component_count = j_count;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(line);
    if (body.empty()) {
      continue;
    }
    const auto fields = split(body, ',');
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != 2 * j_count + 3) {
      throw std::invalid_argument(where + ": wrong field count");
    }
    TraceRow row;
    row.iteration =
        static_cast<std::uint64_t>(parse_double(strip(fields[0]), where));
    for (std::size_t j = 0; j < j_count; ++j) {
      row.psi.push_back(parse_double(strip(fields[1 + j]), where));
      row.means.push_back(
          parse_double(strip(fields[1 + j_count + j]), where));
    }
    row.precision = parse_double(strip(fields[1 + 2 * j_count]), where);
    row.intensity = parse_double(strip(fields[2 + 2 * j_count]), where);
    double psi_sum = 0.0;
    for (const double p : row.psi) {
      psi_sum += p;
    }
    if (psi_sum != row.intensity) {
      throw std::invalid_argument(where +
                                  ": lambda does not equal the sum of psi");
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

/// FNV-1a digest of a file's bytes; recorded in run metadata so a trace can
/// be tied to the exact data file it came from.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path);
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

/// Plain key = value sidecar, one entry per line, written in call order.
class MetadataWriter {
 public:
  explicit MetadataWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) {
      throw std::runtime_error("cannot open for writing: " + path);
    }
  }
  void entry(const std::string& key, const std::string& value) {
    out_ << key << " = " << value << '\n';
  }
  void entry(const std::string& key, double value) {
    entry(key, format_double(value));
  }
  void entry(const std::string& key, std::uint64_t value) {
    entry(key, std::to_string(value));
  }
  void entry(const std::string& key, std::span<const double> values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) {
        joined += ',';
      }
      joined += format_double(values[i]);
    }
    entry(key, joined);
  }

 private:
  std::ofstream out_;
};

}  // namespace decompound
