#ifndef RFNLTISO_CSV_HPP
#define RFNLTISO_CSV_HPP

// CSV and JSON-lines readers/writers for time series, topology snapshots,
// flattened pseudo-adjacency series, predictions and metric curves.
// Doubles are written in shortest round-trip form so that reruns are
// byte-identical and files reload exactly.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rfnltiso/errors.hpp"
#include "rfnltiso/metrics.hpp"
#include "rfnltiso/serialization.hpp"
#include "rfnltiso/var_synth.hpp"

namespace rfnltiso {

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("csv: cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for reading");
  return f;
}

// --- time series --------------------------------------------------------

inline void write_timeseries_csv(std::ostream& os, const TimeSeriesMatrix& data) {
  os << "t";
  for (std::size_t n = 1; n <= data.N; ++n) os << ",node_" << n;
  os << '\n';
  for (std::size_t t = 0; t < data.T; ++t) {
    os << t;
    for (std::size_t n = 0; n < data.N; ++n) os << ',' << format_double(data.at(n, t));
    os << '\n';
  }
}

inline TimeSeriesMatrix read_timeseries_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("time series csv: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "t") throw DataError("time series csv: header must be t,node_1,...");
  const std::size_t N = header.size() - 1;
  std::vector<double> values;
  std::size_t T = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != N + 1)
      throw DataError("time series csv: row " + std::to_string(T + 1) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(N + 1));
    for (std::size_t n = 1; n <= N; ++n) {
      const double v = parse_double(cells[n]);
      if (!std::isfinite(v)) throw DataError("time series csv: non-finite value");
      values.push_back(v);
    }
    ++T;
  }
  TimeSeriesMatrix data(N, T);
  data.values = std::move(values);
  return data;
}

inline TimeSeriesMatrix read_timeseries_csv(const std::string& path) {
  auto f = open_in(path);
  return read_timeseries_csv(f);
}

// Per-node zero-mean, unit-variance scaling over the whole series.
inline void standardize(TimeSeriesMatrix& data) {
  for (std::size_t n = 0; n < data.N; ++n) {
    double mean = 0.0;
    for (std::size_t t = 0; t < data.T; ++t) mean += data.at(n, t);
    mean /= static_cast<double>(data.T);
    double var = 0.0;
    for (std::size_t t = 0; t < data.T; ++t) var += (data.at(n, t) - mean) * (data.at(n, t) - mean);
    var /= static_cast<double>(data.T);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t t = 0; t < data.T; ++t) data.at(n, t) = (data.at(n, t) - mean) / sd;
  }
}

// --- topology snapshots (JSON lines) ----------------------------------------

inline void write_topology_jsonl(std::ostream& os, const TimeSeriesMatrix& data) {
  for (const auto& s : data.snapshots) os << to_json(s.topology, s.t).dump() << '\n';
}

inline std::vector<TopologySnapshot> read_topology_jsonl(std::istream& is) {
  std::vector<TopologySnapshot> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(topology_snapshot_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError(std::string("topology jsonl: ") + e.what());
    }
  }
  if (out.empty()) throw DataError("topology jsonl: no snapshots");
  return out;
}

// --- pseudo-adjacency series ------------------------------------------------

// Columns b_<n>_<n'>_<p> (1-based) in lexicographic (n, n', p) order.
inline void write_pseudo_adjacency_header(std::ostream& os, std::size_t N, std::size_t P) {
  os << "t";
  for (std::size_t n = 1; n <= N; ++n)
    for (std::size_t m = 1; m <= N; ++m)
      for (std::size_t p = 1; p <= P; ++p) os << ",b_" << n << '_' << m << '_' << p;
  os << '\n';
}

inline void write_pseudo_adjacency_row(std::ostream& os, const PseudoAdjacency& adj) {
  os << adj.t;
  for (double v : adj.b) os << ',' << format_double(v);
  os << '\n';
}

inline std::vector<PseudoAdjacency> read_pseudo_adjacency_csv(std::istream& is, std::size_t N, std::size_t P) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("pseudo-adjacency csv: empty input");
  if (split_csv_line(line).size() != N * N * P + 1)
    throw DataError("pseudo-adjacency csv: header does not match N*N*P columns");
  std::vector<PseudoAdjacency> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != N * N * P + 1) throw DataError("pseudo-adjacency csv: ragged row");
    PseudoAdjacency adj(N, P, static_cast<std::size_t>(parse_double(cells[0])));
    for (std::size_t i = 0; i < adj.b.size(); ++i) adj.b[i] = parse_double(cells[i + 1]);
    out.push_back(std::move(adj));
  }
  return out;
}

// --- predictions --------------------------------------------------------

inline void write_predictions_header(std::ostream& os, std::size_t N) {
  os << "t";
  for (std::size_t n = 1; n <= N; ++n) os << ",y_" << n;
  for (std::size_t n = 1; n <= N; ++n) os << ",yhat_" << n;
  os << '\n';
}

inline void write_predictions_row(std::ostream& os, std::size_t t, std::span<const double> y,
                                  std::span<const double> yhat) {
  os << t;
  for (double v : y) os << ',' << format_double(v);
  for (double v : yhat) os << ',' << format_double(v);
  os << '\n';
}

struct PredictionTable {
  std::size_t N = 0;
  std::vector<std::size_t> times;
  std::vector<std::vector<double>> observed;   // per node
  std::vector<std::vector<double>> predicted;  // per node
};

inline PredictionTable read_predictions_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("predictions csv: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || (header.size() - 1) % 2 != 0) throw DataError("predictions csv: bad header");
  PredictionTable tab;
  tab.N = (header.size() - 1) / 2;
  tab.observed.resize(tab.N);
  tab.predicted.resize(tab.N);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("predictions csv: ragged row");
    tab.times.push_back(static_cast<std::size_t>(parse_double(cells[0])));
    for (std::size_t n = 0; n < tab.N; ++n) {
      tab.observed[n].push_back(parse_double(cells[1 + n]));
      tab.predicted[n].push_back(parse_double(cells[1 + tab.N + n]));
    }
  }
  return tab;
}

// --- metric curves ------------------------------------------------------

inline void write_curve_csv(std::ostream& os, std::span<const std::size_t> t,
                            std::span<const std::optional<double>> values) {
  os << "t,value\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    os << t[k] << ',' << (values[k] ? format_double(*values[k]) : std::string("null")) << '\n';
}

inline void write_curve_csv(std::ostream& os, std::span<const std::size_t> t, std::span<const double> values) {
  os << "t,value\n";
  for (std::size_t k = 0; k < t.size(); ++k) os << t[k] << ',' << format_double(values[k]) << '\n';
}

}  // namespace rfnltiso

#endif  // RFNLTISO_CSV_HPP
