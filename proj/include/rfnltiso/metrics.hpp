#ifndef RFNLTISO_METRICS_HPP
#define RFNLTISO_METRICS_HPP

// Topology read-out and evaluation: per-group norms arranged like an
// adjacency tensor, max-normalization, miss-detection / false-alarm rates
// and prediction MSE curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rfnltiso/estimator.hpp"
#include "rfnltiso/var_synth.hpp"

namespace rfnltiso {

// b[n, n', p] = ||alpha_{n,n'}^{(p)}||_2, indexed with slot_index.
struct PseudoAdjacency {
  std::size_t N = 0;
  std::size_t P = 0;
  std::size_t t = 0;
  std::vector<double> b;

  PseudoAdjacency() = default;
  PseudoAdjacency(std::size_t n, std::size_t p, std::size_t time = 0) : N(n), P(p), t(time), b(n * n * p, 0.0) {}

  double& at(std::size_t n, std::size_t n_src, std::size_t p) { return b[slot_index(N, P, n, n_src, p)]; }
  double at(std::size_t n, std::size_t n_src, std::size_t p) const { return b[slot_index(N, P, n, n_src, p)]; }
  double max() const { return b.empty() ? 0.0 : *std::max_element(b.begin(), b.end()); }
};

struct DetectionConfig {
  double delta = 0.05;
  bool exclude_self_loops = true;
  bool normalize = true;  // threshold max-normalized estimates

  void validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("detection: delta must be > 0");
  }
};

inline PseudoAdjacency extract_pseudo_adjacency(const CoefficientState& state) {
  PseudoAdjacency adj(state.N, state.P, state.t);
  for (std::size_t n = 0; n < state.N; ++n)
    for (std::size_t m = 0; m < state.N; ++m)
      for (std::size_t p = 0; p < state.P; ++p) adj.at(n, m, p) = stable_norm(state.group(n, m, p));
  return adj;
}

inline PseudoAdjacency normalize(const PseudoAdjacency& adj) {
  const double mx = adj.max();
  if (!(mx > 0.0)) throw std::domain_error("normalize: pseudo-adjacency is all zero");
  PseudoAdjacency out = adj;
  for (double& v : out.b) v /= mx;
  return out;
}

// Like normalize, but an all-zero matrix maps to itself.
inline PseudoAdjacency normalize_or_zero(const PseudoAdjacency& adj) {
  return adj.max() > 0.0 ? normalize(adj) : adj;
}

// Ground-truth support for one time index (the generator's active mask).
struct TruthMask {
  std::size_t N = 0;
  std::size_t P = 0;
  std::vector<std::uint8_t> active;

  static TruthMask from(const TrueTopology& topo) { return {topo.N, topo.P, topo.active}; }
};

// One run: estimates and truth aligned on the same time axis.
struct DetectionRun {
  std::vector<std::size_t> times;
  std::vector<PseudoAdjacency> estimates;
  std::vector<TruthMask> truth;
};

struct DetectionCurves {
  std::vector<std::size_t> times;
  std::vector<std::optional<double>> pmd;  // nullopt where no true edge exists
  std::vector<std::optional<double>> pfa;  // nullopt where no true non-edge exists
};

inline DetectionCurves pmd_pfa(std::span<const DetectionRun> runs, const DetectionConfig& cfg) {
  cfg.validate();
  if (runs.empty()) throw std::invalid_argument("pmd_pfa: need at least one run");
  const auto& axis = runs.front().times;
  for (const auto& r : runs) {
    if (r.times != axis) throw std::invalid_argument("pmd_pfa: runs have mismatched time axes");
    if (r.estimates.size() != axis.size() || r.truth.size() != axis.size())
      throw std::invalid_argument("pmd_pfa: estimates/truth not aligned with time axis");
  }

  DetectionCurves out;
  out.times = axis;
  out.pmd.resize(axis.size());
  out.pfa.resize(axis.size());
  for (std::size_t k = 0; k < axis.size(); ++k) {
    std::size_t miss = 0, edges = 0, false_alarm = 0, non_edges = 0;
    for (const auto& r : runs) {
      const PseudoAdjacency est = cfg.normalize ? normalize_or_zero(r.estimates[k]) : r.estimates[k];
      const auto& truth = r.truth[k];
      if (truth.N != est.N || truth.P != est.P) throw std::invalid_argument("pmd_pfa: dimension mismatch");
      for (std::size_t n = 0; n < est.N; ++n)
        for (std::size_t m = 0; m < est.N; ++m) {
          if (cfg.exclude_self_loops && n == m) continue;
          for (std::size_t p = 0; p < est.P; ++p) {
            const double b = est.at(n, m, p);
            if (truth.active[slot_index(est.N, est.P, n, m, p)]) {
              ++edges;
              if (b < cfg.delta) ++miss;
            } else {
              ++non_edges;
              if (b > cfg.delta) ++false_alarm;
            }
          }
        }
    }
    if (edges > 0) out.pmd[k] = static_cast<double>(miss) / static_cast<double>(edges);
    if (non_edges > 0) out.pfa[k] = static_cast<double>(false_alarm) / static_cast<double>(non_edges);
  }
  return out;
}

// Squared prediction error averaged across runs at each time index.
inline std::vector<double> mse_curve_ensemble(std::span<const std::vector<double>> observed,
                                              std::span<const std::vector<double>> predicted) {
  if (observed.size() != predicted.size() || observed.empty())
    throw std::invalid_argument("mse_curve: run counts differ or are zero");
  const std::size_t len = observed.front().size();
  std::vector<double> out(len, 0.0);
  for (std::size_t r = 0; r < observed.size(); ++r) {
    if (observed[r].size() != len || predicted[r].size() != len)
      throw std::invalid_argument("mse_curve: length mismatch");
    for (std::size_t t = 0; t < len; ++t) {
      const double e = observed[r][t] - predicted[r][t];
      out[t] += e * e;
    }
  }
  for (double& v : out) v /= static_cast<double>(observed.size());
  return out;
}

// Single-run proxy: trailing moving average of squared error over the last
// `window` samples (fewer at the start).
inline std::vector<double> mse_curve_moving(std::span<const double> observed, std::span<const double> predicted,
                                            std::size_t window) {
  if (observed.size() != predicted.size()) throw std::invalid_argument("mse_curve: length mismatch");
  if (window == 0) throw std::invalid_argument("mse_curve: window must be >= 1");
  std::vector<double> sq(observed.size()), out(observed.size());
  for (std::size_t t = 0; t < sq.size(); ++t) {
    const double e = observed[t] - predicted[t];
    sq[t] = e * e;
  }
  // Direct summation per window keeps results independent of history length.
  for (std::size_t t = 0; t < sq.size(); ++t) {
    const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
    double s = 0.0;
    for (std::size_t k = lo; k <= t; ++k) s += sq[k];
    out[t] = s / static_cast<double>(t + 1 - lo);
  }
  return out;
}

}  // namespace rfnltiso

#endif  // RFNLTISO_METRICS_HPP
