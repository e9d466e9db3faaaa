#ifndef RFNLTISO_VAR_SYNTH_HPP
#define RFNLTISO_VAR_SYNTH_HPP

// Synthetic data from the additive nonlinear VAR model
//
//   y_n[t] = sum_{n'} sum_p a_{n,n'}^{(p)} f_{n,n'}^{(p)}(y_{n'}[t-p]) + u_n[t]
//
// with f a finite kernel expansion sum_m beta_m k(y, c_m).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfnltiso/errors.hpp"
#include "rfnltiso/lag_window.hpp"
#include "rfnltiso/random.hpp"
#include "rfnltiso/rff_kernel.hpp"

namespace rfnltiso {

// Slot indexing shared by topology, nonlinearity bank and pseudo-adjacency:
// (n, n', p) with p zero-based, row-major.
inline std::size_t slot_index(std::size_t N, std::size_t P, std::size_t n, std::size_t n_src, std::size_t p) {
  return (n * N + n_src) * P + p;
}

struct TrueTopology {
  std::size_t N = 0;
  std::size_t P = 0;
  std::vector<double> a;             // indexed by slot_index
  std::vector<std::uint8_t> active;  // same indexing

  TrueTopology() = default;
  TrueTopology(std::size_t n, std::size_t p) : N(n), P(p), a(n * n * p, 0.0), active(n * n * p, 0) {}

  std::size_t slots() const noexcept { return a.size(); }
  std::size_t index(std::size_t n, std::size_t n_src, std::size_t p) const { return slot_index(N, P, n, n_src, p); }
  double coeff(std::size_t n, std::size_t n_src, std::size_t p) const { return a[index(n, n_src, p)]; }
  bool is_active(std::size_t n, std::size_t n_src, std::size_t p) const { return active[index(n, n_src, p)] != 0; }
  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), std::uint8_t{1}));
  }

  bool operator==(const TrueTopology&) const = default;
};

enum class Nonlinearity { kernel, linear };

struct GeneratorConfig {
  std::size_t N = 5;
  std::size_t P = 2;
  std::size_t T = 3000;
  double edge_probability = 0.1;
  std::size_t switch_interval = 0;  // 0 = never switch
  bool drift = false;
  bool drift_all_edges = true;  // false: only the first active slot drifts
  double noise_std = 0.01;
  double kernel_variance = 0.01;
  double beta_variance = 30.0;
  std::size_t centers = 10;
  Nonlinearity nonlinearity = Nonlinearity::kernel;
  bool allow_self_loops = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (N == 0) throw ConfigError("generator: N must be >= 1");
    if (P == 0) throw ConfigError("generator: P must be >= 1");
    if (T < P) throw ConfigError("generator: T must be >= P");
    if (!(edge_probability >= 0.0 && edge_probability <= 1.0))
      throw ConfigError("generator: edge_probability must lie in [0, 1]");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("generator: noise_std must be >= 0");
    if (!(kernel_variance > 0.0)) throw ConfigError("generator: kernel_variance must be > 0");
    if (!(beta_variance >= 0.0)) throw ConfigError("generator: beta_variance must be >= 0");
    if (centers == 0) throw ConfigError("generator: centers must be >= 1");
    if (drift && switch_interval != 0) throw ConfigError("generator: drift and switching are mutually exclusive");
  }
};

// Per-slot nonlinearity f(y) = sum_m weights_m * k(y, centers_m).
struct NonlinearityBank {
  std::size_t N = 0;
  std::size_t P = 0;
  std::size_t M = 0;
  GaussianKernelSpec kernel{};
  Nonlinearity kind = Nonlinearity::kernel;
  std::vector<double> centers;  // slot-major, M per slot
  std::vector<double> weights;

  double evaluate(std::size_t n, std::size_t n_src, std::size_t p, double y) const {
    if (kind == Nonlinearity::linear) return y;
    const std::size_t base = slot_index(N, P, n, n_src, p) * M;
    double f = 0.0;
    for (std::size_t m = 0; m < M; ++m) f += weights[base + m] * kernel_exact(kernel, y, centers[base + m]);
    return f;
  }
};

struct TopologySnapshot {
  std::size_t t = 0;  // topology in force from sample t onward
  TrueTopology topology;
};

struct TimeSeriesMatrix {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<double> values;  // time-major: values[t * N + n]
  std::vector<TopologySnapshot> snapshots;

  TimeSeriesMatrix() = default;
  TimeSeriesMatrix(std::size_t n, std::size_t t) : N(n), T(t), values(n * t, 0.0) {}

  double& at(std::size_t n, std::size_t t) { return values[t * N + n]; }
  double at(std::size_t n, std::size_t t) const { return values[t * N + n]; }
  std::span<const double> sample(std::size_t t) const { return {values.data() + t * N, N}; }
  std::span<double> sample(std::size_t t) { return {values.data() + t * N, N}; }

  // Ground truth in force at time t; requires at least one snapshot.
  const TrueTopology& topology_at(std::size_t t) const {
    if (snapshots.empty()) throw std::logic_error("time series carries no topology snapshots");
    auto it = std::upper_bound(snapshots.begin(), snapshots.end(), t,
                               [](std::size_t v, const TopologySnapshot& s) { return v < s.t; });
    if (it == snapshots.begin()) return snapshots.front().topology;
    return std::prev(it)->topology;
  }
};

inline double draw_open_unit(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double w = 0.0;
  while (w == 0.0) w = u(rng);
  return w;
}

inline bool slot_allowed(std::size_t n, std::size_t n_src, bool allow_self_loops) {
  return allow_self_loops || n != n_src;
}

inline TrueTopology init_topology(const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  TrueTopology topo(cfg.N, cfg.P);
  std::bernoulli_distribution edge(cfg.edge_probability);
  for (std::size_t n = 0; n < cfg.N; ++n)
    for (std::size_t m = 0; m < cfg.N; ++m)
      for (std::size_t p = 0; p < cfg.P; ++p) {
        const bool on = edge(rng);
        if (!on || !slot_allowed(n, m, cfg.allow_self_loops)) continue;
        const auto i = topo.index(n, m, p);
        topo.active[i] = 1;
        topo.a[i] = draw_open_unit(rng);
      }
  return topo;
}

inline TrueTopology init_topology(const GeneratorConfig& cfg) {
  Rng rng = make_rng(cfg.seed, {stream::topology});
  return init_topology(cfg, rng);
}

// Moves one active slot to a randomly chosen inactive slot with a fresh
// Uniform(0, 1) weight. Operates on individual (n, n', p) slots.
inline TrueTopology switch_edge(const TrueTopology& topo, Rng& rng, bool allow_self_loops = true) {
  std::vector<std::size_t> on, off;
  for (std::size_t n = 0; n < topo.N; ++n)
    for (std::size_t m = 0; m < topo.N; ++m)
      for (std::size_t p = 0; p < topo.P; ++p) {
        const auto i = topo.index(n, m, p);
        if (topo.active[i]) on.push_back(i);
        else if (slot_allowed(n, m, allow_self_loops)) off.push_back(i);
      }
  if (on.empty()) throw NoSwitchPossible("switch_edge: topology has no active slot to remove");
  if (off.empty()) throw NoSwitchPossible("switch_edge: topology has no inactive slot to activate");

  TrueTopology out = topo;
  const auto drop = on[std::uniform_int_distribution<std::size_t>(0, on.size() - 1)(rng)];
  const auto add = off[std::uniform_int_distribution<std::size_t>(0, off.size() - 1)(rng)];
  out.active[drop] = 0;
  out.a[drop] = 0.0;
  out.active[add] = 1;
  out.a[add] = draw_open_unit(rng);
  return out;
}

// True when switch_edge has both an active and an eligible inactive slot.
inline bool can_switch(const TrueTopology& topo, bool allow_self_loops = true) {
  bool on = false, off = false;
  for (std::size_t n = 0; n < topo.N; ++n)
    for (std::size_t m = 0; m < topo.N; ++m)
      for (std::size_t p = 0; p < topo.P; ++p) {
        if (topo.active[topo.index(n, m, p)]) on = true;
        else if (slot_allowed(n, m, allow_self_loops)) off = true;
      }
  return on && off;
}

inline double drift_increment(double t) { return 0.01 * std::sin(0.03 * t); }

// a[t+1] = a[t] + 0.01 sin(0.03 t) on active slots (or only on `only_slot`).
inline TrueTopology slow_drift(const TrueTopology& topo, double t, std::size_t only_slot = SIZE_MAX) {
  TrueTopology out = topo;
  const double inc = drift_increment(t);
  for (std::size_t i = 0; i < out.slots(); ++i) {
    if (!out.active[i]) continue;
    if (only_slot != SIZE_MAX && i != only_slot) continue;
    out.a[i] += inc;
  }
  return out;
}

inline NonlinearityBank make_bank(const GeneratorConfig& cfg, Rng& rng) {
  NonlinearityBank bank;
  bank.N = cfg.N;
  bank.P = cfg.P;
  bank.M = cfg.centers;
  bank.kernel = GaussianKernelSpec{cfg.kernel_variance};
  bank.kind = cfg.nonlinearity;
  const std::size_t total = cfg.N * cfg.N * cfg.P * cfg.centers;
  bank.centers.resize(total);
  bank.weights.resize(total);
  std::normal_distribution<double> center(0.0, 1.0);
  std::normal_distribution<double> beta(0.0, std::sqrt(cfg.beta_variance));
  for (std::size_t i = 0; i < total; ++i) {
    bank.centers[i] = center(rng);
    bank.weights[i] = beta(rng);
  }
  return bank;
}

inline NonlinearityBank make_bank(const GeneratorConfig& cfg) {
  Rng rng = make_rng(cfg.seed, {stream::bank});
  return make_bank(cfg, rng);
}

inline constexpr double divergence_limit = 1e6;

// One model step. `history` must hold P samples; `noise` has length N.
inline std::vector<double> step(const TrueTopology& topo, const NonlinearityBank& bank, const LagWindow& history,
                                std::span<const double> noise) {
  if (!history.full()) throw std::invalid_argument("step: history must hold P samples per node");
  if (noise.size() != topo.N) throw std::invalid_argument("step: noise length != N");
  for (std::size_t n = 0; n < topo.N; ++n)
    for (std::size_t p = 1; p <= topo.P; ++p)
      if (!std::isfinite(history.lag(n, p))) throw DivergenceError("step: non-finite history");

  std::vector<double> y(topo.N, 0.0);
  for (std::size_t n = 0; n < topo.N; ++n) {
    double acc = 0.0;
    for (std::size_t m = 0; m < topo.N; ++m)
      for (std::size_t p = 0; p < topo.P; ++p) {
        const auto i = topo.index(n, m, p);
        if (!topo.active[i]) continue;
        acc += topo.a[i] * bank.evaluate(n, m, p, history.lag(m, p + 1));
      }
    y[n] = acc + noise[n];
  }
  return y;
}

// Index of the slot that drifts when drift_all_edges is false.
inline std::size_t designated_edge(const TrueTopology& topo) {
  for (std::size_t i = 0; i < topo.slots(); ++i)
    if (topo.active[i]) return i;
  return SIZE_MAX;
}

inline TimeSeriesMatrix generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng init_rng = make_rng(cfg.seed, {stream::initial});
  Rng noise_rng = make_rng(cfg.seed, {stream::noise});
  Rng switch_rng = make_rng(cfg.seed, {stream::switching});

  TrueTopology topo = init_topology(cfg);
  const NonlinearityBank bank = make_bank(cfg);
  const std::size_t drift_slot = cfg.drift_all_edges ? SIZE_MAX : designated_edge(topo);

  TimeSeriesMatrix out(cfg.N, cfg.T);
  out.snapshots.push_back({0, topo});

  LagWindow window(cfg.N, cfg.P);
  std::normal_distribution<double> standard(0.0, 1.0);
  for (std::size_t t = 0; t < std::min(cfg.P, cfg.T); ++t) {
    auto s = out.sample(t);
    for (auto& v : s) v = standard(init_rng);
    window.push(s);
  }

  std::normal_distribution<double> noise_dist(0.0, 1.0);
  std::vector<double> noise(cfg.N);
  for (std::size_t t = cfg.P; t < cfg.T; ++t) {
    bool changed = false;
    // A topology with nothing to move (no edges, or no free slot) is kept.
    if (cfg.switch_interval != 0 && t % cfg.switch_interval == 0 && t > cfg.P &&
        can_switch(topo, cfg.allow_self_loops)) {
      topo = switch_edge(topo, switch_rng, cfg.allow_self_loops);
      changed = true;
    }
    if (cfg.drift && t > cfg.P) {
      topo = slow_drift(topo, static_cast<double>(t - cfg.P - 1), drift_slot);
      changed = true;
    }
    if (changed) out.snapshots.push_back({t, topo});

    for (auto& u : noise) u = cfg.noise_std * noise_dist(noise_rng);
    const auto y = step(topo, bank, window, noise);
    for (std::size_t n = 0; n < cfg.N; ++n) {
      if (!std::isfinite(y[n]) || std::abs(y[n]) > divergence_limit)
        throw DivergenceError("generate: |y| exceeded " + std::to_string(divergence_limit) + " at t=" +
                              std::to_string(t));
      out.at(n, t) = y[n];
    }
    window.push(out.sample(t));
  }
  return out;
}

// Number of scheduled topology switches for cfg (all performed unless the
// initial topology is empty or full).
inline std::size_t expected_switches(const GeneratorConfig& cfg) {
  if (cfg.switch_interval == 0) return 0;
  std::size_t count = 0;
  for (std::size_t t = cfg.P + 1; t < cfg.T; ++t)
    if (t % cfg.switch_interval == 0) ++count;
  return count;
}

}  // namespace rfnltiso

#endif  // RFNLTISO_VAR_SYNTH_HPP
