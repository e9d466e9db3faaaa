#ifndef RFNLTISO_SERIALIZATION_HPP
#define RFNLTISO_SERIALIZATION_HPP

// JSON forms of configs, RFF maps, topology snapshots and checkpoints.
// Config readers reject unknown keys.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfnltiso/errors.hpp"
#include "rfnltiso/estimator.hpp"
#include "rfnltiso/metrics.hpp"
#include "rfnltiso/rff_kernel.hpp"
#include "rfnltiso/var_synth.hpp"

namespace rfnltiso {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace detail

// --- kernels and maps -------------------------------------------------------

inline json to_json(const RFFMap& map) {
  return json{{"seed", map.seed()},
              {"D", map.D()},
              {"variance", map.spec().variance},
              {"frequencies", std::vector<double>(map.frequencies().begin(), map.frequencies().end())}};
}

inline RFFMap rff_map_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"seed", "D", "variance", "frequencies"}, "rff_map");
  try {
    auto freqs = j.at("frequencies").get<std::vector<double>>();
    if (freqs.size() != j.at("D").get<std::size_t>()) throw ConfigError("rff_map: D does not match frequency count");
    return RFFMap(GaussianKernelSpec{j.at("variance").get<double>()}, j.at("seed").get<std::uint64_t>(),
                  std::move(freqs));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rff_map: ") + e.what());
  }
}

// --- generator ------------------------------------------------------------

inline const char* to_string(Nonlinearity k) { return k == Nonlinearity::kernel ? "kernel" : "linear"; }

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "kernel") return Nonlinearity::kernel;
  if (s == "linear") return Nonlinearity::linear;
  throw ConfigError("generator: nonlinearity must be 'kernel' or 'linear'");
}

inline json to_json(const GeneratorConfig& c) {
  return json{{"N", c.N},
              {"P", c.P},
              {"T", c.T},
              {"edge_probability", c.edge_probability},
              {"switch_interval", c.switch_interval},
              {"drift", c.drift},
              {"drift_all_edges", c.drift_all_edges},
              {"noise_std", c.noise_std},
              {"kernel_variance", c.kernel_variance},
              {"beta_variance", c.beta_variance},
              {"centers", c.centers},
              {"nonlinearity", to_string(c.nonlinearity)},
              {"allow_self_loops", c.allow_self_loops},
              {"seed", c.seed}};
}

inline GeneratorConfig generator_config_from_json(const json& j) {
  constexpr const char* where = "generator";
  detail::reject_unknown_keys(j,
                              {"N", "P", "T", "edge_probability", "switch_interval", "drift", "drift_all_edges",
                               "noise_std", "kernel_variance", "beta_variance", "centers", "nonlinearity",
                               "allow_self_loops", "seed"},
                              where);
  GeneratorConfig c;
  detail::read_opt(j, "N", c.N, where);
  detail::read_opt(j, "P", c.P, where);
  detail::read_opt(j, "T", c.T, where);
  detail::read_opt(j, "edge_probability", c.edge_probability, where);
  detail::read_opt(j, "switch_interval", c.switch_interval, where);
  detail::read_opt(j, "drift", c.drift, where);
  detail::read_opt(j, "drift_all_edges", c.drift_all_edges, where);
  detail::read_opt(j, "noise_std", c.noise_std, where);
  detail::read_opt(j, "kernel_variance", c.kernel_variance, where);
  detail::read_opt(j, "beta_variance", c.beta_variance, where);
  detail::read_opt(j, "centers", c.centers, where);
  std::string kind = to_string(c.nonlinearity);
  detail::read_opt(j, "nonlinearity", kind, where);
  c.nonlinearity = nonlinearity_from_string(kind);
  detail::read_opt(j, "allow_self_loops", c.allow_self_loops, where);
  detail::read_opt(j, "seed", c.seed, where);
  c.validate();
  return c;
}

inline json to_json(const TrueTopology& topo, std::size_t t) {
  std::vector<int> active(topo.active.begin(), topo.active.end());
  return json{{"t", t}, {"N", topo.N}, {"P", topo.P}, {"a", topo.a}, {"active", active}};
}

inline TopologySnapshot topology_snapshot_from_json(const json& j) {
  try {
    TopologySnapshot s;
    s.t = j.at("t").get<std::size_t>();
    s.topology = TrueTopology(j.at("N").get<std::size_t>(), j.at("P").get<std::size_t>());
    auto a = j.at("a").get<std::vector<double>>();
    auto active = j.at("active").get<std::vector<int>>();
    if (a.size() != s.topology.slots() || active.size() != s.topology.slots())
      throw DataError("topology snapshot: array length does not match N*N*P");
    s.topology.a = std::move(a);
    for (std::size_t i = 0; i < active.size(); ++i) s.topology.active[i] = active[i] != 0 ? 1 : 0;
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("topology snapshot: ") + e.what());
  }
}

// --- estimator --------------------------------------------------------------

inline const char* to_string(StepSchedule s) { return s == StepSchedule::constant ? "constant" : "inverse_sqrt"; }
inline const char* to_string(StepConvention c) {
  switch (c) {
    case StepConvention::step_size: return "step_size";
    case StepConvention::normalized: return "normalized";
    default: return "inverse";
  }
}

inline json to_json(const EstimatorConfig& c) {
  return json{{"N", c.N},
              {"P", c.P},
              {"D", c.D},
              {"lambda", c.lambda},
              {"gamma", c.gamma},
              {"schedule", to_string(c.schedule)},
              {"gamma_convention", to_string(c.convention)},
              {"kernel_variance", c.kernel.variance},
              {"rff_seed", c.rff_seed},
              {"shared_map", c.shared_map}};
}

inline EstimatorConfig estimator_config_from_json(const json& j) {
  constexpr const char* where = "estimator";
  detail::reject_unknown_keys(j,
                              {"N", "P", "D", "lambda", "gamma", "schedule", "gamma_convention", "kernel_variance",
                               "rff_seed", "shared_map"},
                              where);
  EstimatorConfig c;
  detail::read_opt(j, "N", c.N, where);
  detail::read_opt(j, "P", c.P, where);
  detail::read_opt(j, "D", c.D, where);
  detail::read_opt(j, "lambda", c.lambda, where);
  detail::read_opt(j, "gamma", c.gamma, where);
  std::string schedule = to_string(c.schedule), convention = to_string(c.convention);
  detail::read_opt(j, "schedule", schedule, where);
  detail::read_opt(j, "gamma_convention", convention, where);
  if (schedule == "constant") c.schedule = StepSchedule::constant;
  else if (schedule == "inverse_sqrt") c.schedule = StepSchedule::inverse_sqrt;
  else throw ConfigError("estimator: schedule must be 'constant' or 'inverse_sqrt'");
  if (convention == "step_size") c.convention = StepConvention::step_size;
  else if (convention == "inverse") c.convention = StepConvention::inverse;
  else if (convention == "normalized") c.convention = StepConvention::normalized;
  else throw ConfigError("estimator: gamma_convention must be 'step_size', 'inverse' or 'normalized'");
  detail::read_opt(j, "kernel_variance", c.kernel.variance, where);
  detail::read_opt(j, "rff_seed", c.rff_seed, where);
  detail::read_opt(j, "shared_map", c.shared_map, where);
  c.validate();
  return c;
}

inline json to_json(const DetectionConfig& c) {
  return json{{"delta", c.delta}, {"exclude_self_loops", c.exclude_self_loops}, {"normalize", c.normalize}};
}

// --- checkpoints --------------------------------------------------------------

inline constexpr const char* checkpoint_format = "rfnltiso-checkpoint-v1";

inline json to_json(const CoefficientState& s) {
  return json{{"N", s.N}, {"P", s.P}, {"group_dim", s.group_dim}, {"t", s.t}, {"alpha", s.alpha}};
}

inline CoefficientState coefficient_state_from_json(const json& j) {
  try {
    CoefficientState s(j.at("N").get<std::size_t>(), j.at("P").get<std::size_t>(),
                       j.at("group_dim").get<std::size_t>());
    s.t = j.at("t").get<std::size_t>();
    auto alpha = j.at("alpha").get<std::vector<double>>();
    if (alpha.size() != s.alpha.size()) throw ConfigError("checkpoint: alpha length mismatch");
    s.alpha = std::move(alpha);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint state: ") + e.what());
  }
}

inline json features_to_json(const LaggedSamples&) { return json{{"kind", "lagged_samples"}}; }

inline json features_to_json(const RandomFourierFeatures& f) {
  json maps = json::array();
  for (const auto& m : f.maps.maps()) maps.push_back(to_json(m));
  return json{{"kind", "random_fourier"}, {"shared", f.maps.is_shared()}, {"maps", maps}};
}

template <class Features>
json checkpoint_to_json(const CompositeMirrorDescent<Features>& est) {
  const auto& w = est.window();
  return json{{"format", checkpoint_format},
              {"config", to_json(est.config())},
              {"features", features_to_json(est.features())},
              {"state", to_json(est.state())},
              {"window", {{"buffer", w.buffer()}, {"head", w.head()}, {"count", w.size()}}},
              {"consumed", est.consumed()}};
}

namespace detail {

inline void restore_common(const json& j, auto& est) {
  try {
    const auto& jw = j.at("window");
    LagWindow w(est.config().N, est.config().P);
    w.restore(jw.at("buffer").get<std::vector<double>>(), jw.at("head").get<std::size_t>(),
              jw.at("count").get<std::size_t>());
    est.restore(coefficient_state_from_json(j.at("state")), std::move(w), j.at("consumed").get<std::size_t>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline void check_format(const json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != checkpoint_format)
    throw ConfigError("checkpoint: unrecognized format");
}

}  // namespace detail

inline RfNltiso rf_estimator_from_checkpoint(const json& j) {
  detail::check_format(j);
  const auto cfg = estimator_config_from_json(j.at("config"));
  const auto& jf = j.at("features");
  if (jf.value("kind", std::string{}) != "random_fourier") throw ConfigError("checkpoint: not an RF-NLTISO checkpoint");
  std::vector<RFFMap> maps;
  for (const auto& m : jf.at("maps")) maps.push_back(rff_map_from_json(m));
  FeatureMapBank bank = jf.at("shared").get<bool>() ? FeatureMapBank::shared(maps.at(0), cfg.N, cfg.P)
                                                   : FeatureMapBank::per_slot(std::move(maps), cfg.N, cfg.P);
  if (bank.D() != cfg.D) throw ConfigError("checkpoint: map dimension does not match D");
  RfNltiso est(cfg, RandomFourierFeatures{std::move(bank)});
  detail::restore_common(j, est);
  return est;
}

inline LinearBaseline linear_baseline_from_checkpoint(const json& j) {
  detail::check_format(j);
  const auto cfg = estimator_config_from_json(j.at("config"));
  if (j.at("features").value("kind", std::string{}) != "lagged_samples")
    throw ConfigError("checkpoint: not a linear-baseline checkpoint");
  LinearBaseline est(cfg, LaggedSamples{});
  detail::restore_common(j, est);
  return est;
}

}  // namespace rfnltiso

#endif  // RFNLTISO_SERIALIZATION_HPP
