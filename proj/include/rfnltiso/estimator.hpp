#ifndef RFNLTISO_ESTIMATOR_HPP
#define RFNLTISO_ESTIMATOR_HPP

// Online group-sparse estimation of nonlinear VAR coefficients in a random
// Fourier feature space, via composite objective mirror descent (COMID) with
// the Euclidean Bregman divergence. Each node n keeps a coefficient vector
// alpha_n of length 2PND split into N*P groups of size 2D, stacked in
// lexicographic order of (p, n', d). One step is
//
//   v_n   = z_t (alpha_n^T z_t - y_n[t])
//   u     = alpha_{n,n'}^{(p)} - gamma_t v_{n,n'}^{(p)}
//   alpha_{n,n'}^{(p)} <- u [1 - gamma_t lambda / ||u||]_+
//
// The same machinery with identity features (raw lags, groups of size 1)
// gives the linear baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfnltiso/errors.hpp"
#include "rfnltiso/lag_window.hpp"
#include "rfnltiso/rff_kernel.hpp"
#include "rfnltiso/var_synth.hpp"

namespace rfnltiso {

enum class StepSchedule { constant, inverse_sqrt };

// How the configured gamma maps to the gradient step: `step_size` uses it as
// the step gamma_t directly, `inverse` uses 1/gamma, `normalized` uses
// 1/(gamma ||z_t||^2).
enum class StepConvention { step_size, inverse, normalized };

// Predictions this many times larger than (1 + |y|) count as divergence.
inline constexpr double divergence_ratio = 1e10;

struct EstimatorConfig {
  std::size_t N = 5;
  std::size_t P = 2;
  std::size_t D = 50;
  double lambda = 0.1;
  double gamma = 1000.0;
  StepSchedule schedule = StepSchedule::constant;
  StepConvention convention = StepConvention::inverse;
  GaussianKernelSpec kernel{0.1};
  std::uint64_t rff_seed = 1;
  bool shared_map = true;

  void validate() const {
    if (N == 0 || P == 0) throw ConfigError("estimator: N and P must be >= 1");
    if (D == 0) throw ConfigError("estimator: D must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("estimator: lambda must be >= 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("estimator: gamma must be > 0");
    if (!(kernel.variance > 0.0)) throw ConfigError("estimator: kernel variance must be > 0");
  }

  // Gradient step used at 1-based iteration k; `energy` is ||z_t||^2.
  double step_at(std::size_t k, double energy = 1.0) const {
    double base = convention == StepConvention::step_size ? gamma : 1.0 / gamma;
    if (convention == StepConvention::normalized && energy > 0.0) base /= energy;
    if (schedule == StepSchedule::inverse_sqrt) return base / std::sqrt(static_cast<double>(std::max<std::size_t>(k, 1)));
    return base;
  }
};

// Scaled Euclidean norm; does not overflow for large entries.
inline double stable_norm(std::span<const double> x) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double v : x) {
    const double r = v / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

struct CoefficientState {
  std::size_t N = 0;
  std::size_t P = 0;
  std::size_t group_dim = 0;  // 2D for random features, 1 for raw lags
  std::vector<double> alpha;  // node-major rows of length N * P * group_dim
  std::size_t t = 0;          // completed updates

  CoefficientState() = default;
  CoefficientState(std::size_t n, std::size_t p, std::size_t g)
      : N(n), P(p), group_dim(g), alpha(n * n * p * g, 0.0) {}

  std::size_t row_size() const noexcept { return N * P * group_dim; }
  std::size_t group_offset(std::size_t n_src, std::size_t p) const noexcept { return (p * N + n_src) * group_dim; }

  std::span<double> row(std::size_t n) { return {alpha.data() + n * row_size(), row_size()}; }
  std::span<const double> row(std::size_t n) const { return {alpha.data() + n * row_size(), row_size()}; }

  // p zero-based.
  std::span<double> group(std::size_t n, std::size_t n_src, std::size_t p) {
    return row(n).subspan(group_offset(n_src, p), group_dim);
  }
  std::span<const double> group(std::size_t n, std::size_t n_src, std::size_t p) const {
    return row(n).subspan(group_offset(n_src, p), group_dim);
  }

  bool operator==(const CoefficientState&) const = default;
};

struct FeatureVector {
  std::size_t N = 0;
  std::size_t P = 0;
  std::size_t group_dim = 0;
  std::vector<double> z;

  FeatureVector() = default;
  FeatureVector(std::size_t n, std::size_t p, std::size_t g) : N(n), P(p), group_dim(g), z(n * p * g, 0.0) {}

  std::span<const double> block(std::size_t n_src, std::size_t p) const {
    return std::span<const double>(z).subspan((p * N + n_src) * group_dim, group_dim);
  }
  std::span<double> block(std::size_t n_src, std::size_t p) {
    return std::span<double>(z).subspan((p * N + n_src) * group_dim, group_dim);
  }
};

// Stacks z_v(y_{n'}[t-p]) for all (p, n').
inline void build_feature_vector_into(const LagWindow& history, const FeatureMapBank& maps, FeatureVector& out) {
  if (!history.full()) throw std::invalid_argument("build_feature_vector: incomplete history");
  for (std::size_t p = 0; p < history.P(); ++p)
    for (std::size_t m = 0; m < history.N(); ++m) maps.at(m, p).features_into(history.lag(m, p + 1), out.block(m, p));
}

inline FeatureVector build_feature_vector(const LagWindow& history, const FeatureMapBank& maps) {
  FeatureVector fv(history.N(), history.P(), 2 * maps.D());
  build_feature_vector_into(history, maps, fv);
  return fv;
}

inline double predict(std::span<const double> alpha_n, std::span<const double> z) {
  if (alpha_n.size() != z.size()) throw std::invalid_argument("predict: dimension mismatch");
  return std::inner_product(alpha_n.begin(), alpha_n.end(), z.begin(), 0.0);
}

inline double instantaneous_loss(std::span<const double> alpha_n, std::span<const double> z, double y) {
  const double r = y - predict(alpha_n, z);
  return 0.5 * r * r;
}

inline std::vector<double> gradient(std::span<const double> alpha_n, std::span<const double> z, double y) {
  const double r = predict(alpha_n, z) - y;
  std::vector<double> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = z[i] * r;
  return v;
}

// Multidimensional shrinkage-thresholding applied in place to `group`:
// group <- u [1 - gamma_t lambda / ||u||]_+ with u = group - gamma_t grad.
// A group with ||u|| <= gamma_t lambda becomes exactly zero.
inline void comid_group_update_inplace(std::span<double> group, std::span<const double> grad, double gamma_t,
                                       double lambda) {
  for (std::size_t i = 0; i < group.size(); ++i) group[i] -= gamma_t * grad[i];
  const double threshold = gamma_t * lambda;
  if (threshold == 0.0) return;
  const double norm = stable_norm(group);
  if (norm <= threshold) {
    std::fill(group.begin(), group.end(), 0.0);
    return;
  }
  const double shrink = 1.0 - threshold / norm;
  for (double& g : group) g *= shrink;
}

inline std::vector<double> comid_group_update(std::span<const double> group, std::span<const double> grad,
                                              double gamma_t, double lambda) {
  if (group.size() != grad.size()) throw std::invalid_argument("comid_group_update: size mismatch");
  if (!(gamma_t > 0.0) || !std::isfinite(gamma_t)) throw std::invalid_argument("comid_group_update: gamma_t must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("comid_group_update: lambda must be >= 0");
  for (std::size_t i = 0; i < group.size(); ++i)
    if (!std::isfinite(group[i]) || !std::isfinite(grad[i]))
      throw std::invalid_argument("comid_group_update: non-finite input");
  std::vector<double> out(group.begin(), group.end());
  comid_group_update_inplace(out, grad, gamma_t, lambda);
  return out;
}

// Feature policies for the online loop.

struct RandomFourierFeatures {
  FeatureMapBank maps;

  std::size_t group_dim() const { return 2 * maps.D(); }
  void build(const LagWindow& history, FeatureVector& out) const { build_feature_vector_into(history, maps, out); }
};

// Raw lagged samples: the linear VAR stand-in.
struct LaggedSamples {
  std::size_t group_dim() const { return 1; }
  void build(const LagWindow& history, FeatureVector& out) const {
    if (!history.full()) throw std::invalid_argument("build_feature_vector: incomplete history");
    for (std::size_t p = 0; p < history.P(); ++p)
      for (std::size_t m = 0; m < history.N(); ++m) out.block(m, p)[0] = history.lag(m, p + 1);
  }
};

inline FeatureMapBank make_feature_bank(const EstimatorConfig& cfg) {
  return FeatureMapBank::sample(cfg.kernel, cfg.D, cfg.N, cfg.P, cfg.rff_seed, cfg.shared_map);
}

struct StepResult {
  std::size_t t = 0;  // index of the sample just consumed, counted from the start of the stream
  std::vector<double> predictions;
  std::vector<double> losses;
};

// One COMID step for every node given a prebuilt feature vector z_t.
// Fills predictions / losses with the pre-update values.
inline void online_step(CoefficientState& state, const FeatureVector& z, std::span<const double> sample,
                        double gamma_t, double lambda, std::span<double> predictions, std::span<double> losses) {
  if (sample.size() != state.N) throw DataError("online_step: sample length != N");
  const std::size_t G = state.group_dim;
  std::vector<double> grad_group(G);
  for (std::size_t n = 0; n < state.N; ++n) {
    auto row = state.row(n);
    const double yhat = predict(row, z.z);
    const double residual = yhat - sample[n];
    predictions[n] = yhat;
    losses[n] = 0.5 * residual * residual;
    if (!std::isfinite(yhat) || std::abs(yhat) > divergence_ratio * (1.0 + std::abs(sample[n])))
      throw DivergenceError("online_step: prediction diverged");
    for (std::size_t p = 0; p < state.P; ++p)
      for (std::size_t m = 0; m < state.N; ++m) {
        const auto zb = z.block(m, p);
        for (std::size_t d = 0; d < G; ++d) grad_group[d] = zb[d] * residual;
        comid_group_update_inplace(state.group(n, m, p), grad_group, gamma_t, lambda);
      }
  }
  for (double a : state.alpha)
    if (!std::isfinite(a)) throw DivergenceError("online_step: coefficients became non-finite");
  ++state.t;
}

// Streaming estimator: buffers the first P samples, then performs one COMID
// step per incoming sample with fixed cost Theta(N^2 P G).
template <class Features>
class CompositeMirrorDescent {
 public:
  CompositeMirrorDescent(EstimatorConfig cfg, Features features)
      : cfg_(std::move(cfg)),
        features_(std::move(features)),
        state_(cfg_.N, cfg_.P, features_.group_dim()),
        window_(cfg_.N, cfg_.P),
        z_(cfg_.N, cfg_.P, features_.group_dim()) {
    cfg_.validate();
  }

  bool warmed_up() const noexcept { return window_.full(); }

  // Stores a warm-up sample; only valid before P samples are buffered.
  void warm_up(std::span<const double> sample) {
    if (window_.full()) throw std::logic_error("warm_up: history already complete");
    check_sample(sample);
    window_.push(sample);
    ++consumed_;
  }

  StepResult step(std::span<const double> sample) {
    if (!window_.full()) throw std::logic_error("online_step: warm-up incomplete (need P buffered samples)");
    check_sample(sample);
    StepResult r;
    r.t = consumed_;
    r.predictions.resize(cfg_.N);
    r.losses.resize(cfg_.N);
    features_.build(window_, z_);
    double energy = 1.0;
    if (cfg_.convention == StepConvention::normalized) energy = std::inner_product(z_.z.begin(), z_.z.end(), z_.z.begin(), 0.0);
    online_step(state_, z_, sample, cfg_.step_at(state_.t + 1, energy), cfg_.lambda, r.predictions, r.losses);
    window_.push(sample);
    ++consumed_;
    return r;
  }

  // Warm-up first, then steps.
  std::optional<StepResult> observe(std::span<const double> sample) {
    if (!window_.full()) {
      warm_up(sample);
      return std::nullopt;
    }
    return step(sample);
  }

  const CoefficientState& state() const noexcept { return state_; }
  const EstimatorConfig& config() const noexcept { return cfg_; }
  const Features& features() const noexcept { return features_; }
  const LagWindow& window() const noexcept { return window_; }
  std::size_t consumed() const noexcept { return consumed_; }

  void restore(CoefficientState state, LagWindow window, std::size_t consumed) {
    if (state.N != cfg_.N || state.P != cfg_.P || state.group_dim != features_.group_dim() ||
        state.alpha.size() != state_.alpha.size())
      throw ConfigError("restore: checkpoint state does not match configuration");
    if (window.N() != cfg_.N || window.P() != cfg_.P) throw ConfigError("restore: checkpoint window mismatch");
    state_ = std::move(state);
    window_ = std::move(window);
    consumed_ = consumed;
  }

 private:
  void check_sample(std::span<const double> sample) const {
    if (sample.size() != cfg_.N) throw DataError("sample length does not match N");
    for (double v : sample)
      if (!std::isfinite(v)) throw DataError("non-finite sample");
  }

  EstimatorConfig cfg_;
  Features features_;
  CoefficientState state_;
  LagWindow window_;
  FeatureVector z_;
  std::size_t consumed_ = 0;
};

using RfNltiso = CompositeMirrorDescent<RandomFourierFeatures>;
using LinearBaseline = CompositeMirrorDescent<LaggedSamples>;

inline RfNltiso make_rf_estimator(const EstimatorConfig& cfg) {
  cfg.validate();
  return RfNltiso(cfg, RandomFourierFeatures{make_feature_bank(cfg)});
}

inline LinearBaseline make_linear_baseline(const EstimatorConfig& cfg) {
  cfg.validate();
  return LinearBaseline(cfg, LaggedSamples{});
}

// Running mean of coefficient iterates.
class IterateAverager {
 public:
  void add(const CoefficientState& s) {
    if (count_ == 0) mean_ = s;
    ++count_;
    const double w = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.alpha.size(); ++i) mean_.alpha[i] += w * (s.alpha[i] - mean_.alpha[i]);
    mean_.t = s.t;
  }
  const CoefficientState& mean() const noexcept { return mean_; }
  std::size_t count() const noexcept { return count_; }

 private:
  CoefficientState mean_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Batch group-lasso reference solved by proximal gradient:
//
//   min_a  1/2 sum_tau (y_n[tau] - a^T z_tau)^2 + lambda sum_g ||a_g||_2
//
// Uses the Gram form: loss(a) = 1/2 a^T G a - b^T a + 1/2 yy. Iteration
// stops once the relative iterate change falls below `tolerance`.

struct BatchResult {
  CoefficientState state;
  std::vector<std::vector<double>> objective;  // per node, one entry per iterate (first is the start point)
  double lipschitz = 0.0;
  bool converged = true;
  std::string warning;
};

namespace detail {

inline double largest_eigenvalue(const std::vector<double>& G, std::size_t K) {
  std::vector<double> x(K, 1.0 / std::sqrt(static_cast<double>(K))), y(K);
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    for (std::size_t i = 0; i < K; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < K; ++j) s += G[i * K + j] * x[j];
      y[i] = s;
    }
    const double norm = stable_norm(y);
    if (norm == 0.0) return 0.0;
    const double next = norm;
    for (std::size_t i = 0; i < K; ++i) x[i] = y[i] / norm;
    if (it > 10 && std::abs(next - lambda) <= 1e-12 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace detail

template <class Features>
BatchResult batch_oracle_with(const TimeSeriesMatrix& data, const EstimatorConfig& cfg, const Features& features,
                              std::size_t iterations, double tolerance) {
  cfg.validate();
  if (data.N != cfg.N) throw DataError("batch_oracle: data has " + std::to_string(data.N) + " nodes, config N=" +
                                       std::to_string(cfg.N));
  if (data.T <= cfg.P) throw DataError("batch_oracle: need T > P");

  const std::size_t N = cfg.N, G = features.group_dim(), K = N * cfg.P * G;
  std::vector<double> gram(K * K, 0.0), b(N * K, 0.0), yy(N, 0.0);

  LagWindow window(N, cfg.P);
  FeatureVector z(N, cfg.P, G);
  for (std::size_t t = 0; t < cfg.P; ++t) window.push(data.sample(t));
  for (std::size_t t = cfg.P; t < data.T; ++t) {
    features.build(window, z);
    for (std::size_t i = 0; i < K; ++i) {
      const double zi = z.z[i];
      if (zi == 0.0) continue;
      for (std::size_t j = i; j < K; ++j) gram[i * K + j] += zi * z.z[j];
    }
    for (std::size_t n = 0; n < N; ++n) {
      const double y = data.at(n, t);
      for (std::size_t i = 0; i < K; ++i) b[n * K + i] += z.z[i] * y;
      yy[n] += y * y;
    }
    window.push(data.sample(t));
  }
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < i; ++j) gram[i * K + j] = gram[j * K + i];

  BatchResult result;
  result.state = CoefficientState(N, cfg.P, G);
  result.objective.resize(N);
  const double L = detail::largest_eigenvalue(gram, K);
  result.lipschitz = L;
  const double step = L > 0.0 ? 1.0 / (1.01 * L) : 1.0;

  std::vector<double> grad(K);
  auto objective = [&](std::span<const double> a, std::size_t n) {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < K; ++j) gi += gram[i * K + j] * a[j];
      quad += a[i] * gi;
      lin += b[n * K + i] * a[i];
    }
    double reg = 0.0;
    for (std::size_t g = 0; g < K / G; ++g) reg += stable_norm(a.subspan(g * G, G));
    return 0.5 * quad - lin + 0.5 * yy[n] + cfg.lambda * reg;
  };

  for (std::size_t n = 0; n < N; ++n) {
    auto a = result.state.row(n);
    result.objective[n].push_back(objective(a, n));
    bool done = false;
    std::vector<double> prev(K);
    for (std::size_t it = 0; it < iterations && !done; ++it) {
      std::copy(a.begin(), a.end(), prev.begin());
      for (std::size_t i = 0; i < K; ++i) {
        double gi = -b[n * K + i];
        for (std::size_t j = 0; j < K; ++j) gi += gram[i * K + j] * a[j];
        grad[i] = gi;
      }
      for (std::size_t g = 0; g < K / G; ++g)
        comid_group_update_inplace(a.subspan(g * G, G), std::span<const double>(grad).subspan(g * G, G), step,
                                   cfg.lambda);
      result.objective[n].push_back(objective(a, n));
      double moved = 0.0;
      for (std::size_t i = 0; i < K; ++i) moved += (a[i] - prev[i]) * (a[i] - prev[i]);
      done = std::sqrt(moved) <= tolerance * std::max(1.0, stable_norm(a));
    }
    if (!done) {
      result.converged = false;
      result.warning = "batch_oracle: iteration limit reached before tolerance for node " + std::to_string(n);
    }
  }
  result.state.t = data.T - cfg.P;
  return result;
}

inline BatchResult batch_oracle(const TimeSeriesMatrix& data, const EstimatorConfig& cfg, std::size_t iterations,
                                double tolerance) {
  return batch_oracle_with(data, cfg, RandomFourierFeatures{make_feature_bank(cfg)}, iterations, tolerance);
}

// ---------------------------------------------------------------------------
// Reference kernel estimator whose dictionary grows with every sample (no
// window, no random features). Per-step cost is linear in t; used only to
// contrast per-iteration timing.
class GrowingDictionaryEstimator {
 public:
  GrowingDictionaryEstimator(std::size_t N, std::size_t P, GaussianKernelSpec kernel, double step)
      : N_(N), P_(P), kernel_(kernel), step_(step), window_(N, P) {}

  std::optional<std::vector<double>> observe(std::span<const double> sample) {
    if (!window_.full()) {
      window_.push(sample);
      return std::nullopt;
    }
    std::vector<double> x(N_ * P_);
    for (std::size_t p = 0; p < P_; ++p)
      for (std::size_t m = 0; m < N_; ++m) x[p * N_ + m] = window_.lag(m, p + 1);

    const std::size_t atoms = coeffs_.size() / N_;
    std::vector<double> k(atoms, 0.0);
    for (std::size_t a = 0; a < atoms; ++a) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += kernel_exact(kernel_, x[i], dictionary_[a * x.size() + i]);
      k[a] = s;
    }
    std::vector<double> yhat(N_, 0.0);
    for (std::size_t n = 0; n < N_; ++n) {
      double s = 0.0;
      for (std::size_t a = 0; a < atoms; ++a) s += coeffs_[a * N_ + n] * k[a];
      yhat[n] = s;
    }
    dictionary_.insert(dictionary_.end(), x.begin(), x.end());
    for (std::size_t n = 0; n < N_; ++n) coeffs_.push_back(step_ * (sample[n] - yhat[n]));
    window_.push(sample);
    return yhat;
  }

  std::size_t dictionary_size() const noexcept { return coeffs_.size() / N_; }

 private:
  std::size_t N_, P_;
  GaussianKernelSpec kernel_;
  double step_;
  LagWindow window_;
  std::vector<double> dictionary_;
  std::vector<double> coeffs_;
};

}  // namespace rfnltiso

#endif  // RFNLTISO_ESTIMATOR_HPP
