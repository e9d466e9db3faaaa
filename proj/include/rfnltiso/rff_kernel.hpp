#ifndef RFNLTISO_RFF_KERNEL_HPP
#define RFNLTISO_RFF_KERNEL_HPP

// Gaussian kernel and its random Fourier feature approximation.
//
// Convention: k(x, x') = exp(-(x - x')^2 / (2 s2)) with frequencies drawn
// from N(0, 1 / s2). The feature map is the real (sin/cos) one:
//
//   z(x) = D^{-1/2} [sin(v_1 x) .. sin(v_D x), cos(v_1 x) .. cos(v_D x)]
//
// so that z(x)^T z(x') = D^{-1} sum_i cos(v_i (x - x')).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "rfnltiso/errors.hpp"
#include "rfnltiso/random.hpp"

namespace rfnltiso {

struct GaussianKernelSpec {
  double variance = 1.0;

  void validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw std::invalid_argument("kernel variance must be a positive finite number");
  }
  bool operator==(const GaussianKernelSpec&) const = default;
};

inline double kernel_exact(const GaussianKernelSpec& spec, double x, double x_prime) {
  const double d = x - x_prime;
  return std::exp(-(d * d) / (2.0 * spec.variance));
}

class RFFMap {
 public:
  RFFMap() = default;

  // Wraps explicit frequencies (replay from JSON, hand-built maps in tests).
  RFFMap(GaussianKernelSpec spec, std::uint64_t seed, std::vector<double> frequencies)
      : spec_(spec), seed_(seed), frequencies_(std::move(frequencies)) {
    spec_.validate();
    if (frequencies_.empty()) throw std::invalid_argument("RFF map needs at least one frequency");
    inv_sqrt_d_ = 1.0 / std::sqrt(static_cast<double>(frequencies_.size()));
  }

  std::size_t D() const noexcept { return frequencies_.size(); }
  std::size_t feature_dim() const noexcept { return 2 * frequencies_.size(); }
  const GaussianKernelSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> frequencies() const noexcept { return frequencies_; }

  // Writes z(x) into out (length 2D).
  void features_into(double x, std::span<double> out) const {
    if (!std::isfinite(x)) throw std::invalid_argument("feature_map: non-finite input");
    if (out.size() != feature_dim()) throw std::invalid_argument("feature_map: output size != 2D");
    const std::size_t d = D();
    for (std::size_t i = 0; i < d; ++i) {
      const double arg = frequencies_[i] * x;
      out[i] = inv_sqrt_d_ * std::sin(arg);
      out[d + i] = inv_sqrt_d_ * std::cos(arg);
    }
  }

  bool operator==(const RFFMap& o) const {
    return spec_ == o.spec_ && seed_ == o.seed_ && frequencies_ == o.frequencies_;
  }

 private:
  GaussianKernelSpec spec_{};
  std::uint64_t seed_ = 0;
  std::vector<double> frequencies_;
  double inv_sqrt_d_ = 1.0;
};

// D iid draws from N(0, 1/variance); a pure function of (spec, D, seed).
inline RFFMap sample_frequencies(const GaussianKernelSpec& spec, std::size_t D, std::uint64_t seed) {
  spec.validate();
  if (D == 0) throw std::invalid_argument("sample_frequencies: D must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(spec.variance));
  std::vector<double> v(D);
  for (auto& f : v) f = dist(rng);
  return RFFMap(spec, seed, std::move(v));
}

inline std::vector<double> feature_map(const RFFMap& map, double x) {
  std::vector<double> z(map.feature_dim());
  map.features_into(x, z);
  return z;
}

// z(x)^T z(x').
inline double kernel_approx(const RFFMap& map, double x, double x_prime) {
  const auto a = feature_map(map, x);
  const auto b = feature_map(map, x_prime);
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Same quantity via the cosine identity; used as an independent path.
inline double kernel_approx_cosine(const RFFMap& map, double x, double x_prime) {
  double s = 0.0;
  for (double v : map.frequencies()) s += std::cos(v * (x - x_prime));
  return s / static_cast<double>(map.D());
}

// Assignment of RFF maps to the (n', p) lag slots. Either one map shared by
// every slot, or one independently seeded map per slot.
class FeatureMapBank {
 public:
  FeatureMapBank() = default;

  static FeatureMapBank shared(RFFMap map, std::size_t N, std::size_t P) {
    FeatureMapBank b;
    b.N_ = N;
    b.P_ = P;
    b.maps_.push_back(std::move(map));
    return b;
  }

  // maps ordered by slot index p * N + n' (p zero-based).
  static FeatureMapBank per_slot(std::vector<RFFMap> maps, std::size_t N, std::size_t P) {
    if (maps.size() != N * P) throw std::invalid_argument("per-slot bank needs N*P maps");
    for (const auto& m : maps)
      if (m.D() != maps.front().D()) throw std::invalid_argument("per-slot maps must share D");
    FeatureMapBank b;
    b.N_ = N;
    b.P_ = P;
    b.maps_ = std::move(maps);
    return b;
  }

  static FeatureMapBank sample(const GaussianKernelSpec& spec, std::size_t D, std::size_t N, std::size_t P,
                               std::uint64_t seed, bool shared_map) {
    if (shared_map) return shared(sample_frequencies(spec, D, seed), N, P);
    std::vector<RFFMap> maps;
    maps.reserve(N * P);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t n = 0; n < N; ++n)
        maps.push_back(sample_frequencies(spec, D, derive_seed(seed, {stream::rff, p * N + n})));
    return per_slot(std::move(maps), N, P);
  }

  // p is zero-based (lag p + 1).
  const RFFMap& at(std::size_t n_src, std::size_t p) const {
    return maps_.size() == 1 ? maps_.front() : maps_[p * N_ + n_src];
  }
  bool is_shared() const noexcept { return maps_.size() == 1; }
  std::size_t D() const noexcept { return maps_.empty() ? 0 : maps_.front().D(); }
  std::size_t N() const noexcept { return N_; }
  std::size_t P() const noexcept { return P_; }
  const std::vector<RFFMap>& maps() const noexcept { return maps_; }

 private:
  std::size_t N_ = 0;
  std::size_t P_ = 0;
  std::vector<RFFMap> maps_;
};

}  // namespace rfnltiso

#endif  // RFNLTISO_RFF_KERNEL_HPP
