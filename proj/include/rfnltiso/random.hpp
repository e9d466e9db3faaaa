#ifndef RFNLTISO_RANDOM_HPP
#define RFNLTISO_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfnltiso {

using Rng = std::mt19937_64;

// Derives an independent 64-bit seed from a base seed and a list of stream
// identifiers (run index, purpose tag, slot...). Pure function of its inputs.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::seed_seq::result_type words[16];
  std::size_t k = 0;
  words[k++] = static_cast<std::uint32_t>(base);
  words[k++] = static_cast<std::uint32_t>(base >> 32);
  for (auto s : stream) {
    if (k + 2 > 16) break;
    words[k++] = static_cast<std::uint32_t>(s);
    words[k++] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(words, words + k);
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  return Rng(derive_seed(base, stream));
}

// Purpose tags for derive_seed, kept stable so recorded seeds replay.
namespace stream {
inline constexpr std::uint64_t topology = 1;
inline constexpr std::uint64_t bank = 2;
inline constexpr std::uint64_t initial = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t switching = 5;
inline constexpr std::uint64_t rff = 6;
inline constexpr std::uint64_t run = 7;
}  // namespace stream

}  // namespace rfnltiso

#endif  // RFNLTISO_RANDOM_HPP
