#pragma once

#include <cstdint>
#include <initializer_list>

namespace dfal {

// splitmix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of
/// integer tags, e.g. derive_seed(run_seed, round, candidate).
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix_seed(base);
  for (std::uint64_t t : tags) s = mix_seed(s ^ mix_seed(t + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace dfal
