#include "beliefsim/random.hpp"

namespace beliefsim {

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t value = next();
  while (value >= limit) {
    value = next();
  }
  return value % bound;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix(splitmix(seed) ^ salt);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : salt) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return mix_seed(seed, hash);
}

}  // namespace beliefsim
