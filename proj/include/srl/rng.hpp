#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace srl {

// splitmix64 finalizer. All sub-seeds in the project are derived through
// derive_seed(parent, stream) so a single run seed controls everything.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(parent ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Named streams used by derive_seed.
enum class SeedStream : std::uint64_t {
  kInitEncoder = 1,
  kInitHead = 2,
  kShuffle = 3,
  kSphere = 4,
  kSplit = 5,
  kOlTrain = 6,
  kOlTest = 7,
};

inline std::uint64_t derive_seed(std::uint64_t parent, SeedStream stream) {
  return derive_seed(parent, static_cast<std::uint64_t>(stream));
}

using Rng = std::mt19937_64;

// Uniform integer in [0, n). Modulo bias is below 2^-40 for the sizes used here.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; defined here rather than std::normal_distribution so streams are
// identical across standard library implementations.
class NormalSampler {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform_unit(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform_unit(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename Container>
void shuffle_in_place(Container& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace srl
