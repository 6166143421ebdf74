#pragma once

// Finite-difference audit of every training loss at 64-bit precision.

#include <cstdint>
#include <string>
#include <vector>

namespace srl::gradsuite {

struct Case {
  std::string loss;  // "mse", "enveloping", "homogeneity" or "contrastive"
  std::size_t dim = 0;
  std::size_t bins = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
};

struct Report {
  std::vector<Case> cases;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_error <= tolerance; }
};

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-5;

// `repeats` random draws for every (dim, bins) pair in {2, 8, 32} x {2, 5, 20};
// each draw checks all four losses.
Report run(std::uint64_t seed, std::size_t repeats = 8, double step = kStep,
           double tolerance = kTolerance);

}  // namespace srl::gradsuite
