#pragma once

// Synthetic imbalanced operator-learning data. Each sample pairs an input
// function, observed at m fixed sensors on [0, 1], with one query location y
// and the operator output at y. Query locations are drawn unevenly over
// few/med/many bands for training and uniformly for testing.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "srl/data.hpp"
#include "srl/io.hpp"
#include "srl/rng.hpp"

namespace srl::olgen {

enum class Operator { kLinear, kNonlinear };

std::string to_string(Operator op);
Operator operator_from_string(const std::string& name);

std::vector<double> uniform_grid(std::size_t m);

struct GrfSpec {
  std::size_t m = 100;
  double length_scale = 0.2;
  double variance = 1.0;
};

// Zero-mean Gaussian random field with kernel
// variance * exp(-|x1 - x2|^2 / (2 l^2)) on a uniform grid, sampled as L g
// with L the Cholesky factor of the (jittered) kernel matrix.
class GrfSampler {
 public:
  explicit GrfSampler(GrfSpec spec);

  std::vector<double> sample(Rng& rng) const;
  const std::vector<double>& grid() const { return grid_; }
  double jitter() const { return jitter_; }
  const GrfSpec& spec() const { return spec_; }

 private:
  GrfSpec spec_;
  std::vector<double> grid_;
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

std::vector<double> sample_grf(const GrfSpec& spec, std::uint64_t seed);

// Piecewise-linear interpolation of grid values at y in [0, 1].
double interpolate(std::span<const double> values, std::span<const double> grid, double y);

// Cumulative trapezoid of u over the grid, linearly interpolated at y.
double antiderivative(std::span<const double> u, std::span<const double> grid, double y);

// Solves (e^b u')' = f on the grid with u(0) = u(1) = 0 using a conservative
// three-point scheme with face coefficients exp(mean of b at the two ends).
std::vector<double> solve_elliptic(std::span<const double> b, std::span<const double> grid,
                                   double f_const);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

struct RegionBands {
  std::vector<Interval> few{{0.0, 0.2}, {0.8, 1.0}};
  std::vector<Interval> med{{0.2, 0.4}, {0.6, 0.8}};
  std::vector<Interval> many{{0.4, 0.6}};

  // Intervals are half-open except that y = 1 belongs to the last one.
  data::Region region_of(double y) const;
  const std::vector<Interval>& band(data::Region r) const;
  std::vector<Interval>& band(data::Region r);
};

// Percentages of training locations per band.
struct TrainMix {
  double few = 10.0;
  double med = 30.0;
  double many = 60.0;
};

struct OlSample {
  std::vector<double> u;
  double y = 0.0;
  double target = 0.0;
  data::Region region = data::Region::kMany;
};

struct OlConfig {
  Operator op = Operator::kLinear;
  std::size_t n_train = 10000;
  std::size_t n_test = 100000;
  RegionBands bands;
  TrainMix mix;
  std::uint64_t seed = 0;
  GrfSpec grf;
  double f_const = 10.0;
};

struct OlData {
  std::vector<OlSample> train;
  std::vector<OlSample> test;
};

enum class Placement { kImbalanced, kUniform };

// Samples [first, first + count) of one stream; each sample draws from its own
// seed derive_seed(stream_seed, index).
std::vector<OlSample> generate_samples(const OlConfig& config, const GrfSampler& sampler,
                                       std::uint64_t stream_seed, Placement placement,
                                       std::size_t count);

OlData generate_oldir(const OlConfig& config);

io::Json config_json(const OlConfig& config);

// Sample file: header + rows [u_1..u_m, y, target] as float32. The per-row
// region tags go to the companion manifest.
void write_samples(const std::filesystem::path& path, const OlConfig& config,
                   const std::string& split, const std::vector<OlSample>& samples);
std::vector<OlSample> read_samples(const std::filesystem::path& path, io::Json* header = nullptr);

inline constexpr double kDefaultLocationBinWidth = 0.01;

// Features [u_1..u_m, y], target G(u)(y); bins over y with regions taken from
// the band of each bin centre.
data::DirDataset to_dir_dataset(const std::vector<OlSample>& train,
                                const std::vector<OlSample>& test, const RegionBands& bands,
                                double bin_width = kDefaultLocationBinWidth);

}  // namespace srl::olgen
