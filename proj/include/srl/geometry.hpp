#pragma once

// Geometric constraints on the latent trace of a regression model.
//
// The trace is represented by K unit-norm centroids ordered by label. The
// enveloping loss rewards how much of the unit hypersphere lies close to the
// trace, estimated against a fixed Monte-Carlo sample of the sphere; the
// homogeneity loss is the discrete arc-length energy of the trace and is
// smallest when consecutive centroids are evenly spaced relative to their
// labels.

#include <cstdint>
#include <span>
#include <vector>

#include "srl/autodiff.hpp"
#include "srl/tensor.hpp"

namespace srl::geometry {

struct SphereSample {
  Tensor points;  // n x d, unit rows
  std::uint64_t seed = 0;

  std::size_t count() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }
};

// Gaussian vectors normalized to unit length. Requires n >= 1, d >= 2.
SphereSample sample_hypersphere(std::size_t n, std::size_t d, std::uint64_t seed);

struct GeomWeights {
  double lambda_e = 0.0;
  double lambda_h = 0.0;
};

// Radius parameter of the hard tube diagnostic; must lie in (0, 1).
struct EpsilonTube {
  double epsilon = 0.95;
};

// -(1/N) sum_i max_k <p_i, c_k>. Only each point's best centroid receives
// gradient.
ad::Var enveloping_loss(const SphereSample& sample, ad::Var centroids);

// sum_k |c_{k+1} - c_k|^2 / (y_{k+1} - y_k) for labels strictly increasing.
ad::Var homogeneity_loss(ad::Var centroids, std::span<const double> labels);

ad::Var geometric_loss(const SphereSample& sample, ad::Var centroids,
                       std::span<const double> labels, GeomWeights weights);

// Tensor conveniences for diagnostics.
double enveloping_loss(const SphereSample& sample, const Tensor& centroids);
double homogeneity_loss(const Tensor& centroids, std::span<const double> labels);

// Fraction of sample points whose best cosine to a centroid exceeds epsilon.
double coverage_at_epsilon(const SphereSample& sample, const Tensor& centroids,
                           EpsilonTube tube);

// Index of the max-cosine centroid for every sample point; ties go to the
// lowest index.
std::vector<std::size_t> nearest_centroid(const SphereSample& sample, const Tensor& centroids);

// Fraction of sample points whose nearest centroid is flagged few-shot.
double few_shot_proportion(const SphereSample& sample, const Tensor& centroids,
                           const std::vector<bool>& is_few_shot);

}  // namespace srl::geometry
