#include "srl/geometry.hpp"

#include <Eigen/Core>
#include <cmath>

#include "srl/error.hpp"
#include "srl/rng.hpp"

namespace srl::geometry {

namespace {

void check_centroids(const SphereSample& sample, const Tensor& centroids) {
  if (centroids.empty() || centroids.rows() == 0) throw Error("centroid set is empty");
  if (centroids.cols() != sample.dim()) {
    throw Error("centroid dim " + std::to_string(centroids.cols()) + " != sphere dim " +
                std::to_string(sample.dim()));
  }
}

// max_k <p_i, c_k> for every sample point, plus the argmax.
void best_cosines(const SphereSample& sample, const Tensor& centroids, std::vector<double>& best,
                  std::vector<std::size_t>& arg) {
  check_centroids(sample, centroids);
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrix> p(sample.points.data(),
                                static_cast<Eigen::Index>(sample.count()),
                                static_cast<Eigen::Index>(sample.dim()));
  Eigen::Map<const RowMatrix> c(centroids.data(), static_cast<Eigen::Index>(centroids.rows()),
                                static_cast<Eigen::Index>(centroids.cols()));
  const RowMatrix sims = p * c.transpose();
  best.assign(sample.count(), 0.0);
  arg.assign(sample.count(), 0);
  for (Eigen::Index i = 0; i < sims.rows(); ++i) {
    Eigen::Index k = 0;
    double m = sims(i, 0);
    for (Eigen::Index j = 1; j < sims.cols(); ++j) {
      if (sims(i, j) > m) {
        m = sims(i, j);
        k = j;
      }
    }
    best[static_cast<std::size_t>(i)] = m;
    arg[static_cast<std::size_t>(i)] = static_cast<std::size_t>(k);
  }
}

void check_labels(std::span<const double> labels, std::size_t k) {
  if (k < 2) throw Error("homogeneity needs at least two centroids");
  if (labels.size() != k) throw Error("one label per centroid required");
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (!(labels[i] > labels[i - 1])) throw Error("labels must be strictly increasing");
  }
}

}  // namespace

SphereSample sample_hypersphere(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d < 2) throw UsageError("sphere dimension must be at least 2");
  if (n < 1) throw UsageError("sphere sample needs at least one point");
  Rng rng(seed);
  NormalSampler normal;
  SphereSample s{Tensor::matrix(n, d), seed};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = s.points.row(i);
    double len = 0.0;
    do {
      for (double& v : row) v = normal(rng);
      len = norm(row);
    } while (len < 1e-12);
    for (double& v : row) v /= len;
  }
  return s;
}

ad::Var enveloping_loss(const SphereSample& sample, ad::Var centroids) {
  check_centroids(sample, centroids.value());
  ad::Tape& tape = centroids.tape();
  ad::Var points = tape.constant(sample.points);
  ad::Var sims = ad::matmul(points, ad::transpose(centroids));
  return ad::scale(ad::mean(ad::row_max(sims)), -1.0);
}

ad::Var homogeneity_loss(ad::Var centroids, std::span<const double> labels) {
  const std::size_t k = centroids.rows();
  check_labels(labels, k);
  std::vector<std::size_t> head(k - 1);
  std::vector<std::size_t> tail(k - 1);
  Tensor inv_gap = Tensor::matrix(k - 1, 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    head[i] = i + 1;
    tail[i] = i;
    inv_gap[i] = 1.0 / (labels[i + 1] - labels[i]);
  }
  ad::Var steps = ad::sub(ad::gather_rows(centroids, head), ad::gather_rows(centroids, tail));
  ad::Var sq = ad::row_sum(ad::square(steps));
  return ad::sum(ad::mul(sq, centroids.tape().constant(std::move(inv_gap))));
}

ad::Var geometric_loss(const SphereSample& sample, ad::Var centroids,
                       std::span<const double> labels, GeomWeights weights) {
  if (!(weights.lambda_e >= 0.0) || !(weights.lambda_h >= 0.0) ||
      !std::isfinite(weights.lambda_e) || !std::isfinite(weights.lambda_h)) {
    throw UsageError("geometric weights must be finite and non-negative");
  }
  ad::Var env = ad::scale(enveloping_loss(sample, centroids), weights.lambda_e);
  ad::Var homo = ad::scale(homogeneity_loss(centroids, labels), weights.lambda_h);
  return ad::add(env, homo);
}

double enveloping_loss(const SphereSample& sample, const Tensor& centroids) {
  std::vector<double> best;
  std::vector<std::size_t> arg;
  best_cosines(sample, centroids, best, arg);
  double total = 0.0;
  for (double b : best) total += b;
  return -total / static_cast<double>(best.size());
}

double homogeneity_loss(const Tensor& centroids, std::span<const double> labels) {
  check_labels(labels, centroids.rows());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < centroids.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < centroids.cols(); ++c) {
      const double d = centroids(i + 1, c) - centroids(i, c);
      sq += d * d;
    }
    total += sq / (labels[i + 1] - labels[i]);
  }
  return total;
}

double coverage_at_epsilon(const SphereSample& sample, const Tensor& centroids,
                           EpsilonTube tube) {
  // Zero is accepted for the half-space diagnostic.
  if (!(tube.epsilon >= 0.0 && tube.epsilon < 1.0)) {
    throw UsageError("epsilon must lie in [0, 1)");
  }
  std::vector<double> best;
  std::vector<std::size_t> arg;
  best_cosines(sample, centroids, best, arg);
  std::size_t inside = 0;
  for (double b : best) inside += b > tube.epsilon ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(best.size());
}

std::vector<std::size_t> nearest_centroid(const SphereSample& sample, const Tensor& centroids) {
  std::vector<double> best;
  std::vector<std::size_t> arg;
  best_cosines(sample, centroids, best, arg);
  return arg;
}

double few_shot_proportion(const SphereSample& sample, const Tensor& centroids,
                           const std::vector<bool>& is_few_shot) {
  if (centroids.empty()) throw Error("few_shot_proportion: empty surrogate");
  if (is_few_shot.size() != centroids.rows()) {
    throw Error("few_shot_proportion: one region flag per centroid required");
  }
  const auto arg = nearest_centroid(sample, centroids);
  std::size_t few = 0;
  for (std::size_t k : arg) few += is_few_shot[k] ? 1 : 0;
  return static_cast<double>(few) / static_cast<double>(arg.size());
}

}  // namespace srl::geometry
