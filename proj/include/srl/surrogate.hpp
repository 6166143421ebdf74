#pragma once

// Surrogate of the latent trace: one unit-norm centroid per training bin,
// ordered by bin. Within an epoch every mini-batch builds centroids for the
// bins it contains and borrows the stored centroid for the rest ("refill").
// Between epochs the stored surrogate is blended with the epoch's running
// mean of batch centroids.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srl/autodiff.hpp"
#include "srl/tensor.hpp"

namespace srl::surrogate {

using BinId = std::int64_t;

struct Surrogate {
  std::vector<BinId> bins;     // strictly increasing
  std::vector<double> labels;  // bin centre value per bin
  Tensor centroids;            // K x d, unit rows
  std::size_t epoch = 0;

  std::size_t size() const { return bins.size(); }
  std::size_t dim() const { return centroids.cols(); }
  // Position of `bin`, or nullopt.
  std::optional<std::size_t> index_of(BinId bin) const;
};

struct BatchCentroids {
  std::vector<BinId> bins;            // bins present in the batch, increasing
  std::vector<std::size_t> counts;    // members per bin
  ad::Var centroids;                  // |bins| x d, unit rows; invalid when empty

  bool empty() const { return bins.empty(); }
  const Tensor& values() const { return centroids.value(); }
};

// Per present bin: normalize(mean of member rows). Differentiable w.r.t. z.
BatchCentroids batch_centroids(ad::Var z, std::span<const BinId> y_bins);

struct RefilledSurrogate {
  std::vector<BinId> bins;
  std::vector<double> labels;
  ad::Var centroids;            // K x d
  std::vector<bool> from_batch; // true where the row carries gradient
};

// Present bins take the batch centroid, missing bins the stored centroid as
// a constant.
RefilledSurrogate refill(ad::Tape& tape, const BatchCentroids& batch, const Surrogate& prev);

// normalize(alpha * current + (1 - alpha) * running), epoch + 1.
Surrogate momentum_update(const Surrogate& current, const Surrogate& running, double alpha);

// Epoch-level accumulation of batch centroids.
class RunningMean {
 public:
  RunningMean(std::vector<BinId> bins, std::vector<double> labels, std::size_t dim);

  void add(std::span<const BinId> bins, const Tensor& centroids);
  void add(const BatchCentroids& batch) { add(batch.bins, batch.values()); }

  // normalize(sum / count) per bin; bins never seen take `fallback`'s
  // centroid (error when no fallback is given).
  Surrogate finalize(const Surrogate* fallback, std::size_t epoch) const;

  std::size_t seen(std::size_t index) const { return counts_[index]; }

 private:
  std::vector<BinId> bins_;
  std::vector<double> labels_;
  Tensor sums_;
  std::vector<std::size_t> counts_;
};

// -sum_m log softmax_k(<z_m, c_k> / tau)[y_m] over the full surrogate.
ad::Var contrastive_loss(ad::Var z, std::span<const BinId> y_bins, const RefilledSurrogate& s,
                         double tau);

// Surrogate dump: JSON header + K x d float32 matrix. `regions` (one tag per
// bin) is optional metadata for probes.
void save_surrogate(const std::filesystem::path& path, const Surrogate& s,
                    const std::vector<std::string>& regions = {});
Surrogate load_surrogate(const std::filesystem::path& path,
                         std::vector<std::string>* regions = nullptr);

}  // namespace srl::surrogate
