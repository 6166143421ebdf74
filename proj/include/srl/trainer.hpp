#pragma once

// Training loop for the surrogate-driven scheme and its plain MSE baseline.
//
// Epoch 0 fits the regression loss only and collects the first surrogate.
// Later epochs add the enveloping, homogeneity and contrastive terms, all
// computed against the surrogate refilled with the current batch's
// centroids, and blend the stored surrogate with the epoch's running mean at
// the end of each epoch.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srl/data.hpp"
#include "srl/geometry.hpp"
#include "srl/io.hpp"
#include "srl/metrics.hpp"
#include "srl/nn.hpp"
#include "srl/surrogate.hpp"

namespace srl::trainer {

enum class Mode { kSrl, kVanilla };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  Mode mode = Mode::kSrl;
  double lambda_e = 1e-2;
  double lambda_h = 1e-2;
  double tau = 0.1;
  double alpha = 0.9;
  bool contrastive = true;
  // Average the contrastive term over the batch instead of summing it.
  bool contrastive_mean = false;
  std::size_t sphere_points = 1000;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 256;
  // Total epochs, counting the regression-only epoch 0.
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  // Surrogate bin width; 0 keeps the dataset's bins.
  double bin_width = 0.0;
  std::vector<std::size_t> hidden = {20, 30};
  std::size_t rep_dim = 10;
  nn::Activation activation = nn::Activation::kRelu;
  // Fit the head on train-standardized targets; predictions are mapped back.
  bool standardize_targets = true;

  // Throws UsageError naming the first invalid field.
  void validate() const;
};

TrainConfig uci_defaults();
TrainConfig oldir_defaults();

io::Json to_json(const TrainConfig& c);
// Missing keys keep their defaults; unknown keys raise SchemaError.
TrainConfig config_from_json(const io::Json& j);

// Loss terms of one batch as added to the total. Geometric and contrastive
// entries are absent when the term was not part of the loss.
struct LossTerms {
  double reg = 0.0;
  std::optional<double> env;
  std::optional<double> homo;
  std::optional<double> con;
  double total = 0.0;
};

struct BatchLog {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t rows = 0;
  LossTerms terms;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t batches = 0;
  LossTerms mean;  // average over the epoch's batches
  std::optional<metrics::RegionReport> val;
  // Epoch index of the surrogate in memory after this epoch's update; absent
  // in vanilla mode.
  std::optional<std::size_t> surrogate_epoch;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  std::string selection;  // "best_val_all_mae" or "final_epoch"
};

io::Json to_json(const TrainHistory& h);

struct TrainResult {
  nn::Model model;  // selected checkpoint
  std::optional<surrogate::Surrogate> surrogate;  // as of the selected epoch
  TrainHistory history;
};

using BatchObserver = std::function<void(const BatchLog&)>;

// Requires at least one train row. Throws NumericError with epoch/batch
// context when a loss turns non-finite.
TrainResult train(const TrainConfig& config, const data::DirDataset& dataset,
                  const BatchObserver& observer = {});

// Predictions in target units for the given rows.
std::vector<double> predict(const nn::Model& model, const data::DirDataset& dataset,
                            const std::vector<std::size_t>& rows);

// Throws SchemaError when the checkpoint's input width differs from the
// dataset's feature count, UsageError when the split is empty.
metrics::RegionReport evaluate(const nn::Model& model, const data::DirDataset& dataset,
                               data::Split split);

struct Embeddings {
  Tensor z;  // rows x rep_dim, unit rows
  std::vector<surrogate::BinId> bins;
  std::vector<double> targets;
  std::vector<data::Region> regions;
  double bin_origin = 0.0;
  double bin_width = 1.0;
};

Embeddings embed(const nn::Model& model, const data::DirDataset& dataset, data::Split split);
// Same layout as the surrogate dump, one row per sample.
void write_embeddings(const std::filesystem::path& path, const Embeddings& e);
Embeddings read_embeddings(const std::filesystem::path& path);

struct BinCentroids {
  surrogate::Surrogate surrogate;
  std::vector<bool> few_shot;  // per bin
};

// normalize(mean of rows) per bin, bins in increasing order.
BinCentroids centroids_of(const Embeddings& e);

}  // namespace srl::trainer
