#pragma once

// Tabular imbalanced-regression datasets: CSV ingestion, label binning,
// shot-region assignment and the balanced val/test curation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srl/io.hpp"
#include "srl/tensor.hpp"

namespace srl::data {

using BinId = std::int64_t;

enum class Region { kMany, kMed, kFew };
enum class Split { kTrain, kVal, kTest };

std::string to_string(Region r);
std::string to_string(Split s);
Region region_from_string(const std::string& s);
Split split_from_string(const std::string& s);

struct RawTable {
  std::vector<std::string> feature_names;
  std::string target_name;
  Tensor features;  // rows x features, unscaled
  std::vector<double> targets;
  std::size_t rejected_rows = 0;
};

// Header row required. Every non-target column is a feature; rows holding a
// non-numeric cell are dropped and counted in rejected_rows.
RawTable load_csv(const std::filesystem::path& path, const std::string& target_column);

struct Binning {
  double origin = 0.0;  // value at the lower edge of bin 0
  double width = 1.0;
  std::vector<BinId> ids;     // per row
  std::vector<BinId> unique;  // sorted
  std::vector<double> centers;  // per unique bin

  double center(BinId id) const { return origin + (static_cast<double>(id) + 0.5) * width; }
};

// id = floor((t - min t) / width); centres are origin + (id + 0.5) * width.
Binning bin_labels(std::span<const double> targets, double width);
BinId bin_of(double value, double origin, double width);

// Count thresholds: few < few_max <= med <= med_max < many.
struct ShotThresholds {
  std::size_t few_max = 10;
  std::size_t med_max = 40;
};

// Published thresholds for the four UCI tasks; nullopt for unknown names.
std::optional<ShotThresholds> uci_thresholds(const std::string& dataset);
// Bin widths used for the four UCI tasks.
std::optional<double> uci_bin_width(const std::string& dataset);

struct ShotRegions {
  std::optional<ShotThresholds> thresholds;  // absent when regions are geometric
  std::map<BinId, Region> by_bin;

  // Bins without training rows are few-shot.
  Region of(BinId bin) const;
};

Region region_for_count(std::size_t count, ShotThresholds t);
ShotRegions shot_regions(const std::map<BinId, std::size_t>& train_counts, ShotThresholds t);

struct DirDataset {
  std::vector<std::string> feature_names;
  Tensor features;  // standardized with train statistics
  std::vector<double> targets;
  std::vector<BinId> bin_ids;
  // Per-row value the bins were cut from; empty means the targets.
  std::vector<double> bin_values;
  std::vector<Split> split;
  double bin_origin = 0.0;
  double bin_width = 1.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  ShotRegions regions;

  std::size_t size() const { return targets.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  double bin_value(std::size_t row) const {
    return bin_values.empty() ? targets[row] : bin_values[row];
  }
  double bin_center(BinId id) const {
    return bin_origin + (static_cast<double>(id) + 0.5) * bin_width;
  }
  std::vector<std::size_t> rows(Split s) const;
  std::map<BinId, std::size_t> bin_counts(Split s) const;
  // Sorted unique bins among training rows and their centres.
  std::vector<BinId> train_bins() const;
  std::vector<double> train_bin_labels() const;
  Region region_of_row(std::size_t row) const { return regions.of(bin_ids[row]); }
};

// Replaces features with (x - mean) / std using rows tagged train. Columns
// with zero spread keep std = 1.
void standardize_features(DirDataset& ds);

struct CurationConfig {
  std::uint64_t seed = 0;
  std::size_t test_per_bin = 3;
  std::size_t val_per_bin = 3;
  double bin_width = 1.0;
  ShotThresholds thresholds;
};

// Per bin: up to test_per_bin rows to test, then up to val_per_bin to val,
// never leaving the bin without a training row; the rest is train.
DirDataset curate_split(const RawTable& table, const CurationConfig& config);

// Row-level manifest (split, bin, region per row) plus the curation settings.
io::Json split_manifest(const DirDataset& ds, const CurationConfig& config);
// Rebuilds the dataset a manifest describes from the same table.
DirDataset apply_manifest(const RawTable& table, const io::Json& manifest);

}  // namespace srl::data
