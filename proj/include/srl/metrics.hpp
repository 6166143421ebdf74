#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "srl/data.hpp"
#include "srl/io.hpp"

namespace srl::metrics {

inline constexpr double kGmFloor = 1e-6;

struct RegionMetrics {
  std::size_t count = 0;
  std::optional<double> mae;
  std::optional<double> gm;
  std::optional<double> mse;
  // Needs at least two samples and non-zero spread in both series.
  std::optional<double> pearson;
};

enum class Partition { kAll, kMany, kMed, kFew };
inline constexpr std::array<Partition, 4> kPartitions = {Partition::kAll, Partition::kMany,
                                                         Partition::kMed, Partition::kFew};
std::string to_string(Partition p);

struct RegionReport {
  RegionMetrics all;
  RegionMetrics many;
  RegionMetrics med;
  RegionMetrics few;

  const RegionMetrics& at(Partition p) const;
  RegionMetrics& at(Partition p);

  friend bool operator==(const RegionReport&, const RegionReport&) = default;
};

inline bool operator==(const RegionMetrics& a, const RegionMetrics& b) {
  return a.count == b.count && a.mae == b.mae && a.gm == b.gm && a.mse == b.mse &&
         a.pearson == b.pearson;
}

RegionMetrics compute(std::span<const double> preds, std::span<const double> targets);

RegionReport region_metrics(std::span<const double> preds, std::span<const double> targets,
                            std::span<const data::Region> regions);

io::Json to_json(const RegionReport& report);
RegionReport report_from_json(const io::Json& j);

// Fixed-width table with one row per metric and All/Many/Med/Few columns.
std::string format_table(const RegionReport& report, const std::string& title = "");

}  // namespace srl::metrics
