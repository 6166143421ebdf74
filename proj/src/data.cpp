#include "srl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "srl/error.hpp"
#include "srl/rng.hpp"

namespace srl::data {

std::string to_string(Region r) {
  switch (r) {
    case Region::kMany:
      return "many";
    case Region::kMed:
      return "med";
    case Region::kFew:
      return "few";
  }
  return "few";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Region region_from_string(const std::string& s) {
  if (s == "many") return Region::kMany;
  if (s == "med") return Region::kMed;
  if (s == "few") return Region::kFew;
  throw SchemaError("unknown region tag '" + s + "'");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw UsageError("unknown split '" + s + "' (expected train, val or test)");
}

// ---- CSV ----------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\"");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

RawTable load_csv(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV has no header row: " + path.string());
  const auto header = split_line(line);
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw DataError("target column '" + target_column + "' not found in " + path.string());
  }
  const auto target_index = static_cast<std::size_t>(target_it - header.begin());

  RawTable table;
  table.target_name = target_column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_index) table.feature_names.push_back(header[c]);
  }
  if (table.feature_names.empty()) throw DataError("CSV has no feature columns");

  std::vector<double> features;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      ++table.rejected_rows;
      continue;
    }
    std::vector<double> parsed;
    parsed.reserve(cells.size());
    bool ok = true;
    for (const std::string& cell : cells) {
      const auto v = parse_number(cell);
      if (!v) {
        ok = false;
        break;
      }
      parsed.push_back(*v);
    }
    if (!ok) {
      ++table.rejected_rows;
      continue;
    }
    for (std::size_t c = 0; c < parsed.size(); ++c) {
      if (c == target_index) {
        table.targets.push_back(parsed[c]);
      } else {
        features.push_back(parsed[c]);
      }
    }
  }
  if (table.targets.empty()) throw DataError("CSV has no numeric rows: " + path.string());
  table.features = Tensor({table.targets.size(), table.feature_names.size()}, std::move(features));
  return table;
}

// ---- binning and regions -------------------------------------------------------------

BinId bin_of(double value, double origin, double width) {
  // The small slack keeps exact multiples of the width (0.3 / 0.1) in the
  // bin they name.
  return static_cast<BinId>(std::floor((value - origin) / width + 1e-9));
}

Binning bin_labels(std::span<const double> targets, double width) {
  if (!(width > 0.0)) throw UsageError("bin width must be positive");
  if (targets.empty()) throw DataError("cannot bin an empty target list");
  Binning b;
  b.width = width;
  b.origin = *std::min_element(targets.begin(), targets.end());
  std::set<BinId> unique;
  b.ids.reserve(targets.size());
  for (double t : targets) {
    b.ids.push_back(bin_of(t, b.origin, width));
    unique.insert(b.ids.back());
  }
  b.unique.assign(unique.begin(), unique.end());
  for (BinId id : b.unique) b.centers.push_back(b.center(id));
  return b;
}

std::optional<ShotThresholds> uci_thresholds(const std::string& dataset) {
  if (dataset == "airfoil") return ShotThresholds{10, 40};
  if (dataset == "concrete") return ShotThresholds{5, 15};
  if (dataset == "real_estate") return ShotThresholds{3, 10};
  if (dataset == "abalone") return ShotThresholds{100, 400};
  return std::nullopt;
}

std::optional<double> uci_bin_width(const std::string& dataset) {
  if (dataset == "airfoil" || dataset == "concrete" || dataset == "abalone") return 1.0;
  if (dataset == "real_estate") return 0.1;
  return std::nullopt;
}

Region ShotRegions::of(BinId bin) const {
  const auto it = by_bin.find(bin);
  return it == by_bin.end() ? Region::kFew : it->second;
}

Region region_for_count(std::size_t count, ShotThresholds t) {
  if (count < t.few_max) return Region::kFew;
  if (count > t.med_max) return Region::kMany;
  return Region::kMed;
}

ShotRegions shot_regions(const std::map<BinId, std::size_t>& train_counts, ShotThresholds t) {
  if (!(t.few_max > 0 && t.few_max < t.med_max)) {
    throw UsageError("shot thresholds must satisfy 0 < few_max < med_max");
  }
  ShotRegions regions;
  regions.thresholds = t;
  for (const auto& [bin, count] : train_counts) regions.by_bin[bin] = region_for_count(count, t);
  return regions;
}

// ---- dataset -----------------------------------------------------------------------------

std::vector<std::size_t> DirDataset::rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::map<BinId, std::size_t> DirDataset::bin_counts(Split s) const {
  std::map<BinId, std::size_t> counts;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) ++counts[bin_ids[i]];
  }
  return counts;
}

std::vector<BinId> DirDataset::train_bins() const {
  std::vector<BinId> out;
  for (const auto& [bin, count] : bin_counts(Split::kTrain)) out.push_back(bin);
  return out;
}

std::vector<double> DirDataset::train_bin_labels() const {
  std::vector<double> out;
  for (BinId b : train_bins()) out.push_back(bin_center(b));
  return out;
}

void standardize_features(DirDataset& ds) {
  const std::size_t d = ds.features.cols();
  const auto train = ds.rows(Split::kTrain);
  if (train.empty()) throw DataError("no training rows to compute feature statistics");
  ds.feature_mean.assign(d, 0.0);
  ds.feature_std.assign(d, 0.0);
  for (std::size_t r : train) {
    for (std::size_t c = 0; c < d; ++c) ds.feature_mean[c] += ds.features(r, c);
  }
  for (double& m : ds.feature_mean) m /= static_cast<double>(train.size());
  for (std::size_t r : train) {
    for (std::size_t c = 0; c < d; ++c) {
      const double e = ds.features(r, c) - ds.feature_mean[c];
      ds.feature_std[c] += e * e;
    }
  }
  for (double& s : ds.feature_std) {
    s = std::sqrt(s / static_cast<double>(train.size()));
    if (!(s > 1e-12)) s = 1.0;
  }
  for (std::size_t r = 0; r < ds.features.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      ds.features(r, c) = (ds.features(r, c) - ds.feature_mean[c]) / ds.feature_std[c];
    }
  }
}

namespace {

DirDataset skeleton(const RawTable& table, const Binning& binning) {
  DirDataset ds;
  ds.feature_names = table.feature_names;
  ds.features = table.features;
  ds.targets = table.targets;
  ds.bin_ids = binning.ids;
  ds.bin_origin = binning.origin;
  ds.bin_width = binning.width;
  ds.split.assign(table.targets.size(), Split::kTrain);
  return ds;
}

}  // namespace

DirDataset curate_split(const RawTable& table, const CurationConfig& config) {
  if (config.test_per_bin < 1 || config.val_per_bin < 1) {
    throw UsageError("test and val quotas must be at least 1");
  }
  if (table.targets.empty()) throw DataError("dataset too small to leave any train rows");
  const Binning binning = bin_labels(table.targets, config.bin_width);
  DirDataset ds = skeleton(table, binning);

  std::map<BinId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ds.size(); ++i) members[ds.bin_ids[i]].push_back(i);

  Rng rng(derive_seed(config.seed, SeedStream::kSplit));
  for (auto& [bin, rows] : members) {
    shuffle_in_place(rows, rng);
    const std::size_t spare = rows.size() - 1;
    const std::size_t n_test = std::min(config.test_per_bin, spare);
    const std::size_t n_val = std::min(config.val_per_bin, spare - n_test);
    for (std::size_t i = 0; i < n_test; ++i) ds.split[rows[i]] = Split::kTest;
    for (std::size_t i = n_test; i < n_test + n_val; ++i) ds.split[rows[i]] = Split::kVal;
  }
  ds.regions = shot_regions(ds.bin_counts(Split::kTrain), config.thresholds);
  standardize_features(ds);
  return ds;
}

io::Json split_manifest(const DirDataset& ds, const CurationConfig& config) {
  std::vector<std::string> splits;
  std::vector<std::string> regions;
  splits.reserve(ds.size());
  regions.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    splits.push_back(to_string(ds.split[i]));
    regions.push_back(to_string(ds.region_of_row(i)));
  }
  return {{"format", "srl-split-manifest"},
          {"version", 1},
          {"seed", config.seed},
          {"test_per_bin", config.test_per_bin},
          {"val_per_bin", config.val_per_bin},
          {"bin_width", ds.bin_width},
          {"bin_origin", ds.bin_origin},
          {"thresholds", {config.thresholds.few_max, config.thresholds.med_max}},
          {"rows", ds.size()},
          {"split", splits},
          {"bin", ds.bin_ids},
          {"region", regions}};
}

DirDataset apply_manifest(const RawTable& table, const io::Json& manifest) {
  io::expect_format(manifest, "srl-split-manifest");
  try {
    const double width = manifest.at("bin_width").get<double>();
    const auto splits = manifest.at("split").get<std::vector<std::string>>();
    const auto bins = manifest.at("bin").get<std::vector<BinId>>();
    const auto thresholds = manifest.at("thresholds").get<std::vector<std::size_t>>();
    if (splits.size() != table.targets.size() || bins.size() != table.targets.size()) {
      throw SchemaError("manifest describes " + std::to_string(splits.size()) +
                        " rows, table has " + std::to_string(table.targets.size()));
    }
    if (thresholds.size() != 2) throw SchemaError("manifest thresholds must have two entries");
    const Binning binning = bin_labels(table.targets, width);
    if (binning.ids != bins) throw SchemaError("manifest bins disagree with the table's targets");
    DirDataset ds = skeleton(table, binning);
    for (std::size_t i = 0; i < splits.size(); ++i) ds.split[i] = split_from_string(splits[i]);
    ds.regions = shot_regions(ds.bin_counts(Split::kTrain), {thresholds[0], thresholds[1]});
    standardize_features(ds);
    return ds;
  } catch (const io::Json::exception& e) {
    throw SchemaError("split manifest incomplete: " + std::string(e.what()));
  }
}

}  // namespace srl::data
