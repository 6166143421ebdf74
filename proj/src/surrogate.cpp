#include "srl/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "srl/error.hpp"
#include "srl/io.hpp"

namespace srl::surrogate {

std::optional<std::size_t> Surrogate::index_of(BinId bin) const {
  const auto it = std::lower_bound(bins.begin(), bins.end(), bin);
  if (it == bins.end() || *it != bin) return std::nullopt;
  return static_cast<std::size_t>(it - bins.begin());
}

BatchCentroids batch_centroids(ad::Var z, std::span<const BinId> y_bins) {
  const std::size_t m = z.rows();
  if (m == 0 || y_bins.empty()) throw Error("batch_centroids: empty batch");
  if (y_bins.size() != m) throw Error("batch_centroids: one bin per representation required");

  std::map<BinId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < m; ++i) members[y_bins[i]].push_back(i);

  BatchCentroids out;
  Tensor averaging = Tensor::matrix(members.size(), m);
  std::size_t k = 0;
  for (const auto& [bin, rows] : members) {
    out.bins.push_back(bin);
    out.counts.push_back(rows.size());
    const double w = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) averaging(k, r) = w;
    ++k;
  }
  ad::Var means = ad::matmul(z.tape().constant(std::move(averaging)), z);
  out.centroids = ad::l2_normalize_rows(means);
  return out;
}

RefilledSurrogate refill(ad::Tape& tape, const BatchCentroids& batch, const Surrogate& prev) {
  if (prev.size() == 0 || prev.centroids.rows() != prev.size() ||
      prev.labels.size() != prev.size()) {
    throw Error("refill: previous surrogate is incomplete");
  }
  RefilledSurrogate out;
  out.bins = prev.bins;
  out.labels = prev.labels;
  out.from_batch.assign(prev.size(), false);

  if (batch.empty()) {
    out.centroids = tape.constant(prev.centroids);
    return out;
  }
  if (batch.centroids.cols() != prev.dim()) throw Error("refill: centroid dims differ");

  // Rows [0, present) of the stacked matrix are batch centroids, the rest are
  // stored centroids for the missing bins.
  std::vector<std::size_t> order(prev.size());
  std::vector<std::size_t> missing;
  std::size_t b = 0;
  for (std::size_t k = 0; k < prev.size(); ++k) {
    if (b < batch.bins.size() && batch.bins[b] == prev.bins[k]) {
      order[k] = b++;
      out.from_batch[k] = true;
    } else {
      order[k] = batch.bins.size() + missing.size();
      missing.push_back(k);
    }
  }
  if (b != batch.bins.size()) throw Error("refill: batch contains a bin unknown to the surrogate");

  if (missing.empty()) {
    out.centroids = batch.centroids;
    return out;
  }
  Tensor stale = Tensor::matrix(missing.size(), prev.dim());
  for (std::size_t i = 0; i < missing.size(); ++i) {
    std::copy(prev.centroids.row(missing[i]).begin(), prev.centroids.row(missing[i]).end(),
              stale.row(i).begin());
  }
  ad::Var stacked = ad::concat_rows(batch.centroids, tape.constant(std::move(stale)));
  out.centroids = ad::gather_rows(stacked, order);
  return out;
}

Surrogate momentum_update(const Surrogate& current, const Surrogate& running, double alpha) {
  if (current.bins != running.bins) throw Error("momentum_update: bin sets differ");
  if (!current.centroids.same_shape(running.centroids)) {
    throw Error("momentum_update: centroid shapes differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("momentum alpha must lie in [0, 1]");
  Surrogate next = current;
  next.epoch = current.epoch + 1;
  for (std::size_t k = 0; k < current.size(); ++k) {
    auto dst = next.centroids.row(k);
    auto a = current.centroids.row(k);
    auto r = running.centroids.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = alpha * a[c] + (1.0 - alpha) * r[c];
    const double n = norm(dst);
    if (!(n >= ad::kNormFloor)) {
      throw NumericError("momentum_update: blended centroid for bin " +
                         std::to_string(current.bins[k]) + " has vanishing norm");
    }
    for (double& v : dst) v /= n;
  }
  return next;
}

RunningMean::RunningMean(std::vector<BinId> bins, std::vector<double> labels, std::size_t dim)
    : bins_(std::move(bins)),
      labels_(std::move(labels)),
      sums_(Tensor::matrix(bins_.size(), dim)),
      counts_(bins_.size(), 0) {
  if (bins_.empty()) throw Error("RunningMean: no bins");
  if (labels_.size() != bins_.size()) throw Error("RunningMean: one label per bin required");
}

void RunningMean::add(std::span<const BinId> bins, const Tensor& centroids) {
  if (bins.size() != centroids.rows()) throw Error("RunningMean::add: row count mismatch");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto it = std::lower_bound(bins_.begin(), bins_.end(), bins[i]);
    if (it == bins_.end() || *it != bins[i]) {
      throw Error("RunningMean::add: unknown bin " + std::to_string(bins[i]));
    }
    const auto k = static_cast<std::size_t>(it - bins_.begin());
    auto dst = sums_.row(k);
    auto src = centroids.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    ++counts_[k];
  }
}

Surrogate RunningMean::finalize(const Surrogate* fallback, std::size_t epoch) const {
  Surrogate out{bins_, labels_, Tensor::matrix(bins_.size(), sums_.cols()), epoch};
  for (std::size_t k = 0; k < bins_.size(); ++k) {
    auto dst = out.centroids.row(k);
    if (counts_[k] == 0) {
      if (fallback == nullptr) {
        throw Error("RunningMean::finalize: bin " + std::to_string(bins_[k]) +
                    " never seen and no fallback surrogate");
      }
      const auto src = fallback->centroids.row(k);
      std::copy(src.begin(), src.end(), dst.begin());
      continue;
    }
    auto src = sums_.row(k);
    const double inv = 1.0 / static_cast<double>(counts_[k]);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] * inv;
    const double n = norm(dst);
    if (!(n >= ad::kNormFloor)) {
      throw NumericError("RunningMean::finalize: vanishing mean for bin " +
                         std::to_string(bins_[k]));
    }
    for (double& v : dst) v /= n;
  }
  return out;
}

ad::Var contrastive_loss(ad::Var z, std::span<const BinId> y_bins, const RefilledSurrogate& s,
                         double tau) {
  if (!(tau > 0.0)) throw UsageError("temperature must be positive");
  if (y_bins.size() != z.rows()) throw Error("contrastive_loss: one bin per row required");
  std::vector<std::size_t> positive(y_bins.size());
  for (std::size_t m = 0; m < y_bins.size(); ++m) {
    const auto it = std::lower_bound(s.bins.begin(), s.bins.end(), y_bins[m]);
    if (it == s.bins.end() || *it != y_bins[m]) {
      throw Error("contrastive_loss: bin " + std::to_string(y_bins[m]) +
                  " is absent from the surrogate");
    }
    positive[m] = static_cast<std::size_t>(it - s.bins.begin());
  }
  ad::Tape& tape = z.tape();
  // Cosines are at most 1, so shifting logits by 1/tau keeps exp() <= 1.
  const double shift = 1.0 / tau;
  ad::Var logits = ad::scale(ad::matmul(z, ad::transpose(s.centroids)), 1.0 / tau);
  ad::Var shifted = ad::sub(logits, tape.constant(Tensor::scalar(shift)));
  ad::Var log_partition = ad::log(ad::row_sum(ad::exp(shifted)));
  ad::Var pos = ad::pick(shifted, positive);
  return ad::sum(ad::sub(log_partition, pos));
}

void save_surrogate(const std::filesystem::path& path, const Surrogate& s,
                    const std::vector<std::string>& regions) {
  io::Json header = {{"format", "srl-surrogate"}, {"version", 1},
                     {"K", s.size()},             {"dim", s.dim()},
                     {"epoch", s.epoch},          {"bins", s.bins},
                     {"labels", s.labels}};
  if (!regions.empty()) header["regions"] = regions;
  io::write_dump(path, header, s.centroids.values());
}

Surrogate load_surrogate(const std::filesystem::path& path, std::vector<std::string>* regions) {
  const io::Dump dump = io::read_dump(path);
  io::expect_format(dump.header, "srl-surrogate");
  Surrogate s;
  std::size_t k = 0;
  std::size_t dim = 0;
  try {
    k = dump.header.at("K").get<std::size_t>();
    dim = dump.header.at("dim").get<std::size_t>();
    s.epoch = dump.header.at("epoch").get<std::size_t>();
    s.bins = dump.header.at("bins").get<std::vector<BinId>>();
    s.labels = dump.header.at("labels").get<std::vector<double>>();
    if (regions != nullptr && dump.header.contains("regions")) {
      *regions = dump.header["regions"].get<std::vector<std::string>>();
    }
  } catch (const io::Json::exception& e) {
    throw SchemaError("surrogate header incomplete: " + std::string(e.what()));
  }
  if (s.bins.size() != k || s.labels.size() != k || dump.payload.size() != k * dim) {
    throw DataError("surrogate dump sizes disagree with its header");
  }
  std::vector<double> values(dump.payload.begin(), dump.payload.end());
  s.centroids = Tensor({k, dim}, std::move(values));
  return s;
}

}  // namespace srl::surrogate
