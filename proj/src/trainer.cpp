#include "srl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "srl/error.hpp"
#include "srl/rng.hpp"

namespace srl::trainer {

std::string to_string(Mode m) { return m == Mode::kSrl ? "srl" : "vanilla"; }

Mode mode_from_string(const std::string& s) {
  if (s == "srl") return Mode::kSrl;
  if (s == "vanilla") return Mode::kVanilla;
  throw UsageError("unknown mode '" + s + "' (expected srl or vanilla)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("invalid training config: ") + what);
  };
  require(lambda_e >= 0.0 && std::isfinite(lambda_e), "lambda_e must be >= 0");
  require(lambda_h >= 0.0 && std::isfinite(lambda_h), "lambda_h must be >= 0");
  require(tau > 0.0 && std::isfinite(tau), "tau must be > 0");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(lr > 0.0 && std::isfinite(lr), "lr must be > 0");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(bin_width >= 0.0 && std::isfinite(bin_width), "bin_width must be >= 0");
  require(rep_dim >= 1, "rep_dim must be >= 1");
  require(std::all_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h > 0; }),
          "hidden widths must be positive");
  if (mode == Mode::kSrl && lambda_e > 0.0) {
    require(sphere_points >= 1, "sphere_points must be >= 1");
    require(rep_dim >= 2, "rep_dim must be >= 2 for the enveloping loss");
  }
}

TrainConfig uci_defaults() {
  TrainConfig c;
  c.epochs = 300;
  return c;
}

TrainConfig oldir_defaults() {
  TrainConfig c;
  c.epochs = 300;
  c.lambda_e = 1e-1;
  c.lambda_h = 1e-1;
  c.batch_size = 1000;
  c.hidden = {128, 128};
  c.rep_dim = 128;
  c.activation = nn::Activation::kTanh;
  return c;
}

io::Json to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"lambda_e", c.lambda_e},
          {"lambda_h", c.lambda_h},
          {"tau", c.tau},
          {"alpha", c.alpha},
          {"contrastive", c.contrastive},
          {"contrastive_mean", c.contrastive_mean},
          {"sphere_points", c.sphere_points},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"bin_width", c.bin_width},
          {"hidden", c.hidden},
          {"rep_dim", c.rep_dim},
          {"activation", nn::to_string(c.activation)},
          {"standardize_targets", c.standardize_targets}};
}

TrainConfig config_from_json(const io::Json& j) {
  if (!j.is_object()) throw SchemaError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") {
        c.mode = mode_from_string(v.get<std::string>());
      } else if (key == "lambda_e") {
        c.lambda_e = v.get<double>();
      } else if (key == "lambda_h") {
        c.lambda_h = v.get<double>();
      } else if (key == "tau") {
        c.tau = v.get<double>();
      } else if (key == "alpha") {
        c.alpha = v.get<double>();
      } else if (key == "contrastive") {
        c.contrastive = v.get<bool>();
      } else if (key == "contrastive_mean") {
        c.contrastive_mean = v.get<bool>();
      } else if (key == "sphere_points" || key == "N") {
        c.sphere_points = v.get<std::size_t>();
      } else if (key == "lr") {
        c.lr = v.get<double>();
      } else if (key == "weight_decay") {
        c.weight_decay = v.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (key == "epochs") {
        c.epochs = v.get<std::size_t>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "bin_width") {
        c.bin_width = v.get<double>();
      } else if (key == "hidden") {
        c.hidden = v.get<std::vector<std::size_t>>();
      } else if (key == "rep_dim") {
        c.rep_dim = v.get<std::size_t>();
      } else if (key == "activation") {
        c.activation = nn::activation_from_string(v.get<std::string>());
      } else if (key == "standardize_targets") {
        c.standardize_targets = v.get<bool>();
      } else {
        throw SchemaError("unknown training config key '" + key + "'");
      }
    }
  } catch (const io::Json::exception& e) {
    throw SchemaError("training config has a wrongly typed value: " + std::string(e.what()));
  }
  return c;
}

namespace {

io::Json terms_json(const LossTerms& t) {
  io::Json j = {{"reg", t.reg}};
  if (t.env) j["env"] = *t.env;
  if (t.homo) j["homo"] = *t.homo;
  if (t.con) j["con"] = *t.con;
  j["total"] = t.total;
  return j;
}

void add_optional(std::optional<double>& acc, const std::optional<double>& v) {
  if (v) acc = acc.value_or(0.0) + *v;
}

void scale_optional(std::optional<double>& v, double s) {
  if (v) *v *= s;
}

Tensor gather(const Tensor& features, std::span<const std::size_t> rows) {
  Tensor out = Tensor::matrix(rows.size(), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

struct TargetScaling {
  double mean = 0.0;
  double scale = 1.0;
};

TargetScaling target_scaling(const data::DirDataset& ds, const std::vector<std::size_t>& rows,
                             bool enabled) {
  TargetScaling s;
  if (!enabled) return s;
  for (std::size_t r : rows) s.mean += ds.targets[r];
  s.mean /= static_cast<double>(rows.size());
  double var = 0.0;
  for (std::size_t r : rows) var += (ds.targets[r] - s.mean) * (ds.targets[r] - s.mean);
  var /= static_cast<double>(rows.size());
  s.scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

std::vector<Tensor*> all_parameters(nn::Model& model) {
  std::vector<Tensor*> out = model.encoder.parameters();
  for (Tensor* t : model.head.parameters()) out.push_back(t);
  return out;
}

}  // namespace

io::Json to_json(const TrainHistory& h) {
  io::Json epochs = io::Json::array();
  for (const EpochRecord& r : h.epochs) {
    io::Json e = {{"epoch", r.epoch}, {"batches", r.batches}, {"loss", terms_json(r.mean)}};
    if (r.val) e["val"] = metrics::to_json(*r.val);
    if (r.surrogate_epoch) e["surrogate_epoch"] = *r.surrogate_epoch;
    epochs.push_back(std::move(e));
  }
  return {{"format", "srl-history"},
          {"version", 1},
          {"selection", h.selection},
          {"selected_epoch", h.selected_epoch},
          {"epochs", std::move(epochs)}};
}

TrainResult train(const TrainConfig& config, const data::DirDataset& ds,
                  const BatchObserver& observer) {
  config.validate();
  const std::vector<std::size_t> train_rows = ds.rows(data::Split::kTrain);
  if (train_rows.empty()) throw DataError("dataset has no training rows");
  const std::vector<std::size_t> val_rows = ds.rows(data::Split::kVal);
  const bool srl = config.mode == Mode::kSrl;

  // Surrogate bins follow the configured width, which may differ from the
  // width used to define shot regions.
  const double width = config.bin_width > 0.0 ? config.bin_width : ds.bin_width;
  std::vector<surrogate::BinId> row_bin(ds.size(), 0);
  for (std::size_t r : train_rows) {
    row_bin[r] = width == ds.bin_width ? ds.bin_ids[r]
                                       : data::bin_of(ds.bin_value(r), ds.bin_origin, width);
  }
  std::vector<surrogate::BinId> bins;
  for (std::size_t r : train_rows) bins.push_back(row_bin[r]);
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
  std::vector<double> labels;
  for (surrogate::BinId b : bins) {
    labels.push_back(ds.bin_origin + (static_cast<double>(b) + 0.5) * width);
  }

  const TargetScaling scaling = target_scaling(ds, train_rows, config.standardize_targets);

  nn::Model model;
  std::vector<std::size_t> enc_dims = {ds.feature_dim()};
  enc_dims.insert(enc_dims.end(), config.hidden.begin(), config.hidden.end());
  enc_dims.push_back(config.rep_dim);
  const std::vector<std::size_t> head_dims = {config.rep_dim, 1};
  model.encoder = nn::init_mlp(enc_dims, config.activation,
                               derive_seed(config.seed, SeedStream::kInitEncoder));
  model.head = nn::init_mlp(head_dims, config.activation,
                            derive_seed(config.seed, SeedStream::kInitHead));
  model.seed = config.seed;
  model.target_mean = scaling.mean;
  model.target_scale = scaling.scale;

  std::vector<Tensor*> params = all_parameters(model);
  nn::AdamWState adam(nn::AdamWConfig{.lr = config.lr, .weight_decay = config.weight_decay},
                      std::vector<const Tensor*>(params.begin(), params.end()));

  const bool use_env = srl && config.lambda_e > 0.0;
  const bool use_homo = srl && config.lambda_h > 0.0 && bins.size() >= 2;
  const bool use_con = srl && config.contrastive;
  std::optional<geometry::SphereSample> sphere;
  if (use_env) {
    sphere = geometry::sample_hypersphere(config.sphere_points, config.rep_dim,
                                          derive_seed(config.seed, SeedStream::kSphere));
  }

  Rng shuffle_rng(derive_seed(config.seed, SeedStream::kShuffle));
  std::optional<surrogate::Surrogate> current;

  TrainResult result;
  std::optional<double> best_mae;
  result.history.selection = val_rows.empty() ? "final_epoch" : "best_val_all_mae";

  std::vector<std::size_t> order;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order = train_rows;
    shuffle_in_place(order, shuffle_rng);
    std::optional<surrogate::RunningMean> running;
    if (srl) running.emplace(bins, labels, config.rep_dim);

    EpochRecord record;
    record.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      std::vector<surrogate::BinId> batch_bins;
      Tensor y = Tensor::matrix(rows.size(), 1);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        batch_bins.push_back(row_bin[rows[i]]);
        y[i] = (ds.targets[rows[i]] - scaling.mean) / scaling.scale;
      }

      BatchLog log{epoch, batch_index, rows.size(), {}};
      ad::Tape tape;
      try {
        const nn::BoundMlp enc = nn::bind(tape, model.encoder);
        const nn::BoundMlp head = nn::bind(tape, model.head);
        ad::Var z = nn::encode(enc, tape.constant(gather(ds.features, rows)));
        ad::Var pred = nn::regress(head, z);
        // The head output is standardized; the loss stays in target units.
        ad::Var loss = ad::scale(ad::mean(ad::square(ad::sub(pred, tape.constant(std::move(y))))),
                                 scaling.scale * scaling.scale);
        log.terms.reg = loss.value().item();
        if (srl) {
          const surrogate::BatchCentroids batch = surrogate::batch_centroids(z, batch_bins);
          running->add(batch);
          if (epoch > 0) {
            const surrogate::RefilledSurrogate s = surrogate::refill(tape, batch, *current);
            if (use_env) {
              ad::Var env = ad::scale(geometry::enveloping_loss(*sphere, s.centroids),
                                      config.lambda_e);
              log.terms.env = env.value().item();
              loss = ad::add(loss, env);
            }
            if (use_homo) {
              ad::Var homo = ad::scale(geometry::homogeneity_loss(s.centroids, s.labels),
                                       config.lambda_h);
              log.terms.homo = homo.value().item();
              loss = ad::add(loss, homo);
            }
            if (use_con) {
              ad::Var con = surrogate::contrastive_loss(z, batch_bins, s, config.tau);
              if (config.contrastive_mean) con = ad::scale(con, 1.0 / static_cast<double>(rows.size()));
              log.terms.con = con.value().item();
              loss = ad::add(loss, con);
            }
          }
        }
        log.terms.total = loss.value().item();
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (const ad::Var& v : enc.parameters()) grads.push_back(v.grad());
        for (const ad::Var& v : head.parameters()) grads.push_back(v.grad());
        nn::adamw_step(params, grads, adam);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      if (observer) observer(log);

      record.mean.reg += log.terms.reg;
      add_optional(record.mean.env, log.terms.env);
      add_optional(record.mean.homo, log.terms.homo);
      add_optional(record.mean.con, log.terms.con);
      record.mean.total += log.terms.total;
    }
    record.batches = batch_index;
    const double inv = 1.0 / static_cast<double>(batch_index);
    record.mean.reg *= inv;
    scale_optional(record.mean.env, inv);
    scale_optional(record.mean.homo, inv);
    scale_optional(record.mean.con, inv);
    record.mean.total *= inv;

    if (srl) {
      if (!current) {
        current = running->finalize(nullptr, 1);
      } else {
        const surrogate::Surrogate epoch_mean = running->finalize(&*current, epoch);
        current = surrogate::momentum_update(*current, epoch_mean, config.alpha);
      }
      record.surrogate_epoch = current->epoch;
    }

    model.epoch = epoch;
    bool select = val_rows.empty();
    if (!val_rows.empty()) {
      record.val = evaluate(model, ds, data::Split::kVal);
      const double mae = *record.val->all.mae;
      if (!best_mae || mae <= *best_mae) {
        best_mae = mae;
        select = true;
      }
    }
    if (select) {
      result.model = model;
      result.surrogate = current;
      result.history.selected_epoch = epoch;
    }
    result.history.epochs.push_back(std::move(record));
  }
  return result;
}

std::vector<double> predict(const nn::Model& model, const data::DirDataset& ds,
                            const std::vector<std::size_t>& rows) {
  if (model.encoder.input_dim() != ds.feature_dim()) {
    throw SchemaError("checkpoint expects " + std::to_string(model.encoder.input_dim()) +
                      " features, dataset has " + std::to_string(ds.feature_dim()));
  }
  constexpr std::size_t kChunk = 4096;
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t stop = std::min(rows.size(), start + kChunk);
    const Tensor x = gather(ds.features, std::span(rows.data() + start, stop - start));
    const Tensor p = nn::regress(model.head, nn::encode(model.encoder, x));
    for (double v : p.values()) out.push_back(v * model.target_scale + model.target_mean);
  }
  return out;
}

metrics::RegionReport evaluate(const nn::Model& model, const data::DirDataset& ds,
                               data::Split split) {
  const std::vector<std::size_t> rows = ds.rows(split);
  if (rows.empty()) throw UsageError("split '" + data::to_string(split) + "' has no rows");
  const std::vector<double> preds = predict(model, ds, rows);
  std::vector<double> targets;
  std::vector<data::Region> regions;
  for (std::size_t r : rows) {
    targets.push_back(ds.targets[r]);
    regions.push_back(ds.region_of_row(r));
  }
  return metrics::region_metrics(preds, targets, regions);
}

Embeddings embed(const nn::Model& model, const data::DirDataset& ds, data::Split split) {
  if (model.encoder.input_dim() != ds.feature_dim()) {
    throw SchemaError("checkpoint expects " + std::to_string(model.encoder.input_dim()) +
                      " features, dataset has " + std::to_string(ds.feature_dim()));
  }
  const std::vector<std::size_t> rows = ds.rows(split);
  Embeddings e;
  e.z = nn::encode(model.encoder, gather(ds.features, rows));
  e.bin_origin = ds.bin_origin;
  e.bin_width = ds.bin_width;
  for (std::size_t r : rows) {
    e.bins.push_back(ds.bin_ids[r]);
    e.targets.push_back(ds.targets[r]);
    e.regions.push_back(ds.region_of_row(r));
  }
  return e;
}

void write_embeddings(const std::filesystem::path& path, const Embeddings& e) {
  std::vector<std::string> regions;
  for (data::Region r : e.regions) regions.push_back(data::to_string(r));
  const io::Json header = {{"format", "srl-embeddings"}, {"version", 1},
                           {"K", e.z.rows()},            {"dim", e.z.cols()},
                           {"bins", e.bins},             {"labels", e.targets},
                           {"regions", regions},         {"bin_origin", e.bin_origin},
                           {"bin_width", e.bin_width}};
  io::write_dump(path, header, e.z.values());
}

Embeddings read_embeddings(const std::filesystem::path& path) {
  const io::Dump dump = io::read_dump(path);
  io::expect_format(dump.header, "srl-embeddings");
  Embeddings e;
  std::size_t n = 0;
  std::size_t dim = 0;
  try {
    n = dump.header.at("K").get<std::size_t>();
    dim = dump.header.at("dim").get<std::size_t>();
    e.bins = dump.header.at("bins").get<std::vector<surrogate::BinId>>();
    e.targets = dump.header.at("labels").get<std::vector<double>>();
    for (const auto& r : dump.header.at("regions")) {
      e.regions.push_back(data::region_from_string(r.get<std::string>()));
    }
    e.bin_origin = dump.header.at("bin_origin").get<double>();
    e.bin_width = dump.header.at("bin_width").get<double>();
  } catch (const io::Json::exception& ex) {
    throw SchemaError("embedding header incomplete: " + std::string(ex.what()));
  }
  if (e.bins.size() != n || e.targets.size() != n || e.regions.size() != n ||
      dump.payload.size() != n * dim) {
    throw DataError("embedding dump sizes disagree with its header");
  }
  e.z = Tensor({n, dim}, std::vector<double>(dump.payload.begin(), dump.payload.end()));
  return e;
}

BinCentroids centroids_of(const Embeddings& e) {
  if (e.z.rows() == 0) throw DataError("no embeddings to average");
  std::map<surrogate::BinId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < e.bins.size(); ++i) members[e.bins[i]].push_back(i);
  BinCentroids out;
  surrogate::Surrogate& s = out.surrogate;
  s.centroids = Tensor::matrix(members.size(), e.z.cols());
  std::size_t k = 0;
  for (const auto& [bin, rows] : members) {
    s.bins.push_back(bin);
    s.labels.push_back(e.bin_origin + (static_cast<double>(bin) + 0.5) * e.bin_width);
    out.few_shot.push_back(e.regions[rows.front()] == data::Region::kFew);
    auto dst = s.centroids.row(k);
    for (std::size_t r : rows) {
      const auto src = e.z.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    const double n = norm(dst);
    if (!(n >= ad::kNormFloor)) {
      throw NumericError("mean embedding of bin " + std::to_string(bin) + " vanishes");
    }
    for (double& v : dst) v /= n;
    ++k;
  }
  return out;
}

}  // namespace srl::trainer
