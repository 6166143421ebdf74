#include "srl/cli.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "srl/error.hpp"
#include "srl/geometry.hpp"
#include "srl/gradsuite.hpp"
#include "srl/metrics.hpp"
#include "srl/olgen.hpp"
#include "srl/rng.hpp"
#include "srl/surrogate.hpp"
#include "srl/trainer.hpp"

namespace srl::cli {

namespace fs = std::filesystem;

namespace {

io::Json file_entry(const fs::path& path) {
  return {{"path", fs::absolute(path).lexically_normal().string()},
          {"sha256", io::sha256_file(path)}};
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& args, const io::Json& resolved,
                    std::uint64_t seed, const io::Json& inputs, const io::Json& outputs) {
  const io::Json manifest = {{"format", "srl-run-manifest"},
                             {"version", 1},
                             {"tool_version", kToolVersion},
                             {"command", command},
                             {"argv", args},
                             {"seed", seed},
                             {"resolved_config", resolved},
                             {"inputs", inputs},
                             {"outputs", outputs}};
  io::write_json(out_dir / "run_manifest.json", manifest);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// Files a dataset manifest depends on, for digests.
std::vector<fs::path> dataset_files(const fs::path& manifest_path) {
  const io::Json m = io::read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  std::vector<fs::path> files = {manifest_path};
  const std::string kind = m.value("kind", "");
  if (kind == "uci") {
    files.push_back(resolve(dir, m.at("csv").get<std::string>()));
  } else if (kind == "oldir") {
    files.push_back(resolve(dir, m.at("train").get<std::string>()));
    files.push_back(resolve(dir, m.at("test").get<std::string>()));
  }
  return files;
}

io::Json dataset_inputs(const fs::path& manifest_path) {
  io::Json files = io::Json::array();
  for (const fs::path& f : dataset_files(manifest_path)) files.push_back(file_entry(f));
  return files;
}

std::string region_summary(const data::DirDataset& ds) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++counts[data::to_string(ds.split[i])][data::to_string(ds.region_of_row(i))];
  }
  std::ostringstream os;
  for (const auto& [split, by_region] : counts) {
    os << "  " << split << ":";
    for (const auto& [region, n] : by_region) os << ' ' << region << '=' << n;
    os << '\n';
  }
  return os.str();
}

// ---- curate-uci ------------------------------------------------------------

struct CurateOptions {
  std::string csv;
  std::string target;
  std::string name;
  std::optional<double> bin_width;
  std::optional<std::size_t> few_max;
  std::optional<std::size_t> med_max;
  std::optional<std::size_t> test_per_bin;
  std::optional<std::size_t> val_per_bin;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

int curate_uci(const CurateOptions& opt, const std::vector<std::string>& args) {
  io::Json file_cfg = io::Json::object();
  if (!opt.config.empty()) file_cfg = io::read_json(opt.config);

  std::string csv = opt.csv.empty() ? file_cfg.value("csv", "") : opt.csv;
  std::string target = opt.target.empty() ? file_cfg.value("target", "") : opt.target;
  std::string name = opt.name.empty() ? file_cfg.value("name", "") : opt.name;
  if (csv.empty()) throw UsageError("curate-uci needs --csv");
  if (target.empty()) throw UsageError("curate-uci needs --target");

  data::CurationConfig cc;
  cc.test_per_bin = opt.test_per_bin.value_or(file_cfg.value("test_per_bin", cc.test_per_bin));
  cc.val_per_bin = opt.val_per_bin.value_or(file_cfg.value("val_per_bin", cc.val_per_bin));
  cc.bin_width = data::uci_bin_width(name).value_or(1.0);
  cc.thresholds = data::uci_thresholds(name).value_or(data::ShotThresholds{});
  if (file_cfg.contains("bin_width")) cc.bin_width = file_cfg["bin_width"].get<double>();
  if (file_cfg.contains("few_max")) cc.thresholds.few_max = file_cfg["few_max"].get<std::size_t>();
  if (file_cfg.contains("med_max")) cc.thresholds.med_max = file_cfg["med_max"].get<std::size_t>();
  if (file_cfg.contains("seed")) cc.seed = file_cfg["seed"].get<std::uint64_t>();
  if (opt.seed) cc.seed = *opt.seed;
  if (opt.bin_width) cc.bin_width = *opt.bin_width;
  if (opt.few_max) cc.thresholds.few_max = *opt.few_max;
  if (opt.med_max) cc.thresholds.med_max = *opt.med_max;
  if (!(cc.bin_width > 0.0)) throw UsageError("bin width must be positive");
  if (cc.test_per_bin < 1 || cc.val_per_bin < 1) throw UsageError("per-bin quotas must be >= 1");

  const data::RawTable table = data::load_csv(csv, target);
  const data::DirDataset ds = data::curate_split(table, cc);

  const fs::path out(opt.out);
  make_dir(out);
  const fs::path csv_abs = fs::absolute(csv).lexically_normal();
  const io::Json dataset = {{"format", "srl-dataset"},
                            {"version", 1},
                            {"kind", "uci"},
                            {"name", name},
                            {"csv", csv_abs.string()},
                            {"csv_sha256", io::sha256_file(csv_abs)},
                            {"target", target},
                            {"split", data::split_manifest(ds, cc)}};
  io::write_json(out / "dataset.json", dataset);

  const io::Json resolved = {{"csv", csv_abs.string()},
                             {"target", target},
                             {"name", name},
                             {"bin_width", cc.bin_width},
                             {"few_max", cc.thresholds.few_max},
                             {"med_max", cc.thresholds.med_max},
                             {"test_per_bin", cc.test_per_bin},
                             {"val_per_bin", cc.val_per_bin},
                             {"seed", cc.seed}};
  write_manifest(out, "curate-uci", args, resolved, cc.seed, {{"csv", file_entry(csv_abs)}},
                 {{"dataset", file_entry(out / "dataset.json")}});

  std::cout << "rows " << ds.size() << " (rejected " << table.rejected_rows << "), features "
            << ds.feature_dim() << ", bins " << data::bin_labels(ds.targets, cc.bin_width).unique.size()
            << "\n"
            << region_summary(ds) << "wrote " << (out / "dataset.json").string() << "\n";
  return kExitOk;
}

// ---- gen-oldir -------------------------------------------------------------

struct GenOptions {
  std::string op;
  std::optional<std::size_t> n_train;
  std::optional<std::size_t> n_test;
  std::optional<std::size_t> m;
  std::optional<double> length_scale;
  std::optional<double> bin_width;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

int gen_oldir(const GenOptions& opt, const std::vector<std::string>& args) {
  olgen::OlConfig cfg;
  double bin_width = olgen::kDefaultLocationBinWidth;
  if (!opt.config.empty()) {
    const io::Json j = io::read_json(opt.config);
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "operator") {
          cfg.op = olgen::operator_from_string(v.get<std::string>());
        } else if (key == "n_train") {
          cfg.n_train = v.get<std::size_t>();
        } else if (key == "n_test") {
          cfg.n_test = v.get<std::size_t>();
        } else if (key == "m") {
          cfg.grf.m = v.get<std::size_t>();
        } else if (key == "length_scale") {
          cfg.grf.length_scale = v.get<double>();
        } else if (key == "variance") {
          cfg.grf.variance = v.get<double>();
        } else if (key == "f_const") {
          cfg.f_const = v.get<double>();
        } else if (key == "seed") {
          cfg.seed = v.get<std::uint64_t>();
        } else if (key == "bin_width") {
          bin_width = v.get<double>();
        } else if (key == "mix") {
          const auto mix = v.get<std::vector<double>>();
          if (mix.size() != 3) throw SchemaError("mix needs three percentages");
          cfg.mix = {mix[0], mix[1], mix[2]};
        } else if (key == "bands") {
          for (data::Region r : {data::Region::kFew, data::Region::kMed, data::Region::kMany}) {
            std::vector<olgen::Interval>& band = cfg.bands.band(r);
            band.clear();
            for (const auto& iv : v.at(data::to_string(r))) {
              band.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
            }
          }
        } else {
          throw SchemaError("unknown generator config key '" + key + "'");
        }
      }
    } catch (const io::Json::exception& e) {
      throw SchemaError("generator config has a wrongly typed value: " + std::string(e.what()));
    }
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.op.empty()) cfg.op = olgen::operator_from_string(opt.op);
  if (opt.n_train) cfg.n_train = *opt.n_train;
  if (opt.n_test) cfg.n_test = *opt.n_test;
  if (opt.m) cfg.grf.m = *opt.m;
  if (opt.length_scale) cfg.grf.length_scale = *opt.length_scale;
  if (opt.bin_width) bin_width = *opt.bin_width;
  if (!(bin_width > 0.0)) throw UsageError("bin width must be positive");

  const olgen::OlData data = olgen::generate_oldir(cfg);
  const fs::path out(opt.out);
  make_dir(out);
  olgen::write_samples(out / "train.bin", cfg, "train", data.train);
  olgen::write_samples(out / "test.bin", cfg, "test", data.test);

  std::map<std::string, std::size_t> train_regions;
  for (const olgen::OlSample& s : data.train) ++train_regions[data::to_string(s.region)];
  const io::Json generator = olgen::config_json(cfg);
  const io::Json dataset = {{"format", "srl-dataset"},
                            {"version", 1},
                            {"kind", "oldir"},
                            {"train", "train.bin"},
                            {"test", "test.bin"},
                            {"train_sha256", io::sha256_file(out / "train.bin")},
                            {"test_sha256", io::sha256_file(out / "test.bin")},
                            {"bin_width", bin_width},
                            {"train_region_counts", train_regions},
                            {"generator", generator}};
  io::write_json(out / "dataset.json", dataset);

  io::Json resolved = generator;
  resolved["bin_width"] = bin_width;
  write_manifest(out, "gen-oldir", args, resolved, cfg.seed, io::Json::object(),
                 {{"train", file_entry(out / "train.bin")},
                  {"test", file_entry(out / "test.bin")},
                  {"dataset", file_entry(out / "dataset.json")}});
  std::cout << olgen::to_string(cfg.op) << " operator: " << data.train.size() << " train / "
            << data.test.size() << " test samples, GRF jitter "
            << olgen::GrfSampler(cfg.grf).jitter() << "\nwrote " << (out / "dataset.json").string()
            << "\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
  std::string config;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<std::size_t> epochs;
  std::string out;
  bool verbose = false;
};

int train_cmd(const TrainOptions& opt, const std::vector<std::string>& args) {
  io::Json cfg_json = io::Json::object();
  std::string dataset_path = opt.dataset;
  bool replay = false;
  if (!opt.config.empty()) {
    cfg_json = io::read_json(opt.config);
    if (cfg_json.is_object() && cfg_json.contains("resolved_config")) {
      io::expect_format(cfg_json, "srl-run-manifest");
      if (cfg_json.value("command", "") != "train") {
        throw SchemaError("run manifest was written by '" + cfg_json.value("command", "") +
                          "', not train");
      }
      verify_manifest({{"inputs", cfg_json.at("inputs")}});
      if (dataset_path.empty()) {
        dataset_path = cfg_json.at("inputs").at("dataset").at(0).at("path").get<std::string>();
      }
      cfg_json = cfg_json.at("resolved_config");
      replay = true;
    }
  }
  if (dataset_path.empty()) throw UsageError("train needs --dataset");
  const data::DirDataset ds = load_dataset(dataset_path);
  const std::string kind = io::read_json(dataset_path).value("kind", "uci");

  trainer::TrainConfig base = kind == "oldir" ? trainer::oldir_defaults() : trainer::uci_defaults();
  io::Json merged = trainer::to_json(base);
  for (const auto& [key, v] : cfg_json.items()) merged[key] = v;
  trainer::TrainConfig config = trainer::config_from_json(merged);
  if (opt.seed) config.seed = *opt.seed;
  if (!opt.mode.empty()) config.mode = trainer::mode_from_string(opt.mode);
  if (opt.epochs) config.epochs = *opt.epochs;
  config.validate();

  const fs::path out(opt.out);
  make_dir(out);
  trainer::BatchObserver observer;
  const trainer::TrainResult result = trainer::train(config, ds, observer);

  io::write_json(out / "history.json", trainer::to_json(result.history));
  nn::save_checkpoint(out / "checkpoint.bin", result.model);
  io::Json outputs = {{"history", file_entry(out / "history.json")},
                      {"checkpoint", file_entry(out / "checkpoint.bin")}};
  if (result.surrogate) {
    std::vector<std::string> regions;
    for (surrogate::BinId b : result.surrogate->bins) {
      regions.push_back(data::to_string(ds.regions.of(b)));
    }
    surrogate::save_surrogate(out / "surrogate.bin", *result.surrogate, regions);
    outputs["surrogate"] = file_entry(out / "surrogate.bin");
  }
  std::optional<metrics::RegionReport> test_report;
  if (!ds.rows(data::Split::kTest).empty()) {
    // Report on the weights as stored, so `eval` of the checkpoint agrees.
    test_report = trainer::evaluate(nn::load_checkpoint(out / "checkpoint.bin"), ds, data::Split::kTest);
    io::write_json(out / "report_test.json", metrics::to_json(*test_report));
    outputs["report_test"] = file_entry(out / "report_test.json");
  }
  write_manifest(out, "train", args, trainer::to_json(config), config.seed,
                 {{"dataset", dataset_inputs(dataset_path)}}, outputs);

  if (opt.verbose) {
    for (const trainer::EpochRecord& r : result.history.epochs) {
      std::printf("epoch %4zu  total %.6g  reg %.6g", r.epoch, r.mean.total, r.mean.reg);
      if (r.mean.env) std::printf("  env %.6g", *r.mean.env);
      if (r.mean.homo) std::printf("  homo %.6g", *r.mean.homo);
      if (r.mean.con) std::printf("  con %.6g", *r.mean.con);
      if (r.val) std::printf("  val-mae %.6g", *r.val->all.mae);
      std::printf("\n");
    }
  }
  std::cout << (replay ? "replayed " : "") << trainer::to_string(config.mode) << " run, seed "
            << config.seed << ", selected epoch " << result.history.selected_epoch << " ("
            << result.history.selection << ")\n";
  if (test_report) std::cout << metrics::format_table(*test_report, "test split");
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::string embeddings;
  std::string out;
};

int eval_cmd(const EvalOptions& opt, const std::vector<std::string>& args) {
  const nn::Model model = nn::load_checkpoint(opt.checkpoint);
  const data::DirDataset ds = load_dataset(opt.dataset);
  const data::Split split = data::split_from_string(opt.split);
  const metrics::RegionReport report = trainer::evaluate(model, ds, split);
  std::cout << metrics::format_table(report, opt.split + " split");

  io::Json outputs = io::Json::object();
  if (!opt.embeddings.empty()) {
    trainer::write_embeddings(opt.embeddings, trainer::embed(model, ds, split));
    outputs["embeddings"] = file_entry(opt.embeddings);
  }
  if (!opt.out.empty()) {
    const fs::path out(opt.out);
    make_dir(out);
    io::write_json(out / "report.json", metrics::to_json(report));
    outputs["report"] = file_entry(out / "report.json");
    const io::Json resolved = {{"split", opt.split}};
    write_manifest(out, "eval", args, resolved, model.seed,
                   {{"checkpoint", file_entry(opt.checkpoint)},
                    {"dataset", dataset_inputs(opt.dataset)}},
                   outputs);
  }
  return kExitOk;
}

// ---- probe -----------------------------------------------------------------

struct ProbeOptions {
  std::string embeddings;
  std::string surrogate;
  std::vector<double> epsilons = {0.8, 0.9, 0.95, 0.99};
  std::size_t sphere_points = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int probe_cmd(const ProbeOptions& opt, const std::vector<std::string>& args) {
  if (opt.embeddings.empty() == opt.surrogate.empty()) {
    throw UsageError("probe needs exactly one of --embeddings or --surrogate");
  }
  surrogate::Surrogate s;
  std::vector<bool> few;
  std::string source;
  if (!opt.embeddings.empty()) {
    trainer::BinCentroids bc = trainer::centroids_of(trainer::read_embeddings(opt.embeddings));
    s = std::move(bc.surrogate);
    few = std::move(bc.few_shot);
    source = opt.embeddings;
  } else {
    std::vector<std::string> regions;
    s = surrogate::load_surrogate(opt.surrogate, &regions);
    for (const std::string& r : regions) few.push_back(data::region_from_string(r) == data::Region::kFew);
    source = opt.surrogate;
  }

  const geometry::SphereSample sample = geometry::sample_hypersphere(
      opt.sphere_points, s.dim(), derive_seed(opt.seed, SeedStream::kSphere));
  io::Json report = {{"K", s.size()},
                     {"dim", s.dim()},
                     {"sphere_points", opt.sphere_points},
                     {"seed", opt.seed},
                     {"enveloping", geometry::enveloping_loss(sample, s.centroids)}};
  if (s.size() >= 2) report["homogeneity"] = geometry::homogeneity_loss(s.centroids, s.labels);
  io::Json coverage = io::Json::array();
  for (double eps : opt.epsilons) {
    coverage.push_back(
        {{"epsilon", eps},
         {"fraction", geometry::coverage_at_epsilon(sample, s.centroids, {eps})}});
  }
  report["coverage"] = coverage;
  if (few.size() == s.size()) {
    std::size_t few_bins = 0;
    for (bool f : few) few_bins += f ? 1 : 0;
    report["few_shot_bins"] = few_bins;
    report["few_shot_proportion"] = geometry::few_shot_proportion(sample, s.centroids, few);
  }

  std::printf("%-22s %s\n", "source", source.c_str());
  std::printf("%-22s %zu x %zu\n", "centroids", s.size(), s.dim());
  std::printf("%-22s %.6f\n", "enveloping", report["enveloping"].get<double>());
  if (report.contains("homogeneity")) {
    std::printf("%-22s %.6f\n", "homogeneity", report["homogeneity"].get<double>());
  }
  for (const auto& c : coverage) {
    std::printf("coverage @ %-10.4g %.6f\n", c["epsilon"].get<double>(),
                c["fraction"].get<double>());
  }
  if (report.contains("few_shot_proportion")) {
    std::printf("%-22s %.6f\n", "few-shot proportion", report["few_shot_proportion"].get<double>());
  }

  if (!opt.out.empty()) {
    const fs::path out(opt.out);
    make_dir(out);
    io::write_json(out / "probe.json", report);
    const io::Json resolved = {{"epsilon", opt.epsilons},
                               {"sphere_points", opt.sphere_points},
                               {"seed", opt.seed}};
    write_manifest(out, "probe", args, resolved, opt.seed, {{"source", file_entry(source)}},
                   {{"probe", file_entry(out / "probe.json")}});
  }
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

int gradcheck_cmd(std::uint64_t seed, std::size_t repeats) {
  const gradsuite::Report report = gradsuite::run(seed, repeats);
  std::map<std::string, std::pair<std::size_t, double>> by_loss;
  for (const gradsuite::Case& c : report.cases) {
    auto& [n, worst] = by_loss[c.loss];
    ++n;
    worst = std::max(worst, c.error);
  }
  for (const auto& [loss, stats] : by_loss) {
    std::printf("%-12s cases %4zu  max rel. error %.3e\n", loss.c_str(), stats.first, stats.second);
  }
  std::printf("%s: max rel. error %.3e over %zu cases (tolerance %.1e)\n",
              report.passed() ? "PASS" : "FAIL", report.max_error, report.cases.size(),
              report.tolerance);
  return report.passed() ? kExitOk : kExitNumeric;
}

}  // namespace

data::DirDataset load_dataset(const fs::path& manifest_path) {
  const io::Json m = io::read_json(manifest_path);
  io::expect_format(m, "srl-dataset");
  const fs::path dir = manifest_path.parent_path();
  try {
    const std::string kind = m.at("kind").get<std::string>();
    if (kind == "uci") {
      const fs::path csv = resolve(dir, m.at("csv").get<std::string>());
      const data::RawTable table = data::load_csv(csv, m.at("target").get<std::string>());
      return data::apply_manifest(table, m.at("split"));
    }
    if (kind == "oldir") {
      io::Json header;
      const auto train = olgen::read_samples(resolve(dir, m.at("train").get<std::string>()), &header);
      const auto test = olgen::read_samples(resolve(dir, m.at("test").get<std::string>()));
      olgen::RegionBands bands;
      const io::Json& hb = header.at("bands");
      for (data::Region r : {data::Region::kFew, data::Region::kMed, data::Region::kMany}) {
        std::vector<olgen::Interval>& band = bands.band(r);
        band.clear();
        for (const auto& iv : hb.at(data::to_string(r))) {
          band.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
        }
      }
      return olgen::to_dir_dataset(train, test, bands, m.at("bin_width").get<double>());
    }
    throw SchemaError("unknown dataset kind '" + kind + "'");
  } catch (const io::Json::exception& e) {
    throw SchemaError("dataset manifest incomplete: " + std::string(e.what()));
  }
}

void verify_manifest(const io::Json& manifest) {
  auto check = [](const io::Json& entry) {
    const fs::path path = entry.at("path").get<std::string>();
    if (!fs::exists(path)) throw DataError("manifest input missing: " + path.string());
    if (io::sha256_file(path) != entry.at("sha256").get<std::string>()) {
      throw DataError("digest mismatch for " + path.string());
    }
  };
  std::function<void(const io::Json&)> walk = [&](const io::Json& node) {
    if (node.is_object() && node.contains("sha256") && node.contains("path")) {
      check(node);
    } else if (node.is_object() || node.is_array()) {
      for (const auto& child : node) walk(child);
    }
  };
  try {
    for (const char* key : {"inputs", "outputs"}) {
      if (manifest.contains(key)) walk(manifest[key]);
    }
  } catch (const io::Json::exception& e) {
    throw SchemaError("run manifest malformed: " + std::string(e.what()));
  }
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Surrogate-driven representation learning for imbalanced regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CurateOptions curate;
  auto* c = app.add_subcommand("curate-uci", "CSV -> curated dataset manifest");
  c->add_option("--csv", curate.csv, "input CSV with header");
  c->add_option("--target", curate.target, "target column name");
  c->add_option("--name", curate.name, "airfoil, concrete, real_estate or abalone (sets defaults)");
  c->add_option("--bin-width", curate.bin_width, "label bin width");
  c->add_option("--few-max", curate.few_max, "bins with fewer train rows are few-shot");
  c->add_option("--med-max", curate.med_max, "bins with more train rows are many-shot");
  c->add_option("--test-per-bin", curate.test_per_bin, "test quota per bin (default 3)");
  c->add_option("--val-per-bin", curate.val_per_bin, "val quota per bin (default 3)");
  c->add_option("--seed", curate.seed, "split seed (default 0)");
  c->add_option("--config", curate.config, "JSON with any of the above settings");
  c->add_option("--out", curate.out, "output directory")->required();

  GenOptions gen;
  auto* g = app.add_subcommand("gen-oldir", "generate operator-learning data");
  g->add_option("--op", gen.op, "linear or nonlinear");
  g->add_option("--n-train", gen.n_train, "training samples");
  g->add_option("--n-test", gen.n_test, "test samples");
  g->add_option("--m", gen.m, "sensor count");
  g->add_option("--length-scale", gen.length_scale, "GRF length scale");
  g->add_option("--bin-width", gen.bin_width, "location bin width");
  g->add_option("--seed", gen.seed, "generator seed (default 0)");
  g->add_option("--config", gen.config, "generator JSON");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", tr.config, "training config JSON or a train run manifest to replay");
  t->add_option("--dataset", tr.dataset, "dataset manifest");
  t->add_option("--seed", tr.seed, "run seed (overrides config)");
  t->add_option("--mode", tr.mode, "srl or vanilla (overrides config)");
  t->add_option("--epochs", tr.epochs, "epoch count (overrides config)");
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_flag("--verbose", tr.verbose, "print per-epoch losses");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--dataset", ev.dataset, "dataset manifest")->required();
  e->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  e->add_option("--embeddings", ev.embeddings, "also export the split's representations here");
  e->add_option("--out", ev.out, "output directory for report.json");

  ProbeOptions pr;
  auto* p = app.add_subcommand("probe", "geometry report for centroids");
  p->add_option("--embeddings", pr.embeddings, "embedding dump");
  p->add_option("--surrogate", pr.surrogate, "surrogate dump");
  p->add_option("--epsilon", pr.epsilons, "cosine thresholds, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  p->add_option("--sphere-points", pr.sphere_points, "Monte-Carlo sample size")->capture_default_str();
  p->add_option("--seed", pr.seed, "sphere sample seed")->capture_default_str();
  p->add_option("--out", pr.out, "output directory for probe.json");

  std::uint64_t gc_seed = 0;
  std::size_t gc_repeats = 8;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of all losses");
  gc->add_option("--seed", gc_seed, "suite seed")->capture_default_str();
  gc->add_option("--repeats", gc_repeats, "draws per (dim, bins) pair")->capture_default_str();

  std::vector<std::string> argv_store = {"srl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c->parsed()) return curate_uci(curate, args);
    if (g->parsed()) return gen_oldir(gen, args);
    if (t->parsed()) return train_cmd(tr, args);
    if (e->parsed()) return eval_cmd(ev, args);
    if (p->parsed()) return probe_cmd(pr, args);
    if (gc->parsed()) return gradcheck_cmd(gc_seed, gc_repeats);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return kExitNumeric;
  } catch (const SchemaError& err) {
    std::cerr << "schema error: " << err.what() << "\n";
    return kExitSchema;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  } catch (const io::Json::exception& err) {
    std::cerr << "schema error: " << err.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace srl::cli
