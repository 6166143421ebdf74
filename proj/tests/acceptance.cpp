// Acceptance checks. Prints one PASS/FAIL line per criterion (indented lines
// are supporting detail) and exits non-zero when any criterion fails.
//
// Usage: acceptance [criterion numbers...]   (default: all)
// SRL_AIRFOIL_CSV points at an Airfoil Self-Noise CSV with the column
// scaled_sound_pressure; otherwise the bundled file in SRL_DATA_DIR is used.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "srl/cli.hpp"
#include "srl/data.hpp"
#include "srl/geometry.hpp"
#include "srl/gradsuite.hpp"
#include "srl/olgen.hpp"
#include "srl/surrogate.hpp"
#include "srl/trainer.hpp"

using namespace srl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string summary;
};

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

fs::path data_dir() {
  if (const char* env = std::getenv("SRL_DATA_DIR")) return env;
  return SRL_TEST_DATA_DIR;
}

fs::path airfoil_csv() {
  if (const char* env = std::getenv("SRL_AIRFOIL_CSV")) return env;
  return data_dir() / "airfoil_standin.csv";
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "srl_acceptance";
  fs::create_directories(dir);
  return dir;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const gradsuite::Report r = gradsuite::run(0);
  const double secs = seconds_since(t0);
  std::map<std::string, double> worst;
  for (const gradsuite::Case& c : r.cases) worst[c.loss] = std::max(worst[c.loss], c.error);
  for (const auto& [loss, e] : worst) detail("%-12s max rel. error %.3e", loss.c_str(), e);
  const bool pass = r.cases.size() >= 64 && r.max_error <= 1e-5 && secs < 60.0;
  return {pass, format("%zu configurations, max rel. error %.3e (limit 1e-5), %.1f s (limit 60 s)",
                       r.cases.size(), r.max_error, secs)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome arc_length_minimality() {
  Rng rng(derive_seed(2, 0));
  double smallest = INFINITY;
  std::size_t ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const oracle::MinimalityTrial t = oracle::minimality_trial(32, 3, 1000, rng);
    smallest = std::min(smallest, t.smallest_margin);
    ok += t.smallest_margin > 1e-9 ? 1 : 0;
  }
  return {ok == 20, format("%zu/20 trace images minimal against 1000 re-spacings each, smallest margin %.3e",
                           ok, smallest)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome enveloping_analytics() {
  const geometry::SphereSample circle_sample = geometry::sample_hypersphere(100000, 2, 3);
  const double single = geometry::enveloping_loss(circle_sample, Tensor::from_rows({{1.0, 0.0}}));
  Tensor ring = Tensor::matrix(256, 2);
  for (std::size_t i = 0; i < 256; ++i) {
    const double a = 2.0 * M_PI * static_cast<double>(i) / 256.0;
    ring(i, 0) = std::cos(a);
    ring(i, 1) = std::sin(a);
  }
  const double dense = geometry::enveloping_loss(circle_sample, ring);
  const geometry::SphereSample s = geometry::sample_hypersphere(5000, 8, 4);
  const double self = geometry::enveloping_loss(s, s.points);
  const bool pass = std::abs(single) <= 0.01 && dense <= -0.9999 && std::abs(self + 1.0) <= 1e-15;
  return {pass, format("single centroid %.5f (|.| <= 0.01), 256-point ring %.6f (<= -0.9999), "
                       "sample as centroids %+.17g (-1)",
                       single, dense, self)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome surrogate_oracle() {
  Rng rng(derive_seed(4, 0));
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const std::size_t k = 2 + uniform_index(rng, 19);
    const std::size_t dim = 2 + uniform_index(rng, 31);
    surrogate::Surrogate prev;
    for (std::size_t i = 0; i < k; ++i) {
      prev.bins.push_back(static_cast<surrogate::BinId>(3 * i));
      prev.labels.push_back(static_cast<double>(3 * i) + 0.5);
    }
    prev.centroids = oracle::random_unit_rows(k, dim, rng);
    surrogate::RunningMean running(prev.bins, prev.labels, dim);
    std::vector<Tensor> batches;
    std::vector<std::vector<surrogate::BinId>> batch_bins;
    const std::size_t n_batches = 1 + uniform_index(rng, 4);
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t rows = 1 + uniform_index(rng, 2 * k);
      std::vector<surrogate::BinId> bins(rows);
      for (auto& bin : bins) bin = prev.bins[uniform_index(rng, 1 + uniform_index(rng, k))];
      const Tensor z = oracle::random_unit_rows(rows, dim, rng);
      ad::Tape tape;
      const surrogate::BatchCentroids bc = surrogate::batch_centroids(tape.variable(z), bins);
      const surrogate::RefilledSurrogate r = surrogate::refill(tape, bc, prev);
      worst = std::max(worst, oracle::max_abs_diff(r.centroids.value(), oracle::refill(z, bins, prev)));
      running.add(bc);
      batches.push_back(z);
      batch_bins.push_back(bins);
    }
    const surrogate::Surrogate mean = running.finalize(&prev, 1);
    worst = std::max(worst, oracle::max_abs_diff(mean.centroids,
                                                 oracle::running_mean(batches, batch_bins, prev)));
  }
  return {worst <= 1e-12, format("200 (batch, previous surrogate) pairs, max deviation %.3e (limit 1e-12)", worst)};
}

// ---- 5 ---------------------------------------------------------------------

double pde_error(std::size_t m) {
  const std::vector<double> grid = olgen::uniform_grid(m);
  const std::vector<double> u = olgen::solve_elliptic(std::vector<double>(m, 0.0), grid, 10.0);
  double worst = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double x = i / 100000.0;
    worst = std::max(worst, std::abs(olgen::interpolate(u, grid, x) - 5.0 * x * (x - 1.0)));
  }
  return worst;
}

Outcome pde_solver() {
  const double e100 = pde_error(100);
  const double e200 = pde_error(200);
  const double ratio = e100 / e200;
  return {e100 <= 1e-3 && ratio >= 3.5 && ratio <= 4.5,
          format("max-norm error %.3e at m=100 (limit 1e-3), ratio %.3f on doubling m (3.5..4.5)",
                 e100, ratio)};
}

// ---- UCI runs shared by 6, 8, 9 -------------------------------------------

struct UciRun {
  double all_mae = 0.0;
  double few_mae = 0.0;
  double few_shot_proportion = 0.0;
  double seconds = 0.0;
};

data::DirDataset airfoil_split(std::uint64_t seed) {
  const data::RawTable table = data::load_csv(airfoil_csv(), "scaled_sound_pressure");
  data::CurationConfig cc;
  cc.seed = seed;
  cc.bin_width = *data::uci_bin_width("airfoil");
  cc.thresholds = *data::uci_thresholds("airfoil");
  return data::curate_split(table, cc);
}

UciRun run_uci(const data::DirDataset& ds, trainer::TrainConfig cfg) {
  const auto t0 = Clock::now();
  const trainer::TrainResult r = trainer::train(cfg, ds);
  UciRun out;
  const metrics::RegionReport rep = trainer::evaluate(r.model, ds, data::Split::kTest);
  out.all_mae = *rep.all.mae;
  out.few_mae = *rep.few.mae;
  const trainer::BinCentroids bc = trainer::centroids_of(trainer::embed(r.model, ds, data::Split::kTrain));
  const geometry::SphereSample sample =
      geometry::sample_hypersphere(10000, cfg.rep_dim, derive_seed(cfg.seed, SeedStream::kSphere));
  out.few_shot_proportion = geometry::few_shot_proportion(sample, bc.surrogate.centroids, bc.few_shot);
  out.seconds = seconds_since(t0);
  return out;
}

enum class Variant { kVanilla, kFull, kNoEnv, kNoHomo, kNoCon, kNoGeo };

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kFull: return "srl";
    case Variant::kNoEnv: return "srl w/o env";
    case Variant::kNoHomo: return "srl w/o homo";
    case Variant::kNoCon: return "srl w/o con";
    case Variant::kNoGeo: return "srl w/o env+homo";
  }
  return "?";
}

trainer::TrainConfig variant_config(Variant v, std::uint64_t seed) {
  trainer::TrainConfig c = trainer::uci_defaults();
  c.seed = seed;
  switch (v) {
    case Variant::kVanilla: c.mode = trainer::Mode::kVanilla; break;
    case Variant::kFull: break;
    case Variant::kNoEnv: c.lambda_e = 0.0; break;
    case Variant::kNoHomo: c.lambda_h = 0.0; break;
    case Variant::kNoCon: c.contrastive = false; break;
    case Variant::kNoGeo: c.lambda_e = 0.0; c.lambda_h = 0.0; break;
  }
  return c;
}

class UciRuns {
 public:
  const UciRun& get(Variant v, std::uint64_t seed) {
    const auto key = std::make_pair(static_cast<int>(v), seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    if (!splits_.contains(seed)) splits_.emplace(seed, airfoil_split(seed));
    const UciRun r = run_uci(splits_.at(seed), variant_config(v, seed));
    detail("seed %llu %-17s test All-MAE %.4f  Few-MAE %.4f  few-shot proportion %.4f  (%.1f s)",
           static_cast<unsigned long long>(seed), variant_name(v), r.all_mae, r.few_mae,
           r.few_shot_proportion, r.seconds);
    return runs_.emplace(key, r).first->second;
  }

 private:
  std::map<std::pair<int, std::uint64_t>, UciRun> runs_;
  std::map<std::uint64_t, data::DirDataset> splits_;
};

UciRuns& uci_runs() {
  static UciRuns runs;
  return runs;
}

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

// ---- 6 ---------------------------------------------------------------------

Outcome airfoil_ordering() {
  detail("data: %s", airfoil_csv().string().c_str());
  double van = 0.0, srl = 0.0, secs = 0.0;
  for (std::uint64_t s : kSeeds) {
    const UciRun& v = uci_runs().get(Variant::kVanilla, s);
    const UciRun& r = uci_runs().get(Variant::kFull, s);
    van += v.few_mae / 3.0;
    srl += r.few_mae / 3.0;
    secs += v.seconds + r.seconds;
  }
  const double gain = (van - srl) / van;
  return {gain >= 0.05 && secs <= 600.0,
          format("mean Few-MAE vanilla %.4f vs SRL %.4f, improvement %+.1f%% (need >= +5%%), %.0f s (limit 600 s)",
                 van, srl, 100.0 * gain, secs)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome oldir_linear() {
  const auto t0 = Clock::now();
  olgen::OlConfig cfg;
  cfg.op = olgen::Operator::kLinear;
  cfg.n_train = 10000;
  cfg.n_test = 10000;
  cfg.seed = 0;
  const olgen::OlData d = olgen::generate_oldir(cfg);
  const data::DirDataset ds = olgen::to_dir_dataset(d.train, d.test, cfg.bands);
  metrics::RegionReport reports[2];
  for (int i = 0; i < 2; ++i) {
    trainer::TrainConfig c = trainer::oldir_defaults();
    c.mode = i == 0 ? trainer::Mode::kVanilla : trainer::Mode::kSrl;
    const auto t1 = Clock::now();
    const trainer::TrainResult r = trainer::train(c, ds);
    reports[i] = trainer::evaluate(r.model, ds, data::Split::kTest);
    detail("%-8s test All-MAE %.5f  Many %.5f  Med %.5f  Few %.5f  (%zu epochs, %.0f s)",
           i == 0 ? "vanilla" : "srl", *reports[i].all.mae, *reports[i].many.mae,
           *reports[i].med.mae, *reports[i].few.mae, c.epochs, seconds_since(t1));
  }
  const double secs = seconds_since(t0);
  const double srl_all = *reports[1].all.mae;
  const double gain = (*reports[0].few.mae - *reports[1].few.mae) / *reports[0].few.mae;
  return {srl_all <= 0.012 && gain >= 0.20 && secs <= 900.0,
          format("SRL All-MAE %.5f (limit 0.012), Few-MAE improvement %+.1f%% (need >= +20%%), %.0f s (limit 900 s)",
                 srl_all, 100.0 * gain, secs)};
}

// ---- 8 ---------------------------------------------------------------------

Outcome few_shot_proportion() {
  int wins = 0;
  for (std::uint64_t s : kSeeds) {
    const double v = uci_runs().get(Variant::kVanilla, s).few_shot_proportion;
    const double r = uci_runs().get(Variant::kFull, s).few_shot_proportion;
    wins += r > v ? 1 : 0;
    detail("seed %llu few-shot proportion vanilla %.4f, SRL %.4f", static_cast<unsigned long long>(s), v, r);
  }
  return {wins == 3, format("SRL proportion exceeds vanilla in %d/3 seeds (need 3/3)", wins)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome ablation() {
  double full_mean = 0.0, nogeo_mean = 0.0;
  int full_best = 0;
  for (std::uint64_t s : kSeeds) {
    const double full = uci_runs().get(Variant::kFull, s).few_mae;
    double best_other = INFINITY;
    for (Variant v : {Variant::kNoEnv, Variant::kNoHomo, Variant::kNoCon}) {
      best_other = std::min(best_other, uci_runs().get(v, s).few_mae);
    }
    full_best += full < best_other ? 1 : 0;
    full_mean += full / 3.0;
    nogeo_mean += uci_runs().get(Variant::kNoGeo, s).few_mae / 3.0;
  }
  // "Measurable": mean Few-MAE moves by at least 1% of the full configuration's.
  const double change = std::abs(nogeo_mean - full_mean) / full_mean;
  return {change >= 0.01 && full_best >= 2,
          format("dropping env+homo changes mean Few-MAE by %.2f%% (need >= 1%%); full SRL best of "
                 "{full, no-env, no-homo, no-con} in %d/3 seeds (need >= 2)",
                 100.0 * change, full_best)};
}

// ---- 10 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome manifest_replay() {
  const fs::path dir = work_dir() / "replay";
  fs::remove_all(dir);
  auto quiet = [](const std::vector<std::string>& args) {
    std::fflush(stdout);
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli::run(args);
    std::cout.rdbuf(old);
    return code;
  };
  if (quiet({"curate-uci", "--csv", airfoil_csv().string(), "--target", "scaled_sound_pressure",
             "--name", "airfoil", "--seed", "0", "--out", (dir / "data").string()}) != 0) {
    return {false, "curate-uci failed"};
  }
  int codes = 0;
  codes += quiet({"train", "--dataset", (dir / "data" / "dataset.json").string(), "--seed", "5",
                  "--out", (dir / "first").string()});
  codes += quiet({"train", "--config", (dir / "first" / "run_manifest.json").string(), "--out",
                  (dir / "replay").string()});
  if (codes != 0) return {false, "train or replay exited non-zero"};
  const std::string a = slurp(dir / "first" / "history.json");
  const std::string b = slurp(dir / "replay" / "history.json");
  return {!a.empty() && a == b,
          format("history.json %zu bytes, replay %s", a.size(), a == b ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"arc-length minimality of homogeneity", arc_length_minimality},
      {"enveloping analytics", enveloping_analytics},
      {"surrogate oracle equivalence", surrogate_oracle},
      {"elliptic solver accuracy and order", pde_solver},
      {"Airfoil few-shot ordering", airfoil_ordering},
      {"OL-DIR linear desk scale", oldir_linear},
      {"few-shot proportion", few_shot_proportion},
      {"loss-component ablation", ablation},
      {"manifest replay determinism", manifest_replay},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.summary.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
