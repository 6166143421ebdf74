#include "srl/olgen.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "srl/error.hpp"

namespace srl::olgen {

std::string to_string(Operator op) { return op == Operator::kLinear ? "linear" : "nonlinear"; }

Operator operator_from_string(const std::string& name) {
  if (name == "linear") return Operator::kLinear;
  if (name == "nonlinear") return Operator::kNonlinear;
  throw UsageError("unknown operator '" + name + "' (expected linear or nonlinear)");
}

std::vector<double> uniform_grid(std::size_t m) {
  if (m < 2) throw UsageError("grid needs at least two points");
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = static_cast<double>(i) / static_cast<double>(m - 1);
  return g;
}

// ---- GRF ------------------------------------------------------------------------

GrfSampler::GrfSampler(GrfSpec spec) : spec_(spec), grid_(uniform_grid(spec.m)) {
  if (!(spec.length_scale > 0.0)) throw UsageError("GRF length scale must be positive");
  if (!(spec.variance > 0.0)) throw UsageError("GRF variance must be positive");
  const auto m = static_cast<Eigen::Index>(spec.m);
  Eigen::MatrixXd kernel(m, m);
  const double denom = 2.0 * spec.length_scale * spec.length_scale;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = grid_[static_cast<std::size_t>(i)] - grid_[static_cast<std::size_t>(j)];
      kernel(i, j) = spec.variance * std::exp(-d * d / denom);
    }
  }
  const double base = 1e-10 * kernel.trace() / static_cast<double>(m);
  const double ceiling = 1e-6 * kernel.trace() / static_cast<double>(m);
  for (double jitter = base; jitter <= ceiling * (1.0 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd k = kernel;
    k.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }
  throw NumericError("GRF kernel Cholesky failed even with the maximum jitter");
}

std::vector<double> GrfSampler::sample(Rng& rng) const {
  NormalSampler normal;
  Eigen::VectorXd g(static_cast<Eigen::Index>(spec_.m));
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
  const Eigen::VectorXd u = lower_ * g;
  return {u.data(), u.data() + u.size()};
}

std::vector<double> sample_grf(const GrfSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return GrfSampler(spec).sample(rng);
}

// ---- operators ---------------------------------------------------------------------

namespace {

void check_location(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw UsageError("query location must lie in [0, 1]");
}

// Index i with grid[i] <= y <= grid[i + 1].
std::size_t cell_of(std::span<const double> grid, double y) {
  const auto it = std::upper_bound(grid.begin(), grid.end(), y);
  std::size_t i = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  return std::min(i, grid.size() - 2);
}

}  // namespace

double interpolate(std::span<const double> values, std::span<const double> grid, double y) {
  if (values.size() != grid.size() || grid.size() < 2) {
    throw Error("interpolate: values and grid lengths differ");
  }
  check_location(y);
  const std::size_t i = cell_of(grid, y);
  const double t = (y - grid[i]) / (grid[i + 1] - grid[i]);
  return values[i] + t * (values[i + 1] - values[i]);
}

double antiderivative(std::span<const double> u, std::span<const double> grid, double y) {
  if (u.size() != grid.size() || grid.size() < 2) {
    throw Error("antiderivative: u and grid lengths differ");
  }
  check_location(y);
  std::vector<double> cumulative(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + 0.5 * (u[i] + u[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return interpolate(cumulative, grid, y);
}

std::vector<double> solve_elliptic(std::span<const double> b, std::span<const double> grid,
                                   double f_const) {
  const std::size_t m = grid.size();
  if (b.size() != m || m < 3) throw Error("solve_elliptic: b and grid lengths differ");
  for (double v : b) {
    if (!std::isfinite(v)) throw NumericError("solve_elliptic: non-finite coefficient field");
  }
  // Unknowns are the m - 2 interior nodes.
  const std::size_t n = m - 2;
  std::vector<double> lower(n, 0.0);
  std::vector<double> diag(n, 0.0);
  std::vector<double> upper(n, 0.0);
  std::vector<double> rhs(n, f_const);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = k + 1;
    const double h_left = grid[i] - grid[i - 1];
    const double h_right = grid[i + 1] - grid[i];
    const double a_left = std::exp(0.5 * (b[i - 1] + b[i])) / h_left;
    const double a_right = std::exp(0.5 * (b[i] + b[i + 1])) / h_right;
    const double width = 0.5 * (h_left + h_right);
    lower[k] = a_left / width;
    upper[k] = a_right / width;
    diag[k] = -(a_left + a_right) / width;
  }
  // Thomas algorithm; the matrix is strictly diagonally dominant in the
  // interior rows' sense so no pivoting is needed.
  for (std::size_t k = 1; k < n; ++k) {
    const double w = lower[k] / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    rhs[k] -= w * rhs[k - 1];
    if (diag[k] == 0.0) throw NumericError("solve_elliptic: singular tridiagonal system");
  }
  std::vector<double> u(m, 0.0);
  u[n] = rhs[n - 1] / diag[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) u[k + 1] = (rhs[k] - upper[k] * u[k + 2]) / diag[k];
  return u;
}

// ---- bands and sampling ---------------------------------------------------------------

data::Region RegionBands::region_of(double y) const {
  for (data::Region r : {data::Region::kFew, data::Region::kMed, data::Region::kMany}) {
    for (const Interval& iv : band(r)) {
      if ((y >= iv.lo && y < iv.hi) || (y == 1.0 && iv.hi == 1.0)) return r;
    }
  }
  throw UsageError("location " + std::to_string(y) + " is outside every band");
}

const std::vector<Interval>& RegionBands::band(data::Region r) const {
  switch (r) {
    case data::Region::kFew:
      return few;
    case data::Region::kMed:
      return med;
    case data::Region::kMany:
      break;
  }
  return many;
}

std::vector<Interval>& RegionBands::band(data::Region r) {
  return const_cast<std::vector<Interval>&>(std::as_const(*this).band(r));
}

namespace {

void check_mix(const TrainMix& mix) {
  const double total = mix.few + mix.med + mix.many;
  if (mix.few < 0.0 || mix.med < 0.0 || mix.many < 0.0 || std::abs(total - 100.0) > 1e-9) {
    throw UsageError("train mix must be non-negative and sum to 100");
  }
}

double draw_in_band(const std::vector<Interval>& band, Rng& rng) {
  double total = 0.0;
  for (const Interval& iv : band) total += iv.length();
  double pick = uniform_unit(rng) * total;
  for (const Interval& iv : band) {
    if (pick < iv.length()) return iv.lo + pick;
    pick -= iv.length();
  }
  return band.back().hi - 1e-12;
}

data::Region draw_region(const TrainMix& mix, Rng& rng) {
  const double p = uniform_unit(rng) * 100.0;
  if (p < mix.few) return data::Region::kFew;
  if (p < mix.few + mix.med) return data::Region::kMed;
  return data::Region::kMany;
}

}  // namespace

std::vector<OlSample> generate_samples(const OlConfig& config, const GrfSampler& sampler,
                                       std::uint64_t stream_seed, Placement placement,
                                       std::size_t count) {
  check_mix(config.mix);
  const auto& grid = sampler.grid();
  std::vector<OlSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(stream_seed, i));
    OlSample& s = out[i];
    if (placement == Placement::kImbalanced) {
      s.y = draw_in_band(config.bands.band(draw_region(config.mix, rng)), rng);
    } else {
      s.y = uniform_unit(rng);
    }
    s.region = config.bands.region_of(s.y);
    s.u = sampler.sample(rng);
    if (config.op == Operator::kLinear) {
      s.target = antiderivative(s.u, grid, s.y);
    } else {
      const auto solution = solve_elliptic(s.u, grid, config.f_const);
      s.target = interpolate(solution, grid, s.y);
    }
  }
  return out;
}

OlData generate_oldir(const OlConfig& config) {
  check_mix(config.mix);
  const GrfSampler sampler(config.grf);
  OlData data;
  data.train = generate_samples(config, sampler, derive_seed(config.seed, SeedStream::kOlTrain),
                                Placement::kImbalanced, config.n_train);
  data.test = generate_samples(config, sampler, derive_seed(config.seed, SeedStream::kOlTest),
                               Placement::kUniform, config.n_test);
  return data;
}

// ---- files --------------------------------------------------------------------------------

io::Json config_json(const OlConfig& config) {
  auto bands = [](const std::vector<Interval>& b) {
    io::Json arr = io::Json::array();
    for (const Interval& iv : b) arr.push_back({iv.lo, iv.hi});
    return arr;
  };
  return {{"operator", to_string(config.op)},
          {"m", config.grf.m},
          {"length_scale", config.grf.length_scale},
          {"variance", config.grf.variance},
          {"f_const", config.f_const},
          {"bands",
           {{"few", bands(config.bands.few)},
            {"med", bands(config.bands.med)},
            {"many", bands(config.bands.many)}}},
          {"mix", {config.mix.few, config.mix.med, config.mix.many}},
          {"seed", config.seed},
          {"n_train", config.n_train},
          {"n_test", config.n_test}};
}

void write_samples(const std::filesystem::path& path, const OlConfig& config,
                   const std::string& split, const std::vector<OlSample>& samples) {
  io::Json header = config_json(config);
  header["format"] = "srl-oldir-samples";
  header["version"] = 1;
  header["split"] = split;
  header["count"] = samples.size();
  header["grid"] = uniform_grid(config.grf.m);
  header["row_layout"] = "u_1..u_m, y, target";
  std::vector<float> payload;
  payload.reserve(samples.size() * (config.grf.m + 2));
  for (const OlSample& s : samples) {
    if (s.u.size() != config.grf.m) throw Error("write_samples: sample has wrong sensor count");
    for (double v : s.u) payload.push_back(static_cast<float>(v));
    payload.push_back(static_cast<float>(s.y));
    payload.push_back(static_cast<float>(s.target));
  }
  io::write_dump(path, header, std::span<const float>(payload));
}

std::vector<OlSample> read_samples(const std::filesystem::path& path, io::Json* header) {
  const io::Dump dump = io::read_dump(path);
  io::expect_format(dump.header, "srl-oldir-samples");
  std::size_t m = 0;
  std::size_t count = 0;
  RegionBands bands;
  try {
    m = dump.header.at("m").get<std::size_t>();
    count = dump.header.at("count").get<std::size_t>();
    for (auto [name, r] : {std::pair{"few", data::Region::kFew},
                           std::pair{"med", data::Region::kMed},
                           std::pair{"many", data::Region::kMany}}) {
      auto& band = bands.band(r);
      band.clear();
      for (const auto& iv : dump.header.at("bands").at(name)) {
        band.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
      }
    }
  } catch (const io::Json::exception& e) {
    throw SchemaError("sample file header incomplete: " + std::string(e.what()));
  }
  if (dump.payload.size() != count * (m + 2)) {
    throw DataError("sample file payload does not match its header: " + path.string());
  }
  std::vector<OlSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float* row = dump.payload.data() + i * (m + 2);
    out[i].u.assign(row, row + m);
    out[i].y = row[m];
    out[i].target = row[m + 1];
    out[i].region = bands.region_of(std::clamp(out[i].y, 0.0, 1.0));
  }
  if (header != nullptr) *header = dump.header;
  return out;
}

data::DirDataset to_dir_dataset(const std::vector<OlSample>& train,
                                const std::vector<OlSample>& test, const RegionBands& bands,
                                double bin_width) {
  if (train.empty()) throw DataError("operator dataset has no training samples");
  if (!(bin_width > 0.0)) throw UsageError("bin width must be positive");
  const std::size_t m = train.front().u.size();
  const auto last_bin = static_cast<data::BinId>(std::ceil(1.0 / bin_width - 1e-9)) - 1;
  data::DirDataset ds;
  for (std::size_t j = 0; j < m; ++j) ds.feature_names.push_back("u" + std::to_string(j + 1));
  ds.feature_names.push_back("y");
  ds.bin_origin = 0.0;
  ds.bin_width = bin_width;
  const std::size_t rows = train.size() + test.size();
  std::vector<double> features;
  features.reserve(rows * (m + 1));
  auto append = [&](const std::vector<OlSample>& samples, data::Split split) {
    for (const OlSample& s : samples) {
      if (s.u.size() != m) throw DataError("operator samples disagree on the sensor count");
      features.insert(features.end(), s.u.begin(), s.u.end());
      features.push_back(s.y);
      ds.targets.push_back(s.target);
      ds.bin_values.push_back(s.y);
      ds.bin_ids.push_back(std::clamp<data::BinId>(data::bin_of(s.y, 0.0, bin_width), 0, last_bin));
      ds.split.push_back(split);
    }
  };
  append(train, data::Split::kTrain);
  append(test, data::Split::kTest);
  ds.features = Tensor({rows, m + 1}, std::move(features));
  for (data::BinId b = 0; b <= last_bin; ++b) {
    ds.regions.by_bin[b] = bands.region_of(std::min(1.0, ds.bin_center(b)));
  }
  data::standardize_features(ds);
  return ds;
}

}  // namespace srl::olgen
