#include "srl/gradsuite.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "srl/autodiff.hpp"
#include "srl/geometry.hpp"
#include "srl/nn.hpp"
#include "srl/rng.hpp"
#include "srl/surrogate.hpp"

namespace srl::gradsuite {

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, NormalSampler& normal, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

Tensor unit_rows(std::size_t rows, std::size_t cols, NormalSampler& normal, Rng& rng) {
  Tensor t = gaussian(rows, cols, normal, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = t.row(r);
    const double n = norm(row);
    for (double& v : row) v /= n;
  }
  return t;
}

// Central differences are meaningless across the kink of a max; reject draws
// where some sample point has two centroids within `margin` of the best.
bool clear_of_ties(const geometry::SphereSample& sample, const Tensor& centroids, double margin) {
  for (std::size_t i = 0; i < sample.count(); ++i) {
    double best = -2.0;
    double second = -2.0;
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
      const double c = dot(sample.points.row(i), centroids.row(k));
      if (c > best) {
        second = best;
        best = c;
      } else if (c > second) {
        second = c;
      }
    }
    if (best - second < margin) return false;
  }
  return true;
}

struct Draw {
  std::vector<surrogate::BinId> row_bins;
  surrogate::Surrogate prev;
  Tensor raw;  // unnormalized batch representations
};

// Batch of 2K rows over a random subset of the K bins; absent bins come from
// a random stored surrogate.
Draw draw_batch(std::size_t d, std::size_t k, NormalSampler& normal, Rng& rng) {
  Draw out;
  out.prev.centroids = unit_rows(k, d, normal, rng);
  for (std::size_t i = 0; i < k; ++i) {
    out.prev.bins.push_back(static_cast<surrogate::BinId>(i));
    out.prev.labels.push_back(0.5 + static_cast<double>(i) + 0.5 * uniform_unit(rng));
  }
  const std::size_t present = 1 + uniform_index(rng, k);
  for (std::size_t m = 0; m < 2 * k; ++m) {
    out.row_bins.push_back(static_cast<surrogate::BinId>(uniform_index(rng, present)));
  }
  out.raw = gaussian(out.row_bins.size(), d, normal, rng);
  return out;
}

}  // namespace

Report run(std::uint64_t seed, std::size_t repeats, double step, double tolerance) {
  Report report;
  report.tolerance = tolerance;
  constexpr std::array<std::size_t, 3> kDims = {2, 8, 32};
  constexpr std::array<std::size_t, 3> kBins = {2, 5, 20};
  std::uint64_t draw_index = 0;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    for (std::size_t d : kDims) {
      for (std::size_t k : kBins) {
        const std::uint64_t case_seed = derive_seed(seed, draw_index++);
        Rng rng(case_seed);
        NormalSampler normal;

        // Regression loss through encoder, normalization and head.
        {
          const std::vector<std::size_t> enc_dims = {5, 12, d};
          const nn::Mlp enc = nn::init_mlp(enc_dims, nn::Activation::kTanh, derive_seed(case_seed, 1));
          const std::vector<std::size_t> head_dims = {d, 1};
          nn::Mlp head = nn::init_mlp(head_dims, nn::Activation::kTanh, derive_seed(case_seed, 2));
          for (double& v : head.layers[0].bias.values()) v = normal(rng);
          const Tensor x = gaussian(2 * k, 5, normal, rng);
          const Tensor y = gaussian(2 * k, 1, normal, rng);
          std::vector<Tensor> params;
          for (const Tensor* t : enc.parameters()) params.push_back(*t);
          for (const Tensor* t : head.parameters()) params.push_back(*t);
          const std::size_t enc_count = enc.parameters().size();
          auto f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
            nn::BoundMlp e{&enc, {}, {}};
            nn::BoundMlp h{&head, {}, {}};
            for (std::size_t i = 0; i < p.size(); ++i) {
              nn::BoundMlp& target = i < enc_count ? e : h;
              ((i < enc_count ? i : i - enc_count) % 2 == 0 ? target.weights : target.biases)
                  .push_back(p[i]);
            }
            ad::Var pred = nn::regress(h, nn::encode(e, tape.constant(x)));
            return ad::mean(ad::square(ad::sub(pred, tape.constant(y))));
          };
          report.cases.push_back({"mse", d, k, case_seed, ad::grad_check(f, params, step)});
        }

        Draw draw = draw_batch(d, k, normal, rng);
        const std::vector<Tensor> raw = {draw.raw};

        geometry::SphereSample sample;
        for (int attempt = 0;; ++attempt) {
          sample = geometry::sample_hypersphere(64, d, derive_seed(case_seed, 10 + attempt));
          ad::Tape probe;
          const auto bc = surrogate::batch_centroids(
              ad::l2_normalize_rows(probe.variable(draw.raw)), draw.row_bins);
          const auto s = surrogate::refill(probe, bc, draw.prev);
          if (clear_of_ties(sample, s.centroids.value(), 1e-4) || attempt == 50) break;
        }
        auto env = [&](ad::Tape& tape, std::span<const ad::Var> p) {
          const auto bc = surrogate::batch_centroids(ad::l2_normalize_rows(p[0]), draw.row_bins);
          return geometry::enveloping_loss(sample, surrogate::refill(tape, bc, draw.prev).centroids);
        };
        report.cases.push_back({"enveloping", d, k, case_seed, ad::grad_check(env, raw, step)});

        auto homo = [&](ad::Tape& tape, std::span<const ad::Var> p) {
          const auto bc = surrogate::batch_centroids(ad::l2_normalize_rows(p[0]), draw.row_bins);
          const auto s = surrogate::refill(tape, bc, draw.prev);
          return geometry::homogeneity_loss(s.centroids, s.labels);
        };
        report.cases.push_back({"homogeneity", d, k, case_seed, ad::grad_check(homo, raw, step)});

        auto con = [&](ad::Tape& tape, std::span<const ad::Var> p) {
          ad::Var z = ad::l2_normalize_rows(p[0]);
          const auto bc = surrogate::batch_centroids(z, draw.row_bins);
          return surrogate::contrastive_loss(z, draw.row_bins, surrogate::refill(tape, bc, draw.prev),
                                             0.1);
        };
        report.cases.push_back({"contrastive", d, k, case_seed, ad::grad_check(con, raw, step)});
      }
    }
  }
  for (const Case& c : report.cases) report.max_error = std::max(report.max_error, c.error);
  return report;
}

}  // namespace srl::gradsuite
