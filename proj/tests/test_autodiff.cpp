#include <cmath>
#include <vector>

#include "doctest.h"
#include "srl/autodiff.hpp"
#include "srl/error.hpp"
#include "srl/geometry.hpp"
#include "srl/nn.hpp"
#include "srl/rng.hpp"
#include "srl/surrogate.hpp"

using namespace srl;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = lo + (hi - lo) * uniform_unit(rng);
  return t;
}

}  // namespace

TEST_CASE("sum of squares value and gradient") {
  auto f = [](ad::Tape&, std::span<const ad::Var> p) { return ad::sum(ad::square(p[0])); };
  const std::vector<Tensor> params = {Tensor::vector({1.0, 2.0})};
  const ad::ValueAndGrad vg = ad::value_and_grad(f, params);
  CHECK(vg.value == 5.0);
  REQUIRE(vg.grads.size() == 1);
  CHECK(vg.grads[0] == Tensor::vector({2.0, 4.0}));
}

TEST_CASE("normalizing a unit vector sits at the minimum") {
  auto f = [](ad::Tape& tape, std::span<const ad::Var> p) {
    ad::Var e1 = tape.constant(Tensor::vector({1.0, 0.0}));
    return ad::sum(ad::square(ad::sub(ad::l2_normalize_rows(p[0]), e1)));
  };
  const std::vector<Tensor> params = {Tensor::vector({1.0, 0.0})};
  const ad::ValueAndGrad vg = ad::value_and_grad(f, params);
  CHECK(vg.value == 0.0);
  CHECK(vg.grads[0][0] == doctest::Approx(0.0));
  CHECK(vg.grads[0][1] == doctest::Approx(0.0));
}

TEST_CASE("enveloping loss of random centroids matches finite differences") {
  const geometry::SphereSample sample = geometry::sample_hypersphere(100, 4, 11);
  Rng rng(5);
  const std::vector<Tensor> params = {random_tensor({3, 4}, rng)};
  auto f = [&](ad::Tape&, std::span<const ad::Var> p) {
    return geometry::enveloping_loss(sample, ad::l2_normalize_rows(p[0]));
  };
  CHECK(ad::grad_check(f, params) < 1e-6);
}

TEST_CASE("l2 normalization") {
  ad::Tape tape;
  SUBCASE("3-4-5 triangle") {
    const Tensor& out = ad::l2_normalize_rows(tape.constant(Tensor::vector({3.0, 4.0}))).value();
    CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("unit vector is a fixed point") {
    const Tensor unit = Tensor::vector({0.0, 1.0, 0.0});
    CHECK(ad::l2_normalize_rows(tape.constant(unit)).value() == unit);
  }
  SUBCASE("rows come out unit length") {
    Rng rng(3);
    const Tensor x = random_tensor({20, 7}, rng, -5.0, 5.0);
    const Tensor& z = ad::l2_normalize_rows(tape.constant(x)).value();
    for (std::size_t r = 0; r < z.rows(); ++r) CHECK(std::abs(norm(z.row(r)) - 1.0) < 1e-12);
  }
  SUBCASE("vanishing row is rejected") {
    CHECK_THROWS_AS(ad::l2_normalize_rows(tape.constant(Tensor::vector({0.0, 0.0}))),
                    NumericError);
  }
}

TEST_CASE("normalization Jacobian-vector product matches finite differences") {
  Rng rng(17);
  const Tensor v = random_tensor({8}, rng);
  const Tensor direction = random_tensor({8}, rng);
  // <direction, normalize(v)> has gradient J^T direction.
  auto f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
    return ad::sum(ad::mul(ad::l2_normalize_rows(p[0]), tape.constant(direction)));
  };
  const std::vector<Tensor> params = {v};
  const ad::ValueAndGrad vg = ad::value_and_grad(f, params);
  const double analytic = dot(vg.grads[0].values(), direction.values());
  const double h = 1e-5;
  auto value_at = [&](double t) {
    Tensor shifted = v;
    for (std::size_t i = 0; i < 8; ++i) shifted[i] += t * direction[i];
    const std::vector<Tensor> p = {shifted};
    return ad::value_and_grad(f, p).value;
  };
  const double numeric = (value_at(h) - value_at(-h)) / (2.0 * h);
  CHECK(std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)) < 1e-6);
}

TEST_CASE("grad_check on the regression loss of a random MLP") {
  const std::vector<std::size_t> enc_dims = {4, 6, 5};
  const std::vector<std::size_t> head_dims = {5, 1};
  const nn::Mlp enc = nn::init_mlp(enc_dims, nn::Activation::kTanh, 1);
  const nn::Mlp head = nn::init_mlp(head_dims, nn::Activation::kTanh, 2);
  Rng rng(9);
  const Tensor x = random_tensor({10, 4}, rng);
  const Tensor y = random_tensor({10, 1}, rng);
  std::vector<Tensor> params;
  for (const Tensor* t : enc.parameters()) params.push_back(*t);
  for (const Tensor* t : head.parameters()) params.push_back(*t);
  auto f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
    nn::BoundMlp e{&enc, {p[0], p[2]}, {p[1], p[3]}};
    nn::BoundMlp h{&head, {p[4]}, {p[5]}};
    ad::Var pred = nn::regress(h, nn::encode(e, tape.constant(x)));
    return ad::mean(ad::square(ad::sub(pred, tape.constant(y))));
  };
  CHECK(ad::grad_check(f, params) < 1e-6);
}

TEST_CASE("grad_check on the contrastive loss") {
  Rng rng(23);
  surrogate::Surrogate prev;
  prev.centroids = Tensor::matrix(5, 6);
  for (std::size_t k = 0; k < 5; ++k) {
    prev.bins.push_back(static_cast<surrogate::BinId>(k));
    prev.labels.push_back(static_cast<double>(k));
    auto row = prev.centroids.row(k);
    for (double& v : row) v = uniform_unit(rng) - 0.5;
    const double n = norm(row);
    for (double& v : row) v /= n;
  }
  const std::vector<surrogate::BinId> bins = {0, 0, 1, 3, 3, 3, 4, 1};
  const std::vector<Tensor> params = {random_tensor({8, 6}, rng)};
  auto f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
    ad::Var z = ad::l2_normalize_rows(p[0]);
    const auto s = surrogate::refill(tape, surrogate::batch_centroids(z, bins), prev);
    return surrogate::contrastive_loss(z, bins, s, 0.1);
  };
  CHECK(ad::grad_check(f, params) < 1e-5);
}

TEST_CASE("grad_check of a constant function is zero") {
  auto f = [](ad::Tape& tape, std::span<const ad::Var>) {
    return tape.constant(Tensor::scalar(3.0));
  };
  const std::vector<Tensor> params = {Tensor::vector({1.0, -2.0, 0.5})};
  CHECK(ad::grad_check(f, params) == 0.0);
}

TEST_CASE("every primitive matches finite differences over random configurations") {
  // Each primitive is wrapped into a scalar by a random linear functional so
  // every output coordinate contributes.
  using Unary = ad::Var (*)(ad::Var);
  struct Named {
    const char* name;
    std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)> body;
    std::vector<std::vector<std::size_t>> shapes;
    double lo = -1.0;
    double hi = 1.0;
  };
  std::vector<Named> cases;
  for (auto [name, fn] : {std::pair<const char*, Unary>{"tanh", ad::tanh},
                          {"exp", ad::exp},
                          {"square", ad::square},
                          {"relu", ad::relu},
                          {"transpose", ad::transpose},
                          {"row_sum", ad::row_sum},
                          {"row_max", ad::row_max}}) {
    cases.push_back({name, [fn](ad::Tape&, std::span<const ad::Var> p) { return fn(p[0]); },
                     {{4, 3}}});
  }
  cases.push_back({"log", [](ad::Tape&, std::span<const ad::Var> p) { return ad::log(p[0]); },
                   {{3, 4}}, 0.5, 2.0});
  cases.push_back({"normalize",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::l2_normalize_rows(p[0]); },
                   {{3, 5}}});
  cases.push_back({"matmul",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::matmul(p[0], p[1]); },
                   {{3, 4}, {4, 2}}});
  cases.push_back({"add_row",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::add(p[0], p[1]); },
                   {{3, 4}, {4}}});
  cases.push_back({"sub_col",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::sub(p[0], p[1]); },
                   {{3, 4}, {3, 1}}});
  cases.push_back({"mul_same",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::mul(p[0], p[1]); },
                   {{3, 4}, {3, 4}}});
  cases.push_back({"div_scalar",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::div(p[0], p[1]); },
                   {{3, 4}, {1}}, 0.5, 2.0});
  cases.push_back({"dot_rows",
                   [](ad::Tape&, std::span<const ad::Var> p) { return ad::dot_rows(p[0], p[1]); },
                   {{3, 4}, {3, 4}}});
  cases.push_back({"gather_concat",
                   [](ad::Tape&, std::span<const ad::Var> p) {
                     const std::vector<std::size_t> rows = {3, 0, 0, 2};
                     return ad::gather_rows(ad::concat_rows(p[0], p[1]), rows);
                   },
                   {{2, 3}, {2, 3}}});
  cases.push_back({"pick",
                   [](ad::Tape&, std::span<const ad::Var> p) {
                     const std::vector<std::size_t> cols = {2, 0, 1};
                     return ad::pick(p[0], cols);
                   },
                   {{3, 3}}});
  cases.push_back({"mean", [](ad::Tape&, std::span<const ad::Var> p) { return ad::mean(p[0]); },
                   {{3, 3}}});

  std::size_t configs = 0;
  for (const Named& c : cases) {
    for (std::uint64_t trial = 0; trial < 4; ++trial) {
      Rng rng(derive_seed(trial, configs));
      std::vector<Tensor> params;
      for (const auto& shape : c.shapes) params.push_back(random_tensor(shape, rng, c.lo, c.hi));
      // Shift relu/max inputs away from their kinks.
      for (Tensor& t : params) {
        for (double& v : t.values()) {
          if (std::abs(v) < 1e-3) v += 0.01;
        }
      }
      Tensor weights;
      auto f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
        ad::Var out = c.body(tape, p);
        if (weights.empty()) {
          Rng wr(trial + 100);
          weights = random_tensor(out.shape(), wr);
        }
        return ad::sum(ad::mul(out, tape.constant(weights)));
      };
      const double err = ad::grad_check(f, params);
      INFO(c.name);
      CHECK(err <= 1e-5);
      ++configs;
    }
  }
  CHECK(configs >= 64);
}

TEST_CASE("adjoints are linear in the loss") {
  Rng rng(31);
  const Tensor x = random_tensor({4, 3}, rng);
  auto a = [](ad::Tape&, std::span<const ad::Var> p) { return ad::sum(ad::tanh(p[0])); };
  auto b = [](ad::Tape&, std::span<const ad::Var> p) {
    return ad::sum(ad::square(ad::l2_normalize_rows(p[0])));
  };
  auto ab = [&](ad::Tape& t, std::span<const ad::Var> p) { return ad::add(a(t, p), b(t, p)); };
  const std::vector<Tensor> params = {x};
  const auto ga = ad::value_and_grad(a, params).grads[0];
  const auto gb = ad::value_and_grad(b, params).grads[0];
  const auto gab = ad::value_and_grad(ab, params).grads[0];
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(gab[i] - (ga[i] + gb[i])) < 1e-12);
}

TEST_CASE("replaying backward gives bit-identical gradients") {
  Rng rng(37);
  ad::Tape tape;
  ad::Var x = tape.variable(random_tensor({5, 4}, rng));
  ad::Var loss = ad::sum(ad::row_max(ad::tanh(ad::matmul(x, ad::transpose(x)))));
  tape.backward(loss);
  const Tensor first = x.grad();
  tape.backward(loss);
  CHECK(x.grad() == first);
}

TEST_CASE("row_max routes the subgradient to the first maximum") {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::from_rows({{1.0, 3.0, 3.0}, {2.0, 0.0, 1.0}}));
  tape.backward(ad::sum(ad::row_max(x)));
  CHECK(x.grad() == Tensor::from_rows({{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}}));
}

TEST_CASE("non-finite values are reported with the node") {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::vector({0.0, 1.0}));
  try {
    ad::log(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("backward visits every node once in reverse order") {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor::vector({2.0}));
  ad::Var y = ad::mul(x, x);
  ad::Var z = ad::add(y, x);
  tape.backward(z);
  CHECK(x.grad()[0] == doctest::Approx(5.0));
  CHECK(tape.size() == 3);
}
