#include <cmath>
#include <vector>

#include "doctest.h"
#include "srl/error.hpp"
#include "srl/metrics.hpp"
#include "srl/rng.hpp"

using namespace srl;
using data::Region;
using metrics::Partition;

TEST_CASE("exact predictions") {
  const std::vector<double> y = {1, 2, 3, 4};
  const metrics::RegionMetrics m = metrics::compute(y, y);
  CHECK(m.count == 4);
  CHECK(*m.mae == 0.0);
  CHECK(*m.mse == 0.0);
  CHECK(*m.gm == doctest::Approx(metrics::kGmFloor).epsilon(1e-12));
  CHECK(*m.pearson == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<double> flat = {2, 2, 2};
  CHECK_FALSE(metrics::compute(flat, flat).pearson.has_value());
  const std::vector<double> one = {2};
  CHECK_FALSE(metrics::compute(one, one).pearson.has_value());
}

TEST_CASE("errors of one and four") {
  const std::vector<double> preds = {1, 4};
  const std::vector<double> targets = {0, 0};
  const metrics::RegionMetrics m = metrics::compute(preds, targets);
  CHECK(*m.mae == 2.5);
  CHECK(*m.mse == 8.5);
  CHECK(*m.gm == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("region partition") {
  const std::vector<double> preds = {1, 2, 3, 5, 8};
  const std::vector<double> targets = {1, 1, 1, 1, 1};
  const std::vector<Region> regions = {Region::kMany, Region::kMany, Region::kFew, Region::kFew,
                                       Region::kFew};
  const metrics::RegionReport r = metrics::region_metrics(preds, targets, regions);
  CHECK(r.all.count == 5);
  CHECK(r.all.count == r.many.count + r.med.count + r.few.count);
  CHECK(*r.all.mae == doctest::Approx(14.0 / 5.0));
  CHECK(*r.many.mae == doctest::Approx(0.5));
  CHECK(*r.few.mae == doctest::Approx(13.0 / 3.0));
  CHECK(r.med.count == 0);
  CHECK_FALSE(r.med.mae.has_value());
  CHECK_FALSE(r.med.gm.has_value());
  CHECK_FALSE(r.med.mse.has_value());
  CHECK_FALSE(r.med.pearson.has_value());
  CHECK(&r.at(Partition::kFew) == &r.few);

  const std::vector<double> none;
  const std::vector<Region> no_regions;
  CHECK_THROWS(metrics::region_metrics(none, none, no_regions));
  CHECK_THROWS(metrics::region_metrics(preds, targets, std::vector<Region>(3, Region::kFew)));
}

TEST_CASE("metric properties on random data") {
  Rng rng(1);
  NormalSampler normal;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 50);
    std::vector<double> preds(n), targets(n);
    for (std::size_t i = 0; i < n; ++i) {
      targets[i] = normal(rng);
      preds[i] = targets[i] + normal(rng);
    }
    const metrics::RegionMetrics m = metrics::compute(preds, targets);
    CHECK(*m.gm <= *m.mae + metrics::kGmFloor);

    // Scaling every error by c.
    const double c = 0.5 + 3.0 * uniform_unit(rng);
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = targets[i] + c * (preds[i] - targets[i]);
    const metrics::RegionMetrics s = metrics::compute(scaled, targets);
    CHECK(*s.mae == doctest::Approx(c * *m.mae).epsilon(1e-12));
    CHECK(*s.mse == doctest::Approx(c * c * *m.mse).epsilon(1e-12));
    CHECK(*s.gm == doctest::Approx(c * *m.gm).epsilon(1e-4));

    // Positive affine maps keep Pearson.
    std::vector<double> affine(n);
    for (std::size_t i = 0; i < n; ++i) affine[i] = 3.0 * preds[i] - 7.0;
    CHECK(*metrics::compute(affine, targets).pearson == doctest::Approx(*m.pearson).epsilon(1e-12));

    // Permutation invariance.
    std::vector<double> rp(preds.rbegin(), preds.rend());
    std::vector<double> rt(targets.rbegin(), targets.rend());
    const metrics::RegionMetrics p = metrics::compute(rp, rt);
    CHECK(*p.mae == doctest::Approx(*m.mae).epsilon(1e-14));
    CHECK(*p.pearson == doctest::Approx(*m.pearson).epsilon(1e-12));
  }
}

TEST_CASE("json and table") {
  const std::vector<double> preds = {1, 2, 3, 5};
  const std::vector<double> targets = {1, 1, 2, 2};
  const std::vector<Region> regions = {Region::kMany, Region::kMed, Region::kMany, Region::kMed};
  const metrics::RegionReport r = metrics::region_metrics(preds, targets, regions);
  const io::Json j = metrics::to_json(r);
  CHECK(j.at("Few").at("mae").is_null());
  CHECK(j.at("All").at("count") == 4);
  CHECK(metrics::report_from_json(j) == r);
  const std::string table = metrics::format_table(r, "test");
  CHECK(table.find("MAE") != std::string::npos);
  CHECK(table.find("Pearson") != std::string::npos);
  CHECK(table.find('-') != std::string::npos);
}
