#include "srl/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "srl/error.hpp"

namespace srl::metrics {

std::string to_string(Partition p) {
  switch (p) {
    case Partition::kAll:
      return "All";
    case Partition::kMany:
      return "Many";
    case Partition::kMed:
      return "Med";
    case Partition::kFew:
      return "Few";
  }
  return "All";
}

const RegionMetrics& RegionReport::at(Partition p) const {
  switch (p) {
    case Partition::kAll:
      return all;
    case Partition::kMany:
      return many;
    case Partition::kMed:
      return med;
    case Partition::kFew:
      return few;
  }
  return all;
}

RegionMetrics& RegionReport::at(Partition p) {
  return const_cast<RegionMetrics&>(std::as_const(*this).at(p));
}

RegionMetrics compute(std::span<const double> preds, std::span<const double> targets) {
  RegionMetrics m;
  m.count = preds.size();
  if (m.count == 0) return m;
  const double n = static_cast<double>(m.count);
  double abs_sum = 0.0;
  double log_sum = 0.0;
  double sq_sum = 0.0;
  double p_mean = 0.0;
  double t_mean = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - targets[i];
    abs_sum += std::abs(e);
    log_sum += std::log(std::abs(e) + kGmFloor);
    sq_sum += e * e;
    p_mean += preds[i];
    t_mean += targets[i];
  }
  m.mae = abs_sum / n;
  m.gm = std::exp(log_sum / n);
  m.mse = sq_sum / n;
  if (m.count >= 2) {
    p_mean /= n;
    t_mean /= n;
    double cov = 0.0;
    double p_var = 0.0;
    double t_var = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double dp = preds[i] - p_mean;
      const double dt = targets[i] - t_mean;
      cov += dp * dt;
      p_var += dp * dp;
      t_var += dt * dt;
    }
    if (p_var > 0.0 && t_var > 0.0) m.pearson = cov / std::sqrt(p_var * t_var);
  }
  return m;
}

RegionReport region_metrics(std::span<const double> preds, std::span<const double> targets,
                            std::span<const data::Region> regions) {
  if (preds.empty()) throw Error("region_metrics: no predictions");
  if (preds.size() != targets.size() || preds.size() != regions.size()) {
    throw Error("region_metrics: predictions, targets and regions differ in length");
  }
  RegionReport report;
  report.all = compute(preds, targets);
  for (auto [partition, region] : {std::pair{Partition::kMany, data::Region::kMany},
                                   std::pair{Partition::kMed, data::Region::kMed},
                                   std::pair{Partition::kFew, data::Region::kFew}}) {
    std::vector<double> p;
    std::vector<double> t;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (regions[i] == region) {
        p.push_back(preds[i]);
        t.push_back(targets[i]);
      }
    }
    report.at(partition) = compute(p, t);
  }
  return report;
}

namespace {

io::Json optional_json(const std::optional<double>& v) {
  return v ? io::Json(*v) : io::Json(nullptr);
}

std::optional<double> optional_from(const io::Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

io::Json to_json(const RegionReport& report) {
  io::Json j = io::Json::object();
  for (Partition p : kPartitions) {
    const RegionMetrics& m = report.at(p);
    j[to_string(p)] = {{"count", m.count},
                       {"mae", optional_json(m.mae)},
                       {"gm", optional_json(m.gm)},
                       {"mse", optional_json(m.mse)},
                       {"pearson", optional_json(m.pearson)}};
  }
  return j;
}

RegionReport report_from_json(const io::Json& j) {
  RegionReport report;
  try {
    for (Partition p : kPartitions) {
      const io::Json& e = j.at(to_string(p));
      RegionMetrics& m = report.at(p);
      m.count = e.at("count").get<std::size_t>();
      m.mae = optional_from(e.at("mae"));
      m.gm = optional_from(e.at("gm"));
      m.mse = optional_from(e.at("mse"));
      m.pearson = optional_from(e.at("pearson"));
    }
  } catch (const io::Json::exception& e) {
    throw SchemaError("region report incomplete: " + std::string(e.what()));
  }
  return report;
}

std::string format_table(const RegionReport& report, const std::string& title) {
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %12s %12s %12s %12s\n", "Metric", "All", "Many", "Med",
                "Few");
  os << buf;
  auto row = [&](const char* name, auto getter) {
    std::snprintf(buf, sizeof buf, "%-8s", name);
    os << buf;
    for (Partition p : kPartitions) {
      const std::optional<double> v = getter(report.at(p));
      if (v) {
        std::snprintf(buf, sizeof buf, " %12.5g", *v);
      } else {
        std::snprintf(buf, sizeof buf, " %12s", "-");
      }
      os << buf;
    }
    os << '\n';
  };
  row("MAE", [](const RegionMetrics& m) { return m.mae; });
  row("GM", [](const RegionMetrics& m) { return m.gm; });
  row("MSE", [](const RegionMetrics& m) { return m.mse; });
  row("Pearson", [](const RegionMetrics& m) { return m.pearson; });
  row("Count", [](const RegionMetrics& m) { return std::optional<double>(m.count); });
  return os.str();
}

}  // namespace srl::metrics
