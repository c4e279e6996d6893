#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/io.hpp"
#include "fairtab/metrics.hpp"

namespace fairtab {

// Evaluation of one trained model on one holdout split.
struct AttrFoldMetrics {
  std::string attribute;
  std::vector<std::string> subgroups;
  std::vector<std::optional<double>> dpd;  // per task
  std::vector<std::optional<double>> eod;
  std::vector<CdfTable> cdf;  // per task
};

struct FoldReport {
  std::vector<std::string> tasks;
  std::vector<std::optional<double>> auroc;  // per task; nullopt = undefined metric
  std::vector<std::optional<double>> auprc;
  std::vector<AttrFoldMetrics> fairness;
};

// Across-fold aggregation (mean +- sample sd over the folds where the metric
// was defined). Undefined metrics stay null in reports, never silently zero.
struct MetricsReport {
  std::vector<std::string> tasks;
  std::size_t folds = 0;
  std::vector<std::optional<MeanSd>> auroc;
  std::vector<std::optional<MeanSd>> auprc;
  std::optional<double> diff_auroc;  // max - min of per-task means
  std::optional<double> diff_auprc;

  struct AttrAgg {
    std::string attribute;
    std::vector<std::string> subgroups;
    std::vector<std::optional<MeanSd>> dpd;
    std::vector<std::optional<MeanSd>> eod;
    std::vector<CdfTable> cdf;  // per task, curves averaged pointwise over folds
  };
  std::vector<AttrAgg> fairness;

  nlohmann::ordered_json to_json() const {
    auto opt_arr = [](const std::vector<std::optional<MeanSd>>& xs, bool sd) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& x : xs) {
        if (x)
          a.push_back(sd ? x->sd : x->mean);
        else
          a.push_back(nullptr);
      }
      return a;
    };
    nlohmann::ordered_json j;
    j["tasks"] = tasks;
    j["folds"] = folds;
    j["auroc_mean"] = opt_arr(auroc, false);
    j["auroc_sd"] = opt_arr(auroc, true);
    j["auprc_mean"] = opt_arr(auprc, false);
    j["auprc_sd"] = opt_arr(auprc, true);
    j["diff_auroc"] = diff_auroc ? nlohmann::ordered_json(*diff_auroc) : nullptr;
    j["diff_auprc"] = diff_auprc ? nlohmann::ordered_json(*diff_auprc) : nullptr;
    j["fairness"] = nlohmann::ordered_json::array();
    for (const auto& attr : fairness) {
      nlohmann::ordered_json a;
      a["attribute"] = attr.attribute;
      a["subgroups"] = attr.subgroups;
      a["dpd_mean"] = opt_arr(attr.dpd, false);
      a["dpd_sd"] = opt_arr(attr.dpd, true);
      a["eod_mean"] = opt_arr(attr.eod, false);
      a["eod_sd"] = opt_arr(attr.eod, true);
      a["cdf"] = nlohmann::ordered_json::array();
      for (std::size_t m = 0; m < attr.cdf.size(); ++m) {
        for (const auto& curve : attr.cdf[m].curves) {
          a["cdf"].push_back({{"task", tasks[m]},
                              {"subgroup", attr.subgroups[static_cast<std::size_t>(curve.subgroup)]},
                              {"grid", attr.cdf[m].grid},
                              {"cdf", curve.cdf}});
        }
      }
      j["fairness"].push_back(std::move(a));
    }
    return j;
  }

  // columns: task, attribute, subgroup, x, cdf
  std::string cdf_csv() const {
    std::string out = "task,attribute,subgroup,x,cdf\n";
    for (const auto& attr : fairness) {
      for (std::size_t m = 0; m < attr.cdf.size(); ++m) {
        for (const auto& curve : attr.cdf[m].curves) {
          for (std::size_t x = 0; x < attr.cdf[m].grid.size(); ++x) {
            out += tasks[m] + "," + attr.attribute + "," +
                   attr.subgroups[static_cast<std::size_t>(curve.subgroup)] + "," +
                   format_double(attr.cdf[m].grid[x]) + "," + format_double(curve.cdf[x]) + "\n";
          }
        }
      }
    }
    return out;
  }
};

inline MetricsReport aggregate_reports(std::span<const FoldReport> reports) {
  if (reports.empty()) throw ContractError("aggregate_reports: no folds");
  MetricsReport out;
  out.tasks = reports[0].tasks;
  out.folds = reports.size();
  const std::size_t m_count = out.tasks.size();

  auto aggregate_opt = [&](auto&& getter) {
    std::vector<std::optional<MeanSd>> agg(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      std::vector<double> vals;
      for (const auto& r : reports) {
        const auto& v = getter(r, m);
        if (v) vals.push_back(*v);
      }
      if (!vals.empty()) agg[m] = mean_sd(vals);
    }
    return agg;
  };
  out.auroc = aggregate_opt([](const FoldReport& r, std::size_t m) { return r.auroc[m]; });
  out.auprc = aggregate_opt([](const FoldReport& r, std::size_t m) { return r.auprc[m]; });

  auto diff_of = [&](const std::vector<std::optional<MeanSd>>& xs) -> std::optional<double> {
    double lo = 2.0, hi = -2.0;
    std::size_t defined = 0;
    for (const auto& x : xs) {
      if (!x) continue;
      ++defined;
      lo = std::min(lo, x->mean);
      hi = std::max(hi, x->mean);
    }
    if (defined == 0) return std::nullopt;
    return hi - lo;
  };
  out.diff_auroc = diff_of(out.auroc);
  out.diff_auprc = diff_of(out.auprc);

  // fairness blocks share attribute order across folds
  for (std::size_t ai = 0; ai < reports[0].fairness.size(); ++ai) {
    MetricsReport::AttrAgg agg;
    agg.attribute = reports[0].fairness[ai].attribute;
    agg.subgroups = reports[0].fairness[ai].subgroups;
    for (std::size_t m = 0; m < m_count; ++m) {
      std::vector<double> dvals, evals;
      for (const auto& r : reports) {
        if (r.fairness[ai].dpd[m]) dvals.push_back(*r.fairness[ai].dpd[m]);
        if (r.fairness[ai].eod[m]) evals.push_back(*r.fairness[ai].eod[m]);
      }
      agg.dpd.push_back(dvals.empty() ? std::nullopt : std::optional<MeanSd>(mean_sd(dvals)));
      agg.eod.push_back(evals.empty() ? std::nullopt : std::optional<MeanSd>(mean_sd(evals)));
    }
    // pointwise mean of subgroup CDF curves over the folds where present
    for (std::size_t m = 0; m < m_count; ++m) {
      CdfTable merged;
      merged.grid = reports[0].fairness[ai].cdf[m].grid;
      const std::size_t g_count = agg.subgroups.size();
      for (std::size_t g = 0; g < g_count; ++g) {
        std::vector<double> sum(merged.grid.size(), 0.0);
        std::size_t found = 0;
        for (const auto& r : reports) {
          for (const auto& curve : r.fairness[ai].cdf[m].curves) {
            if (curve.subgroup == static_cast<int>(g)) {
              ++found;
              for (std::size_t x = 0; x < sum.size(); ++x) sum[x] += curve.cdf[x];
            }
          }
        }
        if (found == 0) {
          merged.empty_subgroups.push_back(static_cast<int>(g));
          continue;
        }
        CdfCurve curve;
        curve.subgroup = static_cast<int>(g);
        for (double s : sum) curve.cdf.push_back(s / static_cast<double>(found));
        merged.curves.push_back(std::move(curve));
      }
      agg.cdf.push_back(std::move(merged));
    }
    out.fairness.push_back(std::move(agg));
  }
  return out;
}

}  // namespace fairtab
