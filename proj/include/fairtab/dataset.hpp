#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"
#include "fairtab/schema.hpp"

namespace fairtab {

// Column-typed rows. Categorical features are stored as integer codes where
// code d_j (the category count) is the missing-value slot. Continuous cells
// hold NaN until imputation. Sensitive codes use -1 for unknown membership.
struct TabularDataset {
  Schema schema;
  std::size_t n = 0;
  std::vector<std::vector<int>> cat;              // [feature_column][row]
  std::vector<std::vector<double>> cont;          // [continuous_column][row]
  std::vector<std::vector<std::uint8_t>> labels;  // [task][row]
  std::vector<std::vector<int>> sensitive;        // [attribute][row]

  static TabularDataset empty(Schema s) {
    s.validate();
    TabularDataset ds;
    ds.cat.resize(s.feature_count());
    ds.cont.resize(s.continuous_count());
    ds.labels.resize(s.task_count());
    ds.sensitive.resize(s.sensitive.size());
    ds.schema = std::move(s);
    return ds;
  }

  void validate() const {
    const auto features = schema.feature_columns();
    for (std::size_t c = 0; c < features.size(); ++c) {
      for (int code : cat[c]) {
        if (code < 0 || code > static_cast<int>(features[c].cardinality)) {
          throw DataError("dataset: code " + std::to_string(code) + " out of range for '" +
                          features[c].name + "'");
        }
      }
    }
    for (const auto& col : labels) {
      for (auto v : col) {
        if (v > 1) throw DataError("dataset: label outside {0,1}");
      }
    }
  }
};

namespace detail {

inline std::size_t category_code(const std::vector<std::string>& cats, const std::string& cell,
                                 const std::string& column, std::size_t row) {
  if (cell.empty()) return cats.size();  // missing slot
  const auto it = std::find(cats.begin(), cats.end(), cell);
  if (it == cats.end()) {
    throw DataError("column '" + column + "', row " + std::to_string(row) +
                    ": unknown category '" + cell + "'");
  }
  return static_cast<std::size_t>(it - cats.begin());
}

}  // namespace detail

inline TabularDataset load_csv(const std::filesystem::path& data_path, const Schema& schema) {
  schema.validate();
  const auto lines = split_lines(read_file(data_path));
  if (lines.empty()) throw DataError(data_path.string() + ": missing header row");

  const auto header = split_csv_line(lines[0]);
  const auto expected = schema.csv_columns();
  std::vector<std::size_t> col_at(expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto it = std::find(header.begin(), header.end(), expected[i]);
    if (it == header.end()) {
      throw DataError(data_path.string() + ": missing required column '" + expected[i] + "'");
    }
    col_at[i] = static_cast<std::size_t>(it - header.begin());
  }
  for (const auto& h : header) {
    if (std::find(expected.begin(), expected.end(), h) == expected.end()) {
      throw DataError(data_path.string() + ": unknown column '" + h + "'");
    }
  }

  TabularDataset ds = TabularDataset::empty(schema);
  const auto features = schema.feature_columns();
  ds.n = lines.size() - 1;
  for (auto& c : ds.cat) c.resize(ds.n);
  for (auto& c : ds.cont) c.resize(ds.n);
  for (auto& c : ds.labels) c.resize(ds.n);
  for (auto& c : ds.sensitive) c.resize(ds.n);

  for (std::size_t r = 0; r < ds.n; ++r) {
    const auto cells = split_csv_line(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw DataError(data_path.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    std::size_t ci = 0;
    // declared categoricals
    for (std::size_t j = 0; j < schema.categorical.size(); ++j, ++ci) {
      ds.cat[j][r] = static_cast<int>(detail::category_code(
          schema.categorical[j].categories, cells[col_at[ci]], schema.categorical[j].name, r + 1));
    }
    for (std::size_t j = 0; j < schema.continuous.size(); ++j, ++ci) {
      const std::string& cell = cells[col_at[ci]];
      ds.cont[j][r] = cell.empty()
                          ? std::numeric_limits<double>::quiet_NaN()
                          : parse_double(cell, "column '" + schema.continuous[j] + "', row " +
                                                   std::to_string(r + 1));
    }
    for (std::size_t j = 0; j < schema.tasks.size(); ++j, ++ci) {
      const std::string& cell = cells[col_at[ci]];
      if (cell != "0" && cell != "1") {
        throw DataError("column '" + schema.tasks[j] + "', row " + std::to_string(r + 1) +
                        ": label must be 0 or 1, got '" + cell + "'");
      }
      ds.labels[j][r] = cell == "1" ? 1 : 0;
    }
    for (std::size_t j = 0; j < schema.sensitive.size(); ++j, ++ci) {
      const std::string& cell = cells[col_at[ci]];
      ds.sensitive[j][r] =
          cell.empty() ? -1
                       : static_cast<int>(detail::category_code(schema.sensitive[j].subgroups,
                                                                cell, schema.sensitive[j].name,
                                                                r + 1));
    }
  }

  // mirror sensitive-as-feature codes into the feature view (missing slot for unknown)
  std::size_t fc = schema.categorical.size();
  for (std::size_t j = 0; j < schema.sensitive.size(); ++j) {
    if (!schema.sensitive[j].use_as_feature) continue;
    for (std::size_t r = 0; r < ds.n; ++r) {
      const int code = ds.sensitive[j][r];
      ds.cat[fc][r] = code < 0 ? static_cast<int>(schema.sensitive[j].subgroups.size()) : code;
    }
    ++fc;
  }
  ds.validate();
  return ds;
}

inline void write_csv(const TabularDataset& ds, const std::filesystem::path& path) {
  std::string out;
  const auto cols = ds.schema.csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (std::size_t r = 0; r < ds.n; ++r) {
    std::vector<std::string> cells;
    for (std::size_t j = 0; j < ds.schema.categorical.size(); ++j) {
      const int code = ds.cat[j][r];
      const auto& cats = ds.schema.categorical[j].categories;
      cells.push_back(code < static_cast<int>(cats.size())
                          ? cats[static_cast<std::size_t>(code)]
                          : std::string{});
    }
    for (std::size_t j = 0; j < ds.cont.size(); ++j) {
      cells.push_back(std::isfinite(ds.cont[j][r]) ? format_double(ds.cont[j][r])
                                                   : std::string{});
    }
    for (std::size_t j = 0; j < ds.labels.size(); ++j)
      cells.emplace_back(ds.labels[j][r] ? "1" : "0");
    for (std::size_t j = 0; j < ds.sensitive.size(); ++j) {
      const int code = ds.sensitive[j][r];
      cells.push_back(code >= 0
                          ? ds.schema.sensitive[j].subgroups[static_cast<std::size_t>(code)]
                          : std::string{});
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  }
  write_file(path, out);
}

// Train-fold statistics applied to continuous columns: mean imputation of
// missing cells, optionally followed by a z-score using train mean/sd.
struct Preprocess {
  std::vector<double> impute_mean;
  bool standardize = false;
  std::vector<double> z_mean, z_sd;

  void apply(TabularDataset& ds) const {
    for (std::size_t j = 0; j < ds.cont.size(); ++j) {
      for (auto& v : ds.cont[j]) {
        if (!std::isfinite(v)) v = impute_mean[j];
        if (standardize) v = (v - z_mean[j]) / z_sd[j];
      }
    }
  }

  nlohmann::ordered_json to_json() const {
    return {{"impute_mean", impute_mean},
            {"standardize", standardize},
            {"z_mean", z_mean},
            {"z_sd", z_sd}};
  }

  static Preprocess from_json(const nlohmann::json& j) {
    Preprocess p;
    p.impute_mean = j.at("impute_mean").get<std::vector<double>>();
    p.standardize = j.at("standardize").get<bool>();
    p.z_mean = j.at("z_mean").get<std::vector<double>>();
    p.z_sd = j.at("z_sd").get<std::vector<double>>();
    return p;
  }
};

inline Preprocess fit_preprocess(const TabularDataset& ds, std::span<const std::size_t> train_idx,
                                 bool standardize) {
  if (train_idx.empty()) throw ContractError("fit_preprocess: empty train fold");
  Preprocess p;
  p.standardize = standardize;
  for (std::size_t j = 0; j < ds.cont.size(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r : train_idx) {
      if (std::isfinite(ds.cont[j][r])) {
        sum += ds.cont[j][r];
        ++count;
      }
    }
    if (count == 0) {
      throw DataError("impute: column '" + ds.schema.continuous[j] +
                      "' has no observed value in the train fold");
    }
    const double mean = sum / static_cast<double>(count);
    p.impute_mean.push_back(mean);
    // z-stats over train rows with missing cells already imputed by `mean`
    double zsum = 0.0;
    for (std::size_t r : train_idx)
      zsum += std::isfinite(ds.cont[j][r]) ? ds.cont[j][r] : mean;
    const double zmean = zsum / static_cast<double>(train_idx.size());
    double ss = 0.0;
    for (std::size_t r : train_idx) {
      const double v = std::isfinite(ds.cont[j][r]) ? ds.cont[j][r] : mean;
      ss += (v - zmean) * (v - zmean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(train_idx.size()));
    p.z_mean.push_back(zmean);
    p.z_sd.push_back(sd > 1e-12 ? sd : 1.0);
  }
  return p;
}

// Mean imputation only, as a standalone step.
inline TabularDataset impute_continuous(const TabularDataset& ds,
                                        std::span<const std::size_t> train_idx) {
  TabularDataset out = ds;
  fit_preprocess(ds, train_idx, false).apply(out);
  return out;
}

struct FoldIndices {
  std::vector<std::size_t> train, val, test;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<FoldIndices> folds;
};

// Independent seeded shuffles, each partitioned by the given fractions
// (fold k uses seed + k). Partitions are disjoint and exhaustive.
inline SplitPlan make_splits(std::size_t n, std::size_t folds,
                             std::array<double, 3> fractions, std::uint64_t seed) {
  if (n < 5) throw ContractError("make_splits: need n >= 5, got " + std::to_string(n));
  if (folds == 0) throw ConfigError("make_splits: folds must be >= 1");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError("make_splits: fractions sum to " + format_double(total) + ", expected 1");
  }
  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed + f);
    std::shuffle(order.begin(), order.end(), rng);
    const auto cut1 = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto cut2 = static_cast<std::size_t>(
        std::llround((fractions[0] + fractions[1]) * static_cast<double>(n)));
    FoldIndices fi;
    fi.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut1));
    fi.val.assign(order.begin() + static_cast<std::ptrdiff_t>(cut1),
                  order.begin() + static_cast<std::ptrdiff_t>(cut2));
    fi.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut2), order.end());
    plan.folds.push_back(std::move(fi));
  }
  return plan;
}

// Per-subgroup per-task prevalence, plus the max gap per task.
struct SubgroupSummary {
  std::string attribute;
  std::vector<std::string> subgroups;
  std::vector<std::size_t> counts;            // per subgroup
  std::vector<std::vector<double>> prevalence;  // [subgroup][task]
  std::vector<double> max_gap;                // per task, over populated subgroups

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["attribute"] = attribute;
    j["subgroups"] = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < subgroups.size(); ++g) {
      j["subgroups"].push_back(
          {{"name", subgroups[g]}, {"count", counts[g]}, {"prevalence", prevalence[g]}});
    }
    j["max_gap"] = max_gap;
    return j;
  }
};

inline SubgroupSummary summarize(const TabularDataset& ds, const std::string& attribute) {
  const auto ai = ds.schema.sensitive_index(attribute);
  if (!ai) throw ConfigError("summarize: unknown sensitive attribute '" + attribute + "'");
  const auto& attr = ds.schema.sensitive[*ai];
  const std::size_t g_count = attr.subgroups.size();
  const std::size_t m_count = ds.schema.task_count();

  SubgroupSummary s;
  s.attribute = attribute;
  s.subgroups = attr.subgroups;
  s.counts.assign(g_count, 0);
  s.prevalence.assign(g_count, std::vector<double>(m_count, 0.0));

  std::vector<std::vector<std::size_t>> hits(g_count, std::vector<std::size_t>(m_count, 0));
  for (std::size_t r = 0; r < ds.n; ++r) {
    const int g = ds.sensitive[*ai][r];
    if (g < 0) continue;
    const auto gi = static_cast<std::size_t>(g);
    ++s.counts[gi];
    for (std::size_t m = 0; m < m_count; ++m) hits[gi][m] += ds.labels[m][r];
  }
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t m = 0; m < m_count; ++m) {
      s.prevalence[g][m] =
          s.counts[g] ? static_cast<double>(hits[g][m]) / static_cast<double>(s.counts[g]) : 0.0;
    }
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    double lo = 2.0, hi = -1.0;
    for (std::size_t g = 0; g < g_count; ++g) {
      if (s.counts[g] == 0) continue;
      lo = std::min(lo, s.prevalence[g][m]);
      hi = std::max(hi, s.prevalence[g][m]);
    }
    s.max_gap.push_back(hi >= lo ? hi - lo : 0.0);
  }
  return s;
}

}  // namespace fairtab
