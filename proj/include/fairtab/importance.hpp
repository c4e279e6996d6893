#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <future>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fairtab/dataset.hpp"
#include "fairtab/metrics.hpp"
#include "fairtab/model.hpp"

namespace fairtab {

// Thread cap for internally parallel loops: FAIRTAB_THREADS when set,
// otherwise the hardware concurrency.
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("FAIRTAB_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

struct ImportanceEntry {
  std::string feature;
  double mean_drop = 0.0;  // baseline AUROC minus mean permuted AUROC
  double sd = 0.0;
  std::size_t skipped = 0;  // repetitions with an undefined permuted metric
};

struct ImportanceTable {
  std::vector<std::string> tasks;
  std::vector<std::optional<double>> baseline_auroc;        // per task
  std::vector<std::vector<ImportanceEntry>> per_task;       // [task][feature]

  // Rank of a feature (1 = most important) under the top_k ordering.
  std::optional<std::size_t> rank_of(std::size_t task, const std::string& feature) const;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tasks"] = tasks;
    j["baseline_auroc"] = nlohmann::ordered_json::array();
    for (const auto& b : baseline_auroc)
      j["baseline_auroc"].push_back(b ? nlohmann::ordered_json(*b) : nullptr);
    j["importance"] = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < per_task.size(); ++m) {
      for (const auto& e : per_task[m]) {
        j["importance"].push_back({{"task", tasks[m]},
                                   {"feature", e.feature},
                                   {"mean_drop", e.mean_drop},
                                   {"sd", e.sd},
                                   {"skipped", e.skipped}});
      }
    }
    return j;
  }

  // columns: task, feature, mean_drop, sd, rank
  std::string csv() const;
};

// Descending mean drop, ties broken by feature name.
inline std::vector<ImportanceEntry> top_k(const ImportanceTable& table, std::size_t task,
                                          std::size_t k) {
  std::vector<ImportanceEntry> ranked = table.per_task.at(task);
  if (k > ranked.size()) throw ContractError("top_k: k exceeds the feature count");
  std::sort(ranked.begin(), ranked.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
    if (a.mean_drop != b.mean_drop) return a.mean_drop > b.mean_drop;
    return a.feature < b.feature;
  });
  ranked.resize(k);
  return ranked;
}

inline std::optional<std::size_t> ImportanceTable::rank_of(std::size_t task,
                                                           const std::string& feature) const {
  auto ranked = top_k(*this, task, per_task.at(task).size());
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i].feature == feature) return i + 1;
  return std::nullopt;
}

inline std::string ImportanceTable::csv() const {
  std::string out = "task,feature,mean_drop,sd,rank\n";
  for (std::size_t m = 0; m < per_task.size(); ++m) {
    auto ranked = top_k(*this, m, per_task[m].size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      out += tasks[m] + "," + ranked[i].feature + "," + format_double(ranked[i].mean_drop) + "," +
             format_double(ranked[i].sd) + "," + std::to_string(i + 1) + "\n";
    }
  }
  return out;
}

namespace detail {

// All model input columns: categorical feature view first, then continuous.
struct InputColumn {
  std::string name;
  bool categorical = false;
  std::size_t index = 0;  // into ds.cat or ds.cont
};

inline std::vector<InputColumn> input_columns(const Schema& schema) {
  std::vector<InputColumn> cols;
  const auto features = schema.feature_columns();
  for (std::size_t j = 0; j < features.size(); ++j)
    cols.push_back({features[j].name, true, j});
  for (std::size_t j = 0; j < schema.continuous.size(); ++j)
    cols.push_back({schema.continuous[j], false, j});
  return cols;
}

}  // namespace detail

// Permutation feature importance on a holdout: shuffle one input column
// across the split's rows (R independent permutations with a per-feature
// seeded generator), recompute each task's AUROC, report the mean drop from
// the unpermuted baseline. Repetitions with an undefined permuted AUROC are
// skipped and counted. `identity_check` replaces the shuffles with the
// identity permutation (self-test: every drop is exactly zero).
inline ImportanceTable permutation_importance(ModelParams& params, const TabularDataset& prepared,
                                              std::span<const std::size_t> rows, std::size_t repeats,
                                              std::uint64_t seed, bool identity_check = false) {
  if (repeats < 1) throw ContractError("permutation_importance: repeats must be >= 1");
  if (rows.empty()) throw ContractError("permutation_importance: empty split");

  ImportanceTable table;
  const std::size_t m_count = params.config.tasks;
  std::vector<std::size_t> task_cols(m_count);
  std::iota(task_cols.begin(), task_cols.end(), std::size_t{0});
  for (std::size_t m = 0; m < m_count; ++m) table.tasks.push_back(prepared.schema.tasks[m]);

  std::vector<std::vector<std::uint8_t>> labels(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    labels[m].resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[m][i] = prepared.labels[m][rows[i]];
  }

  const auto base_probs = predict_probabilities(params, prepared, rows);
  for (std::size_t m = 0; m < m_count; ++m)
    table.baseline_auroc.push_back(auroc(base_probs[m], labels[m]));

  const auto columns = detail::input_columns(prepared.schema);
  std::vector<std::vector<ImportanceEntry>> by_feature(columns.size());

  auto run_feature = [&](std::size_t f) {
    const auto& col = columns[f];
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (f + 1)));
    std::vector<std::vector<double>> drops(m_count);
    std::vector<std::size_t> skipped(m_count, 0);
    std::vector<std::size_t> perm(rows.size());
    TabularDataset shuffled = prepared;  // only this feature's column mutates below
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      if (!identity_check) std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (col.categorical)
          shuffled.cat[col.index][rows[i]] = prepared.cat[col.index][rows[perm[i]]];
        else
          shuffled.cont[col.index][rows[i]] = prepared.cont[col.index][rows[perm[i]]];
      }
      const auto probs = predict_probabilities(params, shuffled, rows);
      for (std::size_t m = 0; m < m_count; ++m) {
        const auto permuted = auroc(probs[m], labels[m]);
        if (!permuted || !table.baseline_auroc[m]) {
          ++skipped[m];
          continue;
        }
        drops[m].push_back(*table.baseline_auroc[m] - *permuted);
      }
    }
    std::vector<ImportanceEntry> entries(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      ImportanceEntry e;
      e.feature = col.name;
      e.skipped = skipped[m];
      if (!drops[m].empty()) {
        const auto ms = mean_sd(drops[m]);
        e.mean_drop = ms.mean;
        e.sd = ms.sd;
      }
      entries[m] = std::move(e);
    }
    return entries;
  };

  const std::size_t workers = std::min(thread_cap(), columns.size());
  if (workers <= 1) {
    for (std::size_t f = 0; f < columns.size(); ++f) by_feature[f] = run_feature(f);
  } else {
    std::vector<std::future<std::vector<ImportanceEntry>>> futures(columns.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::promise<std::vector<ImportanceEntry>>> promises(columns.size());
    for (std::size_t f = 0; f < columns.size(); ++f) futures[f] = promises[f].get_future();
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t f = next.fetch_add(1);
          if (f >= columns.size()) break;
          promises[f].set_value(run_feature(f));
        }
      });
    }
    for (auto& t : pool) t.join();
    for (std::size_t f = 0; f < columns.size(); ++f) by_feature[f] = futures[f].get();
  }

  table.per_task.assign(m_count, {});
  for (std::size_t m = 0; m < m_count; ++m)
    for (std::size_t f = 0; f < columns.size(); ++f)
      table.per_task[m].push_back(by_feature[f][m]);
  return table;
}

}  // namespace fairtab
