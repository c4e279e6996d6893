#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/autodiff.hpp"
#include "fairtab/dataset.hpp"
#include "fairtab/errors.hpp"

namespace fairtab {

struct GenTaskSpec {
  std::string name;
  double prevalence = 0.1;
  // Optional explicit ground-truth weights by feature name. When set, the
  // task depends on exactly these features; otherwise weights for every
  // feature are drawn at random. A weight w on a continuous feature is the
  // usual linear coefficient; on a categorical feature with K categories it
  // contributes a centered ramp over the category codes spanning [-w, +w].
  std::map<std::string, double> weights;
};

struct GenAttrSpec {
  std::string name;
  std::vector<std::string> subgroups;
  std::vector<double> proportions;
};

// Settings for the synthetic generator. Labels come from a logistic ground
// truth over the features plus subgroup-dependent intercept shifts whose
// spread equals bias[attribute][task].
struct GenConfig {
  std::size_t n = 1000;
  std::size_t p = 4;  // categorical feature count (sensitive columns add to this)
  std::size_t q = 4;  // continuous feature count
  std::size_t categories_per_feature = 4;
  double feature_scale = 1.0;
  double missing_rate = 0.0;
  std::vector<GenTaskSpec> tasks;
  std::vector<GenAttrSpec> attributes;
  std::vector<std::vector<double>> bias;  // [attribute][task]
  std::uint64_t seed = 0;

  void validate() const {
    if (tasks.empty()) throw ConfigError("generator: tasks[] must not be empty");
    for (const auto& t : tasks) {
      if (!(t.prevalence > 0.0 && t.prevalence < 1.0)) {
        throw ConfigError("generator: prevalence for '" + t.name + "' must lie in (0,1), got " +
                          format_double(t.prevalence));
      }
    }
    for (const auto& a : attributes) {
      if (a.subgroups.size() < 2)
        throw ConfigError("generator: attribute '" + a.name + "' needs >= 2 subgroups");
      if (a.proportions.size() != a.subgroups.size())
        throw ConfigError("generator: attribute '" + a.name + "' proportions/subgroups mismatch");
      double sum = 0.0;
      for (double v : a.proportions) {
        if (v <= 0.0) throw ConfigError("generator: non-positive subgroup proportion");
        sum += v;
      }
      if (std::fabs(sum - 1.0) > 1e-6)
        throw ConfigError("generator: proportions of '" + a.name + "' must sum to 1");
    }
    if (!bias.empty()) {
      if (bias.size() != attributes.size())
        throw ConfigError("generator: bias[][] must have one row per attribute");
      for (const auto& row : bias) {
        if (row.size() != tasks.size())
          throw ConfigError("generator: bias[][] must have one column per task");
      }
    }
    if (missing_rate < 0.0 || missing_rate >= 1.0)
      throw ConfigError("generator: missing_rate must lie in [0,1)");
  }

  // Mirrors the class-imbalance profile reported for the real registry: the
  // extremes 23.77% and 4.10% are anchored, interior values are defaults.
  static GenConfig default_profile() {
    GenConfig c;
    c.n = 20000;
    c.p = 4;
    c.q = 6;
    c.tasks = {{"task_malignancy", 0.041, {}},
               {"task_diabetes", 0.10, {}},
               {"task_rejection", 0.2377, {}},
               {"task_infection", 0.13, {}},
               {"task_cardio", 0.18, {}}};
    c.attributes = {{"age_group", {"adult", "pediatric"}, {0.85, 0.15}},
                    {"sex", {"male", "female"}, {0.6, 0.4}}};
    c.bias = {{0.0, 0.0, 1.2, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0, 0.0}};
    return c;
  }

  static GenConfig from_json(const nlohmann::json& j) {
    GenConfig c;
    c.n = j.at("n").get<std::size_t>();
    c.p = j.at("p").get<std::size_t>();
    c.q = j.at("q").get<std::size_t>();
    c.categories_per_feature = j.value("categories_per_feature", std::size_t{4});
    c.feature_scale = j.value("feature_scale", 1.0);
    c.missing_rate = j.value("missing_rate", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    for (const auto& t : j.at("tasks")) {
      GenTaskSpec spec;
      spec.name = t.at("name").get<std::string>();
      spec.prevalence = t.at("prevalence").get<double>();
      if (t.contains("weights"))
        spec.weights = t.at("weights").get<std::map<std::string, double>>();
      c.tasks.push_back(std::move(spec));
    }
    if (j.contains("attributes")) {
      for (const auto& a : j.at("attributes")) {
        c.attributes.push_back({a.at("name").get<std::string>(),
                                a.at("subgroups").get<std::vector<std::string>>(),
                                a.at("proportions").get<std::vector<double>>()});
      }
    }
    if (j.contains("bias")) c.bias = j.at("bias").get<std::vector<std::vector<double>>>();
    c.validate();
    return c;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["p"] = p;
    j["q"] = q;
    j["categories_per_feature"] = categories_per_feature;
    j["feature_scale"] = feature_scale;
    j["missing_rate"] = missing_rate;
    j["seed"] = seed;
    j["tasks"] = nlohmann::ordered_json::array();
    for (const auto& t : tasks) {
      nlohmann::ordered_json tj{{"name", t.name}, {"prevalence", t.prevalence}};
      if (!t.weights.empty()) tj["weights"] = t.weights;
      j["tasks"].push_back(std::move(tj));
    }
    j["attributes"] = nlohmann::ordered_json::array();
    for (const auto& a : attributes) {
      j["attributes"].push_back(
          {{"name", a.name}, {"subgroups", a.subgroups}, {"proportions", a.proportions}});
    }
    j["bias"] = bias;
    return j;
  }
};

namespace detail {

// Intercept such that the sample-mean of sigmoid(score + b) hits the target.
inline double calibrate_intercept(const std::vector<double>& scores, double target) {
  double lo = -30.0, hi = 30.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double s : scores) mean += stable_sigmoid(s + mid);
    mean /= static_cast<double>(scores.size());
    (mean < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline TabularDataset synthesize(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Schema schema;
  for (std::size_t j = 0; j < config.p; ++j) {
    CategoricalColumn col;
    col.name = "cat_" + std::to_string(j);
    for (std::size_t k = 0; k < config.categories_per_feature; ++k)
      col.categories.push_back("c" + std::to_string(k));
    schema.categorical.push_back(std::move(col));
  }
  for (std::size_t j = 0; j < config.q; ++j) schema.continuous.push_back("num_" + std::to_string(j));
  for (const auto& t : config.tasks) schema.tasks.push_back(t.name);
  for (const auto& a : config.attributes)
    schema.sensitive.push_back({a.name, a.subgroups, true});
  schema.validate();

  const std::size_t m_count = config.tasks.size();

  // ground-truth model (drawn before any row so the stream layout is stable)
  std::vector<std::vector<double>> w_cont(m_count, std::vector<double>(config.q, 0.0));
  std::vector<std::vector<std::vector<double>>> cat_effect(
      m_count, std::vector<std::vector<double>>(config.p,
                                                std::vector<double>(config.categories_per_feature)));
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t j = 0; j < config.q; ++j) w_cont[m][j] = normal(rng) * config.feature_scale;
    for (std::size_t j = 0; j < config.p; ++j)
      for (std::size_t k = 0; k < config.categories_per_feature; ++k)
        cat_effect[m][j][k] = normal(rng) * 0.5 * config.feature_scale;
    if (!config.tasks[m].weights.empty()) {
      std::fill(w_cont[m].begin(), w_cont[m].end(), 0.0);
      for (auto& per_feature : cat_effect[m])
        std::fill(per_feature.begin(), per_feature.end(), 0.0);
      for (const auto& [name, weight] : config.tasks[m].weights) {
        bool found = false;
        for (std::size_t j = 0; j < config.q; ++j) {
          if (schema.continuous[j] == name) {
            w_cont[m][j] = weight;
            found = true;
          }
        }
        for (std::size_t j = 0; j < config.p; ++j) {
          if (schema.categorical[j].name != name) continue;
          const auto k_count = config.categories_per_feature;
          for (std::size_t k = 0; k < k_count; ++k) {
            cat_effect[m][j][k] =
                weight * (2.0 * static_cast<double>(k) / static_cast<double>(k_count - 1) - 1.0);
          }
          found = true;
        }
        if (!found) {
          throw ConfigError("generator: weights for task '" + config.tasks[m].name +
                            "' reference unknown feature '" + name + "'");
        }
      }
    }
  }

  TabularDataset ds = TabularDataset::empty(schema);
  ds.n = config.n;
  for (auto& c : ds.cat) c.resize(ds.n);
  for (auto& c : ds.cont) c.resize(ds.n);
  for (auto& c : ds.labels) c.resize(ds.n);
  for (auto& c : ds.sensitive) c.resize(ds.n);

  std::uniform_int_distribution<int> cat_draw(0, static_cast<int>(config.categories_per_feature) - 1);
  for (std::size_t r = 0; r < ds.n; ++r) {
    for (std::size_t a = 0; a < config.attributes.size(); ++a) {
      double u = unit(rng);
      int g = 0;
      for (; g + 1 < static_cast<int>(config.attributes[a].proportions.size()); ++g) {
        u -= config.attributes[a].proportions[static_cast<std::size_t>(g)];
        if (u < 0.0) break;
      }
      ds.sensitive[a][r] = g;
    }
    for (std::size_t j = 0; j < config.p; ++j) ds.cat[j][r] = cat_draw(rng);
    for (std::size_t j = 0; j < config.q; ++j) ds.cont[j][r] = normal(rng);
  }
  // sensitive-as-feature mirror
  for (std::size_t a = 0; a < config.attributes.size(); ++a)
    for (std::size_t r = 0; r < ds.n; ++r) ds.cat[config.p + a][r] = ds.sensitive[a][r];

  // labels from the logistic ground truth; subgroup shift spread equals the
  // bias coefficient (offsets are centered and span exactly 1)
  for (std::size_t m = 0; m < m_count; ++m) {
    std::vector<double> score(ds.n, 0.0);
    for (std::size_t r = 0; r < ds.n; ++r) {
      double z = 0.0;
      for (std::size_t j = 0; j < config.q; ++j) z += w_cont[m][j] * ds.cont[j][r];
      for (std::size_t j = 0; j < config.p; ++j)
        z += cat_effect[m][j][static_cast<std::size_t>(ds.cat[j][r])];
      for (std::size_t a = 0; a < config.attributes.size(); ++a) {
        if (config.bias.empty()) break;
        const std::size_t groups = config.attributes[a].subgroups.size();
        const double offset = static_cast<double>(ds.sensitive[a][r]) /
                                  static_cast<double>(groups - 1) -
                              0.5;
        z += config.bias[a][m] * offset;
      }
      score[r] = z;
    }
    const double b0 = detail::calibrate_intercept(score, config.tasks[m].prevalence);
    for (std::size_t r = 0; r < ds.n; ++r) {
      ds.labels[m][r] = unit(rng) < stable_sigmoid(score[r] + b0) ? 1 : 0;
    }
  }

  if (config.missing_rate > 0.0) {
    for (std::size_t j = 0; j < config.p; ++j) {
      for (std::size_t r = 0; r < ds.n; ++r) {
        if (unit(rng) < config.missing_rate)
          ds.cat[j][r] = static_cast<int>(config.categories_per_feature);
      }
    }
    for (std::size_t j = 0; j < config.q; ++j) {
      for (std::size_t r = 0; r < ds.n; ++r) {
        if (unit(rng) < config.missing_rate)
          ds.cont[j][r] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }

  ds.validate();
  return ds;
}

}  // namespace fairtab
