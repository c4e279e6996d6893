#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"

namespace fairtab {

struct CategoricalColumn {
  std::string name;
  std::vector<std::string> categories;  // code order; code == categories.size() means missing
};

struct SensitiveAttribute {
  std::string name;
  std::vector<std::string> subgroups;
  bool use_as_feature = true;  // metadata-only when false
};

// Column roles of a dataset. Sensitive attributes flagged use_as_feature also
// act as categorical model inputs (their subgroups are the categories).
struct Schema {
  std::vector<CategoricalColumn> categorical;
  std::vector<std::string> continuous;
  std::vector<std::string> tasks;
  std::vector<SensitiveAttribute> sensitive;

  // One entry per categorical model input: declared categoricals first, then
  // sensitive-as-feature columns, in schema order.
  struct FeatureColumn {
    std::string name;
    std::size_t cardinality = 0;  // category count d_j, excluding the missing slot
    bool from_sensitive = false;
    std::size_t source = 0;  // index into categorical or sensitive
  };

  std::vector<FeatureColumn> feature_columns() const {
    std::vector<FeatureColumn> cols;
    for (std::size_t i = 0; i < categorical.size(); ++i)
      cols.push_back({categorical[i].name, categorical[i].categories.size(), false, i});
    for (std::size_t i = 0; i < sensitive.size(); ++i)
      if (sensitive[i].use_as_feature)
        cols.push_back({sensitive[i].name, sensitive[i].subgroups.size(), true, i});
    return cols;
  }

  std::size_t feature_count() const { return feature_columns().size(); }  // p
  std::size_t continuous_count() const { return continuous.size(); }      // q
  std::size_t task_count() const { return tasks.size(); }                 // M

  std::optional<std::size_t> sensitive_index(const std::string& name) const {
    for (std::size_t i = 0; i < sensitive.size(); ++i)
      if (sensitive[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> task_index(const std::string& name) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i] == name) return i;
    return std::nullopt;
  }

  void validate() const {
    if (tasks.empty()) throw ConfigError("schema: needs at least one task column");
    std::set<std::string> names;
    auto claim = [&](const std::string& n, const char* role) {
      if (n.empty()) throw ConfigError(std::string("schema: empty ") + role + " column name");
      if (!names.insert(n).second)
        throw ConfigError("schema: duplicate column name '" + n + "'");
    };
    for (const auto& c : categorical) {
      claim(c.name, "categorical");
      if (c.categories.empty())
        throw ConfigError("schema: categorical '" + c.name + "' has no categories");
      std::set<std::string> cats(c.categories.begin(), c.categories.end());
      if (cats.size() != c.categories.size())
        throw ConfigError("schema: categorical '" + c.name + "' has duplicate categories");
    }
    for (const auto& c : continuous) claim(c, "continuous");
    for (const auto& t : tasks) claim(t, "task");
    for (const auto& s : sensitive) {
      claim(s.name, "sensitive");
      if (s.subgroups.size() < 2)
        throw ConfigError("schema: sensitive '" + s.name + "' needs >= 2 subgroups");
    }
  }

  // Column order in CSV files: categorical, continuous, tasks, sensitive.
  std::vector<std::string> csv_columns() const {
    std::vector<std::string> cols;
    for (const auto& c : categorical) cols.push_back(c.name);
    for (const auto& c : continuous) cols.push_back(c);
    for (const auto& t : tasks) cols.push_back(t);
    for (const auto& s : sensitive) cols.push_back(s.name);
    return cols;
  }

  static Schema from_json(const nlohmann::json& j) {
    Schema s;
    for (const auto& c : j.at("categorical")) {
      CategoricalColumn col;
      col.name = c.at("name").get<std::string>();
      col.categories = c.at("categories").get<std::vector<std::string>>();
      s.categorical.push_back(std::move(col));
    }
    for (const auto& c : j.at("continuous")) s.continuous.push_back(c.get<std::string>());
    for (const auto& t : j.at("tasks")) s.tasks.push_back(t.get<std::string>());
    for (const auto& a : j.at("sensitive")) {
      SensitiveAttribute attr;
      attr.name = a.at("name").get<std::string>();
      attr.subgroups = a.at("subgroups").get<std::vector<std::string>>();
      attr.use_as_feature = a.value("feature", true);
      s.sensitive.push_back(std::move(attr));
    }
    s.validate();
    return s;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["categorical"] = nlohmann::ordered_json::array();
    for (const auto& c : categorical)
      j["categorical"].push_back({{"name", c.name}, {"categories", c.categories}});
    j["continuous"] = continuous;
    j["tasks"] = tasks;
    j["sensitive"] = nlohmann::ordered_json::array();
    for (const auto& s : sensitive)
      j["sensitive"].push_back(
          {{"name", s.name}, {"subgroups", s.subgroups}, {"feature", s.use_as_feature}});
    return j;
  }

  static Schema load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("schema " + path.string() + ": " + e.what());
    }
    try {
      return from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("schema " + path.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    write_file(path, to_json().dump(2) + "\n");
  }
};

}  // namespace fairtab
