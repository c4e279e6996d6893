// fairtab command-line tool: synthetic data generation, training with the
// task-balancing / fairness-achieving objectives, evaluation, method
// comparison, permutation importance and CDF export.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairtab/fairtab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace fairtab;

namespace {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
};

struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  ordered_json config;
  std::vector<std::string> artifacts;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void add(const fs::path& p) { artifacts.push_back(p.string()); }

  void write(const fs::path& dir) {
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    ordered_json j;
    j["tool"] = std::string("fairtab ") + kVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["artifacts"] = artifacts;
    j["wall_clock_ms"] = ms;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }
};

void write_error_record(const std::string& out_dir, const std::string& kind,
                        const std::string& message, int exit_code,
                        const std::string& checkpoint = {}) {
  if (out_dir.empty()) return;
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = exit_code;
  if (!checkpoint.empty()) j["last_good_checkpoint"] = checkpoint;
  try {
    write_file(fs::path(out_dir) / "error.json", j.dump(2) + "\n");
  } catch (...) {
    // the error record is best effort; the stderr line below always happens
  }
}

json load_json_file(const std::string& path, const char* what) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " " + path + ": " + e.what());
  }
}

// --- synth ----------------------------------------------------------------

int cmd_synth(const GlobalOpts& g) {
  GenConfig cfg = g.config_path.empty()
                      ? GenConfig::default_profile()
                      : GenConfig::from_json(load_json_file(g.config_path, "generator config"));
  const std::uint64_t seed = g.seed.value_or(cfg.seed);
  cfg.seed = seed;
  cfg.validate();

  Manifest manifest;
  manifest.command = "synth";
  manifest.seed = seed;
  manifest.config = cfg.to_json();

  auto ds = synthesize(cfg, seed);
  const fs::path out(g.out_dir);
  write_csv(ds, out / "data.csv");
  ds.schema.save(out / "schema.json");
  manifest.add(out / "data.csv");
  manifest.add(out / "schema.json");

  // subgroup prevalence report per sensitive attribute
  ordered_json summary = ordered_json::array();
  for (const auto& attr : ds.schema.sensitive)
    summary.push_back(summarize(ds, attr.name).to_json());
  write_file(out / "summary.json", summary.dump(2) + "\n");
  manifest.add(out / "summary.json");

  manifest.write(out);
  if (!g.quiet) {
    std::printf("synth: wrote %zu rows, %zu tasks, %zu attributes -> %s\n", ds.n,
                ds.schema.task_count(), ds.schema.sensitive.size(), out.string().c_str());
  }
  return 0;
}

// --- shared train plumbing --------------------------------------------------

struct RunSpec {
  ModelConfig model;
  TrainConfig train;
  std::size_t folds = 1;
  std::array<double, 3> fractions{0.6, 0.2, 0.2};
};

RunSpec parse_run_spec(const json& j) {
  RunSpec spec;
  if (j.contains("model")) spec.model = ModelConfig::from_json(j.at("model"));
  if (j.contains("train")) spec.train = TrainConfig::from_json(j.at("train"));
  spec.folds = j.value("folds", std::size_t{1});
  if (j.contains("fractions")) {
    auto f = j.at("fractions").get<std::vector<double>>();
    if (f.size() != 3) throw ConfigError("config: fractions must have 3 entries");
    spec.fractions = {f[0], f[1], f[2]};
  }
  if (spec.folds < 1) throw ConfigError("config: folds must be >= 1");
  return spec;
}

ordered_json run_spec_json(const RunSpec& spec) {
  ordered_json j;
  j["model"] = spec.model.to_json();
  j["train"] = spec.train.to_json();
  j["folds"] = spec.folds;
  j["fractions"] = {spec.fractions[0], spec.fractions[1], spec.fractions[2]};
  return j;
}

ordered_json checkpoint_json(const ModelParams& params, const Preprocess& pre,
                             const Schema& schema, const TrainConfig& tc,
                             std::uint64_t split_seed, std::size_t fold_index,
                             const std::array<double, 3>& fractions,
                             std::span<const std::size_t> task_cols) {
  ordered_json j;
  j["version"] = 1;
  j["schema"] = schema.to_json();
  j["model"] = params_to_json(params);
  j["preprocess"] = pre.to_json();
  j["train_config"] = tc.to_json();
  j["split"] = {{"seed", split_seed},
                {"fold_index", fold_index},
                {"fractions", {fractions[0], fractions[1], fractions[2]}}};
  j["task_columns"] = std::vector<std::size_t>(task_cols.begin(), task_cols.end());
  return j;
}

struct LoadedCheckpoint {
  Schema schema;
  ModelParams params;
  Preprocess preprocess;
  TrainConfig train_config;
  std::uint64_t split_seed = 0;
  std::size_t fold_index = 0;
  std::array<double, 3> fractions{0.6, 0.2, 0.2};
  std::vector<std::size_t> task_columns;
};

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const json j = load_json_file(path, "checkpoint");
  if (j.value("version", 0) != 1)
    throw ConfigError("checkpoint " + path + ": unsupported version");
  LoadedCheckpoint c;
  c.schema = Schema::from_json(j.at("schema"));
  c.params = params_from_json(j.at("model"), c.schema);
  c.preprocess = Preprocess::from_json(j.at("preprocess"));
  c.train_config = TrainConfig::from_json(j.at("train_config"));
  c.split_seed = j.at("split").at("seed").get<std::uint64_t>();
  c.fold_index = j.at("split").at("fold_index").get<std::size_t>();
  auto f = j.at("split").at("fractions").get<std::vector<double>>();
  c.fractions = {f[0], f[1], f[2]};
  c.task_columns = j.at("task_columns").get<std::vector<std::size_t>>();
  return c;
}

// One full (train, evaluate) pass for one method on one seeded split.
// Single-task methods train one model per task and merge the per-task
// metrics into one report.
FoldReport run_method_fold(const TabularDataset& ds, const FoldIndices& fold,
                           const RunSpec& spec, std::span<const std::string> attributes,
                           bool quiet, const EpochHook& hook = {},
                           std::vector<TrainResult>* out_results = nullptr) {
  const std::size_t m_count = ds.schema.task_count();
  auto eval_one = [&](TrainResult& result) {
    TabularDataset prepared = ds;
    result.preprocess.apply(prepared);
    return evaluate(result.params, prepared, fold.test, result.task_columns, attributes);
  };

  if (is_single_task(spec.train.method)) {
    FoldReport merged;
    for (std::size_t m = 0; m < m_count; ++m) {
      TrainConfig tc = spec.train;
      tc.single_task_index = m;
      auto result = train(ds, fold, spec.model, tc, hook);
      auto r = eval_one(result);
      merged.tasks.push_back(r.tasks[0]);
      merged.auroc.push_back(r.auroc[0]);
      merged.auprc.push_back(r.auprc[0]);
      if (merged.fairness.empty()) {
        merged.fairness = r.fairness;
      } else {
        for (std::size_t ai = 0; ai < r.fairness.size(); ++ai) {
          merged.fairness[ai].dpd.push_back(r.fairness[ai].dpd[0]);
          merged.fairness[ai].eod.push_back(r.fairness[ai].eod[0]);
          merged.fairness[ai].cdf.push_back(r.fairness[ai].cdf[0]);
        }
      }
      if (out_results) out_results->push_back(std::move(result));
      if (!quiet)
        std::printf("  task %zu/%zu done\n", m + 1, m_count);
    }
    return merged;
  }

  auto result = train(ds, fold, spec.model, spec.train, hook);
  auto report = eval_one(result);
  if (out_results) out_results->push_back(std::move(result));
  return report;
}

int cmd_train(const GlobalOpts& g, const std::string& data_path, const std::string& schema_path,
              const RunSpec& spec_in) {
  RunSpec spec = spec_in;
  if (g.seed) spec.train.seed = *g.seed;

  Schema schema = Schema::load(schema_path);
  TabularDataset ds = load_csv(data_path, schema);
  spec.train.validate(schema);
  spec.model.validate();
  if (ds.n < 5) throw ConfigError("train: dataset has fewer than 5 rows");

  const fs::path out(g.out_dir);
  Manifest manifest;
  manifest.command = "train";
  manifest.seed = spec.train.seed;
  manifest.config = run_spec_json(spec);
  write_file(out / "config.json", manifest.config.dump(2) + "\n");
  manifest.add(out / "config.json");
  fs::create_directories(out / "checkpoints");

  auto plan = make_splits(ds.n, spec.folds, spec.fractions, spec.train.seed);
  std::vector<std::string> attributes;
  for (const auto& a : schema.sensitive) attributes.push_back(a.name);

  std::vector<FoldReport> reports;
  std::string epoch_csv;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    TrainConfig tc = spec.train;
    tc.seed = spec.train.seed + f;

    const fs::path last_path = out / "checkpoints" / ("fold_" + std::to_string(f) + "_last.json");
    const fs::path best_path = out / "checkpoints" / ("fold_" + std::to_string(f) + "_best.json");
    // same preprocessing train() derives internally, so the per-epoch
    // last-good checkpoint below is complete and loadable
    const Preprocess pre = fit_preprocess(ds, fold.train, tc.standardize);
    EpochHook hook = [&](const ModelParams& params, const EpochRow& row, bool is_best) {
      if (!g.quiet) {
        std::printf("fold %zu epoch %zu: loss", f, row.epoch);
        for (double l : row.task_loss) std::printf(" %.4f", l);
        if (!row.val_auroc.empty() && row.val_auroc[0])
          std::printf(" | val auroc %.4f", *row.val_auroc[0]);
        std::printf("%s\n", is_best ? " *" : "");
      }
      std::vector<std::size_t> cols;
      for (std::size_t m = 0; m < params.config.tasks; ++m)
        cols.push_back(is_single_task(tc.method) ? tc.single_task_index : m);
      ordered_json ck = checkpoint_json(params, pre, schema, tc, spec.train.seed, f,
                                        spec.fractions, cols);
      write_file(last_path, ck.dump() + "\n");
    };

    TrainResult result;
    try {
      result = train(ds, fold, spec.model, tc, hook);
    } catch (const DivergenceError& e) {
      write_error_record(g.out_dir, "divergence",
                         std::string(e.what()) + " at epoch " + std::to_string(e.epoch) +
                             ", batch " + std::to_string(e.batch),
                         3, fs::exists(last_path) ? last_path.string() : "");
      std::fprintf(stderr, "fairtab: training diverged: %s\n", e.what());
      return 3;
    }

    ordered_json ck = checkpoint_json(result.params, result.preprocess, schema, tc,
                                      spec.train.seed, f, spec.fractions, result.task_columns);
    write_file(best_path, ck.dump() + "\n");
    manifest.add(best_path);

    TabularDataset prepared = ds;
    result.preprocess.apply(prepared);
    reports.push_back(
        evaluate(result.params, prepared, fold.test, result.task_columns, attributes));
    if (f == 0) {
      epoch_csv = result.log.csv(f);
    } else {
      auto rows = split_lines(result.log.csv(f));
      for (std::size_t i = 1; i < rows.size(); ++i) epoch_csv += rows[i] + "\n";
    }
  }

  auto aggregated = aggregate_reports(reports);
  write_file(out / "epoch_log.csv", epoch_csv);
  write_file(out / "report.json", aggregated.to_json().dump(2) + "\n");
  write_file(out / "cdf.csv", aggregated.cdf_csv());
  manifest.add(out / "epoch_log.csv");
  manifest.add(out / "report.json");
  manifest.add(out / "cdf.csv");
  manifest.write(out);
  if (!g.quiet) std::printf("train: report at %s\n", (out / "report.json").string().c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "task,attribute,metric,mean,sd\n";
  auto row = [&](const std::string& task, const std::string& attr, const std::string& metric,
                 const std::optional<MeanSd>& v) {
    out += task + "," + attr + "," + metric + ",";
    if (v) out += format_double(v->mean) + "," + format_double(v->sd);
    else out += ",";
    out += "\n";
  };
  for (std::size_t m = 0; m < r.tasks.size(); ++m) {
    row(r.tasks[m], "", "auroc", r.auroc[m]);
    row(r.tasks[m], "", "auprc", r.auprc[m]);
  }
  for (const auto& attr : r.fairness) {
    for (std::size_t m = 0; m < r.tasks.size(); ++m) {
      row(r.tasks[m], attr.attribute, "dpd", attr.dpd[m]);
      row(r.tasks[m], attr.attribute, "eod", attr.eod[m]);
    }
  }
  return out;
}

int cmd_eval(const GlobalOpts& g, const std::string& checkpoint_path, const std::string& data_path,
             const std::string& schema_path, const std::string& split_name) {
  auto ck = load_checkpoint(checkpoint_path);
  Schema schema = schema_path.empty() ? ck.schema : Schema::load(schema_path);
  TabularDataset ds = load_csv(data_path, schema);

  std::vector<std::size_t> rows;
  if (split_name == "all") {
    rows.resize(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) rows[i] = i;
  } else {
    auto plan = make_splits(ds.n, ck.fold_index + 1, ck.fractions, ck.split_seed);
    const auto& fold = plan.folds[ck.fold_index];
    if (split_name == "train") rows = fold.train;
    else if (split_name == "val") rows = fold.val;
    else if (split_name == "test") rows = fold.test;
    else throw ConfigError("eval: unknown split '" + split_name + "'");
  }
  if (rows.empty()) throw ConfigError("eval: selected split is empty");

  TabularDataset prepared = ds;
  ck.preprocess.apply(prepared);
  std::vector<std::string> attributes;
  for (const auto& a : schema.sensitive) attributes.push_back(a.name);

  auto report = evaluate(ck.params, prepared, rows, ck.task_columns, attributes);
  std::vector<FoldReport> single{report};
  auto aggregated = aggregate_reports(single);

  const fs::path out(g.out_dir);
  Manifest manifest;
  manifest.command = "eval";
  manifest.seed = ck.split_seed;
  manifest.config = {{"checkpoint", checkpoint_path}, {"split", split_name}};
  write_file(out / "report.json", aggregated.to_json().dump(2) + "\n");
  write_file(out / "metrics.csv", metrics_csv(aggregated));
  write_file(out / "cdf.csv", aggregated.cdf_csv());
  manifest.add(out / "report.json");
  manifest.add(out / "metrics.csv");
  manifest.add(out / "cdf.csv");
  manifest.write(out);
  if (!g.quiet) std::printf("eval: report at %s\n", (out / "report.json").string().c_str());
  return 0;
}

// --- compare ------------------------------------------------------------------

int cmd_compare(const GlobalOpts& g, const std::string& data_path, const std::string& schema_path,
                const std::vector<std::string>& methods, const std::vector<std::uint64_t>& seeds,
                const RunSpec& base_spec) {
  if (methods.size() < 1) throw ConfigError("compare: need at least one method");
  if (seeds.empty()) throw ConfigError("compare: need at least one seed");

  Schema schema = Schema::load(schema_path);
  TabularDataset ds = load_csv(data_path, schema);
  std::vector<std::string> attributes;
  for (const auto& a : schema.sensitive) attributes.push_back(a.name);

  // validate everything before any work
  std::vector<Method> parsed;
  for (const auto& name : methods) {
    Method m = parse_method(name);
    TrainConfig probe = base_spec.train;
    probe.method = m;
    probe.validate(schema);
    parsed.push_back(m);
  }

  struct MethodResult {
    std::string name;
    MetricsReport report;
  };
  std::vector<MethodResult> results;
  for (std::size_t mi = 0; mi < parsed.size(); ++mi) {
    std::vector<FoldReport> folds;
    for (std::uint64_t seed : seeds) {
      RunSpec spec = base_spec;
      spec.train.method = parsed[mi];
      spec.train.seed = seed;
      auto fold = make_splits(ds.n, 1, spec.fractions, seed).folds[0];
      folds.push_back(run_method_fold(ds, fold, spec, attributes, g.quiet));
      if (!g.quiet)
        std::printf("compare: %s seed %llu done\n", methods[mi].c_str(),
                    static_cast<unsigned long long>(seed));
    }
    results.push_back({methods[mi], aggregate_reports(folds)});
  }

  ordered_json j;
  j["methods"] = ordered_json::array();
  j["paired_seeds"] = true;  // every method ran on the same seed list
  j["seeds"] = seeds;
  std::optional<double> first_diff_auroc = results[0].report.diff_auroc;
  std::optional<double> first_diff_auprc = results[0].report.diff_auprc;
  std::string csv = "method,task,auroc_mean,auroc_sd,auprc_mean,auprc_sd\n";
  for (const auto& r : results) {
    ordered_json mj = r.report.to_json();
    mj["method"] = r.name;
    if (results.size() > 1 && first_diff_auroc && *first_diff_auroc > 0 && r.report.diff_auroc)
      mj["auroc_diff_reduction_vs_first"] =
          reduction_fraction(*first_diff_auroc, *r.report.diff_auroc);
    if (results.size() > 1 && first_diff_auprc && *first_diff_auprc > 0 && r.report.diff_auprc)
      mj["auprc_diff_reduction_vs_first"] =
          reduction_fraction(*first_diff_auprc, *r.report.diff_auprc);
    j["methods"].push_back(std::move(mj));

    for (std::size_t m = 0; m < r.report.tasks.size(); ++m) {
      csv += r.name + "," + r.report.tasks[m];
      auto cell = [&](const std::optional<MeanSd>& v) {
        csv += v ? "," + format_double(v->mean) + "," + format_double(v->sd) : ",,";
      };
      cell(r.report.auroc[m]);
      cell(r.report.auprc[m]);
      csv += "\n";
    }
    csv += r.name + ",Diff";
    csv += r.report.diff_auroc ? "," + format_double(*r.report.diff_auroc) + "," : ",,";
    csv += r.report.diff_auprc ? "," + format_double(*r.report.diff_auprc) + "," : ",,";
    csv += "\n";
  }

  const fs::path out(g.out_dir);
  Manifest manifest;
  manifest.command = "compare";
  manifest.seed = seeds[0];
  manifest.config = run_spec_json(base_spec);
  manifest.config["methods"] = methods;
  manifest.config["seeds"] = seeds;
  write_file(out / "compare.json", j.dump(2) + "\n");
  write_file(out / "compare.csv", csv);
  manifest.add(out / "compare.json");
  manifest.add(out / "compare.csv");
  manifest.write(out);
  if (!g.quiet) std::printf("compare: table at %s\n", (out / "compare.csv").string().c_str());
  return 0;
}

// --- importance -----------------------------------------------------------------

int cmd_importance(const GlobalOpts& g, const std::string& checkpoint_path,
                   const std::string& data_path, const std::string& schema_path,
                   std::size_t repeats, bool self_test) {
  auto ck = load_checkpoint(checkpoint_path);
  Schema schema = schema_path.empty() ? ck.schema : Schema::load(schema_path);
  TabularDataset ds = load_csv(data_path, schema);
  auto plan = make_splits(ds.n, ck.fold_index + 1, ck.fractions, ck.split_seed);
  const auto& rows = plan.folds[ck.fold_index].test;

  TabularDataset prepared = ds;
  ck.preprocess.apply(prepared);
  const std::uint64_t seed = g.seed.value_or(ck.split_seed);
  auto table = permutation_importance(ck.params, prepared, rows, repeats, seed, self_test);

  const fs::path out(g.out_dir);
  Manifest manifest;
  manifest.command = "importance";
  manifest.seed = seed;
  manifest.config = {{"checkpoint", checkpoint_path},
                     {"repeats", repeats},
                     {"self_test", self_test}};
  write_file(out / "importance.csv", table.csv());
  write_file(out / "importance.json", table.to_json().dump(2) + "\n");
  manifest.add(out / "importance.csv");
  manifest.add(out / "importance.json");
  manifest.write(out);
  if (!g.quiet)
    std::printf("importance: table at %s\n", (out / "importance.csv").string().c_str());
  return 0;
}

// --- cdf ---------------------------------------------------------------------------

int cmd_cdf(const GlobalOpts& g, const std::string& checkpoint_path, const std::string& data_path,
            const std::string& schema_path, double grid_step) {
  if (grid_step <= 0.0 || grid_step > 1.0) throw ConfigError("cdf: grid step must be in (0,1]");
  auto ck = load_checkpoint(checkpoint_path);
  Schema schema = schema_path.empty() ? ck.schema : Schema::load(schema_path);
  TabularDataset ds = load_csv(data_path, schema);
  auto plan = make_splits(ds.n, ck.fold_index + 1, ck.fractions, ck.split_seed);
  const auto& rows = plan.folds[ck.fold_index].test;

  TabularDataset prepared = ds;
  ck.preprocess.apply(prepared);
  std::vector<double> grid;
  for (double x = 0.0; x < 1.0 + grid_step * 0.5; x += grid_step)
    grid.push_back(std::min(x, 1.0));
  std::vector<std::string> attributes;
  for (const auto& a : schema.sensitive) attributes.push_back(a.name);

  auto report = evaluate(ck.params, prepared, rows, ck.task_columns, attributes, 0.5, grid);
  std::vector<FoldReport> single{report};
  auto aggregated = aggregate_reports(single);

  const fs::path out(g.out_dir);
  Manifest manifest;
  manifest.command = "cdf";
  manifest.seed = ck.split_seed;
  manifest.config = {{"checkpoint", checkpoint_path}, {"grid_step", grid_step}};
  write_file(out / "cdf.csv", aggregated.cdf_csv());
  ordered_json jc;
  jc["tasks"] = aggregated.tasks;
  jc["fairness"] = aggregated.to_json()["fairness"];
  write_file(out / "cdf.json", jc.dump(2) + "\n");
  manifest.add(out / "cdf.csv");
  manifest.add(out / "cdf.json");
  manifest.write(out);
  if (!g.quiet) std::printf("cdf: table at %s\n", (out / "cdf.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairtab: fair multi-task risk prediction on tabular data"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override every seed in the run");
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--out", g.out_dir, "output directory")->required();
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");

  std::string data_path, schema_path, checkpoint_path;
  std::string method_flag, fairness_attr_flag;
  std::string split_name = "test";
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::size_t repeats = 5;
  bool self_test = false;
  double grid_step = 0.01;
  std::optional<std::size_t> epochs_flag, batch_flag, folds_flag, task_flag;
  std::optional<double> lr_flag, alpha_flag, lambda_flag;

  auto add_data_opts = [&](CLI::App* cmd, bool need_schema) {
    cmd->add_option("--data", data_path, "dataset CSV")->required();
    auto* s = cmd->add_option("--schema", schema_path, "schema JSON");
    if (need_schema) s->required();
  };

  auto add_train_knobs = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", epochs_flag, "epoch count");
    cmd->add_option("--batch", batch_flag, "batch size");
    cmd->add_option("--lr", lr_flag, "learning rate");
    cmd->add_option("--alpha", alpha_flag, "task-balancing exponent");
    cmd->add_option("--lambda", lambda_flag, "fairness loss multiplier");
    cmd->add_option("--fairness-attr", fairness_attr_flag, "sensitive attribute");
  };

  auto* train_cmd = app.add_subcommand("train", "train one method on one dataset");
  add_data_opts(train_cmd, true);
  train_cmd->add_option("--method", method_flag, "training method");
  add_train_knobs(train_cmd);
  train_cmd->add_option("--folds", folds_flag, "independent seeded splits");
  train_cmd->add_option("--task", task_flag, "task index for single-task methods");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  add_data_opts(eval_cmd, false);
  eval_cmd->add_option("--split", split_name, "train|val|test|all");

  auto* compare_cmd = app.add_subcommand("compare", "train several methods across seeds");
  add_data_opts(compare_cmd, true);
  compare_cmd->add_option("--methods", methods, "method names")->required()->delimiter(',');
  compare_cmd->add_option("--seeds", seeds, "seed list")->required()->delimiter(',');
  add_train_knobs(compare_cmd);

  auto* imp_cmd = app.add_subcommand("importance", "permutation feature importance");
  imp_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  add_data_opts(imp_cmd, false);
  imp_cmd->add_option("--repeats", repeats, "permutation repetitions");
  imp_cmd->add_flag("--self-test", self_test, "identity permutation check");

  auto* cdf_cmd = app.add_subcommand("cdf", "subgroup CDF tables from a checkpoint");
  cdf_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  add_data_opts(cdf_cmd, false);
  cdf_cmd->add_option("--grid-step", grid_step, "grid spacing in [0,1]");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_value;

  try {
    if (app.got_subcommand(synth)) return cmd_synth(g);

    RunSpec spec;
    if (!g.config_path.empty()) spec = parse_run_spec(load_json_file(g.config_path, "config"));
    if (!method_flag.empty()) spec.train.method = parse_method(method_flag);
    if (epochs_flag) spec.train.epochs = *epochs_flag;
    if (batch_flag) spec.train.batch_size = *batch_flag;
    if (lr_flag) spec.train.lr = *lr_flag;
    if (alpha_flag) spec.train.alpha = *alpha_flag;
    if (lambda_flag) spec.train.fairness_lambda = *lambda_flag;
    if (!fairness_attr_flag.empty()) spec.train.fairness_attribute = fairness_attr_flag;
    if (folds_flag) spec.folds = *folds_flag;
    if (task_flag) spec.train.single_task_index = *task_flag;

    if (app.got_subcommand(train_cmd)) return cmd_train(g, data_path, schema_path, spec);
    if (app.got_subcommand(eval_cmd))
      return cmd_eval(g, checkpoint_path, data_path, schema_path, split_name);
    if (app.got_subcommand(compare_cmd))
      return cmd_compare(g, data_path, schema_path, methods, seeds, spec);
    if (app.got_subcommand(imp_cmd))
      return cmd_importance(g, checkpoint_path, data_path, schema_path, repeats, self_test);
    if (app.got_subcommand(cdf_cmd))
      return cmd_cdf(g, checkpoint_path, data_path, schema_path, grid_step);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    write_error_record(g.out_dir, "config", e.what(), 2);
    std::fprintf(stderr, "fairtab: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    write_error_record(g.out_dir, "data", e.what(), 2);
    std::fprintf(stderr, "fairtab: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    write_error_record(g.out_dir, "internal", e.what(), 1);
    std::fprintf(stderr, "fairtab: %s\n", e.what());
    return 1;
  }
}
