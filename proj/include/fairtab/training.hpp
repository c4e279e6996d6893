#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/dataset.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/metrics.hpp"
#include "fairtab/model.hpp"
#include "fairtab/objectives.hpp"
#include "fairtab/report.hpp"

namespace fairtab {

enum class Method {
  SingleTask,
  SingleTaskFocal,
  MultiTask,
  MultiTaskGradstep,
  AurocWeighted,
  AurocWeightedDP,
  AurocWeightedEO,
};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::SingleTask: return "single-task";
    case Method::SingleTaskFocal: return "single-task-focal";
    case Method::MultiTask: return "multi-task";
    case Method::MultiTaskGradstep: return "multi-task-gradstep";
    case Method::AurocWeighted: return "auroc-weighted";
    case Method::AurocWeightedDP: return "auroc-weighted+DP";
    case Method::AurocWeightedEO: return "auroc-weighted+EO";
  }
  throw ContractError("method_name: bad enum");
}

inline Method parse_method(const std::string& name) {
  for (Method m : {Method::SingleTask, Method::SingleTaskFocal, Method::MultiTask,
                   Method::MultiTaskGradstep, Method::AurocWeighted, Method::AurocWeightedDP,
                   Method::AurocWeightedEO}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

inline bool is_single_task(Method m) {
  return m == Method::SingleTask || m == Method::SingleTaskFocal;
}

inline bool is_fairness_method(Method m) {
  return m == Method::AurocWeightedDP || m == Method::AurocWeightedEO;
}

struct TrainConfig {
  Method method = Method::AurocWeighted;
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double alpha = 1.0;          // task-balancing exponent
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double fairness_lambda = 1.0;  // multiplier on the fairness term (1 = plain sum)
  std::string fairness_attribute;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  double gradstep_beta = 1e-3;  // inner step size
  double gradstep_eta = 1e-3;   // outer step size
  std::size_t single_task_index = 0;
  MetricTag weight_metric = MetricTag::Auroc;
  bool weights_from_validation = false;
  bool standardize = true;

  void validate(const Schema& schema) const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
    if (alpha < 0.0 || !std::isfinite(alpha)) throw ConfigError("train: alpha must be finite, >= 0");
    if (is_fairness_method(method)) {
      if (fairness_attribute.empty())
        throw ConfigError("train: method " + method_name(method) +
                          " requires a fairness attribute");
      if (!schema.sensitive_index(fairness_attribute))
        throw ConfigError("train: fairness attribute '" + fairness_attribute +
                          "' is not a sensitive column of the schema");
    }
    if (is_single_task(method) && single_task_index >= schema.task_count())
      throw ConfigError("train: single_task_index out of range");
  }

  FairnessSpec fairness_spec() const {
    FairnessSpec spec;
    spec.enabled = is_fairness_method(method);
    spec.attribute = fairness_attribute;
    spec.metric = method == Method::AurocWeightedEO ? FairnessMetric::EqualizedOdds
                                                    : FairnessMetric::DemographicParity;
    return spec;
  }

  nlohmann::ordered_json to_json() const {
    return {{"method", method_name(method)},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"lr", lr},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"alpha", alpha},
            {"focal_alpha", focal_alpha},
            {"focal_gamma", focal_gamma},
            {"fairness_lambda", fairness_lambda},
            {"fairness_attribute", fairness_attribute},
            {"patience", patience},
            {"seed", seed},
            {"gradstep_beta", gradstep_beta},
            {"gradstep_eta", gradstep_eta},
            {"single_task_index", single_task_index},
            {"weight_metric", weight_metric == MetricTag::Auroc ? "auroc" : "auprc"},
            {"weights_from_validation", weights_from_validation},
            {"standardize", standardize}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.alpha = j.value("alpha", c.alpha);
    c.focal_alpha = j.value("focal_alpha", c.focal_alpha);
    c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
    c.fairness_lambda = j.value("fairness_lambda", c.fairness_lambda);
    c.fairness_attribute = j.value("fairness_attribute", c.fairness_attribute);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.gradstep_beta = j.value("gradstep_beta", c.gradstep_beta);
    c.gradstep_eta = j.value("gradstep_eta", c.gradstep_eta);
    c.single_task_index = j.value("single_task_index", c.single_task_index);
    if (j.value("weight_metric", std::string{"auroc"}) == "auprc")
      c.weight_metric = MetricTag::Auprc;
    c.weights_from_validation = j.value("weights_from_validation", false);
    c.standardize = j.value("standardize", true);
    return c;
  }
};

struct EpochRow {
  std::size_t epoch = 0;
  std::vector<double> task_loss;     // mean over the epoch's batches
  std::vector<double> weight_used;   // w_m(t-1) in effect this epoch
  double fairness_loss_mean = 0.0;
  std::vector<std::optional<double>> val_auroc;
  std::vector<std::optional<double>> val_auprc;
};

struct EpochLog {
  std::vector<std::string> task_names;
  std::vector<EpochRow> rows;

  std::string csv(std::optional<std::size_t> fold = std::nullopt) const {
    std::string out;
    out += fold ? "fold,epoch" : "epoch";
    for (const auto& t : task_names) out += ",loss_" + t;
    for (const auto& t : task_names) out += ",weight_" + t;
    out += ",fairness_loss";
    for (const auto& t : task_names) out += ",val_auroc_" + t;
    for (const auto& t : task_names) out += ",val_auprc_" + t;
    out += "\n";
    for (const auto& r : rows) {
      std::string line;
      if (fold) line += std::to_string(*fold) + ",";
      line += std::to_string(r.epoch);
      for (double v : r.task_loss) line += "," + format_double(v);
      for (double v : r.weight_used) line += "," + format_double(v);
      line += "," + format_double(r.fairness_loss_mean);
      auto opt = [&](const std::optional<double>& v) {
        line += ",";
        if (v) line += format_double(*v);
      };
      for (const auto& v : r.val_auroc) opt(v);
      for (const auto& v : r.val_auprc) opt(v);
      out += line + "\n";
    }
    return out;
  }
};

struct TrainResult {
  ModelParams params;
  Preprocess preprocess;
  EpochLog log;
  std::size_t best_epoch = 0;
  std::vector<std::size_t> task_columns;  // dataset task columns the model predicts
};

// Adam with bias correction, applied over the bound slots in binding order.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Tape& tape, std::vector<BoundParams::Slot>& slots) {
    if (m_.empty()) {
      for (const auto& slot : slots) {
        m_.emplace_back(slot.master->shape());
        v_.emplace_back(slot.master->shape());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Tensor& g = tape.grad(slots[s].value);
      Tensor& theta = *slots[s].master;
      for (std::size_t i = 0; i < theta.numel(); ++i) {
        m_[s][i] = beta1_ * m_[s][i] + (1.0 - beta1_) * g[i];
        v_[s][i] = beta2_ * v_[s][i] + (1.0 - beta2_) * g[i] * g[i];
        theta[i] -= lr_ * (m_[s][i] / bc1) / (std::sqrt(v_[s][i] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

namespace detail {

// One batch's graph: per-task stacked logits plus targets.
struct BatchGraph {
  Tape tape;
  BoundParams bp;
  std::vector<Value> logits;    // per task, shape [b]
  std::vector<Tensor> targets;  // per task, shape [b]
};

inline std::unique_ptr<BatchGraph> forward_batch(ModelParams& params, const TabularDataset& ds,
                                                 std::span<const std::size_t> rows,
                                                 std::span<const std::size_t> task_cols) {
  if (task_cols.size() != params.config.tasks) {
    throw ContractError("forward_batch: model has " + std::to_string(params.config.tasks) +
                        " heads for " + std::to_string(task_cols.size()) + " task columns");
  }
  auto g = std::make_unique<BatchGraph>();
  g->bp = bind_params(g->tape, params);
  const std::size_t b = rows.size();
  std::vector<std::vector<Value>> per_task(task_cols.size());
  std::vector<int> codes(params.p);
  std::vector<double> cont(params.q);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t r = rows[i];
    for (std::size_t j = 0; j < params.p; ++j) codes[j] = ds.cat[j][r];
    for (std::size_t j = 0; j < params.q; ++j) cont[j] = ds.cont[j][r];
    auto logits = predict_row(g->tape, g->bp, params.config, codes, cont);
    for (std::size_t m = 0; m < task_cols.size(); ++m)
      per_task[m].push_back(g->tape.reshape(logits[m], {1}));
  }
  for (std::size_t m = 0; m < task_cols.size(); ++m) {
    g->logits.push_back(g->tape.concat(per_task[m]));
    Tensor y({b});
    for (std::size_t i = 0; i < b; ++i)
      y[i] = static_cast<double>(ds.labels[task_cols[m]][rows[i]]);
    g->targets.push_back(std::move(y));
  }
  return g;
}

inline std::optional<double> epoch_metric(MetricTag tag, std::span<const double> scores,
                                          std::span<const std::uint8_t> labels) {
  return tag == MetricTag::Auroc ? auroc(scores, labels) : auprc(scores, labels);
}

}  // namespace detail

// One task's loss rebuilt on a fresh tape from the current tensor contents,
// with the bound values split into the shared block and that task's block.
// `holder` owns whatever structure the tape lives in (tapes are pinned in
// memory because Values point into them).
struct GradstepGraph {
  std::shared_ptr<void> holder;
  Tape* tape = nullptr;
  std::vector<Value> shared;
  std::vector<Value> task;
  Value loss;
};
using GradstepLossFn = std::function<GradstepGraph(std::size_t task)>;

// Single-gradient-step balancing: per-task lookahead step of size beta on
// the shared parameters, one summed-loss step of size eta evaluated at the
// lookahead states, then per-task steps of size beta on the task-specific
// parameters. Plain gradient steps, no optimizer state.
inline void single_gradient_step(std::span<Tensor*> shared,
                                 std::span<const std::vector<Tensor*>> task_params,
                                 const GradstepLossFn& build, double beta, double eta) {
  const std::size_t m_count = task_params.size();
  std::vector<Tensor> saved;
  saved.reserve(shared.size());
  for (const Tensor* t : shared) saved.push_back(*t);

  // per-task lookahead gradients at the current parameters
  std::vector<std::vector<Tensor>> inner_grads(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    GradstepGraph g = build(m);
    g.tape->backward(g.loss);
    for (Value v : g.shared) inner_grads[m].push_back(g.tape->grad(v));
  }

  // summed-loss gradient, each task's loss taken at its own lookahead state
  std::vector<Tensor> outer;
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t s = 0; s < shared.size(); ++s) {
      Tensor& t = *shared[s];
      for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = saved[s][i] - beta * inner_grads[m][s][i];
    }
    GradstepGraph g = build(m);
    g.tape->backward(g.loss);
    for (std::size_t s = 0; s < shared.size(); ++s) {
      const Tensor& grad = g.tape->grad(g.shared[s]);
      if (outer.size() <= s) {
        outer.push_back(grad);
      } else {
        for (std::size_t i = 0; i < grad.numel(); ++i) outer[s][i] += grad[i];
      }
    }
  }

  // outer update of the true shared parameters
  for (std::size_t s = 0; s < shared.size(); ++s) {
    Tensor& t = *shared[s];
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = saved[s][i] - eta * outer[s][i];
  }

  // task-specific updates at the refreshed shared parameters
  for (std::size_t m = 0; m < m_count; ++m) {
    GradstepGraph g = build(m);
    g.tape->backward(g.loss);
    for (std::size_t k = 0; k < task_params[m].size(); ++k) {
      const Tensor& grad = g.tape->grad(g.task[k]);
      Tensor& t = *task_params[m][k];
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] -= beta * grad[i];
    }
  }
}

// Model-level wrapper: embeddings, continuous layer norm and encoder are the
// shared block; each task head is its own block. Losses are per-task mean BCE
// over the batch.
inline void gradstep_update(ModelParams& params, const TabularDataset& ds,
                            std::span<const std::size_t> rows,
                            std::span<const std::size_t> task_cols, double beta, double eta) {
  std::vector<Tensor*> shared;
  std::vector<std::vector<Tensor*>> task_params(task_cols.size());
  params.for_each_tensor([&](const std::string& name, Tensor& t, bool is_shared) {
    if (is_shared) {
      shared.push_back(&t);
    } else {
      for (std::size_t m = 0; m < task_cols.size(); ++m) {
        if (name.rfind("task." + std::to_string(m) + ".", 0) == 0) task_params[m].push_back(&t);
      }
    }
  });

  auto build = [&](std::size_t m) {
    std::shared_ptr<detail::BatchGraph> g = detail::forward_batch(params, ds, rows, task_cols);
    GradstepGraph out;
    out.loss = g->tape.mean_all(g->tape.bce_with_logits(g->logits[m], g->targets[m]));
    const std::string prefix = "task." + std::to_string(m) + ".";
    for (const auto& slot : g->bp.slots) {
      if (slot.shared) out.shared.push_back(slot.value);
      else if (slot.name.rfind(prefix, 0) == 0) out.task.push_back(slot.value);
    }
    out.tape = &g->tape;
    out.holder = std::move(g);
    return out;
  };
  single_gradient_step(shared, task_params, build, beta, eta);
}

// Full evaluation of trained parameters on one split of a prepared dataset.
inline FoldReport evaluate(ModelParams& params, const TabularDataset& prepared,
                           std::span<const std::size_t> rows,
                           std::span<const std::size_t> task_cols,
                           std::span<const std::string> attributes, double threshold = 0.5,
                           std::span<const double> cdf_grid = {}) {
  if (rows.empty()) throw ContractError("evaluate: empty split");
  std::vector<double> default_grid;
  if (cdf_grid.empty()) {
    for (int i = 0; i <= 100; ++i) default_grid.push_back(i / 100.0);
    cdf_grid = default_grid;
  }
  FoldReport report;
  for (std::size_t col : task_cols) report.tasks.push_back(prepared.schema.tasks[col]);

  const auto probs = predict_probabilities(params, prepared, rows);
  const std::size_t m_count = task_cols.size();
  std::vector<std::vector<std::uint8_t>> labels(m_count);
  std::vector<std::vector<std::uint8_t>> hard(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    labels[m].resize(rows.size());
    hard[m].resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      labels[m][i] = prepared.labels[task_cols[m]][rows[i]];
      hard[m][i] = probs[m][i] > threshold ? 1 : 0;
    }
    report.auroc.push_back(auroc(probs[m], labels[m]));
    report.auprc.push_back(auprc(probs[m], labels[m]));
  }

  for (const auto& attr_name : attributes) {
    const auto ai = prepared.schema.sensitive_index(attr_name);
    if (!ai) throw ConfigError("evaluate: unknown sensitive attribute '" + attr_name + "'");
    AttrFoldMetrics afm;
    afm.attribute = attr_name;
    afm.subgroups = prepared.schema.sensitive[*ai].subgroups;
    std::vector<int> codes(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) codes[i] = prepared.sensitive[*ai][rows[i]];
    for (std::size_t m = 0; m < m_count; ++m) {
      afm.dpd.push_back(dpd(hard[m], codes, afm.subgroups.size()));
      afm.eod.push_back(eod(hard[m], labels[m], codes, afm.subgroups.size()));
      afm.cdf.push_back(cdf_table(probs[m], codes, afm.subgroups.size(), cdf_grid));
    }
    report.fairness.push_back(std::move(afm));
  }
  return report;
}

// Callback fired after each epoch. `params` is the current (end-of-epoch)
// state; `is_best` marks a new validation optimum.
using EpochHook = std::function<void(const ModelParams& params, const EpochRow& row, bool is_best)>;

// Algorithm "task-balancing + fairness-achieving" training loop, also hosting
// the comparison regimes. Deterministic for a fixed config and seed.
inline TrainResult train(const TabularDataset& ds, const FoldIndices& fold,
                         const ModelConfig& model_config, const TrainConfig& config,
                         const EpochHook& on_epoch = {}) {
  config.validate(ds.schema);
  if (fold.train.empty()) throw ContractError("train: empty train split");

  // task columns this run optimizes
  std::vector<std::size_t> task_cols;
  if (is_single_task(config.method)) {
    task_cols = {config.single_task_index};
  } else {
    for (std::size_t m = 0; m < ds.schema.task_count(); ++m) task_cols.push_back(m);
  }
  ModelConfig mc = model_config;
  mc.tasks = task_cols.size();
  mc.validate();

  TrainResult result;
  result.task_columns = task_cols;
  result.preprocess = fit_preprocess(ds, fold.train, config.standardize);
  TabularDataset prepared = ds;
  result.preprocess.apply(prepared);

  std::mt19937_64 rng(config.seed);
  result.params = init_params(mc, ds.schema, rng);
  for (std::size_t col : task_cols)
    result.log.task_names.push_back(ds.schema.tasks[col]);

  const FairnessSpec fairness = config.fairness_spec();
  std::optional<std::size_t> attr_index;
  std::size_t attr_groups = 0;
  if (fairness.enabled) {
    attr_index = prepared.schema.sensitive_index(fairness.attribute);
    attr_groups = prepared.schema.sensitive[*attr_index].subgroups.size();
  }

  TaskWeightState weights = TaskWeightState::initial(task_cols.size(), config.alpha);
  weights.metric = config.weight_metric;
  const bool weighted = config.method == Method::AurocWeighted || is_fairness_method(config.method);

  AdamOptimizer adam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);

  ModelParams best_params = result.params;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(fold.train.begin(), fold.train.end());
  const std::size_t m_count = task_cols.size();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);

    EpochRow row;
    row.epoch = epoch;
    row.weight_used = weights.w;
    std::vector<double> loss_sum(m_count, 0.0);
    double fairness_sum = 0.0;
    std::size_t batches = 0;
    // epoch-accumulated training predictions drive the next epoch's weights
    std::vector<std::vector<double>> epoch_scores(m_count);
    std::vector<std::vector<std::uint8_t>> epoch_labels(m_count);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      ++batches;

      if (config.method == Method::MultiTaskGradstep) {
        // log the pre-update losses, then take the two-stage step
        auto g = detail::forward_batch(result.params, prepared, batch, task_cols);
        for (std::size_t m = 0; m < m_count; ++m) {
          const double lm = g->tape.scalar_value(
              g->tape.mean_all(g->tape.bce_with_logits(g->logits[m], g->targets[m])));
          if (!std::isfinite(lm))
            throw DivergenceError(epoch, batches - 1, "non-finite task loss");
          loss_sum[m] += lm;
          for (std::size_t i = 0; i < batch.size(); ++i) {
            epoch_scores[m].push_back(stable_sigmoid(g->tape.value(g->logits[m])[i]));
            epoch_labels[m].push_back(static_cast<std::uint8_t>(g->targets[m][i]));
          }
        }
        gradstep_update(result.params, prepared, batch, task_cols, config.gradstep_beta,
                        config.gradstep_eta);
        continue;
      }

      auto g = detail::forward_batch(result.params, prepared, batch, task_cols);
      std::vector<Value> task_losses;
      for (std::size_t m = 0; m < m_count; ++m) {
        Value elems = config.method == Method::SingleTaskFocal
                          ? g->tape.focal_with_logits(g->logits[m], g->targets[m],
                                                      config.focal_alpha, config.focal_gamma)
                          : g->tape.bce_with_logits(g->logits[m], g->targets[m]);
        task_losses.push_back(g->tape.mean_all(elems));
      }

      Value total = weighted ? balanced_loss(g->tape, task_losses, weights)
                             : multitask_loss(g->tape, task_losses);

      if (fairness.enabled) {
        std::vector<int> group_codes(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          group_codes[i] = prepared.sensitive[*attr_index][batch[i]];
        std::vector<Value> disparities;
        for (std::size_t m = 0; m < m_count; ++m) {
          std::vector<std::uint8_t> batch_labels(batch.size());
          for (std::size_t i = 0; i < batch.size(); ++i)
            batch_labels[i] = static_cast<std::uint8_t>(g->targets[m][i]);
          Value probs = g->tape.sigmoid(g->logits[m]);
          disparities.push_back(batch_disparity(g->tape, probs, batch_labels, group_codes,
                                                attr_groups, fairness.metric));
        }
        Value fair = fairness_loss(g->tape, disparities);
        fairness_sum += g->tape.scalar_value(fair);
        total = g->tape.add(total, g->tape.mul_scalar(fair, config.fairness_lambda));
      }

      const double total_value = g->tape.scalar_value(total);
      if (!std::isfinite(total_value))
        throw DivergenceError(epoch, batches - 1, "non-finite training loss");
      for (std::size_t m = 0; m < m_count; ++m) {
        loss_sum[m] += g->tape.scalar_value(task_losses[m]);
        for (std::size_t i = 0; i < batch.size(); ++i) {
          epoch_scores[m].push_back(stable_sigmoid(g->tape.value(g->logits[m])[i]));
          epoch_labels[m].push_back(static_cast<std::uint8_t>(g->targets[m][i]));
        }
      }

      g->tape.backward(total);
      adam.step(g->tape, g->bp.slots);
    }

    for (std::size_t m = 0; m < m_count; ++m)
      row.task_loss.push_back(loss_sum[m] / static_cast<double>(batches));
    row.fairness_loss_mean = fairness.enabled ? fairness_sum / static_cast<double>(batches) : 0.0;

    // validation metrics
    std::vector<std::vector<double>> val_probs;
    std::vector<std::vector<std::uint8_t>> val_labels(m_count);
    if (!fold.val.empty()) {
      val_probs = predict_probabilities(result.params, prepared, fold.val);
      for (std::size_t m = 0; m < m_count; ++m) {
        val_labels[m].resize(fold.val.size());
        for (std::size_t i = 0; i < fold.val.size(); ++i)
          val_labels[m][i] = prepared.labels[task_cols[m]][fold.val[i]];
        row.val_auroc.push_back(auroc(val_probs[m], val_labels[m]));
        row.val_auprc.push_back(auprc(val_probs[m], val_labels[m]));
      }
    } else {
      row.val_auroc.assign(m_count, std::nullopt);
      row.val_auprc.assign(m_count, std::nullopt);
    }

    // next epoch's weights from this epoch's accumulated predictions
    // (or from the validation split when configured); undefined metrics
    // carry the previous weight forward
    if (weighted) {
      for (std::size_t m = 0; m < m_count; ++m) {
        std::optional<double> metric;
        if (config.weights_from_validation && !fold.val.empty()) {
          metric = detail::epoch_metric(weights.metric, val_probs[m], val_labels[m]);
        } else {
          metric = detail::epoch_metric(weights.metric, epoch_scores[m], epoch_labels[m]);
        }
        if (metric) weights.w[m] = *metric;
      }
    }

    // early stopping on mean validation AUROC over the tasks where defined
    double score = 0.0;
    std::size_t defined = 0;
    for (const auto& v : row.val_auroc) {
      if (v) {
        score += *v;
        ++defined;
      }
    }
    const double mean_val = defined ? score / static_cast<double>(defined)
                                    : -std::numeric_limits<double>::infinity();
    bool is_best = mean_val > best_score;
    if (is_best) {
      best_score = mean_val;
      best_params = result.params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }

    result.log.rows.push_back(row);
    if (on_epoch) on_epoch(result.params, row, is_best);
    if (!fold.val.empty() && config.patience > 0 && since_best >= config.patience) break;
  }

  if (std::isfinite(best_score)) result.params = best_params;
  return result;
}

}  // namespace fairtab
