#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairtab/autodiff.hpp"
#include "fairtab/errors.hpp"

namespace fairtab {

enum class FairnessMetric { DemographicParity, EqualizedOdds };

inline std::string to_string(FairnessMetric m) {
  return m == FairnessMetric::DemographicParity ? "demographic_parity" : "equalized_odds";
}

struct FairnessSpec {
  std::string attribute;
  FairnessMetric metric = FairnessMetric::DemographicParity;
  bool enabled = false;
};

enum class MetricTag { Auroc, Auprc };

// Per-task metric values w_m from the previous epoch driving the
// (1 - w_m)^alpha loss weights. Weights are plain constants, never part of
// the gradient.
struct TaskWeightState {
  std::vector<double> w;  // in [0,1]
  double alpha = 1.0;
  MetricTag metric = MetricTag::Auroc;

  static TaskWeightState initial(std::size_t tasks, double alpha) {
    TaskWeightState s;
    s.w.assign(tasks, 0.0);  // first epoch equals plain multi-task training
    s.alpha = alpha;
    return s;
  }

  double coefficient(std::size_t m) const { return std::pow(1.0 - w.at(m), alpha); }
};

// Single-sample binary cross-entropy from the logit.
inline Value bce(Tape& tape, Value logit, double label) {
  return tape.bce_with_logits(logit, Tensor::full(tape.value(logit).shape(), label));
}

// Single-sample focal loss from the logit.
inline Value focal_loss(Tape& tape, Value logit, double label, double alpha_f, double gamma_f) {
  if (alpha_f < 0.0 || alpha_f > 1.0) throw ConfigError("focal: alpha_f must lie in [0,1]");
  if (gamma_f < 0.0) throw ConfigError("focal: gamma_f must be >= 0");
  return tape.focal_with_logits(logit, Tensor::full(tape.value(logit).shape(), label), alpha_f,
                                gamma_f);
}

// Plain multi-task objective: the sum of the per-task losses.
inline Value multitask_loss(Tape& tape, std::span<const Value> task_losses) {
  if (task_losses.empty()) throw ContractError("multitask_loss: no tasks");
  Value total = task_losses[0];
  for (std::size_t m = 1; m < task_losses.size(); ++m) total = tape.add(total, task_losses[m]);
  return total;
}

// Metric-weighted objective: sum of (1 - w_m)^alpha * L_m with detached
// weights. alpha = 0 degenerates to the plain sum (coefficients exactly 1).
inline Value balanced_loss(Tape& tape, std::span<const Value> task_losses,
                           const TaskWeightState& state) {
  if (task_losses.size() != state.w.size())
    throw ContractError("balanced_loss: state has " + std::to_string(state.w.size()) +
                        " weights for " + std::to_string(task_losses.size()) + " tasks");
  Value total = tape.mul_scalar(task_losses[0], state.coefficient(0));
  for (std::size_t m = 1; m < task_losses.size(); ++m)
    total = tape.add(total, tape.mul_scalar(task_losses[m], state.coefficient(m)));
  return total;
}

// Soft demographic-parity rate of one subgroup: mean predicted probability
// over its members. Differentiable surrogate for P(Yhat=1 | A=i).
inline Value soft_group_rate(Tape& tape, Value probabilities,
                             std::span<const std::size_t> members) {
  if (members.empty()) throw ContractError("soft_group_rate: empty subgroup");
  return tape.mean_all(tape.gather(probabilities, {members.begin(), members.end()}));
}

// Soft equalized-odds rate: (mean prob over subgroup positives + mean prob
// over subgroup negatives) / 2.
inline Value soft_group_eo_rate(Tape& tape, Value probabilities,
                                std::span<const std::size_t> positives,
                                std::span<const std::size_t> negatives) {
  if (positives.empty() || negatives.empty())
    throw ContractError("soft_group_eo_rate: subgroup lacks a label class");
  Value tpr = tape.mean_all(tape.gather(probabilities, {positives.begin(), positives.end()}));
  Value fpr = tape.mean_all(tape.gather(probabilities, {negatives.begin(), negatives.end()}));
  return tape.mul_scalar(tape.add(tpr, fpr), 0.5);
}

// D_m = max_i F_i - mean_i F_i over the groups present in the batch; zero
// when fewer than two groups survived the presence checks. The max uses the
// subgradient of the first maximal group at exact ties.
inline Value disparity(Tape& tape, std::span<const Value> group_rates) {
  if (group_rates.size() < 2) return tape.constant(0.0);
  Value stacked = tape.concat({group_rates.begin(), group_rates.end()});
  return tape.sub(tape.max_of(stacked), tape.mean_all(stacked));
}

// Loss_fairness = sum over tasks of D_m.
inline Value fairness_loss(Tape& tape, std::span<const Value> per_task_disparity) {
  if (per_task_disparity.empty()) throw ContractError("fairness_loss: no tasks");
  Value total = per_task_disparity[0];
  for (std::size_t m = 1; m < per_task_disparity.size(); ++m)
    total = tape.add(total, per_task_disparity[m]);
  return total;
}

// Batch member positions per subgroup; codes < 0 belong to no group.
inline std::vector<std::vector<std::size_t>> subgroup_members(std::span<const int> codes,
                                                              std::size_t n_groups) {
  std::vector<std::vector<std::size_t>> members(n_groups);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= 0 && static_cast<std::size_t>(codes[i]) < n_groups)
      members[static_cast<std::size_t>(codes[i])].push_back(i);
  }
  return members;
}

// One task's batch disparity with the presence rules applied: demographic
// parity needs a non-empty group, equalized odds needs both label classes in
// the group; groups failing the check drop out of D_m for this batch.
inline Value batch_disparity(Tape& tape, Value probabilities, std::span<const std::uint8_t> labels,
                             std::span<const int> group_codes, std::size_t n_groups,
                             FairnessMetric metric) {
  const auto members = subgroup_members(group_codes, n_groups);
  std::vector<Value> rates;
  for (const auto& group : members) {
    if (group.empty()) continue;
    if (metric == FairnessMetric::DemographicParity) {
      rates.push_back(soft_group_rate(tape, probabilities, group));
    } else {
      std::vector<std::size_t> pos, neg;
      for (std::size_t i : group) (labels[i] ? pos : neg).push_back(i);
      if (pos.empty() || neg.empty()) continue;
      rates.push_back(soft_group_eo_rate(tape, probabilities, pos, neg));
    }
  }
  return disparity(tape, rates);
}

}  // namespace fairtab
