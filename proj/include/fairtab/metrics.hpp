#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairtab/errors.hpp"

namespace fairtab {

// Mann-Whitney AUROC: probability a random positive outranks a random
// negative, ties counted 1/2. Average ranks over tie groups, O(n log n).
// Returns nullopt when either class is absent.
inline std::optional<double> auroc(std::span<const double> scores,
                                   std::span<const std::uint8_t> labels) {
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) pos += labels[i] ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average rank
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

// Area under the precision-recall step curve, descending-score sweep with
// equal scores processed as one threshold group (sum of precision * delta
// recall). Returns nullopt when there are no positives.
inline std::optional<double> auprc(std::span<const double> scores,
                                   std::span<const std::uint8_t> labels) {
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) pos += labels[i] ? 1 : 0;
  if (pos == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]])
        ++tp;
      else
        ++fp;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += precision * (recall - prev_recall);
    prev_recall = recall;
    i = j;
  }
  return area;
}

// Demographic parity difference over hard predictions: max subgroup positive
// rate minus min. Groups with no samples are skipped; needs >= 2 populated
// groups. `subgroups` holds codes in [0, n_groups); negative codes are
// treated as unknown membership and skipped.
inline std::optional<double> dpd(std::span<const std::uint8_t> predictions,
                                 std::span<const int> subgroups, std::size_t n_groups) {
  std::vector<std::size_t> count(n_groups, 0), hits(n_groups, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int g = subgroups[i];
    if (g < 0) continue;
    ++count[static_cast<std::size_t>(g)];
    hits[static_cast<std::size_t>(g)] += predictions[i] ? 1 : 0;
  }
  double lo = 2.0, hi = -1.0;
  std::size_t populated = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (count[g] == 0) continue;
    ++populated;
    const double rate = static_cast<double>(hits[g]) / static_cast<double>(count[g]);
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }
  if (populated < 2) return std::nullopt;
  return hi - lo;
}

// Equalized odds difference: (max pairwise TPR gap) + (max pairwise FPR gap).
// A subgroup lacking a label class is excluded; needs >= 2 surviving groups.
inline std::optional<double> eod(std::span<const std::uint8_t> predictions,
                                 std::span<const std::uint8_t> labels,
                                 std::span<const int> subgroups, std::size_t n_groups) {
  std::vector<std::size_t> tp(n_groups, 0), fn(n_groups, 0), fp(n_groups, 0), tn(n_groups, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int g = subgroups[i];
    if (g < 0) continue;
    const auto gi = static_cast<std::size_t>(g);
    if (labels[i]) {
      ++(predictions[i] ? tp[gi] : fn[gi]);
    } else {
      ++(predictions[i] ? fp[gi] : tn[gi]);
    }
  }
  double tpr_lo = 2.0, tpr_hi = -1.0, fpr_lo = 2.0, fpr_hi = -1.0;
  std::size_t counted = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t npos = tp[g] + fn[g];
    const std::size_t nneg = fp[g] + tn[g];
    if (npos == 0 || nneg == 0) continue;
    ++counted;
    const double tpr = static_cast<double>(tp[g]) / static_cast<double>(npos);
    const double fpr = static_cast<double>(fp[g]) / static_cast<double>(nneg);
    tpr_lo = std::min(tpr_lo, tpr);
    tpr_hi = std::max(tpr_hi, tpr);
    fpr_lo = std::min(fpr_lo, fpr);
    fpr_hi = std::max(fpr_hi, fpr);
  }
  if (counted < 2) return std::nullopt;
  return (tpr_hi - tpr_lo) + (fpr_hi - fpr_lo);
}

// One subgroup's empirical CDF sampled on a grid.
struct CdfCurve {
  int subgroup = -1;
  std::vector<double> cdf;  // parallel to the grid
};

struct CdfTable {
  std::vector<double> grid;
  std::vector<CdfCurve> curves;
  std::vector<int> empty_subgroups;  // omitted groups, recorded not silently dropped
};

inline CdfTable cdf_table(std::span<const double> probabilities, std::span<const int> subgroups,
                          std::size_t n_groups, std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw ContractError("cdf_table: grid must be strictly increasing");
  }
  if (!grid.empty() && (grid.front() < 0.0 || grid.back() > 1.0)) {
    throw ContractError("cdf_table: grid must lie within [0, 1]");
  }
  CdfTable out;
  out.grid.assign(grid.begin(), grid.end());
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::vector<double> member;
    for (std::size_t i = 0; i < probabilities.size(); ++i)
      if (subgroups[i] == static_cast<int>(g)) member.push_back(probabilities[i]);
    if (member.empty()) {
      out.empty_subgroups.push_back(static_cast<int>(g));
      continue;
    }
    std::sort(member.begin(), member.end());
    CdfCurve curve;
    curve.subgroup = static_cast<int>(g);
    curve.cdf.reserve(grid.size());
    for (double x : grid) {
      const auto it = std::upper_bound(member.begin(), member.end(), x);
      curve.cdf.push_back(static_cast<double>(it - member.begin()) /
                          static_cast<double>(member.size()));
    }
    out.curves.push_back(std::move(curve));
  }
  return out;
}

// Maximum vertical gap between any two subgroup CDFs on the grid.
inline double max_cdf_gap(const CdfTable& table) {
  double gap = 0.0;
  for (std::size_t x = 0; x < table.grid.size(); ++x) {
    double lo = 2.0, hi = -1.0;
    for (const auto& c : table.curves) {
      lo = std::min(lo, c.cdf[x]);
      hi = std::max(hi, c.cdf[x]);
    }
    if (!table.curves.empty()) gap = std::max(gap, hi - lo);
  }
  return gap;
}

// (before - after) / before
inline double reduction_fraction(double before, double after) {
  if (before <= 0.0) {
    throw DomainError("reduction_fraction: initial value must be positive, got " +
                      std::to_string(before));
  }
  return (before - after) / before;
}

// Mean and standard deviation across folds (sample sd; 0 for a single fold).
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

}  // namespace fairtab
