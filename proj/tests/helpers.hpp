#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fairtab/tensor.hpp"

namespace testutil {

// Central finite-difference gradient oracle. `eval` must rebuild the loss
// from scratch off the current contents of `params`; `analytic` holds the
// autodiff gradients in the same order.
struct GradCheck {
  double max_err = 0.0;      // per-entry |fd-an| / max(|fd|, |an|, 1e-3)
  std::size_t entries = 0;
};

inline GradCheck finite_diff_check(const std::vector<fairtab::Tensor*>& params,
                                   const std::function<double()>& eval,
                                   const std::vector<fairtab::Tensor>& analytic,
                                   double step = 1e-5) {
  GradCheck r;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    fairtab::Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double keep = p[i];
      p[i] = keep + step;
      const double up = eval();
      p[i] = keep - step;
      const double dn = eval();
      p[i] = keep;
      const double fd = (up - dn) / (2.0 * step);
      const double an = analytic[pi][i];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
      r.max_err = std::max(r.max_err, std::fabs(fd - an) / denom);
      ++r.entries;
    }
  }
  return r;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace testutil
