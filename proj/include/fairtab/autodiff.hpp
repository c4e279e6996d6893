#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "fairtab/errors.hpp"
#include "fairtab/tensor.hpp"

namespace fairtab {

// Numerically stable sigmoid / log-sigmoid on raw doubles.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape. Rebuilt per forward pass; nodes are stored
// in creation order, which is a valid topological order, so backward is a
// single reverse sweep that visits each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  // --- leaves ---------------------------------------------------------

  // Leaf whose gradient the caller will read back.
  Value param(const Tensor& t) { return push(Node{t, {}, {}, nullptr}); }

  // Leaf that terminates gradient flow (inputs, detached constants).
  Value constant(const Tensor& t) { return push(Node{t, {}, {}, nullptr}); }
  Value constant(double v) { return constant(Tensor::scalar(v)); }

  // --- elementwise ----------------------------------------------------

  Value add(Value a, Value b) {
    const Tensor& ta = out(a);
    const Tensor& tb = out(b);
    require_same_shape("add", ta, tb);
    Tensor o = ta;
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] += tb[i];
    return push(Node{std::move(o), {}, {a.id, b.id}, [](Tape& t, const Node& n) {
                       const Tensor& g = n.grad;
                       accumulate(t.grad_of(n.inputs[0]), g);
                       accumulate(t.grad_of(n.inputs[1]), g);
                     }});
  }

  Value sub(Value a, Value b) {
    const Tensor& ta = out(a);
    const Tensor& tb = out(b);
    require_same_shape("sub", ta, tb);
    Tensor o = ta;
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] -= tb[i];
    return push(Node{std::move(o), {}, {a.id, b.id}, [](Tape& t, const Node& n) {
                       const Tensor& g = n.grad;
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       Tensor& gb = t.grad_of(n.inputs[1]);
                       for (std::size_t i = 0; i < g.numel(); ++i) {
                         ga[i] += g[i];
                         gb[i] -= g[i];
                       }
                     }});
  }

  Value mul(Value a, Value b) {
    const Tensor& ta = out(a);
    const Tensor& tb = out(b);
    require_same_shape("mul", ta, tb);
    Tensor o = ta;
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] *= tb[i];
    return push(Node{std::move(o), {}, {a.id, b.id}, [](Tape& t, const Node& n) {
                       const Tensor& g = n.grad;
                       const Tensor& va = t.out_of(n.inputs[0]);
                       const Tensor& vb = t.out_of(n.inputs[1]);
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       Tensor& gb = t.grad_of(n.inputs[1]);
                       for (std::size_t i = 0; i < g.numel(); ++i) {
                         ga[i] += g[i] * vb[i];
                         gb[i] += g[i] * va[i];
                       }
                     }});
  }

  Value add_scalar(Value a, double c) {
    Tensor o = out(a);
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] += c;
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       accumulate(t.grad_of(n.inputs[0]), n.grad);
                     }});
  }

  Value mul_scalar(Value a, double c) {
    Tensor o = out(a);
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] *= c;
    return push(Node{std::move(o), {}, {a.id}, [c](Tape& t, const Node& n) {
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += c * n.grad[i];
                     }});
  }

  Value relu(Value a) {
    Tensor o = out(a);
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] = std::max(0.0, o[i]);
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       const Tensor& x = t.out_of(n.inputs[0]);
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i)
                         if (x[i] > 0.0) ga[i] += n.grad[i];
                     }});
  }

  Value sigmoid(Value a) {
    Tensor o = out(a);
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] = stable_sigmoid(o[i]);
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       const Tensor& s = n.out;
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i)
                         ga[i] += n.grad[i] * s[i] * (1.0 - s[i]);
                     }});
  }

  Value log(Value a) {
    Tensor o = out(a);
    for (std::size_t i = 0; i < o.numel(); ++i) {
      if (o[i] <= 0.0) throw DomainError("log: non-positive input " + std::to_string(o[i]));
      o[i] = std::log(o[i]);
    }
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       const Tensor& x = t.out_of(n.inputs[0]);
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] / x[i];
                     }});
  }

  // --- linear algebra --------------------------------------------------

  Value matmul(Value a, Value b) {
    const Tensor& ta = out(a);
    const Tensor& tb = out(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
      throw DimensionError("matmul shape mismatch: " + ta.shape_str() + " x " + tb.shape_str());
    }
    const std::size_t r = ta.dim(0), s = ta.dim(1), t2 = tb.dim(1);
    Tensor o({r, t2});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t k = 0; k < s; ++k) {
        const double aik = ta.at(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < t2; ++j) o.at(i, j) += aik * tb.at(k, j);
      }
    return push(Node{std::move(o), {}, {a.id, b.id}, [](Tape& t, const Node& n) {
                       const Tensor& g = n.grad;
                       const Tensor& va = t.out_of(n.inputs[0]);
                       const Tensor& vb = t.out_of(n.inputs[1]);
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       Tensor& gb = t.grad_of(n.inputs[1]);
                       const std::size_t r = va.dim(0), s = va.dim(1), t2 = vb.dim(1);
                       // ga += g * vb^T
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < t2; ++j) {
                           const double gij = g.at(i, j);
                           if (gij == 0.0) continue;
                           for (std::size_t k = 0; k < s; ++k) ga.at(i, k) += gij * vb.at(k, j);
                         }
                       // gb += va^T * g
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t k = 0; k < s; ++k) {
                           const double aik = va.at(i, k);
                           if (aik == 0.0) continue;
                           for (std::size_t j = 0; j < t2; ++j) gb.at(k, j) += aik * g.at(i, j);
                         }
                     }});
  }

  Value transpose(Value a) {
    const Tensor& ta = out(a);
    if (ta.rank() != 2) throw DimensionError("transpose: expected rank-2, got " + ta.shape_str());
    const std::size_t r = ta.dim(0), c = ta.dim(1);
    Tensor o({c, r});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o.at(j, i) = ta.at(i, j);
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       const std::size_t r = ga.dim(0), c = ga.dim(1);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += n.grad.at(j, i);
                     }});
  }

  // Row-wise softmax with per-row max subtraction.
  Value softmax_rows(Value a) {
    const Tensor& ta = out(a);
    if (ta.rank() != 2) throw DimensionError("softmax_rows: expected rank-2, got " + ta.shape_str());
    const std::size_t r = ta.dim(0), c = ta.dim(1);
    Tensor o({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      double mx = ta.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, ta.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double e = std::exp(ta.at(i, j) - mx);
        o.at(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < c; ++j) o.at(i, j) /= sum;
    }
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       const Tensor& s = n.out;
                       const Tensor& g = n.grad;
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       const std::size_t r = s.dim(0), c = s.dim(1);
                       for (std::size_t i = 0; i < r; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * s.at(i, j);
                         for (std::size_t j = 0; j < c; ++j)
                           ga.at(i, j) += s.at(i, j) * (g.at(i, j) - dot);
                       }
                     }});
  }

  // Per-row normalization to zero mean / unit variance (population variance,
  // eps inside the square root). 1-D input is treated as a single row.
  Value layernorm_rows(Value a, double eps = 1e-5) {
    const Tensor& ta = out(a);
    const std::size_t r = ta.rank() == 2 ? ta.dim(0) : 1;
    const std::size_t c = ta.rank() == 2 ? ta.dim(1) : ta.numel();
    Tensor o = ta;
    std::vector<double> inv_sd(r);
    for (std::size_t i = 0; i < r; ++i) {
      double mu = 0.0;
      for (std::size_t j = 0; j < c; ++j) mu += ta[i * c + j];
      mu /= static_cast<double>(c);
      double var = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = ta[i * c + j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(c);
      inv_sd[i] = 1.0 / std::sqrt(var + eps);
      for (std::size_t j = 0; j < c; ++j) o[i * c + j] = (ta[i * c + j] - mu) * inv_sd[i];
    }
    return push(Node{std::move(o), {}, {a.id},
                     [r, c, inv_sd = std::move(inv_sd)](Tape& t, const Node& n) {
                       const Tensor& y = n.out;
                       const Tensor& g = n.grad;
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < r; ++i) {
                         double gmean = 0.0, gymean = 0.0;
                         for (std::size_t j = 0; j < c; ++j) {
                           gmean += g[i * c + j];
                           gymean += g[i * c + j] * y[i * c + j];
                         }
                         gmean /= static_cast<double>(c);
                         gymean /= static_cast<double>(c);
                         for (std::size_t j = 0; j < c; ++j)
                           ga[i * c + j] +=
                               inv_sd[i] * (g[i * c + j] - gmean - y[i * c + j] * gymean);
                       }
                     }});
  }

  // out[i][j] = x[i][j] * gamma[j] + beta[j]
  Value affine_rows(Value x, Value gamma, Value beta) {
    const Tensor& tx = out(x);
    const Tensor& tg = out(gamma);
    const Tensor& tb = out(beta);
    const std::size_t r = tx.rank() == 2 ? tx.dim(0) : 1;
    const std::size_t c = tx.rank() == 2 ? tx.dim(1) : tx.numel();
    if (tg.numel() != c || tb.numel() != c) {
      throw DimensionError("affine_rows: x " + tx.shape_str() + " vs gamma " + tg.shape_str() +
                           ", beta " + tb.shape_str());
    }
    Tensor o = tx;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[i * c + j] = tx[i * c + j] * tg[j] + tb[j];
    return push(Node{std::move(o), {}, {x.id, gamma.id, beta.id},
                     [r, c](Tape& t, const Node& n) {
                       const Tensor& g = n.grad;
                       const Tensor& vx = t.out_of(n.inputs[0]);
                       const Tensor& vg = t.out_of(n.inputs[1]);
                       Tensor& gx = t.grad_of(n.inputs[0]);
                       Tensor& gg = t.grad_of(n.inputs[1]);
                       Tensor& gb = t.grad_of(n.inputs[2]);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) {
                           gx[i * c + j] += g[i * c + j] * vg[j];
                           gg[j] += g[i * c + j] * vx[i * c + j];
                           gb[j] += g[i * c + j];
                         }
                     }});
  }

  // out[i][j] = x[i][j] + b[j]
  Value add_rowvec(Value x, Value b) {
    const Tensor& tx = out(x);
    const Tensor& tb = out(b);
    const std::size_t r = tx.rank() == 2 ? tx.dim(0) : 1;
    const std::size_t c = tx.rank() == 2 ? tx.dim(1) : tx.numel();
    if (tb.numel() != c) {
      throw DimensionError("add_rowvec: x " + tx.shape_str() + " vs b " + tb.shape_str());
    }
    Tensor o = tx;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[i * c + j] += tb[j];
    return push(Node{std::move(o), {}, {x.id, b.id}, [r, c](Tape& t, const Node& n) {
                       Tensor& gx = t.grad_of(n.inputs[0]);
                       Tensor& gb = t.grad_of(n.inputs[1]);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) {
                           gx[i * c + j] += n.grad[i * c + j];
                           gb[j] += n.grad[i * c + j];
                         }
                     }});
  }

  // --- shape ops -------------------------------------------------------

  Value reshape(Value a, std::vector<std::size_t> shape) {
    const Tensor& ta = out(a);
    Tensor o(std::move(shape), std::vector<double>(ta.values()));
    if (o.numel() != ta.numel()) {
      throw DimensionError("reshape: " + ta.shape_str() + " -> " + o.shape_str());
    }
    return push(Node{std::move(o), {}, {a.id}, [](Tape& t, const Node& n) {
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
                     }});
  }

  // Concatenate along the last axis. All inputs rank 1, or all rank 2 with
  // equal row counts.
  Value concat(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const std::size_t rk = out(parts[0]).rank();
    std::size_t rows = rk == 2 ? out(parts[0]).dim(0) : 1;
    std::size_t total_cols = 0;
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    for (const Value& p : parts) {
      const Tensor& tp = out(p);
      if (tp.rank() != rk || (rk == 2 && tp.dim(0) != rows)) {
        throw DimensionError("concat: incompatible part " + tp.shape_str());
      }
      widths.push_back(rk == 2 ? tp.dim(1) : tp.numel());
      total_cols += widths.back();
      ids.push_back(p.id);
    }
    Tensor o(rk == 2 ? std::vector<std::size_t>{rows, total_cols}
                     : std::vector<std::size_t>{total_cols});
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor& tp = out(parts[pi]);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < widths[pi]; ++j)
          o[i * total_cols + off + j] = tp[i * widths[pi] + j];
      off += widths[pi];
    }
    return push(Node{std::move(o), {}, std::move(ids),
                     [rows, total_cols, widths = std::move(widths)](Tape& t, const Node& n) {
                       std::size_t off = 0;
                       for (std::size_t pi = 0; pi < n.inputs.size(); ++pi) {
                         Tensor& gp = t.grad_of(n.inputs[pi]);
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < widths[pi]; ++j)
                             gp[i * widths[pi] + j] += n.grad[i * total_cols + off + j];
                         off += widths[pi];
                       }
                     }});
  }

  // Stack inputs vertically into a rank-2 tensor. 1-D inputs count as one row.
  Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const std::size_t c = out(parts[0]).cols();
    std::size_t total_rows = 0;
    std::vector<int> ids;
    std::vector<std::size_t> row_counts;
    for (const Value& p : parts) {
      const Tensor& tp = out(p);
      if (tp.cols() != c) throw DimensionError("concat_rows: incompatible part " + tp.shape_str());
      row_counts.push_back(tp.rows());
      total_rows += row_counts.back();
      ids.push_back(p.id);
    }
    Tensor o({total_rows, c});
    std::size_t r0 = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor& tp = out(parts[pi]);
      for (std::size_t i = 0; i < tp.numel(); ++i) o[r0 * c + i] = tp[i];
      r0 += row_counts[pi];
    }
    return push(Node{std::move(o), {}, std::move(ids),
                     [c, row_counts = std::move(row_counts)](Tape& t, const Node& n) {
                       std::size_t r0 = 0;
                       for (std::size_t pi = 0; pi < n.inputs.size(); ++pi) {
                         Tensor& gp = t.grad_of(n.inputs[pi]);
                         for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += n.grad[r0 * c + i];
                         r0 += row_counts[pi];
                       }
                     }});
  }

  // out = rows of table selected by index (bounds-checked); duplicates allowed.
  Value gather_rows(Value table, std::vector<std::size_t> idx) {
    const Tensor& tt = out(table);
    if (tt.rank() != 2) throw DimensionError("gather_rows: expected rank-2, got " + tt.shape_str());
    const std::size_t c = tt.dim(1);
    for (std::size_t i : idx) {
      if (i >= tt.dim(0)) {
        throw DimensionError("gather_rows: index " + std::to_string(i) + " out of bounds for " +
                             tt.shape_str());
      }
    }
    Tensor o({idx.size(), c});
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) o.at(r, j) = tt.at(idx[r], j);
    return push(Node{std::move(o), {}, {table.id},
                     [c, idx = std::move(idx)](Tape& t, const Node& n) {
                       Tensor& gt = t.grad_of(n.inputs[0]);
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t j = 0; j < c; ++j)
                           gt.at(idx[r], j) += n.grad.at(r, j);
                     }});
  }

  // 1-D gather.
  Value gather(Value vec, std::vector<std::size_t> idx) {
    const Tensor& tv = out(vec);
    if (tv.rank() != 1) throw DimensionError("gather: expected rank-1, got " + tv.shape_str());
    for (std::size_t i : idx) {
      if (i >= tv.numel()) {
        throw DimensionError("gather: index " + std::to_string(i) + " out of bounds for " +
                             tv.shape_str());
      }
    }
    Tensor o({idx.size()});
    for (std::size_t r = 0; r < idx.size(); ++r) o[r] = tv[idx[r]];
    return push(Node{std::move(o), {}, {vec.id}, [idx = std::move(idx)](Tape& t, const Node& n) {
                       Tensor& gv = t.grad_of(n.inputs[0]);
                       for (std::size_t r = 0; r < idx.size(); ++r) gv[idx[r]] += n.grad[r];
                     }});
  }

  // --- reductions ------------------------------------------------------

  Value sum_all(Value a) {
    const Tensor& ta = out(a);
    double s = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) s += ta[i];
    return push(Node{Tensor::scalar(s), {}, {a.id}, [](Tape& t, const Node& n) {
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[0];
                     }});
  }

  Value mean_all(Value a) {
    const Tensor& ta = out(a);
    double s = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) s += ta[i];
    const double inv = 1.0 / static_cast<double>(ta.numel());
    return push(Node{Tensor::scalar(s * inv), {}, {a.id}, [inv](Tape& t, const Node& n) {
                       Tensor& ga = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[0] * inv;
                     }});
  }

  // Maximum entry of a 1-D tensor; subgradient routed to the first maximum.
  Value max_of(Value a) {
    const Tensor& ta = out(a);
    if (ta.rank() != 1) throw DimensionError("max_of: expected rank-1, got " + ta.shape_str());
    std::size_t arg = 0;
    for (std::size_t i = 1; i < ta.numel(); ++i)
      if (ta[i] > ta[arg]) arg = i;
    return push(Node{Tensor::scalar(ta[arg]), {}, {a.id}, [arg](Tape& t, const Node& n) {
                       t.grad_of(n.inputs[0])[arg] += n.grad[0];
                     }});
  }

  // --- fused losses ----------------------------------------------------

  // Elementwise binary cross-entropy from logits; targets in {0,1}.
  // loss = -[y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))], via log-sigmoid.
  Value bce_with_logits(Value logits, Tensor targets) {
    const Tensor& tz = out(logits);
    if (!tz.same_shape(targets)) {
      throw DimensionError("bce_with_logits: logits " + tz.shape_str() + " vs targets " +
                           targets.shape_str());
    }
    Tensor o = tz;
    for (std::size_t i = 0; i < o.numel(); ++i) {
      o[i] = targets[i] > 0.5 ? -log_sigmoid(tz[i]) : -log_sigmoid(-tz[i]);
    }
    return push(Node{std::move(o), {}, {logits.id},
                     [y = std::move(targets)](Tape& t, const Node& n) {
                       const Tensor& z = t.out_of(n.inputs[0]);
                       Tensor& gz = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i)
                         gz[i] += n.grad[i] * (stable_sigmoid(z[i]) - y[i]);
                     }});
  }

  // Elementwise focal loss from logits (gamma_f = 0, alpha_f = 0.5 halves BCE
  // exactly because both share the same log-sigmoid evaluation).
  Value focal_with_logits(Value logits, Tensor targets, double alpha_f, double gamma_f) {
    const Tensor& tz = out(logits);
    if (!tz.same_shape(targets)) {
      throw DimensionError("focal_with_logits: logits " + tz.shape_str() + " vs targets " +
                           targets.shape_str());
    }
    Tensor o = tz;
    for (std::size_t i = 0; i < o.numel(); ++i) {
      const bool pos = targets[i] > 0.5;
      const double log_pt = pos ? log_sigmoid(tz[i]) : log_sigmoid(-tz[i]);
      const double at = pos ? alpha_f : 1.0 - alpha_f;
      if (gamma_f == 0.0) {
        o[i] = -at * log_pt;
      } else {
        const double u = pos ? stable_sigmoid(-tz[i]) : stable_sigmoid(tz[i]);  // 1 - p_t
        o[i] = u == 0.0 ? 0.0 : -at * std::pow(u, gamma_f) * log_pt;
      }
    }
    return push(Node{std::move(o), {}, {logits.id},
                     [y = std::move(targets), alpha_f, gamma_f](Tape& t, const Node& n) {
                       const Tensor& z = t.out_of(n.inputs[0]);
                       Tensor& gz = t.grad_of(n.inputs[0]);
                       for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                         const bool pos = y[i] > 0.5;
                         const double p = stable_sigmoid(z[i]);
                         const double at = pos ? alpha_f : 1.0 - alpha_f;
                         double d;
                         if (gamma_f == 0.0) {
                           // d(-at*log_pt)/dz = at * (p - y)
                           d = at * (p - (pos ? 1.0 : 0.0));
                         } else {
                           const double pt = pos ? p : 1.0 - p;
                           const double u = 1.0 - pt;
                           if (u == 0.0) {
                             d = 0.0;
                           } else {
                             const double log_pt = pos ? log_sigmoid(z[i]) : log_sigmoid(-z[i]);
                             const double ds = p * (1.0 - p);  // |dpt/dz|
                             const double sign = pos ? 1.0 : -1.0;
                             d = -at * sign * ds *
                                 (-gamma_f * std::pow(u, gamma_f - 1.0) * log_pt +
                                  std::pow(u, gamma_f) / pt);
                           }
                         }
                         gz[i] += n.grad[i] * d;
                       }
                     }});
  }

  // --- access ----------------------------------------------------------

  const Tensor& value(Value v) const { return node(v.id).out; }

  double scalar_value(Value v) const {
    const Tensor& t = value(v);
    if (t.numel() != 1) throw ContractError("scalar_value: tensor is " + t.shape_str());
    return t[0];
  }

  // Reverse sweep from a scalar loss. Gradients of nodes the loss does not
  // depend on are exactly zero.
  void backward(Value loss) {
    if (loss.tape != this || loss.id < 0) throw ContractError("backward: foreign value");
    if (node(loss.id).out.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got " + node(loss.id).out.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor::zeros(n.out.shape());
    nodes_[static_cast<std::size_t>(loss.id)].grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back) n.back(*this, n);
    }
    ran_backward_ = true;
  }

  const Tensor& grad(Value v) const {
    if (!ran_backward_) throw ContractError("grad: backward has not run");
    const Node& n = node(v.id);
    return n.grad;
  }

 private:
  struct Node {
    Tensor out;
    Tensor grad;
    std::vector<int> inputs;
    std::function<void(Tape&, const Node&)> back;
  };

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size() - 1)};
  }

  const Tensor& out(Value v) const {
    if (v.tape != this) throw ContractError("value belongs to a different tape");
    return node(v.id).out;
  }

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Tensor& out_of(int id) const { return node(id).out; }
  Tensor& grad_of(int id) { return nodes_.at(static_cast<std::size_t>(id)).grad; }

  static void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
      throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                           b.shape_str());
    }
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
  }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace fairtab
