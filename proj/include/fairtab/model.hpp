#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairtab/autodiff.hpp"
#include "fairtab/dataset.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"
#include "fairtab/schema.hpp"

namespace fairtab {

struct ModelConfig {
  std::size_t embed_dim = 16;  // d
  std::size_t layers = 3;      // L
  std::size_t heads = 4;       // H
  std::size_t key_dim = 0;     // k; 0 resolves to d/H
  std::size_t value_dim = 0;   // v; 0 resolves to d/H
  std::size_t ff_hidden = 0;   // 0 resolves to 4d
  std::vector<std::size_t> head_hidden = {64};
  std::size_t tasks = 1;  // M

  std::size_t resolved_key_dim() const { return key_dim ? key_dim : embed_dim / heads; }
  std::size_t resolved_value_dim() const { return value_dim ? value_dim : embed_dim / heads; }
  std::size_t resolved_ff_hidden() const { return ff_hidden ? ff_hidden : 4 * embed_dim; }

  void validate() const {
    if (embed_dim == 0 || layers == 0 || heads == 0 || tasks == 0)
      throw ConfigError("model: embed_dim, layers, heads and tasks must be >= 1");
    if (resolved_key_dim() == 0 || resolved_value_dim() == 0)
      throw ConfigError("model: key/value dims resolve to 0 (embed_dim < heads?)");
  }

  nlohmann::ordered_json to_json() const {
    return {{"embed_dim", embed_dim},   {"layers", layers},
            {"heads", heads},           {"key_dim", key_dim},
            {"value_dim", value_dim},   {"ff_hidden", ff_hidden},
            {"head_hidden", head_hidden}, {"tasks", tasks}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.key_dim = j.value("key_dim", c.key_dim);
    c.value_dim = j.value("value_dim", c.value_dim);
    c.ff_hidden = j.value("ff_hidden", c.ff_hidden);
    if (j.contains("head_hidden"))
      c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
    c.tasks = j.value("tasks", c.tasks);
    c.validate();
    return c;
  }
};

// All trainable tensors. The encoder and embeddings are shared by every task;
// heads are task-specific (hard parameter sharing).
struct ModelParams {
  struct AttentionHead {
    Tensor wq, wk, wv;  // [d x k], [d x k], [d x v]
  };
  struct EncoderLayer {
    std::vector<AttentionHead> heads;
    Tensor wo, bo;          // [H*v x d], [d]
    Tensor ln1_g, ln1_b;    // [d]
    Tensor ff_w1, ff_b1;    // [d x ff], [ff]
    Tensor ff_w2, ff_b2;    // [ff x d], [d]
    Tensor ln2_g, ln2_b;    // [d]
  };
  struct TaskHead {
    std::vector<Tensor> w;  // chain of [in x out]
    std::vector<Tensor> b;
  };

  ModelConfig config;
  std::size_t p = 0;  // categorical feature columns
  std::size_t q = 0;  // continuous features
  std::vector<Tensor> embed_tables;  // p tables, each [(d_j + 1) x d]
  Tensor cont_gamma, cont_beta;      // [q]
  std::vector<EncoderLayer> layers;
  std::vector<TaskHead> heads;

  std::size_t head_input_dim() const { return config.embed_dim * p + q; }

  // Deterministic enumeration of every trainable tensor; the binding and the
  // optimizer both rely on this order.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t j = 0; j < embed_tables.size(); ++j)
      f("embed." + std::to_string(j), embed_tables[j], true);
    if (q > 0) {
      f("cont.gamma", cont_gamma, true);
      f("cont.beta", cont_beta, true);
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string base = "enc." + std::to_string(l) + ".";
      for (std::size_t h = 0; h < L.heads.size(); ++h) {
        const std::string hb = base + "head." + std::to_string(h) + ".";
        f(hb + "wq", L.heads[h].wq, true);
        f(hb + "wk", L.heads[h].wk, true);
        f(hb + "wv", L.heads[h].wv, true);
      }
      f(base + "wo", L.wo, true);
      f(base + "bo", L.bo, true);
      f(base + "ln1.g", L.ln1_g, true);
      f(base + "ln1.b", L.ln1_b, true);
      f(base + "ff.w1", L.ff_w1, true);
      f(base + "ff.b1", L.ff_b1, true);
      f(base + "ff.w2", L.ff_w2, true);
      f(base + "ff.b2", L.ff_b2, true);
      f(base + "ln2.g", L.ln2_g, true);
      f(base + "ln2.b", L.ln2_b, true);
    }
    for (std::size_t m = 0; m < heads.size(); ++m) {
      const std::string base = "task." + std::to_string(m) + ".";
      for (std::size_t i = 0; i < heads[m].w.size(); ++i) {
        f(base + "w" + std::to_string(i), heads[m].w[i], false);
        f(base + "b" + std::to_string(i), heads[m].b[i], false);
      }
    }
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](const std::string& name, Tensor& t, bool shared) {
          f(name, static_cast<const Tensor&>(t), shared);
        });
  }
};

namespace detail {

inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> d(-a, a);
  Tensor t({fan_in, fan_out});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace detail

// Fresh parameters: Glorot-uniform weight matrices, zero biases, unit
// layer-norm scale, N(0, 0.05^2) embedding tables.
inline ModelParams init_params(const ModelConfig& config, const Schema& schema,
                               std::mt19937_64& rng) {
  config.validate();
  schema.validate();
  ModelParams mp;
  mp.config = config;
  const auto features = schema.feature_columns();
  mp.p = features.size();
  mp.q = schema.continuous_count();

  const std::size_t d = config.embed_dim;
  std::normal_distribution<double> embed_init(0.0, 0.05);
  for (const auto& col : features) {
    Tensor table({col.cardinality + 1, d});
    for (std::size_t i = 0; i < table.numel(); ++i) table[i] = embed_init(rng);
    mp.embed_tables.push_back(std::move(table));
  }
  mp.cont_gamma = Tensor::full({std::max<std::size_t>(mp.q, 1)}, 1.0);
  mp.cont_beta = Tensor::zeros({std::max<std::size_t>(mp.q, 1)});

  const std::size_t k = config.resolved_key_dim();
  const std::size_t v = config.resolved_value_dim();
  const std::size_t ff = config.resolved_ff_hidden();
  for (std::size_t l = 0; l < config.layers; ++l) {
    ModelParams::EncoderLayer layer;
    for (std::size_t h = 0; h < config.heads; ++h) {
      layer.heads.push_back({detail::glorot_uniform(d, k, rng), detail::glorot_uniform(d, k, rng),
                             detail::glorot_uniform(d, v, rng)});
    }
    layer.wo = detail::glorot_uniform(config.heads * v, d, rng);
    layer.bo = Tensor::zeros({d});
    layer.ln1_g = Tensor::full({d}, 1.0);
    layer.ln1_b = Tensor::zeros({d});
    layer.ff_w1 = detail::glorot_uniform(d, ff, rng);
    layer.ff_b1 = Tensor::zeros({ff});
    layer.ff_w2 = detail::glorot_uniform(ff, d, rng);
    layer.ff_b2 = Tensor::zeros({d});
    layer.ln2_g = Tensor::full({d}, 1.0);
    layer.ln2_b = Tensor::zeros({d});
    mp.layers.push_back(std::move(layer));
  }

  for (std::size_t m = 0; m < config.tasks; ++m) {
    ModelParams::TaskHead head;
    std::size_t in = mp.head_input_dim();
    for (std::size_t width : config.head_hidden) {
      head.w.push_back(detail::glorot_uniform(in, width, rng));
      head.b.push_back(Tensor::zeros({width}));
      in = width;
    }
    head.w.push_back(detail::glorot_uniform(in, 1, rng));
    head.b.push_back(Tensor::zeros({1}));
    mp.heads.push_back(std::move(head));
  }
  return mp;
}

// Per-tape view of the parameters plus the flat (master tensor, tape value)
// zip the optimizer consumes.
struct BoundParams {
  struct Slot {
    Tensor* master = nullptr;
    Value value;
    bool shared = true;
    std::string name;
  };
  std::vector<Value> embed_tables;
  Value cont_gamma, cont_beta;
  struct Layer {
    std::vector<std::array<Value, 3>> heads;  // wq, wk, wv
    Value wo, bo, ln1_g, ln1_b, ff_w1, ff_b1, ff_w2, ff_b2, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  std::vector<std::vector<std::array<Value, 2>>> heads;  // [task][stage] -> {w, b}
  std::vector<Slot> slots;
};

inline BoundParams bind_params(Tape& tape, ModelParams& params) {
  BoundParams bp;
  auto lease = [&](const std::string& name, Tensor& t, bool shared) {
    Value v = tape.param(t);
    bp.slots.push_back({&t, v, shared, name});
    return v;
  };
  for (std::size_t j = 0; j < params.embed_tables.size(); ++j)
    bp.embed_tables.push_back(lease("embed." + std::to_string(j), params.embed_tables[j], true));
  if (params.q > 0) {
    bp.cont_gamma = lease("cont.gamma", params.cont_gamma, true);
    bp.cont_beta = lease("cont.beta", params.cont_beta, true);
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& L = params.layers[l];
    const std::string base = "enc." + std::to_string(l) + ".";
    BoundParams::Layer bl;
    for (std::size_t h = 0; h < L.heads.size(); ++h) {
      const std::string hb = base + "head." + std::to_string(h) + ".";
      bl.heads.push_back({lease(hb + "wq", L.heads[h].wq, true),
                          lease(hb + "wk", L.heads[h].wk, true),
                          lease(hb + "wv", L.heads[h].wv, true)});
    }
    bl.wo = lease(base + "wo", L.wo, true);
    bl.bo = lease(base + "bo", L.bo, true);
    bl.ln1_g = lease(base + "ln1.g", L.ln1_g, true);
    bl.ln1_b = lease(base + "ln1.b", L.ln1_b, true);
    bl.ff_w1 = lease(base + "ff.w1", L.ff_w1, true);
    bl.ff_b1 = lease(base + "ff.b1", L.ff_b1, true);
    bl.ff_w2 = lease(base + "ff.w2", L.ff_w2, true);
    bl.ff_b2 = lease(base + "ff.b2", L.ff_b2, true);
    bl.ln2_g = lease(base + "ln2.g", L.ln2_g, true);
    bl.ln2_b = lease(base + "ln2.b", L.ln2_b, true);
    bp.layers.push_back(std::move(bl));
  }
  for (std::size_t m = 0; m < params.heads.size(); ++m) {
    const std::string base = "task." + std::to_string(m) + ".";
    std::vector<std::array<Value, 2>> stages;
    for (std::size_t i = 0; i < params.heads[m].w.size(); ++i) {
      stages.push_back({lease(base + "w" + std::to_string(i), params.heads[m].w[i], false),
                        lease(base + "b" + std::to_string(i), params.heads[m].b[i], false)});
    }
    bp.heads.push_back(std::move(stages));
  }
  return bp;
}

// Column embedding lookup: row j of the output is row codes[j] of table j.
// Code d_j selects the missing-value embedding.
inline Value embed(Tape& tape, const BoundParams& bp, std::span<const int> codes) {
  if (codes.size() != bp.embed_tables.size())
    throw DimensionError("embed: got " + std::to_string(codes.size()) + " codes for " +
                         std::to_string(bp.embed_tables.size()) + " tables");
  std::vector<Value> rows;
  rows.reserve(codes.size());
  for (std::size_t j = 0; j < codes.size(); ++j) {
    const Tensor& table = tape.value(bp.embed_tables[j]);
    if (codes[j] < 0 || static_cast<std::size_t>(codes[j]) >= table.dim(0)) {
      throw DimensionError("embed: code " + std::to_string(codes[j]) +
                           " out of bounds for table " + std::to_string(j) + " with " +
                           std::to_string(table.dim(0)) + " rows");
    }
    rows.push_back(tape.gather_rows(bp.embed_tables[j], {static_cast<std::size_t>(codes[j])}));
  }
  return tape.concat_rows(rows);  // [p x d]
}

// LN_q: normalize the q continuous features of one row, then scale and shift
// by the learnable gamma/beta.
inline Value layernorm_continuous(Tape& tape, const BoundParams& bp, Value x_cont,
                                  double eps = 1e-5) {
  return tape.affine_rows(tape.layernorm_rows(x_cont, eps), bp.cont_gamma, bp.cont_beta);
}

// Transformer encoder stack over the column embeddings: per layer, multi-head
// self-attention (A = softmax(QK^T / sqrt(k)), head output A*V), heads
// concatenated and projected back to d, then residual + layer norm and a
// position-wise ReLU feed-forward with its own residual + layer norm.
inline Value encoder_forward(Tape& tape, const BoundParams& bp, const ModelConfig& config,
                             Value x, std::vector<Tensor>* attentions = nullptr) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.resolved_key_dim()));
  for (const auto& layer : bp.layers) {
    std::vector<Value> head_outs;
    head_outs.reserve(layer.heads.size());
    for (const auto& head : layer.heads) {
      Value q = tape.matmul(x, head[0]);
      Value k = tape.matmul(x, head[1]);
      Value v = tape.matmul(x, head[2]);
      Value att = tape.softmax_rows(tape.mul_scalar(tape.matmul(q, tape.transpose(k)), scale));
      if (attentions) attentions->push_back(tape.value(att));
      head_outs.push_back(tape.matmul(att, v));
    }
    Value projected = tape.add_rowvec(tape.matmul(tape.concat(head_outs), layer.wo), layer.bo);
    x = tape.affine_rows(tape.layernorm_rows(tape.add(x, projected)), layer.ln1_g, layer.ln1_b);
    Value ff = tape.add_rowvec(
        tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(x, layer.ff_w1), layer.ff_b1)),
                    layer.ff_w2),
        layer.ff_b2);
    x = tape.affine_rows(tape.layernorm_rows(tape.add(x, ff)), layer.ln2_g, layer.ln2_b);
  }
  return x;
}

// One task head g_psi^m over the concatenated representation.
inline Value head_forward(Tape& tape, const BoundParams& bp, std::size_t task, Value input) {
  Value h = input;
  const auto& stages = bp.heads.at(task);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    h = tape.add_rowvec(tape.matmul(h, stages[i][0]), stages[i][1]);
    if (i + 1 < stages.size()) h = tape.relu(h);
  }
  return h;  // [1 x 1] logit
}

// Full per-row forward: contextual embeddings flattened to d*p, concatenated
// with the q normalized continuous features, fed to all M task heads.
// Returns raw logits; callers apply the sigmoid.
inline std::vector<Value> predict_row(Tape& tape, const BoundParams& bp,
                                      const ModelConfig& config, std::span<const int> codes,
                                      std::span<const double> cont) {
  Value ctx = encoder_forward(tape, bp, config, embed(tape, bp, codes));
  Value flat = tape.reshape(ctx, {1, config.embed_dim * codes.size()});
  Value input = flat;
  if (!cont.empty()) {
    Tensor xc({1, cont.size()});
    for (std::size_t i = 0; i < cont.size(); ++i) {
      if (!std::isfinite(cont[i]))
        throw DataError("predict: non-finite continuous input (imputation missing?)");
      xc[i] = cont[i];
    }
    Value normed = layernorm_continuous(tape, bp, tape.constant(xc));
    input = tape.concat({flat, normed});
  }
  std::vector<Value> logits;
  logits.reserve(bp.heads.size());
  for (std::size_t m = 0; m < bp.heads.size(); ++m)
    logits.push_back(head_forward(tape, bp, m, input));
  return logits;
}

// Inference without gradient bookkeeping: per-row sigmoid probabilities for
// every task, rows taken from `rows` (all rows when empty).
inline std::vector<std::vector<double>> predict_probabilities(
    ModelParams& params, const TabularDataset& ds, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) all[i] = i;
    rows = all;
  }
  std::vector<std::vector<double>> probs(params.config.tasks,
                                         std::vector<double>(rows.size(), 0.0));
  std::vector<int> codes(params.p);
  std::vector<double> cont(params.q);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    for (std::size_t j = 0; j < params.p; ++j) codes[j] = ds.cat[j][r];
    for (std::size_t j = 0; j < params.q; ++j) cont[j] = ds.cont[j][r];
    Tape tape;
    BoundParams bp = bind_params(tape, params);
    auto logits = predict_row(tape, bp, params.config, codes, cont);
    for (std::size_t m = 0; m < logits.size(); ++m)
      probs[m][i] = stable_sigmoid(tape.scalar_value(logits[m]));
  }
  return probs;
}

// --- checkpointing ------------------------------------------------------

inline nlohmann::ordered_json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"values", t.values()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                j.at("values").get<std::vector<double>>());
}

inline nlohmann::ordered_json params_to_json(const ModelParams& params) {
  nlohmann::ordered_json j;
  j["config"] = params.config.to_json();
  j["p"] = params.p;
  j["q"] = params.q;
  nlohmann::ordered_json tensors;
  params.for_each_tensor([&](const std::string& name, const Tensor& t, bool) {
    tensors[name] = tensor_to_json(t);
  });
  j["tensors"] = std::move(tensors);
  return j;
}

inline ModelParams params_from_json(const nlohmann::json& j, const Schema& schema) {
  ModelConfig config = ModelConfig::from_json(j.at("config"));
  std::mt19937_64 rng(0);
  ModelParams params = init_params(config, schema, rng);
  if (params.p != j.at("p").get<std::size_t>() || params.q != j.at("q").get<std::size_t>()) {
    throw ConfigError("checkpoint: schema feature counts do not match the stored model");
  }
  const auto& tensors = j.at("tensors");
  params.for_each_tensor([&](const std::string& name, Tensor& t, bool) {
    Tensor loaded = tensor_from_json(tensors.at(name));
    if (loaded.shape() != t.shape()) {
      throw ConfigError("checkpoint: tensor '" + name + "' has shape " + loaded.shape_str() +
                        ", expected " + t.shape_str());
    }
    t = std::move(loaded);
  });
  return params;
}

}  // namespace fairtab
