// Copyright 2026 The allin Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "allin/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json_util.hpp"

namespace allin {

using detail::ojson;

const char* to_string(NormKind norm) noexcept {
  switch (norm) {
    case NormKind::None: return "none";
    case NormKind::Layer: return "layer";
    case NormKind::Batch: return "batch";
  }
  return "?";
}

const char* to_string(HeadKind head) noexcept {
  return head == HeadKind::Mlp ? "mlp" : "linear";
}

NormKind parse_norm(const std::string& s) {
  if (s == "none") return NormKind::None;
  if (s == "layer") return NormKind::Layer;
  if (s == "batch") return NormKind::Batch;
  fail(ErrorKind::Config, "norm: expected none, layer or batch, got '" + s + "'");
}

HeadKind parse_head_kind(const std::string& s) {
  if (s == "mlp") return HeadKind::Mlp;
  if (s == "linear") return HeadKind::Linear;
  fail(ErrorKind::Config, "head: expected mlp or linear, got '" + s + "'");
}

void EncoderConfig::validate() const {
  if (num_layers == 0) fail(ErrorKind::Config, "num_layers must be at least 1");
  if (hidden_widths.size() != num_layers) {
    fail(ErrorKind::Config, "hidden_width lists " + std::to_string(hidden_widths.size()) +
                                " widths for " + std::to_string(num_layers) + " layers");
  }
  if (projection.h == 0) fail(ErrorKind::Config, "projection.h must be positive");
  const std::size_t ops = num_operators();
  for (std::size_t l = 0; l < num_layers; ++l) {
    const auto w = hidden_widths[l];
    if (w == 0 || w % ops != 0) {
      fail(ErrorKind::Config, "hidden_width[" + std::to_string(l) + "] = " +
                                  std::to_string(w) + " is not a positive multiple of the " +
                                  std::to_string(ops) + " operators");
    }
  }
}

void for_each_param(EncoderParams& params,
                    const std::function<void(const std::string&, Matrix&)>& fn) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t o = 0; o < layer.weights.size(); ++o) {
      const std::string op = prefix + "op" + std::to_string(o) + ".";
      fn(op + "weight", layer.weights[o]);
      fn(op + "bias", layer.biases[o]);
    }
    if (!layer.gamma.empty()) {
      fn(prefix + "norm.gamma", layer.gamma);
      fn(prefix + "norm.beta", layer.beta);
    }
  }
}

void for_each_param(const EncoderParams& params,
                    const std::function<void(const std::string&, const Matrix&)>& fn) {
  for_each_param(const_cast<EncoderParams&>(params),
                 [&](const std::string& name, Matrix& m) { fn(name, m); });
}

namespace {

void glorot_fill(Matrix& w, SeedStream& stream) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.data()) v = (2.0 * stream.next_uniform() - 1.0) * limit;
}

}  // namespace

EncoderParams init_encoder_params(const EncoderConfig& config, SeedStream& stream) {
  config.validate();
  EncoderParams params;
  const std::size_t ops = config.num_operators();
  std::size_t in = config.input_width();
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t out = config.hidden_widths[l];
    LayerParams layer;
    for (std::size_t o = 0; o < ops; ++o) {
      Matrix w(in, out / ops);
      glorot_fill(w, stream);
      layer.weights.push_back(std::move(w));
      layer.biases.emplace_back(1, out / ops);
    }
    if (config.norm != NormKind::None) {
      layer.gamma = Matrix(1, out, 1.0);
      layer.beta = Matrix(1, out, 0.0);
    }
    params.layers.push_back(std::move(layer));
    in = out;
  }
  return params;
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams z = params;
  for_each_param(z, [](const std::string&, Matrix& m) { m *= 0.0; });
  return z;
}

std::uint64_t params_hash(const EncoderParams& params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for_each_param(params, [&](const std::string&, const Matrix& m) {
    for (double v : m.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
      }
    }
  });
  return h;
}

std::vector<std::string> TaskHead::param_names(HeadKind kind) {
  if (kind == HeadKind::Linear) return {"fc.weight", "fc.bias"};
  return {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"};
}

TaskHead init_head(HeadKind kind, TaskKind task, MetricKind metric, std::size_t inputs,
                   std::size_t outputs, SeedStream& stream) {
  if (inputs == 0 || outputs == 0)
    fail(ErrorKind::Config, "head needs positive input and output widths");
  TaskHead head;
  head.kind = kind;
  head.task = task;
  head.metric = metric;
  head.inputs = inputs;
  head.outputs = outputs;
  if (kind == HeadKind::Linear) {
    head.hidden = 0;
    Matrix w(inputs, outputs);
    glorot_fill(w, stream);
    head.params = {std::move(w), Matrix(1, outputs)};
  } else {
    head.hidden = kHeadHiddenWidth;
    Matrix w1(inputs, head.hidden), w2(head.hidden, outputs);
    glorot_fill(w1, stream);
    glorot_fill(w2, stream);
    head.params = {std::move(w1), Matrix(1, head.hidden), std::move(w2), Matrix(1, outputs)};
  }
  return head;
}

Matrix rwse(const Graph& g, std::size_t h_s) {
  const std::size_t n = g.num_nodes;
  Matrix out(n, h_s);
  if (h_s == 0 || n == 0) return out;
  const auto deg = in_degrees(g);
  // Start nodes are processed in column blocks; column c of the block tracks
  // the walk distribution (P^t)[:, start] as a column of Pᵗ·E.
  constexpr std::size_t kBlock = 256;
  for (std::size_t lo = 0; lo < n; lo += kBlock) {
    const std::size_t width = std::min(kBlock, n - lo);
    Matrix walk(n, width);
    for (std::size_t c = 0; c < width; ++c) walk(lo + c, c) = 1.0;
    for (std::size_t t = 0; t < h_s; ++t) {
      walk = adjacency_apply(g, walk);
      for (std::size_t i = 0; i < n; ++i) {
        const double inv = deg[i] ? 1.0 / static_cast<double>(deg[i]) : 0.0;
        for (double& v : walk.row(i)) v *= inv;
      }
      for (std::size_t c = 0; c < width; ++c) out(lo + c, t) = walk(lo + c, c);
    }
  }
  return out;
}

Matrix build_h0(const Matrix& r0, const Matrix& s) {
  if (r0.rows() != s.rows()) {
    fail(ErrorKind::Dimension, "build_h0: R⁽⁰⁾ has " + std::to_string(r0.rows()) +
                                   " rows, S has " + std::to_string(s.rows()));
  }
  if (s.cols() == 0) return r0;
  return hconcat(r0, s);
}

namespace {

void require_layer_shapes(const Matrix& h_in, const OperatorSet& ops,
                          const LayerParams& params) {
  if (params.weights.size() != ops.size() || params.biases.size() != ops.size()) {
    fail(ErrorKind::Config, "layer has " + std::to_string(params.weights.size()) +
                                " operator slots, operator set has " +
                                std::to_string(ops.size()));
  }
  if (h_in.rows() != ops.n)
    fail(ErrorKind::Dimension, "layer input rows != operator node count");
  for (const auto& w : params.weights) {
    if (w.rows() != h_in.cols()) {
      fail(ErrorKind::Dimension, "layer input width " + std::to_string(h_in.cols()) +
                                     " != weight rows " + std::to_string(w.rows()));
    }
  }
}

/// Normalises `z` in place into x̂ and records 1/σ per group.
void normalize(Matrix& z, NormKind norm, std::vector<double>& inv_std) {
  const std::size_t n = z.rows(), w = z.cols();
  if (norm == NormKind::Layer) {
    inv_std.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = z.row(i);
      double mean = 0.0;
      for (double v : r) mean += v;
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (double v : r) var += (v - mean) * (v - mean);
      var /= static_cast<double>(w);
      const double is = 1.0 / std::sqrt(var + kNormEpsilon);
      for (double& v : r) v = (v - mean) * is;
      inv_std[i] = is;
    }
  } else if (norm == NormKind::Batch) {
    inv_std.assign(w, 0.0);
    for (std::size_t j = 0; j < w; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += z(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
      var /= static_cast<double>(n);
      const double is = 1.0 / std::sqrt(var + kNormEpsilon);
      for (std::size_t i = 0; i < n; ++i) z(i, j) = (z(i, j) - mean) * is;
      inv_std[j] = is;
    }
  }
}

}  // namespace

Matrix layer_forward(const Matrix& h_in, const OperatorSet& ops, const LayerParams& params,
                     NormKind norm, LayerCache* cache) {
  require_layer_shapes(h_in, ops, params);
  const std::size_t n = h_in.rows();
  const std::size_t sub = params.weights.front().cols();
  const std::size_t width = sub * ops.size();
  if (norm != NormKind::None && (params.gamma.cols() != width || params.beta.cols() != width))
    fail(ErrorKind::Config, "normalisation parameters do not match layer width");

  // (O·H)·W is evaluated as O·(H·W), which is cheaper when the sublayer
  // width is below the input width.
  Matrix z(n, width);
  for (std::size_t o = 0; o < ops.size(); ++o) {
    const Matrix sub_out = apply_operator(ops.ops[o], matmul(h_in, params.weights[o]));
    const auto bias = params.biases[o].row(0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = z.row(i).subspan(o * sub, sub);
      auto src = sub_out.row(i);
      for (std::size_t j = 0; j < sub; ++j) dst[j] = src[j] + bias[j];
    }
  }

  Matrix out = z;
  std::vector<double> inv_std;
  if (norm != NormKind::None) {
    normalize(out, norm, inv_std);
    if (cache) cache->normalized = out;
    const auto g = params.gamma.row(0), b = params.beta.row(0);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < width; ++j) r[j] = g[j] * r[j] + b[j];
    }
  }
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;

  if (cache) {
    cache->input = h_in;
    cache->pre_norm = std::move(z);
    cache->inv_std = std::move(inv_std);
    cache->output = out;
  }
  return out;
}

Matrix layer_backward(const LayerCache& cache, const OperatorSet& ops,
                      const LayerParams& params, NormKind norm, const Matrix& d_out,
                      LayerParams& grads) {
  const std::size_t n = cache.output.rows();
  const std::size_t width = cache.output.cols();
  const std::size_t sub = params.weights.front().cols();

  Matrix d = d_out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(cache.output.data()[i] > 0.0)) d.data()[i] = 0.0;

  if (norm != NormKind::None) {
    const auto& xhat = cache.normalized;
    const auto gamma = params.gamma.row(0);
    auto dg = grads.gamma.row(0), db = grads.beta.row(0);
    Matrix dx(n, width);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        dg[j] += d(i, j) * xhat(i, j);
        db[j] += d(i, j);
        dx(i, j) = d(i, j) * gamma[j];
      }
    // dz = (1/σ)(dx̂ − mean(dx̂) − x̂·mean(dx̂·x̂)) within each normalisation group.
    if (norm == NormKind::Layer) {
      for (std::size_t i = 0; i < n; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          m1 += dx(i, j);
          m2 += dx(i, j) * xhat(i, j);
        }
        m1 /= static_cast<double>(width);
        m2 /= static_cast<double>(width);
        for (std::size_t j = 0; j < width; ++j)
          d(i, j) = cache.inv_std[i] * (dx(i, j) - m1 - xhat(i, j) * m2);
      }
    } else {
      for (std::size_t j = 0; j < width; ++j) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          m1 += dx(i, j);
          m2 += dx(i, j) * xhat(i, j);
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          d(i, j) = cache.inv_std[j] * (dx(i, j) - m1 - xhat(i, j) * m2);
      }
    }
  }

  Matrix d_in(n, cache.input.cols());
  for (std::size_t o = 0; o < ops.size(); ++o) {
    Matrix dz(n, sub);
    auto dbias = grads.biases[o].row(0);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = d.row(i).subspan(o * sub, sub);
      auto dst = dz.row(i);
      for (std::size_t j = 0; j < sub; ++j) {
        dst[j] = src[j];
        dbias[j] += src[j];
      }
    }
    const Matrix back = apply_operator_transpose(ops.ops[o], dz);
    grads.weights[o] += matmul_tn(cache.input, back);
    d_in += matmul_nt(back, params.weights[o]);
  }
  return d_in;
}

std::pair<Matrix, std::optional<Matrix>> project_graph(const Graph& g,
                                                       const ProjectionState& ps,
                                                       const EncoderConfig& config) {
  Matrix r0 = project_nodes(g, ps);
  std::optional<Matrix> r0_edge;
  if (config.use_edge_ops) {
    if (g.edge_features && ps.edge_projection() && !g.edges.empty())
      r0_edge = aggregate_edges_to_nodes(g, project_edges(g, ps));
    else
      r0_edge = Matrix(g.num_nodes, ps.h());
  }
  return {std::move(r0), std::move(r0_edge)};
}

Matrix encode_projected(const Graph& g, const Matrix& r0,
                        const std::optional<Matrix>& r0_edge, const EncoderConfig& config,
                        const EncoderParams& params, EncoderTape* tape) {
  if (params.layers.size() != config.num_layers)
    fail(ErrorKind::Config, "parameter layer count does not match config");
  if (r0.cols() != config.projection.h) {
    fail(ErrorKind::Dimension, "R⁽⁰⁾ width " + std::to_string(r0.cols()) +
                                   " != projection.h " + std::to_string(config.projection.h));
  }
  OperatorSet ops = build_operator_set(
      g, r0, config.k, config.use_edge_ops ? r0_edge : std::nullopt, config.operator_options());
  Matrix h = build_h0(r0, rwse(g, config.structural_dim));
  if (tape) tape->layers.assign(config.num_layers, LayerCache{});
  for (std::size_t l = 0; l < config.num_layers; ++l)
    h = layer_forward(h, ops, params.layers[l], config.norm, tape ? &tape->layers[l] : nullptr);
  if (tape) tape->ops = std::move(ops);
  return h;
}

Matrix encoder_forward(const Graph& g, const ProjectionState& ps,
                       const EncoderConfig& config, const EncoderParams& params,
                       EncoderTape* tape) {
  auto [r0, r0_edge] = project_graph(g, ps, config);
  return encode_projected(g, r0, r0_edge, config, params, tape);
}

void encoder_backward(const EncoderTape& tape, const EncoderConfig& config,
                      const EncoderParams& params, const Matrix& d_final,
                      EncoderParams& grads) {
  Matrix d = d_final;
  for (std::size_t l = config.num_layers; l-- > 0;)
    d = layer_backward(tape.layers[l], tape.ops, params.layers[l], config.norm, d,
                       grads.layers[l]);
}

Matrix pool_graph(const Matrix& h_final, PoolMode) {
  if (h_final.rows() == 0) fail(ErrorKind::Dimension, "pool_graph: graph has no nodes");
  const auto means = column_means(h_final);
  Matrix out(1, means.size());
  std::copy(means.begin(), means.end(), out.row(0).begin());
  return out;
}

namespace {

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
}

void accumulate_bias_grad(Matrix& grad, const Matrix& d) {
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) grad(0, j) += d(i, j);
}

}  // namespace

Matrix head_forward(const Matrix& embedding, const TaskHead& head, HeadCache* cache) {
  if (embedding.cols() != head.inputs) {
    fail(ErrorKind::Dimension, "head expects width " + std::to_string(head.inputs) +
                                   ", embedding has " + std::to_string(embedding.cols()));
  }
  if (cache) cache->input = embedding;
  if (head.kind == HeadKind::Linear) {
    Matrix y = matmul(embedding, head.params[0]);
    add_bias(y, head.params[1]);
    return y;
  }
  Matrix a = matmul(embedding, head.params[0]);
  add_bias(a, head.params[1]);
  if (cache) cache->hidden_pre = a;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  Matrix y = matmul(a, head.params[2]);
  add_bias(y, head.params[3]);
  return y;
}

Matrix head_backward(const HeadCache& cache, const TaskHead& head, const Matrix& d_scores,
                     std::vector<Matrix>& grads) {
  if (head.kind == HeadKind::Linear) {
    grads[0] += matmul_tn(cache.input, d_scores);
    accumulate_bias_grad(grads[1], d_scores);
    return matmul_nt(d_scores, head.params[0]);
  }
  Matrix a = cache.hidden_pre;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  grads[2] += matmul_tn(a, d_scores);
  accumulate_bias_grad(grads[3], d_scores);
  Matrix da = matmul_nt(d_scores, head.params[2]);
  for (std::size_t i = 0; i < da.size(); ++i)
    if (!(cache.hidden_pre.data()[i] > 0.0)) da.data()[i] = 0.0;
  grads[0] += matmul_tn(cache.input, da);
  accumulate_bias_grad(grads[1], da);
  return matmul_nt(da, head.params[0]);
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::string encoder_config_to_json(const EncoderConfig& config) {
  return detail::encoder_config_json(config).dump();
}

EncoderConfig encoder_config_from_json(const std::string& json_text) {
  return detail::encoder_config_from(detail::parse_json(json_text, "encoder config"));
}

namespace {

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> expected_shapes(
    const EncoderConfig& config) {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
  const std::size_t ops = config.num_operators();
  std::size_t in = config.input_width();
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t w = config.hidden_widths[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t o = 0; o < ops; ++o) {
      const std::string op = prefix + "op" + std::to_string(o) + ".";
      out.push_back({op + "weight", {in, w / ops}});
      out.push_back({op + "bias", {1, w / ops}});
    }
    if (config.norm != NormKind::None) {
      out.push_back({prefix + "norm.gamma", {1, w}});
      out.push_back({prefix + "norm.beta", {1, w}});
    }
    in = w;
  }
  return out;
}

ojson head_to_json(const TaskHead& head) {
  ojson j = ojson::object();
  j["kind"] = to_string(head.kind);
  j["task"] = to_string(head.task);
  j["metric"] = to_string(head.metric);
  j["inputs"] = head.inputs;
  j["hidden"] = head.hidden;
  j["outputs"] = head.outputs;
  ojson params = ojson::object();
  const auto names = TaskHead::param_names(head.kind);
  for (std::size_t i = 0; i < names.size(); ++i)
    params[names[i]] = detail::matrix_to_json(head.params[i]);
  j["params"] = std::move(params);
  return j;
}

TaskHead head_from_json(const nlohmann::json& j, const std::string& name) {
  const std::string where = "heads." + name;
  try {
    TaskHead head;
    head.kind = parse_head_kind(j.at("kind").get<std::string>());
    head.task = parse_task(j.at("task").get<std::string>());
    head.metric = parse_metric(j.at("metric").get<std::string>());
    head.inputs = j.at("inputs").get<std::size_t>();
    head.hidden = j.at("hidden").get<std::size_t>();
    head.outputs = j.at("outputs").get<std::size_t>();
    const auto names = TaskHead::param_names(head.kind);
    for (const auto& pname : names)
      head.params.push_back(detail::matrix_from_json(j.at("params").at(pname), where + "." + pname));
    const bool linear = head.kind == HeadKind::Linear;
    const std::pair<std::size_t, std::size_t> shapes_linear[] = {
        {head.inputs, head.outputs}, {1, head.outputs}};
    const std::pair<std::size_t, std::size_t> shapes_mlp[] = {
        {head.inputs, head.hidden}, {1, head.hidden}, {head.hidden, head.outputs}, {1, head.outputs}};
    for (std::size_t i = 0; i < head.params.size(); ++i) {
      const auto want = linear ? shapes_linear[i] : shapes_mlp[i];
      if (head.params[i].rows() != want.first || head.params[i].cols() != want.second)
        fail(ErrorKind::Shape, where + "." + names[i] + ": shape does not match head widths");
    }
    return head;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, where + ": " + e.what());
  }
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  ojson j = ojson::object();
  j["format_version"] = ckpt.format_version;
  j["config"] = detail::encoder_config_json(ckpt.config);
  ojson params = ojson::object();
  for_each_param(ckpt.params, [&](const std::string& name, const Matrix& m) {
    params[name] = detail::matrix_to_json(m);
  });
  j["params"] = std::move(params);
  ojson heads = ojson::object();
  for (const auto& [name, head] : ckpt.heads) heads[name] = head_to_json(head);
  j["heads"] = std::move(heads);
  j["master_seed"] = ckpt.master_seed;
  j["step"] = ckpt.step;
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& json_text, const EncoderConfig* expected) {
  const auto j = detail::parse_json(json_text, "checkpoint");
  if (!j.is_object()) fail(ErrorKind::Parse, "checkpoint: expected object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    fail(ErrorKind::Parse, "checkpoint: missing format_version");
  Checkpoint ckpt;
  ckpt.format_version = j["format_version"].get<int>();
  if (ckpt.format_version != kCheckpointVersion) {
    fail(ErrorKind::Version, "checkpoint format_version " +
                                 std::to_string(ckpt.format_version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  for (const char* key : {"config", "params", "heads", "master_seed", "step"})
    if (!j.contains(key)) fail(ErrorKind::Parse, std::string("checkpoint: missing ") + key);
  try {
    ckpt.config = detail::encoder_config_from(j["config"]);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string("checkpoint config: ") + e.what());
  }
  ckpt.config.validate();
  if (expected) {
    expected->validate();
    const auto got = expected_shapes(ckpt.config);
    const auto want = expected_shapes(*expected);
    if (got != want || ckpt.config.projection.h != expected->projection.h) {
      fail(ErrorKind::Shape, "checkpoint encoder (output width " +
                                 std::to_string(ckpt.config.output_width()) +
                                 ") does not match the requested config (output width " +
                                 std::to_string(expected->output_width()) + ")");
    }
  }

  const auto& params = j["params"];
  if (!params.is_object()) fail(ErrorKind::Parse, "checkpoint: params must be an object");
  SeedStream unused(0, "shape-only");
  EncoderConfig shape_config = ckpt.config;
  ckpt.params = init_encoder_params(shape_config, unused);
  const auto shapes = expected_shapes(ckpt.config);
  if (params.size() != shapes.size())
    fail(ErrorKind::Shape, "checkpoint: parameter count does not match config");
  for_each_param(ckpt.params, [&](const std::string& name, Matrix& m) {
    if (!params.contains(name)) fail(ErrorKind::Shape, "checkpoint: missing parameter " + name);
    Matrix loaded = detail::matrix_from_json(params[name], "params." + name);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols())
      fail(ErrorKind::Shape, "params." + name + ": shape does not match config");
    if (!loaded.all_finite()) fail(ErrorKind::Parse, "params." + name + ": non-finite value");
    m = std::move(loaded);
  });

  const auto& heads = j["heads"];
  if (!heads.is_object()) fail(ErrorKind::Parse, "checkpoint: heads must be an object");
  for (const auto& [name, hj] : heads.items()) {
    TaskHead head = head_from_json(hj, name);
    if (head.inputs != ckpt.config.output_width())
      fail(ErrorKind::Shape, "heads." + name + ": input width does not match encoder");
    ckpt.heads.emplace(name, std::move(head));
  }
  if (!j["master_seed"].is_number_unsigned() || !j["step"].is_number_unsigned())
    fail(ErrorKind::Parse, "checkpoint: master_seed and step must be non-negative integers");
  ckpt.master_seed = j["master_seed"].get<std::uint64_t>();
  ckpt.step = j["step"].get<std::uint64_t>();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file(path.string(), checkpoint_to_json(ckpt) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderConfig* expected) {
  return checkpoint_from_json(detail::read_file(path.string()), expected);
}

}  // namespace allin
