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

#include "allin/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "allin/parallel.hpp"
#include "json_util.hpp"

namespace allin {

using detail::ojson;

LossSpec loss_for_task(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::NodeClassification:
    case TaskKind::GraphClassification: return {LossKind::CrossEntropy};
    case TaskKind::GraphRegression: return {LossKind::Mse};
    case TaskKind::GraphMultilabel: return {LossKind::BceMultilabel};
  }
  return {};
}

LossResult loss_with_grad(const Matrix& pred, const Targets& target, LossSpec spec) {
  LossResult out;
  out.grad = Matrix(pred.rows(), pred.cols());
  const std::size_t rows = pred.rows();
  if (target.rows() != rows) {
    fail(ErrorKind::Dimension, "loss: " + std::to_string(rows) + " predictions for " +
                                   std::to_string(target.rows()) + " targets");
  }
  if (rows == 0) return out;

  switch (spec.kind) {
    case LossKind::CrossEntropy: {
      if (target.classes.size() != rows)
        fail(ErrorKind::Dimension, "cross-entropy needs one class per row");
      for (std::size_t i = 0; i < rows; ++i) {
        const auto r = pred.row(i);
        const auto y = target.classes[i];
        if (y < 0 || static_cast<std::size_t>(y) >= r.size())
          fail(ErrorKind::Dimension, "cross-entropy: class index exceeds logit arity");
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double v : r) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        out.value += lse - r[static_cast<std::size_t>(y)];
        auto g = out.grad.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) g[j] = std::exp(r[j] - lse);
        g[static_cast<std::size_t>(y)] -= 1.0;
      }
      out.value /= static_cast<double>(rows);
      out.grad *= 1.0 / static_cast<double>(rows);
      break;
    }
    case LossKind::Mse:
    case LossKind::MaeEvalOnly: {
      if (target.values.rows() != rows || target.values.cols() != pred.cols())
        fail(ErrorKind::Dimension, "regression loss: target arity mismatch");
      const double count = static_cast<double>(pred.size());
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred.data()[i] - target.values.data()[i];
        if (spec.kind == LossKind::Mse) {
          out.value += diff * diff;
          out.grad.data()[i] = 2.0 * diff / count;
        } else {
          out.value += std::abs(diff);
          out.grad.data()[i] = (diff > 0) - (diff < 0);
          out.grad.data()[i] /= count;
        }
      }
      out.value /= count;
      break;
    }
    case LossKind::BceMultilabel: {
      if (target.values.rows() != rows || target.values.cols() != pred.cols())
        fail(ErrorKind::Dimension, "bce: target arity mismatch");
      std::size_t observed = 0;
      for (double y : target.values.data()) observed += std::isnan(y) ? 0 : 1;
      if (observed == 0) return out;
      const double count = static_cast<double>(observed);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = target.values.data()[i];
        if (std::isnan(y)) continue;
        const double x = pred.data()[i];
        // max(x,0) − x·y + log(1 + e^{−|x|})
        out.value += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        out.grad.data()[i] = (sig - y) / count;
      }
      out.value /= count;
      break;
    }
  }
  return out;
}

double loss(const Matrix& pred, const Targets& target, LossSpec spec) {
  return loss_with_grad(pred, target, spec).value;
}

void adam_step(const std::string& name, Matrix& param, const Matrix& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    fail(ErrorKind::Dimension, "adam_step: gradient shape differs for " + name);
  auto& slot = state.slots[name];
  if (slot.m.rows() != param.rows() || slot.m.cols() != param.cols()) {
    slot.m = Matrix(param.rows(), param.cols());
    slot.v = Matrix(param.rows(), param.cols());
    slot.step = 0;
  }
  ++slot.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(slot.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(slot.step));
  auto p = param.data();
  auto m = slot.m.data();
  auto v = slot.v.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] + cfg.weight_decay * p[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state,
               const AdamConfig& cfg, const std::string& prefix) {
  std::vector<const Matrix*> flat;
  for_each_param(grads, [&](const std::string&, const Matrix& g) { flat.push_back(&g); });
  std::size_t i = 0;
  for_each_param(params, [&](const std::string& name, Matrix& p) {
    if (i >= flat.size()) fail(ErrorKind::Dimension, "adam_step: gradient layout differs");
    adam_step(prefix + name, p, *flat[i++], state, cfg);
  });
}

void adam_step(TaskHead& head, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg, const std::string& prefix) {
  const auto names = TaskHead::param_names(head.kind);
  if (grads.size() != head.params.size())
    fail(ErrorKind::Dimension, "adam_step: head gradient layout differs");
  for (std::size_t i = 0; i < names.size(); ++i)
    adam_step(prefix + names[i], head.params[i], grads[i], state, cfg);
}

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorKind::Config, "train.batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) fail(ErrorKind::Config, "train.learning_rate must be > 0");
  if (eval_avg_draws == 0) fail(ErrorKind::Config, "train.eval_avg_draws must be positive");
  if (threads == 0) fail(ErrorKind::Config, "train.threads must be positive");
}

std::string metric_record_json(const MetricRecord& r) {
  ojson j = ojson::object();
  j["epoch"] = r.epoch;
  j["dataset"] = r.dataset;
  j["split"] = r.split;
  j["metric"] = r.metric;
  j["value"] = r.value;
  return j.dump();
}

namespace {

bool is_node_task(const Dataset& ds) { return ds.task == TaskKind::NodeClassification; }

const std::vector<bool>& node_split_mask(const Dataset& ds, const std::string& split) {
  const auto& masks = *ds.graphs.front().masks;
  if (split == "train") return masks.train;
  if (split == "val") return masks.val;
  if (split == "test") return masks.test;
  fail(ErrorKind::Config, "unknown split '" + split + "'");
}

std::vector<std::size_t> mask_rows(const std::vector<bool>& mask) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) rows.push_back(i);
  return rows;
}

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

Targets graph_targets(const Dataset& ds, const std::vector<std::size_t>& graphs) {
  Targets t;
  if (ds.task == TaskKind::GraphClassification) {
    for (auto gi : graphs) t.classes.push_back(std::get<std::int64_t>(*ds.graphs[gi].graph_label));
  } else {
    t.values = Matrix(graphs.size(), ds.num_classes_or_targets);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& y = std::get<std::vector<double>>(*ds.graphs[graphs[i]].graph_label);
      std::copy(y.begin(), y.end(), t.values.row(i).begin());
    }
  }
  return t;
}

Targets node_targets(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Targets t;
  const auto& labels = *ds.graphs.front().node_labels;
  for (auto r : rows) t.classes.push_back(labels[r]);
  return t;
}

std::vector<Matrix> zero_head_grads(const TaskHead& head) {
  std::vector<Matrix> out;
  for (const auto& p : head.params) out.emplace_back(p.rows(), p.cols());
  return out;
}

}  // namespace

BatchGradients batch_gradients(const Batch& batch, const std::vector<Projected>& inputs,
                               const EncoderConfig& config, const EncoderParams& params,
                               const TaskHead& head, bool encoder_frozen,
                               std::size_t threads) {
  const Dataset& ds = *batch.dataset;
  if (inputs.size() != batch.graphs.size())
    fail(ErrorKind::Dimension, "batch_gradients: one projected input per graph required");
  BatchGradients out;
  out.encoder = zeros_like(params);
  out.head = zero_head_grads(head);
  const LossSpec spec = loss_for_task(ds.task);

  if (is_node_task(ds)) {
    const Graph& g = ds.graphs[batch.graphs.front()];
    EncoderTape tape;
    const Matrix h = encode_projected(g, inputs[0].first, inputs[0].second, config, params,
                                      encoder_frozen ? nullptr : &tape);
    const auto rows = mask_rows(batch.node_mask);
    HeadCache hc;
    const Matrix scores = head_forward(select_rows(h, rows), head, &hc);
    const auto lr = loss_with_grad(scores, node_targets(ds, rows), spec);
    out.loss = lr.value;
    const Matrix d_e = head_backward(hc, head, lr.grad, out.head);
    if (!encoder_frozen) {
      Matrix d_h(h.rows(), h.cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(d_e.row(i).begin(), d_e.row(i).end(), d_h.row(rows[i]).begin());
      encoder_backward(tape, config, params, d_h, out.encoder);
    }
    return out;
  }

  const std::size_t count = batch.graphs.size();
  std::vector<EncoderTape> tapes(count);
  std::vector<Matrix> pooled(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const Graph& g = ds.graphs[batch.graphs[i]];
    const Matrix h = encode_projected(g, inputs[i].first, inputs[i].second, config, params,
                                      encoder_frozen ? nullptr : &tapes[i]);
    pooled[i] = pool_graph(h);
  });
  Matrix e(count, config.output_width());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(pooled[i].row(0).begin(), pooled[i].row(0).end(), e.row(i).begin());

  HeadCache hc;
  const Matrix scores = head_forward(e, head, &hc);
  const auto lr = loss_with_grad(scores, graph_targets(ds, batch.graphs), spec);
  out.loss = lr.value;
  const Matrix d_e = head_backward(hc, head, lr.grad, out.head);
  if (encoder_frozen) return out;

  std::vector<EncoderParams> per_graph(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const Graph& g = ds.graphs[batch.graphs[i]];
    Matrix d_h(g.num_nodes, d_e.cols());
    const double inv_n = 1.0 / static_cast<double>(g.num_nodes);
    for (std::size_t r = 0; r < g.num_nodes; ++r)
      for (std::size_t c = 0; c < d_e.cols(); ++c) d_h(r, c) = d_e(i, c) * inv_n;
    per_graph[i] = zeros_like(params);
    encoder_backward(tapes[i], config, params, d_h, per_graph[i]);
  });
  // Reduction in graph order keeps results independent of the worker count.
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Matrix*> dst;
    for_each_param(out.encoder, [&](const std::string&, Matrix& m) { dst.push_back(&m); });
    std::size_t k = 0;
    for_each_param(per_graph[i], [&](const std::string&, const Matrix& m) { *dst[k++] += m; });
  }
  return out;
}

double batch_loss(const Batch& batch, const std::vector<Projected>& inputs,
                  const EncoderConfig& config, const EncoderParams& params,
                  const TaskHead& head) {
  const Dataset& ds = *batch.dataset;
  const LossSpec spec = loss_for_task(ds.task);
  if (is_node_task(ds)) {
    const Graph& g = ds.graphs[batch.graphs.front()];
    const Matrix h = encode_projected(g, inputs[0].first, inputs[0].second, config, params);
    const auto rows = mask_rows(batch.node_mask);
    return loss(head_forward(select_rows(h, rows), head), node_targets(ds, rows), spec);
  }
  Matrix e(batch.graphs.size(), config.output_width());
  for (std::size_t i = 0; i < batch.graphs.size(); ++i) {
    const Graph& g = ds.graphs[batch.graphs[i]];
    const Matrix p = pool_graph(encode_projected(g, inputs[i].first, inputs[i].second, config, params));
    std::copy(p.row(0).begin(), p.row(0).end(), e.row(i).begin());
  }
  return loss(head_forward(e, head), graph_targets(ds, batch.graphs), spec);
}

double accuracy(const Matrix& scores, const std::vector<std::int64_t>& classes) {
  if (scores.rows() != classes.size() || classes.empty())
    fail(ErrorKind::Dimension, "accuracy: empty or mismatched inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < classes.size(); ++i)
    hit += static_cast<std::int64_t>(argmax(scores.row(i))) == classes[i];
  return static_cast<double>(hit) / static_cast<double>(classes.size());
}

double mean_absolute_error(const Matrix& pred, const Matrix& target) {
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::isnan(target.data()[i])) continue;
    s += std::abs(pred.data()[i] - target.data()[i]);
    ++count;
  }
  return count ? s / static_cast<double>(count) : 0.0;
}

double root_mean_squared_error(const Matrix& pred, const Matrix& target) {
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::isnan(target.data()[i])) continue;
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
    ++count;
  }
  return count ? std::sqrt(s / static_cast<double>(count)) : 0.0;
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  std::vector<std::pair<double, double>> items;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!std::isnan(labels[i])) items.emplace_back(scores[i], labels[i]);
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double positives = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].second > 0.5) {
        positives += 1.0;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(items.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) return 0.5;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

namespace {

double score_metric(MetricKind metric, TaskKind task, const Matrix& scores, const Targets& t) {
  switch (metric) {
    case MetricKind::Accuracy:
      if (t.classes.empty()) fail(ErrorKind::Config, "accuracy needs a classification task");
      return accuracy(scores, t.classes);
    case MetricKind::Mae:
      if (t.values.empty()) fail(ErrorKind::Config, "mae needs a regression task");
      return mean_absolute_error(scores, t.values);
    case MetricKind::Rmse:
      if (t.values.empty()) fail(ErrorKind::Config, "rmse needs a regression task");
      return root_mean_squared_error(scores, t.values);
    case MetricKind::RocAuc: {
      // Macro average over label columns (one-vs-rest for class labels).
      Matrix labels(scores.rows(), scores.cols());
      Matrix probs = scores;
      if (task == TaskKind::GraphMultilabel || task == TaskKind::GraphRegression) {
        labels = t.values;
      } else {
        for (std::size_t i = 0; i < scores.rows(); ++i) {
          auto r = probs.row(i);
          const double mx = *std::max_element(r.begin(), r.end());
          double z = 0.0;
          for (double& v : r) z += (v = std::exp(v - mx));
          for (double& v : r) v /= z;
          labels(i, static_cast<std::size_t>(t.classes[i])) = 1.0;
        }
      }
      double total = 0.0;
      std::size_t used = 0;
      for (std::size_t c = 0; c < scores.cols(); ++c) {
        std::vector<double> s(scores.rows()), y(scores.rows());
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < scores.rows(); ++i) {
          s[i] = probs(i, c);
          y[i] = labels(i, c);
          if (!std::isnan(y[i])) (y[i] > 0.5 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        total += roc_auc(s, y);
        ++used;
      }
      return used ? total / static_cast<double>(used) : 0.5;
    }
  }
  return 0.0;
}

Matrix averaged_forward(const Graph& g, const EncoderConfig& config,
                        const EncoderParams& params, const TaskHead& head,
                        ProjectionState& eval_state, std::size_t draws, bool pool) {
  Matrix acc;
  for (std::size_t d = 0; d < draws; ++d) {
    eval_state.advance(ProjectionMode::PerPass);
    Matrix h = encoder_forward(g, eval_state, config, params);
    Matrix scores = head_forward(pool ? pool_graph(h) : h, head);
    if (d == 0) acc = std::move(scores);
    else acc += scores;
  }
  if (draws > 1) acc *= 1.0 / static_cast<double>(draws);
  return acc;
}

}  // namespace

double evaluate(const EncoderConfig& config, const EncoderParams& params, const TaskHead& head,
                const Dataset& ds, const std::string& split, ProjectionState& eval_state,
                std::uint64_t split_seed, std::size_t avg_draws) {
  if (avg_draws == 0) fail(ErrorKind::Config, "eval_avg_draws must be positive");
  if (is_node_task(ds)) {
    const auto rows = mask_rows(node_split_mask(ds, split));
    if (rows.empty()) fail(ErrorKind::Config, "evaluate: split '" + split + "' is empty");
    const Matrix scores =
        averaged_forward(ds.graphs.front(), config, params, head, eval_state, avg_draws, false);
    return score_metric(ds.metric, ds.task, select_rows(scores, rows), node_targets(ds, rows));
  }
  const auto graphs = graph_split(ds, split, split_seed);
  if (graphs.empty()) fail(ErrorKind::Config, "evaluate: split '" + split + "' is empty");
  Matrix scores(graphs.size(), head.outputs);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Matrix s =
        averaged_forward(ds.graphs[graphs[i]], config, params, head, eval_state, avg_draws, true);
    std::copy(s.row(0).begin(), s.row(0).end(), scores.row(i).begin());
  }
  return score_metric(ds.metric, ds.task, scores, graph_targets(ds, graphs));
}

namespace {

/// Mini-batches of one epoch: a shuffled train split for graph tasks, the
/// whole train mask for node tasks.
std::vector<Batch> epoch_batches(const Dataset& ds, const TrainConfig& train,
                                 std::size_t epoch, const std::string& purpose) {
  std::vector<Batch> out;
  if (is_node_task(ds)) {
    Batch b{&ds, {0}, node_split_mask(ds, "train")};
    if (mask_rows(b.node_mask).empty()) fail(ErrorKind::Config, ds.name + ": empty train mask");
    out.push_back(std::move(b));
    return out;
  }
  auto train_idx = graph_split(ds, "train", train.seed);
  if (train_idx.empty()) fail(ErrorKind::Config, ds.name + ": empty train split");
  SeedStream shuffle(train.seed, purpose + "/" + ds.name + "/" + std::to_string(epoch));
  const auto perm = random_permutation(train_idx.size(), shuffle);
  for (std::size_t lo = 0; lo < perm.size(); lo += train.batch_size) {
    Batch b{&ds, {}, {}};
    for (std::size_t i = lo; i < std::min(perm.size(), lo + train.batch_size); ++i)
      b.graphs.push_back(train_idx[perm[i]]);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<Projected> project_batch(const Batch& b, const ProjectionState& ps,
                                     const EncoderConfig& config) {
  std::vector<Projected> inputs;
  for (auto gi : b.graphs) inputs.push_back(project_graph(b.dataset->graphs[gi], ps, config));
  return inputs;
}

void check_unique_names(const std::vector<Dataset>& datasets) {
  std::set<std::string> names;
  for (const auto& ds : datasets)
    if (!names.insert(ds.name).second)
      fail(ErrorKind::Config, "dataset name '" + ds.name + "' appears twice");
}

}  // namespace

PretrainResult pretrain(const std::vector<Dataset>& datasets, const EncoderConfig& config,
                        const TrainConfig& train, const CheckpointSink& on_checkpoint,
                        const MetricSink& on_metric) {
  if (datasets.empty()) fail(ErrorKind::Config, "pretrain needs at least one dataset");
  config.validate();
  train.validate();
  check_unique_names(datasets);

  PretrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.master_seed = train.seed;
  SeedStream init(train.seed, "init");
  ckpt.params = init_encoder_params(config, init);

  std::vector<ProjectionState> proj, eval;
  for (const auto& ds : datasets) {
    SeedStream head_init = init.derive("head/" + ds.name);
    ckpt.heads.emplace(ds.name, init_head(train.head, ds.task, ds.metric, config.output_width(),
                                          ds.num_classes_or_targets, head_init));
    proj.push_back(make_projection_state(ds, config.projection, train.seed, "proj"));
    eval.push_back(make_projection_state(ds, config.projection, train.seed, "eval"));
  }

  auto emit = [&](const MetricRecord& r) {
    result.metrics.push_back(r);
    if (on_metric) on_metric(r);
  };
  auto evaluate_epoch = [&](std::size_t epoch) {
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const auto& ds = datasets[d];
      for (const char* split : {"train", "val"}) {
        const double v = evaluate(config, ckpt.params, ckpt.heads.at(ds.name), ds, split,
                                  eval[d], train.seed, train.eval_avg_draws);
        emit({epoch, ds.name, split, to_string(ds.metric), v});
      }
    }
  };

  if (train.epochs > 0) {
    // Epoch 0: loss of the initial model under the initial C, no updates.
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const auto& ds = datasets[d];
      double loss_sum = 0.0;
      const auto batches = epoch_batches(ds, train, 0, "shuffle");
      for (const auto& b : batches)
        loss_sum += batch_loss(b, project_batch(b, proj[d], config), config, ckpt.params,
                               ckpt.heads.at(ds.name));
      const double mean_loss = loss_sum / static_cast<double>(batches.size());
      result.epoch_losses[ds.name].push_back(mean_loss);
      emit({0, ds.name, "train", "loss", mean_loss});
    }
    if (train.eval_every > 0) evaluate_epoch(0);
  }

  AdamState adam;
  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const auto& ds = datasets[d];
      TaskHead& head = ckpt.heads.at(ds.name);
      double loss_sum = 0.0;
      const auto batches = epoch_batches(ds, train, epoch, "shuffle");
      for (const auto& b : batches) {
        const auto inputs = project_batch(b, proj[d], config);
        const auto grads =
            batch_gradients(b, inputs, config, ckpt.params, head, false, train.threads);
        adam_step(ckpt.params, grads.encoder, adam, train.adam);
        adam_step(head, grads.head, adam, train.adam, "head." + ds.name + ".");
        proj[d].advance();
        ++ckpt.step;
        loss_sum += grads.loss;
      }
      const double mean_loss = loss_sum / static_cast<double>(batches.size());
      result.epoch_losses[ds.name].push_back(mean_loss);
      emit({epoch, ds.name, "train", "loss", mean_loss});
    }
    if (train.eval_every > 0 && epoch % train.eval_every == 0) evaluate_epoch(epoch);
    if (on_checkpoint && train.checkpoint_every > 0 && epoch % train.checkpoint_every == 0 &&
        epoch != train.epochs)
      on_checkpoint(epoch, ckpt);
  }
  if (on_checkpoint) on_checkpoint(train.epochs, ckpt);
  return result;
}

TransferResult transfer(const Checkpoint& ckpt, const Dataset& target, const TrainConfig& train,
                        const MetricSink& on_metric) {
  train.validate();
  ckpt.config.validate();
  const EncoderConfig& config = ckpt.config;
  TransferResult result;
  result.encoder_hash_before = params_hash(ckpt.params);

  SeedStream head_init(train.seed, "transfer/head/" + target.name);
  result.head = init_head(train.head, target.task, target.metric, config.output_width(),
                          target.num_classes_or_targets, head_init);
  ProjectionState proj = make_projection_state(target, config.projection, train.seed, "transfer-proj");
  ProjectionState eval = make_projection_state(target, config.projection, train.seed, "transfer-eval");

  // With the encoder frozen, a graph's embedding only changes when C is
  // redrawn, so embeddings are cached per projection draw.
  std::vector<Matrix> cache(target.graphs.size());
  std::vector<std::uint64_t> cache_draw(target.graphs.size(), 0);
  auto embedding = [&](std::size_t gi) -> const Matrix& {
    if (cache[gi].empty() || cache_draw[gi] != proj.draws()) {
      const Graph& g = target.graphs[gi];
      Matrix h = encoder_forward(g, proj, config, ckpt.params);
      cache[gi] = is_node_task(target) ? std::move(h) : pool_graph(h);
      cache_draw[gi] = proj.draws();
    }
    return cache[gi];
  };

  auto emit = [&](const MetricRecord& r) {
    result.metrics.push_back(r);
    if (on_metric) on_metric(r);
  };

  AdamState adam;
  const LossSpec spec = loss_for_task(target.task);
  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = epoch_batches(target, train, epoch, "transfer-shuffle");
    for (const auto& b : batches) {
      Matrix e;
      Targets t;
      if (is_node_task(target)) {
        const auto rows = mask_rows(b.node_mask);
        e = select_rows(embedding(0), rows);
        t = node_targets(target, rows);
      } else {
        e = Matrix(b.graphs.size(), config.output_width());
        for (std::size_t i = 0; i < b.graphs.size(); ++i) {
          const Matrix& row = embedding(b.graphs[i]);
          std::copy(row.row(0).begin(), row.row(0).end(), e.row(i).begin());
        }
        t = graph_targets(target, b.graphs);
      }
      HeadCache hc;
      const Matrix scores = head_forward(e, result.head, &hc);
      const auto lr = loss_with_grad(scores, t, spec);
      auto grads = zero_head_grads(result.head);
      head_backward(hc, result.head, lr.grad, grads);
      adam_step(result.head, grads, adam, train.adam, "head.");
      proj.advance();
      loss_sum += lr.value;
    }
    emit({epoch, target.name, "train", "loss", loss_sum / static_cast<double>(batches.size())});
  }

  result.train_metric = evaluate(config, ckpt.params, result.head, target, "train", eval,
                                 train.seed, train.eval_avg_draws);
  result.val_metric = evaluate(config, ckpt.params, result.head, target, "val", eval,
                               train.seed, train.eval_avg_draws);
  result.test_metric = evaluate(config, ckpt.params, result.head, target, "test", eval,
                                train.seed, train.eval_avg_draws);
  const std::string metric = to_string(target.metric);
  emit({train.epochs, target.name, "train", metric, result.train_metric});
  emit({train.epochs, target.name, "val", metric, result.val_metric});
  emit({train.epochs, target.name, "test", metric, result.test_metric});

  result.encoder_hash_after = params_hash(ckpt.params);
  if (result.encoder_hash_after != result.encoder_hash_before)
    fail(ErrorKind::Internal, "transfer modified the frozen encoder");
  return result;
}

TrainJob parse_train_job(const std::string& json_text, const std::filesystem::path& base_dir) {
  const auto j = detail::parse_json(json_text, "training config");
  if (!j.is_object()) fail(ErrorKind::Config, "training config: expected object");
  TrainJob job;
  for (const auto& [key, value] : j.items()) {
    if (key == "datasets") {
      if (!value.is_array()) fail(ErrorKind::Config, "datasets: expected array of paths");
      for (const auto& p : value) {
        if (!p.is_string()) fail(ErrorKind::Config, "datasets: expected path strings");
        std::filesystem::path path = p.get<std::string>();
        job.dataset_paths.push_back(path.is_absolute() ? path : base_dir / path);
      }
    } else if (key == "encoder") {
      job.encoder = detail::encoder_config_from(value, job.encoder);
    } else if (key == "projection") {
      nlohmann::json wrapped = {{"projection", value}};
      job.encoder = detail::encoder_config_from(wrapped, job.encoder);
    } else if (key == "train") {
      if (!value.is_object()) fail(ErrorKind::Config, "train: expected object");
      for (const auto& [tk, tv] : value.items()) {
        auto count = [&]() {
          if (!tv.is_number_unsigned()) fail(ErrorKind::Config, "train." + tk + ": expected count");
          return tv.get<std::size_t>();
        };
        auto real = [&]() {
          if (!tv.is_number()) fail(ErrorKind::Config, "train." + tk + ": expected number");
          return tv.get<double>();
        };
        if (tk == "epochs") job.train.epochs = count();
        else if (tk == "batch_size") job.train.batch_size = count();
        else if (tk == "learning_rate") job.train.adam.learning_rate = real();
        else if (tk == "weight_decay") job.train.adam.weight_decay = real();
        else if (tk == "beta1") job.train.adam.beta1 = real();
        else if (tk == "beta2") job.train.adam.beta2 = real();
        else if (tk == "epsilon") job.train.adam.epsilon = real();
        else if (tk == "seed") {
          if (!tv.is_number_unsigned()) fail(ErrorKind::Config, "train.seed: expected integer");
          job.train.seed = tv.get<std::uint64_t>();
        } else if (tk == "head") {
          if (!tv.is_string()) fail(ErrorKind::Config, "train.head: expected string");
          job.train.head = parse_head_kind(tv.get<std::string>());
        } else if (tk == "eval_avg_draws") job.train.eval_avg_draws = count();
        else if (tk == "threads") job.train.threads = count();
        else if (tk == "eval_every") job.train.eval_every = count();
        else fail(ErrorKind::Config, "train." + tk + ": unknown key");
      }
    } else if (key == "checkpoint_every") {
      if (!value.is_number_unsigned()) fail(ErrorKind::Config, "checkpoint_every: expected count");
      job.train.checkpoint_every = value.get<std::size_t>();
    } else if (key == "out") {
      if (!value.is_string()) fail(ErrorKind::Config, "out: expected path");
      std::filesystem::path path = value.get<std::string>();
      job.out = path.is_absolute() ? path : base_dir / path;
    } else if (key == "metrics_out") {
      if (!value.is_string()) fail(ErrorKind::Config, "metrics_out: expected path");
      std::filesystem::path path = value.get<std::string>();
      job.metrics_out = path.is_absolute() ? path : base_dir / path;
    } else {
      fail(ErrorKind::Config, key + ": unknown key");
    }
  }
  if (job.dataset_paths.empty()) fail(ErrorKind::Config, "datasets: at least one path required");
  if (job.out.empty()) fail(ErrorKind::Config, "out: checkpoint path required");
  return job;
}

std::string train_job_to_json(const TrainJob& job) {
  ojson j = ojson::object();
  std::vector<std::string> paths;
  for (const auto& p : job.dataset_paths) paths.push_back(p.string());
  j["datasets"] = paths;
  j["encoder"] = detail::encoder_config_json(job.encoder);
  const auto& t = job.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.adam.learning_rate},
                {"weight_decay", t.adam.weight_decay},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"epsilon", t.adam.epsilon},
                {"seed", t.seed},
                {"head", to_string(t.head)},
                {"eval_avg_draws", t.eval_avg_draws},
                {"threads", t.threads},
                {"eval_every", t.eval_every}};
  j["checkpoint_every"] = t.checkpoint_every;
  j["out"] = job.out.string();
  if (job.metrics_out) j["metrics_out"] = job.metrics_out->string();
  return j.dump();
}

}  // namespace allin
