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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allin/encoder.hpp"
#include "allin/graph.hpp"
#include "allin/numerics.hpp"
#include "allin/projection.hpp"

namespace allin {

enum class LossKind { CrossEntropy, Mse, MaeEvalOnly, BceMultilabel };

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
};

LossSpec loss_for_task(TaskKind task) noexcept;

/// Supervision for a block of prediction rows. Classification uses `classes`;
/// regression and multi-label use `values` (NaN entries are masked out).
struct Targets {
  std::vector<std::int64_t> classes;
  Matrix values;

  std::size_t rows() const noexcept {
    return classes.empty() ? values.rows() : classes.size();
  }
};

struct LossResult {
  double value = 0.0;
  /// ∂value/∂pred, same shape as pred.
  Matrix grad;
};

/// Mean-reduced loss. Cross-entropy is log-sum-exp stabilised; BCE averages
/// over unmasked entries and an all-masked block contributes 0.
LossResult loss_with_grad(const Matrix& pred, const Targets& target, LossSpec spec);
double loss(const Matrix& pred, const Targets& target, LossSpec spec);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamSlot {
  Matrix m;
  Matrix v;
  std::uint64_t step = 0;
};

/// Per-tensor Adam state keyed by parameter name. Tensors that receive no
/// gradient in a step are left untouched, including their step counters.
struct AdamState {
  std::map<std::string, AdamSlot> slots;
};

/// One bias-corrected Adam update of `param` from `grad`.
void adam_step(const std::string& name, Matrix& param, const Matrix& grad,
               AdamState& state, const AdamConfig& cfg);
void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state,
               const AdamConfig& cfg, const std::string& prefix = "encoder.");
void adam_step(TaskHead& head, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg, const std::string& prefix);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  AdamConfig adam;
  HeadKind head = HeadKind::Mlp;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  /// Logit averaging over this many C draws at evaluation time.
  std::size_t eval_avg_draws = 1;
  std::size_t threads = 1;
  /// Emit train/val metrics every this many epochs (0 disables).
  std::size_t eval_every = 1;

  void validate() const;
};

/// Head learning rate used by transfer when none is configured.
inline constexpr double kTransferLearningRate = 1e-3;

struct MetricRecord {
  std::size_t epoch = 0;
  std::string dataset;
  std::string split;
  std::string metric;
  double value = 0.0;
};

std::string metric_record_json(const MetricRecord& record);

/// Reverse-mode gradient of the mean loss of one mini-batch w.r.t. every
/// encoder and head parameter, with the projections held fixed. The batch is
/// a list of graph indices (graph tasks) or the single graph of a node task,
/// supervised on `node_mask`.
struct BatchGradients {
  double loss = 0.0;
  EncoderParams encoder;
  std::vector<Matrix> head;
};

struct Batch {
  const Dataset* dataset = nullptr;
  std::vector<std::size_t> graphs;
  /// Node task only: nodes contributing to the loss.
  std::vector<bool> node_mask;
};

/// Projected inputs of one graph (node part and optional edge part).
using Projected = std::pair<Matrix, std::optional<Matrix>>;

BatchGradients batch_gradients(const Batch& batch, const std::vector<Projected>& inputs,
                               const EncoderConfig& config, const EncoderParams& params,
                               const TaskHead& head, bool encoder_frozen,
                               std::size_t threads = 1);

/// Mean loss of the batch, forward only.
double batch_loss(const Batch& batch, const std::vector<Projected>& inputs,
                  const EncoderConfig& config, const EncoderParams& params,
                  const TaskHead& head);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<MetricRecord> metrics;
  /// Mean training loss per epoch, per dataset. Entry 0 is the loss of the
  /// initial model before any update.
  std::map<std::string, std::vector<double>> epoch_losses;
};

/// Called with each checkpoint written during training (epoch, checkpoint).
using CheckpointSink = std::function<void(std::size_t, const Checkpoint&)>;
using MetricSink = std::function<void(const MetricRecord&)>;

PretrainResult pretrain(const std::vector<Dataset>& datasets, const EncoderConfig& config,
                        const TrainConfig& train, const CheckpointSink& on_checkpoint = {},
                        const MetricSink& on_metric = {});

struct TransferResult {
  TaskHead head;
  double train_metric = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::uint64_t encoder_hash_before = 0;
  std::uint64_t encoder_hash_after = 0;
  std::vector<MetricRecord> metrics;
};

/// Trains a fresh head on the target's train split against the frozen encoder.
TransferResult transfer(const Checkpoint& ckpt, const Dataset& target, const TrainConfig& train,
                        const MetricSink& on_metric = {});

/// Metric of `head` on `split`. Each forward pass draws a fresh C from
/// `eval_state`; logits are averaged over `avg_draws` draws.
double evaluate(const EncoderConfig& config, const EncoderParams& params,
                const TaskHead& head, const Dataset& ds, const std::string& split,
                ProjectionState& eval_state, std::uint64_t split_seed,
                std::size_t avg_draws = 1);

/// Metric helpers, exposed for tests.
double accuracy(const Matrix& scores, const std::vector<std::int64_t>& classes);
double mean_absolute_error(const Matrix& pred, const Matrix& target);
double root_mean_squared_error(const Matrix& pred, const Matrix& target);
/// Rank-statistic AUC, ties sharing their average rank; 0.5 when only one
/// class is present.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

/// A training job as described by a training config file.
struct TrainJob {
  std::vector<std::filesystem::path> dataset_paths;
  EncoderConfig encoder;
  TrainConfig train;
  std::filesystem::path out;
  std::optional<std::filesystem::path> metrics_out;
};

/// Dataset paths are resolved relative to `base_dir`.
TrainJob parse_train_job(const std::string& json_text, const std::filesystem::path& base_dir);
std::string train_job_to_json(const TrainJob& job);

}  // namespace allin
