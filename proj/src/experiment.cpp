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

#include "allin/experiment.hpp"

#include <algorithm>

namespace allin {

TransferExperimentOptions TransferExperimentOptions::defaults() {
  TransferExperimentOptions o;
  o.encoder.num_layers = 2;
  o.encoder.k = 1;
  o.encoder.hidden_widths = {32, 32};
  o.encoder.structural_dim = 4;
  o.encoder.norm = NormKind::Layer;
  o.encoder.projection.h = 64;
  // A C held for many steps lets the small model fit that one draw; a fresh
  // C per step forces features that survive resampling.
  o.encoder.projection.mode = ProjectionMode::PerPass;

  o.pretrain.epochs = 40;
  o.pretrain.batch_size = 16;
  o.pretrain.adam.learning_rate = 1e-3;
  o.pretrain.eval_every = 0;

  o.transfer.epochs = 30;
  o.transfer.batch_size = 16;
  o.transfer.adam.learning_rate = kTransferLearningRate;
  o.transfer.eval_every = 0;
  return o;
}

TransferExperimentResult run_transfer_experiment(const TransferExperimentOptions& o) {
  if (o.repetitions == 0) fail(ErrorKind::Config, "transfer experiment needs at least one repetition");
  TransferExperimentResult res;
  res.mean_target_test.assign(o.target_maps.size(), 0.0);
  res.min_source_train = 1.0;
  SeedStream seeds(o.master_seed, "experiment/transfer");
  auto collect = [&](const MetricRecord& r) { res.metrics.push_back(r); };

  for (std::size_t rep = 0; rep < o.repetitions; ++rep) {
    TransferRun run;
    run.seed = seeds.next_u64();
    SeedStream rs(run.seed, "experiment/run");

    const Dataset source = make_sbm_dataset(o.sbm, "source", rs.derive("source"));
    TrainConfig pre = o.pretrain;
    pre.seed = run.seed;
    const PretrainResult trained = pretrain({source}, o.encoder, pre, {}, collect);
    const Checkpoint& ckpt = trained.checkpoint;

    ProjectionState eval = make_projection_state(source, o.encoder.projection, run.seed, "experiment-eval");
    const TaskHead& head = ckpt.heads.at(source.name);
    run.source_train_accuracy = evaluate(o.encoder, ckpt.params, head, source, "train", eval,
                                         run.seed, pre.eval_avg_draws);
    run.source_test_accuracy = evaluate(o.encoder, ckpt.params, head, source, "test", eval,
                                        run.seed, pre.eval_avg_draws);
    collect({pre.epochs, source.name, "train", "accuracy", run.source_train_accuracy});
    collect({pre.epochs, source.name, "test", "accuracy", run.source_test_accuracy});

    for (std::size_t m = 0; m < o.target_maps.size(); ++m) {
      SeedStream map_stream = rs.derive("map").derive(m);
      const Matrix map = feature_map_matrix(o.target_maps[m], o.sbm.feature_dim, map_stream);
      const Dataset target = make_sbm_dataset(
          o.sbm, std::string("target-") + to_string(o.target_maps[m]), rs.derive("target"), map);
      TrainConfig tr = o.transfer;
      tr.seed = run.seed;
      const TransferResult t = transfer(ckpt, target, tr, collect);
      run.target_test_accuracy.push_back(t.test_metric);
      res.mean_target_test[m] += t.test_metric;
    }
    res.mean_source_test += run.source_test_accuracy;
    res.min_source_train = std::min(res.min_source_train, run.source_train_accuracy);
    res.runs.push_back(std::move(run));
  }
  const double inv = 1.0 / static_cast<double>(o.repetitions);
  res.mean_source_test *= inv;
  for (double& v : res.mean_target_test) v *= inv;
  return res;
}

}  // namespace allin
