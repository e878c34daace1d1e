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

// Cross-feature-space transfer on synthetic SBM data: pretrain on a source
// dataset, then fit fresh heads on targets whose features are an orthogonal
// rotation or a permutation of the same generator's features.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "allin/encoder.hpp"
#include "allin/synthetic.hpp"
#include "allin/training.hpp"

namespace allin {

struct TransferExperimentOptions {
  SbmConfig sbm;
  EncoderConfig encoder;
  TrainConfig pretrain;
  TrainConfig transfer;
  std::vector<FeatureMap> target_maps{FeatureMap::Orthogonal, FeatureMap::Permutation};
  std::size_t repetitions = 5;
  std::uint64_t master_seed = 0;

  static TransferExperimentOptions defaults();
};

struct TransferRun {
  std::uint64_t seed = 0;
  double source_train_accuracy = 0.0;
  double source_test_accuracy = 0.0;
  /// One entry per target map, in option order.
  std::vector<double> target_test_accuracy;
};

struct TransferExperimentResult {
  std::vector<TransferRun> runs;
  double mean_source_test = 0.0;
  std::vector<double> mean_target_test;
  double min_source_train = 0.0;
  /// Every metric emitted by pretraining and transfer, in order.
  std::vector<MetricRecord> metrics;
};

TransferExperimentResult run_transfer_experiment(const TransferExperimentOptions& options);

}  // namespace allin
