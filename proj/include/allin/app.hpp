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

// Command-level workflows shared by the C API, the CLI and the acceptance
// harness. Results are returned as JSON text.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "allin/encoder.hpp"
#include "allin/synthetic.hpp"
#include "allin/training.hpp"

namespace allin {

/// FNV-1a of a canonical config serialisation, printed by every command.
std::uint64_t config_hash(const std::string& canonical_json);
std::string hex64(std::uint64_t v);

enum class BenchMode { Factored, Dense };

const char* to_string(BenchMode mode) noexcept;
BenchMode parse_bench_mode(const std::string& s);

inline constexpr std::size_t kDenseBenchLimit = 20000;

struct BenchOptions {
  std::size_t n = 20000;
  std::size_t h = 512;
  std::size_t c = 64;
  BenchMode mode = BenchMode::Factored;
  std::size_t repeat = 1;
  std::uint64_t seed = 0;
  bool force = false;
};

struct BenchResult {
  BenchOptions options;
  /// Seconds per repetition, best and mean.
  double best_seconds = 0.0;
  double mean_seconds = 0.0;
  /// Peak bytes allocated on top of the inputs while building and applying
  /// the operator, over all repetitions.
  std::size_t peak_transient_bytes = 0;
  /// Bytes an explicit n×n matrix would take.
  std::size_t dense_bytes = 0;
  /// Sum of the output entries, to compare modes.
  double checksum = 0.0;
};

/// Refuses dense mode above kDenseBenchLimit nodes unless forced.
BenchResult run_bench(const BenchOptions& options);
/// Also returns the operator output for equivalence tests.
BenchResult run_bench(const BenchOptions& options, Matrix* output);
std::string bench_result_json(const BenchResult& r, bool with_time = true);

/// Summary of a training run: checkpoint and metrics paths, head names,
/// final per-dataset losses and the config hash.
std::string run_train(TrainJob job);

struct TransferOptions {
  HeadKind head = HeadKind::Mlp;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = kTransferLearningRate;
  std::uint64_t seed = 0;
  std::size_t eval_avg_draws = 1;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> metrics_out;

  TrainConfig train_config() const;
};

std::string run_transfer(const std::filesystem::path& ckpt, const std::filesystem::path& data,
                         const TransferOptions& options);

inline constexpr std::size_t kEncodeNodeLimit = 1000;

struct EncodeOptions {
  bool dump_operators = false;
  bool dump_embeddings = false;
  std::uint64_t seed = 0;
  /// Used when no checkpoint is given; parameters are then initialised from `seed`.
  EncoderConfig encoder;
  std::optional<std::filesystem::path> out;
};

/// Operators and/or embeddings of every graph, refusing graphs above
/// kEncodeNodeLimit nodes.
std::string run_encode(const Dataset& ds, const std::optional<Checkpoint>& ckpt,
                       const EncodeOptions& options);

struct SynthOptions {
  SbmConfig sbm;
  FeatureMap map = FeatureMap::Identity;
  /// Graphs are drawn from `seed`, the feature map from `map_seed`.
  std::uint64_t seed = 0;
  std::uint64_t map_seed = 0;
  std::string name = "sbm";
};

Dataset make_synthetic(const SynthOptions& options);

}  // namespace allin
