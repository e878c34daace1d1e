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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "allin/numerics.hpp"

namespace allin {

struct Edge {
  std::size_t source = 0;
  std::size_t target = 0;
};

struct SplitMasks {
  std::vector<bool> train;
  std::vector<bool> val;
  std::vector<bool> test;
};

/// Integer class for single-label graph classification; a float vector for
/// regression and multi-label targets (NaN marks a missing label).
using GraphLabel = std::variant<std::int64_t, std::vector<double>>;

struct Graph {
  std::size_t num_nodes = 0;
  bool directed = false;
  std::vector<Edge> edges;
  Matrix node_features;
  std::optional<Matrix> edge_features;
  std::optional<std::vector<std::int64_t>> node_labels;
  std::optional<GraphLabel> graph_label;
  std::optional<SplitMasks> masks;

  std::size_t num_edges() const noexcept { return edges.size(); }
  std::size_t feature_dim() const noexcept { return node_features.cols(); }
};

enum class TaskKind {
  NodeClassification,
  GraphClassification,
  GraphRegression,
  GraphMultilabel,
};

enum class MetricKind { Accuracy, Mae, Rmse, RocAuc };

const char* to_string(TaskKind task) noexcept;
const char* to_string(MetricKind metric) noexcept;
TaskKind parse_task(const std::string& s);
MetricKind parse_metric(const std::string& s);

/// Graph indices per split for graph-level tasks.
struct GraphSplits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::GraphClassification;
  MetricKind metric = MetricKind::Accuracy;
  std::size_t num_classes_or_targets = 0;
  std::vector<Graph> graphs;
  /// Explicit graph-level splits; when absent a seeded 80/10/10 split is used.
  std::optional<GraphSplits> splits;

  std::size_t feature_dim() const;
  std::optional<std::size_t> edge_feature_dim() const;
};

enum class AdjacencyNorm { None, Sym };

/// One violation of a Graph invariant, naming the field and index involved.
struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate(const Graph& g);
/// Dataset-level checks on top of per-graph validation.
std::vector<Violation> validate(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& json_text);
std::string dataset_to_json(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// A · m with the raw 0/1 adjacency (no self-loops), edge-wise. Directed edge
/// s→t adds row s of m into row t; undirected edges act both ways.
Matrix adjacency_apply(const Graph& g, const Matrix& m,
                       AdjacencyNorm norm = AdjacencyNorm::None);
/// Aᵀ · m under the same conventions.
Matrix adjacency_apply_transpose(const Graph& g, const Matrix& m,
                                 AdjacencyNorm norm = AdjacencyNorm::None);
/// Dense adjacency, for oracles and tests only.
Matrix dense_adjacency(const Graph& g, AdjacencyNorm norm = AdjacencyNorm::None);

/// Number of incoming messages per node (in-degree, or degree if undirected).
std::vector<std::size_t> in_degrees(const Graph& g);

/// The graph with nodes relabeled so that old node i becomes node perm[i].
Graph relabel_nodes(const Graph& g, std::span<const std::size_t> perm);

/// Graph indices of `split` ("train", "val" or "test") for a graph-level
/// dataset, deterministic in `seed`.
std::vector<std::size_t> graph_split(const Dataset& ds, const std::string& split,
                                     std::uint64_t seed);

}  // namespace allin
