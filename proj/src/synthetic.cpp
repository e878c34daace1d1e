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

#include "allin/synthetic.hpp"

#include <cmath>

namespace allin {

const char* to_string(FeatureMap map) noexcept {
  switch (map) {
    case FeatureMap::Identity: return "identity";
    case FeatureMap::Orthogonal: return "orthogonal";
    case FeatureMap::Permutation: return "permutation";
  }
  return "?";
}

FeatureMap parse_feature_map(const std::string& s) {
  if (s == "identity") return FeatureMap::Identity;
  if (s == "orthogonal") return FeatureMap::Orthogonal;
  if (s == "permutation") return FeatureMap::Permutation;
  fail(ErrorKind::Config, "unknown feature map '" + s + "'");
}

Matrix feature_map_matrix(FeatureMap map, std::size_t d, SeedStream& stream) {
  switch (map) {
    case FeatureMap::Identity: return Matrix::identity(d);
    case FeatureMap::Orthogonal: return random_orthogonal(d, stream);
    case FeatureMap::Permutation: return permutation_matrix(random_permutation(d, stream));
  }
  return {};
}

Dataset make_sbm_dataset(const SbmConfig& config, const std::string& name,
                         SeedStream stream, const Matrix& map) {
  if (config.num_graphs == 0 || config.nodes < config.blocks || config.blocks == 0 ||
      config.feature_dim == 0)
    fail(ErrorKind::Config, "sbm: degenerate generator settings");
  if (!map.empty() && (map.rows() != config.feature_dim || map.cols() != config.feature_dim))
    fail(ErrorKind::Dimension, "sbm: feature map must be d×d");

  Dataset ds;
  ds.name = name;
  ds.task = TaskKind::GraphClassification;
  ds.metric = MetricKind::Accuracy;
  ds.num_classes_or_targets = 2;

  SeedStream dir_stream = stream.derive("direction");
  Matrix u = gaussian_matrix(1, config.feature_dim, dir_stream);
  u *= 1.0 / frobenius_norm(u);

  SeedStream graph_stream = stream.derive("graphs");
  for (std::size_t gi = 0; gi < config.num_graphs; ++gi) {
    SeedStream gs = graph_stream.derive(gi);
    Graph g;
    g.num_nodes = config.nodes;
    g.directed = false;
    const std::int64_t label = static_cast<std::int64_t>(gs.next_below(2));
    std::vector<std::size_t> block(config.nodes);
    for (std::size_t v = 0; v < config.nodes; ++v) block[v] = v * config.blocks / config.nodes;

    for (std::size_t a = 0; a < config.nodes; ++a)
      for (std::size_t b = a + 1; b < config.nodes; ++b) {
        const double p = block[a] == block[b] ? config.p_in : config.p_out;
        if (gs.next_uniform() < p) g.edges.push_back({a, b});
      }

    Matrix x = gaussian_matrix(config.nodes, config.feature_dim, gs);
    x *= config.noise;
    if (label == 1) {
      for (std::size_t v = 0; v < config.nodes; ++v) {
        // Blocks alternate in sign along u.
        const double s = (block[v] % 2 == 0 ? 1.0 : -1.0) * config.signal;
        for (std::size_t j = 0; j < config.feature_dim; ++j) x(v, j) += s * u(0, j);
      }
    }
    g.node_features = map.empty() ? std::move(x) : matmul(x, map);
    g.graph_label = label;
    ds.graphs.push_back(std::move(g));
  }

  const auto n = config.num_graphs;
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * n));
  if (n_train == 0 || n_train + n_val >= n)
    fail(ErrorKind::Config, "sbm: split fractions leave an empty split");
  GraphSplits splits;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) splits.train.push_back(i);
    else if (i < n_train + n_val) splits.val.push_back(i);
    else splits.test.push_back(i);
  }
  ds.splits = std::move(splits);
  return ds;
}

}  // namespace allin
