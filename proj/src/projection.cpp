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

#include "allin/projection.hpp"

namespace allin {

const char* to_string(ProjectionMode mode) noexcept {
  return mode == ProjectionMode::PerPass ? "per-pass" : "cached";
}

ProjectionMode parse_projection_mode(const std::string& s) {
  if (s == "per-pass") return ProjectionMode::PerPass;
  if (s == "cached") return ProjectionMode::Cached;
  fail(ErrorKind::Config, "projection.mode: expected per-pass or cached, got '" + s + "'");
}

ProjectionState::ProjectionState(std::size_t node_dim,
                                 std::optional<std::size_t> edge_dim,
                                 ProjectionConfig config, const SeedStream& base)
    : config_(config),
      node_dim_(node_dim),
      edge_dim_(edge_dim),
      node_stream_(base.derive("node")),
      edge_stream_(base.derive("edge")) {
  if (config_.h == 0) fail(ErrorKind::Config, "projection.h must be positive");
  if (config_.refresh_interval == 0)
    fail(ErrorKind::Config, "projection.refresh_interval must be positive");
  if (node_dim_ == 0) fail(ErrorKind::Dimension, "node feature dimension is zero");
  redraw();
}

void ProjectionState::redraw() {
  node_c_ = gaussian_matrix(node_dim_, config_.h, node_stream_);
  if (edge_dim_ && *edge_dim_ > 0)
    edge_c_ = gaussian_matrix(*edge_dim_, config_.h, edge_stream_);
  ++draws_;
}

void ProjectionState::advance(ProjectionMode mode) {
  ++step_;
  if (mode == ProjectionMode::PerPass || step_ % config_.refresh_interval == 0)
    redraw();
}

ProjectionState next_projection(ProjectionState ps, ProjectionMode mode) {
  ps.advance(mode);
  return ps;
}

ProjectionState make_projection_state(const Dataset& ds, const ProjectionConfig& config,
                                      std::uint64_t master_seed,
                                      const std::string& purpose) {
  return ProjectionState(ds.feature_dim(), ds.edge_feature_dim(), config,
                         SeedStream(master_seed, purpose + "/" + ds.name));
}

Matrix project_nodes(const Matrix& features, const Matrix& c) {
  if (features.cols() != c.rows()) {
    fail(ErrorKind::Dimension,
         "project_nodes: features have d=" + std::to_string(features.cols()) +
             " but the projection was built for d=" + std::to_string(c.rows()));
  }
  return matmul(features, c);
}

Matrix project_nodes(const Graph& g, const ProjectionState& ps) {
  return project_nodes(g.node_features, ps.node_projection());
}

Matrix project_edges(const Graph& g, const ProjectionState& ps) {
  if (!g.edge_features || !ps.edge_projection())
    fail(ErrorKind::Dimension, "project_edges: no edge features or edge projection");
  if (g.edges.empty()) return Matrix(0, ps.h());
  return project_nodes(*g.edge_features, *ps.edge_projection());
}

Matrix aggregate_edges_to_nodes(const Graph& g, const Matrix& projected_edges) {
  if (projected_edges.rows() != g.edges.size()) {
    fail(ErrorKind::Dimension, "aggregate_edges_to_nodes: " +
                                   std::to_string(projected_edges.rows()) +
                                   " rows for " + std::to_string(g.edges.size()) +
                                   " edges");
  }
  Matrix out(g.num_nodes, projected_edges.cols());
  std::vector<std::size_t> count(g.num_nodes, 0);
  auto add = [&](std::size_t node, std::size_t e) {
    auto dst = out.row(node);
    auto src = projected_edges.row(e);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    ++count[node];
  };
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    add(g.edges[e].target, e);
    if (!g.directed) add(g.edges[e].source, e);
  }
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    if (count[v] == 0) continue;
    const double inv = 1.0 / static_cast<double>(count[v]);
    for (double& x : out.row(v)) x *= inv;
  }
  return out;
}

}  // namespace allin
