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
#include <optional>
#include <string>

#include "allin/graph.hpp"
#include "allin/numerics.hpp"

namespace allin {

enum class ProjectionMode {
  /// Fresh C on every forward pass.
  PerPass,
  /// C is kept and redrawn whenever step is a multiple of refresh_interval.
  Cached,
};

const char* to_string(ProjectionMode mode) noexcept;
ProjectionMode parse_projection_mode(const std::string& s);

struct ProjectionConfig {
  std::size_t h = 512;
  ProjectionMode mode = ProjectionMode::Cached;
  std::size_t refresh_interval = 100;
};

/// Per-dataset random projection state. Node and edge matrices are drawn from
/// sibling streams ("<tag>/node", "<tag>/edge") of the same master seed, and
/// are always redrawn together.
class ProjectionState {
 public:
  ProjectionState(std::size_t node_dim, std::optional<std::size_t> edge_dim,
                  ProjectionConfig config, const SeedStream& base);

  std::size_t h() const noexcept { return config_.h; }
  const ProjectionConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }
  std::uint64_t draws() const noexcept { return draws_; }

  /// d×h node projection currently in force.
  const Matrix& node_projection() const noexcept { return node_c_; }
  /// d_e×h edge projection, when the dataset carries edge features.
  const std::optional<Matrix>& edge_projection() const noexcept { return edge_c_; }

  /// Increments step and redraws according to `mode`.
  void advance(ProjectionMode mode);
  void advance() { advance(config_.mode); }

 private:
  void redraw();

  ProjectionConfig config_;
  std::size_t node_dim_;
  std::optional<std::size_t> edge_dim_;
  SeedStream node_stream_;
  SeedStream edge_stream_;
  std::uint64_t step_ = 0;
  std::uint64_t draws_ = 0;
  Matrix node_c_;
  std::optional<Matrix> edge_c_;
};

ProjectionState next_projection(ProjectionState ps, ProjectionMode mode);

/// Builds the state for one dataset from the master seed and dataset name.
ProjectionState make_projection_state(const Dataset& ds, const ProjectionConfig& config,
                                      std::uint64_t master_seed,
                                      const std::string& purpose = "proj");

/// R⁽⁰⁾ = X·C with the state's current C (no bias).
Matrix project_nodes(const Graph& g, const ProjectionState& ps);
Matrix project_nodes(const Matrix& features, const Matrix& c);

/// Edge features projected with the edge C, m×h.
Matrix project_edges(const Graph& g, const ProjectionState& ps);

/// Row v is the mean of the projected features of edges arriving at v (all
/// incident edges for undirected graphs); nodes without any get zeros.
Matrix aggregate_edges_to_nodes(const Graph& g, const Matrix& projected_edges);

}  // namespace allin
