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
#include <string>

#include "allin/graph.hpp"
#include "allin/numerics.hpp"

namespace allin {

/// Two-block stochastic block model graphs with a binary graph label carried
/// by the node features. In class-1 graphs the nodes of block b are drawn
/// around ±signal·u (u a unit direction fixed per dataset); class-0 graphs
/// have zero-mean features. Edge probabilities do not depend on the class.
struct SbmConfig {
  std::size_t num_graphs = 200;
  std::size_t nodes = 30;
  std::size_t blocks = 2;
  std::size_t feature_dim = 16;
  double p_in = 0.3;
  double p_out = 0.05;
  double signal = 3.0;
  double noise = 1.0;
  /// Fractions of graphs in the explicit train and val splits; the rest is test.
  double train_fraction = 0.6;
  double val_fraction = 0.2;
};

enum class FeatureMap { Identity, Orthogonal, Permutation };

const char* to_string(FeatureMap map) noexcept;
FeatureMap parse_feature_map(const std::string& s);

/// d×d matrix applied on the right of every feature matrix.
Matrix feature_map_matrix(FeatureMap map, std::size_t d, SeedStream& stream);

/// Graphs come from `stream`; `map`, if non-empty, multiplies every
/// feature row on the right.
Dataset make_sbm_dataset(const SbmConfig& config, const std::string& name,
                         SeedStream stream, const Matrix& map = Matrix());

}  // namespace allin
