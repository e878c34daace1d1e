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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "allin/graph.hpp"
#include "allin/numerics.hpp"

namespace allin {

enum class OperatorKind { Identity, Adjacency, FactoredCov, DenseCov };

const char* to_string(OperatorKind kind) noexcept;

struct IdentityOp {
  std::size_t n = 0;
};

/// Non-owning view of a graph's adjacency; the graph must outlive the op.
struct AdjacencyOp {
  const Graph* graph = nullptr;
  AdjacencyNorm norm = AdjacencyNorm::None;
};

/// K = scale · Rc·Rcᵀ, kept in factored form.
struct FactoredCovOp {
  Matrix rc;
  double scale = 1.0;
};

struct DenseCovOp {
  Matrix k;
};

class Operator {
 public:
  using Payload = std::variant<IdentityOp, AdjacencyOp, FactoredCovOp, DenseCovOp>;

  explicit Operator(Payload payload) : payload_(std::move(payload)) {}

  OperatorKind kind() const noexcept {
    return static_cast<OperatorKind>(payload_.index());
  }
  std::size_t num_nodes() const noexcept;
  const Payload& payload() const noexcept { return payload_; }

 private:
  Payload payload_;
};

/// Ordered operator collection. Layout is always
///   [I, A, K⁽⁰⁾, …, K⁽ᵏ⁾, K_edge⁽⁰⁾, …, K_edge⁽ᵏ⁾]
/// with the edge block present only when requested; this order fixes the
/// column layout of each encoder layer's concatenated output.
struct OperatorSet {
  std::vector<Operator> ops;
  std::vector<std::string> labels;
  std::size_t n = 0;

  std::size_t size() const noexcept { return ops.size(); }
};

struct OperatorOptions {
  AdjacencyNorm adjacency_norm = AdjacencyNorm::None;
  /// Divides each FactoredCov scale by max_j ‖Rc[:, j]‖² / h.
  bool spectral_rescale = false;
};

/// (1/h)(Π_c r)(Π_c r)ᵀ as an explicit n×n matrix.
Matrix node_cov_dense(const Matrix& r);

/// Factored covariance: stores Π_c r and 1/h, never an n×n matrix.
Operator make_factored(const Matrix& r, bool spectral_rescale = false);
Operator make_dense(const Matrix& k);
Operator make_identity(std::size_t n);
Operator make_adjacency(const Graph& g, AdjacencyNorm norm = AdjacencyNorm::None);

/// O · h_in. The factored path evaluates scale·Rc·(Rcᵀ·h_in) right to left.
Matrix apply_operator(const Operator& op, const Matrix& h_in);
/// Oᵀ · h_in; differs from apply_operator only for directed adjacency.
Matrix apply_operator_transpose(const Operator& op, const Matrix& h_in);

/// Materialises the operator as n×n. Oracles and small-graph export only.
Matrix to_dense(const Operator& op);

/// Number of operators produced by build_operator_set for the given options.
std::size_t operator_count(std::size_t k, bool with_edge_ops) noexcept;

/// R⁽ᵖ⁾ = Aᵖ·R⁽⁰⁾ by k sparse applications, each wrapped as FactoredCov, after
/// Identity and Adjacency. With `r0_edge`, the edge block Aᵖ·R_edge⁽⁰⁾ for
/// p = 0..k follows.
OperatorSet build_operator_set(const Graph& g, const Matrix& r0, std::size_t k,
                               const std::optional<Matrix>& r0_edge = std::nullopt,
                               const OperatorOptions& options = {});

/// Π_c·x·xᵀ·Π_c, the exact expectation of node_cov_dense(x·C) over Gaussian C.
Matrix expected_cov(const Matrix& x);

}  // namespace allin
