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

#include "allin/operators.hpp"

#include <algorithm>

namespace allin {

const char* to_string(OperatorKind kind) noexcept {
  switch (kind) {
    case OperatorKind::Identity: return "Identity";
    case OperatorKind::Adjacency: return "Adjacency";
    case OperatorKind::FactoredCov: return "FactoredCov";
    case OperatorKind::DenseCov: return "DenseCov";
  }
  return "?";
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_rows(const Operator& op, const Matrix& h_in) {
  if (op.num_nodes() != h_in.rows()) {
    fail(ErrorKind::Dimension, std::string("apply_operator: ") +
                                   to_string(op.kind()) + " acts on " +
                                   std::to_string(op.num_nodes()) +
                                   " nodes, input has " +
                                   std::to_string(h_in.rows()) + " rows");
  }
}

}  // namespace

std::size_t Operator::num_nodes() const noexcept {
  return std::visit(Overloaded{
                        [](const IdentityOp& o) { return o.n; },
                        [](const AdjacencyOp& o) { return o.graph->num_nodes; },
                        [](const FactoredCovOp& o) { return o.rc.rows(); },
                        [](const DenseCovOp& o) { return o.k.rows(); },
                    },
                    payload_);
}

Matrix node_cov_dense(const Matrix& r) {
  if (r.cols() == 0) fail(ErrorKind::Dimension, "node_cov_dense: h = 0");
  const Matrix rc = center_over_nodes(r);
  Matrix k = matmul_nt(rc, rc);
  k *= 1.0 / static_cast<double>(r.cols());
  return k;
}

Operator make_factored(const Matrix& r, bool spectral_rescale) {
  if (r.cols() == 0) fail(ErrorKind::Dimension, "make_factored: h = 0");
  const double h = static_cast<double>(r.cols());
  FactoredCovOp op{center_over_nodes(r), 1.0 / h};
  if (spectral_rescale) {
    double largest = 0.0;
    for (std::size_t j = 0; j < op.rc.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < op.rc.rows(); ++i) s += op.rc(i, j) * op.rc(i, j);
      largest = std::max(largest, s);
    }
    if (largest > 0.0) op.scale /= largest / h;
  }
  return Operator(std::move(op));
}

Operator make_dense(const Matrix& k) {
  if (k.rows() != k.cols()) fail(ErrorKind::Dimension, "make_dense: K not square");
  return Operator(DenseCovOp{k});
}

Operator make_identity(std::size_t n) { return Operator(IdentityOp{n}); }

Operator make_adjacency(const Graph& g, AdjacencyNorm norm) {
  return Operator(AdjacencyOp{&g, norm});
}

Matrix apply_operator(const Operator& op, const Matrix& h_in) {
  require_rows(op, h_in);
  return std::visit(Overloaded{
                        [&](const IdentityOp&) { return h_in; },
                        [&](const AdjacencyOp& o) {
                          return adjacency_apply(*o.graph, h_in, o.norm);
                        },
                        [&](const FactoredCovOp& o) {
                          Matrix inner = matmul_tn(o.rc, h_in);  // h × c
                          Matrix out = matmul(o.rc, inner);
                          out *= o.scale;
                          return out;
                        },
                        [&](const DenseCovOp& o) { return matmul(o.k, h_in); },
                    },
                    op.payload());
}

Matrix apply_operator_transpose(const Operator& op, const Matrix& h_in) {
  if (const auto* a = std::get_if<AdjacencyOp>(&op.payload())) {
    require_rows(op, h_in);
    return adjacency_apply_transpose(*a->graph, h_in, a->norm);
  }
  if (const auto* d = std::get_if<DenseCovOp>(&op.payload())) {
    require_rows(op, h_in);
    return matmul_tn(d->k, h_in);
  }
  return apply_operator(op, h_in);
}

Matrix to_dense(const Operator& op) {
  return apply_operator(op, Matrix::identity(op.num_nodes()));
}

std::size_t operator_count(std::size_t k, bool with_edge_ops) noexcept {
  return 2 + (k + 1) * (with_edge_ops ? 2 : 1);
}

OperatorSet build_operator_set(const Graph& g, const Matrix& r0, std::size_t k,
                               const std::optional<Matrix>& r0_edge,
                               const OperatorOptions& options) {
  if (r0.rows() != g.num_nodes)
    fail(ErrorKind::Dimension, "build_operator_set: R⁽⁰⁾ rows != num_nodes");
  OperatorSet set;
  set.n = g.num_nodes;
  set.ops.push_back(make_identity(g.num_nodes));
  set.labels.emplace_back("I");
  set.ops.push_back(make_adjacency(g, options.adjacency_norm));
  set.labels.emplace_back("A");

  auto append_block = [&](const Matrix& start, const std::string& prefix) {
    Matrix r = start;
    for (std::size_t p = 0; p <= k; ++p) {
      if (p > 0) r = adjacency_apply(g, r, options.adjacency_norm);
      set.ops.push_back(make_factored(r, options.spectral_rescale));
      set.labels.push_back(prefix + std::to_string(p));
    }
  };
  append_block(r0, "K");
  if (r0_edge) {
    if (r0_edge->rows() != g.num_nodes)
      fail(ErrorKind::Dimension, "build_operator_set: R_edge rows != num_nodes");
    append_block(*r0_edge, "Kedge");
  }
  return set;
}

Matrix expected_cov(const Matrix& x) {
  const Matrix xc = center_over_nodes(x);
  return matmul_nt(xc, xc);
}

}  // namespace allin
