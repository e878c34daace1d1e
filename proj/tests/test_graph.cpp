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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "allin/graph.hpp"
#include "support.hpp"

using namespace allin;

namespace {

Graph path2() {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.node_features = Matrix{{1.0}, {2.0}};
  return g;
}

Graph random_graph(std::size_t n, double p, bool directed, SeedStream& s) {
  Graph g;
  g.num_nodes = n;
  g.directed = directed;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = directed ? 0 : i + 1; j < n; ++j)
      if (i != j && s.next_uniform() < p) g.edges.push_back({i, j});
  g.node_features = gaussian_matrix(n, 3, s);
  return g;
}

// A built from the edge list with explicit loops, independent of graph.cpp.
Matrix oracle_adjacency(const Graph& g) {
  Matrix a(g.num_nodes, g.num_nodes);
  for (const auto& e : g.edges) {
    a(e.target, e.source) = 1.0;
    if (!g.directed) a(e.source, e.target) = 1.0;
  }
  return a;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("triangle fixture loads") {
  const Dataset ds = load_dataset(testing::fixture("triangle.json"));
  REQUIRE(ds.graphs.size() == 1);
  const Graph& g = ds.graphs[0];
  CHECK(g.num_nodes == 3);
  CHECK(g.num_edges() == 3);
  CHECK(g.feature_dim() == 2);
  CHECK(!g.directed);
  CHECK(std::get<std::int64_t>(*g.graph_label) == 0);
  CHECK(ds.task == TaskKind::GraphClassification);
  CHECK(ds.metric == MetricKind::Accuracy);
  CHECK(validate(g).empty());
  CHECK(validate(ds).empty());
}

TEST_CASE("load errors") {
  CHECK_THROWS_KIND(load_dataset(testing::fixture("bad_edge.json")), ErrorKind::IndexOutOfRange);
  CHECK_THROWS_KIND(load_dataset(testing::fixture("overlapping_masks.json")), ErrorKind::Schema);
  CHECK_THROWS_KIND(load_dataset(testing::fixture("version2.json")), ErrorKind::Version);
  CHECK_THROWS_KIND(load_dataset(testing::fixture("does_not_exist.json")), ErrorKind::Io);
  CHECK_THROWS_KIND(parse_dataset("{not json"), ErrorKind::Parse);

  // unknown top-level key
  std::string text = read_file(testing::fixture("triangle.json"));
  text.insert(text.find('{') + 1, "\"extra\": 1, ");
  CHECK_THROWS_KIND(parse_dataset(text), ErrorKind::Schema);
}

TEST_CASE("overlapping masks error names the field") {
  try {
    load_dataset(testing::fixture("overlapping_masks.json"));
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("masks") != std::string::npos);
  }
}

TEST_CASE("validate reports a NaN cell by index") {
  Graph g = load_dataset(testing::fixture("triangle.json")).graphs[0];
  g.node_features(1, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "node_features[1][0]");
}

TEST_CASE("validate reports one duplicate for (0,1) and (1,0)") {
  Graph g = path2();
  g.edges.push_back({1, 0});
  const auto v = validate(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("duplicate") != std::string::npos);
  CHECK(v[0].field == "edges[1]");

  // the same pair is two distinct arcs in a directed graph
  g.directed = true;
  CHECK(validate(g).empty());
}

TEST_CASE("validate rejects self-loops and bad masks") {
  Graph g = path2();
  g.edges.push_back({1, 1});
  CHECK(validate(g).size() == 1);

  Graph h = path2();
  h.masks = SplitMasks{{true, false}, {false, false}, {true}};
  CHECK(!validate(h).empty());
}

TEST_CASE("adjacency_apply examples") {
  CHECK(adjacency_apply(path2(), Matrix::identity(2)) == Matrix{{0, 1}, {1, 0}});

  const Graph tri = load_dataset(testing::fixture("triangle.json")).graphs[0];
  CHECK(adjacency_apply(tri, Matrix(3, 1, 1.0)) == Matrix{{2}, {2}, {2}});

  Graph iso = path2();
  iso.num_nodes = 3;
  iso.node_features = Matrix(3, 1, 1.0);
  const Matrix out = adjacency_apply(iso, Matrix(3, 2, 1.0));
  CHECK(out(2, 0) == 0.0);
  CHECK(out(2, 1) == 0.0);

  CHECK_THROWS_KIND(adjacency_apply(tri, Matrix(2, 1)), ErrorKind::Dimension);
}

TEST_CASE("directed adjacency sends source rows to targets") {
  Graph g = path2();
  g.directed = true;
  const Matrix m{{5}, {7}};
  CHECK(adjacency_apply(g, m) == Matrix{{0}, {5}});
  CHECK(adjacency_apply_transpose(g, m) == Matrix{{7}, {0}});
}

TEST_CASE("A·(A·m) matches a dense oracle on random graphs") {
  SeedStream s(21, "adj");
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + s.next_below(49);
    const bool directed = t % 2 == 1;
    const Graph g = random_graph(n, 0.15, directed, s);
    const Matrix m = gaussian_matrix(n, 4, s);
    const Matrix a = oracle_adjacency(g);
    const Matrix expected = naive_matmul(a, naive_matmul(a, m));
    CHECK(max_abs_diff(adjacency_apply(g, adjacency_apply(g, m)), expected) < 1e-10);
    CHECK(dense_adjacency(g) == a);
    CHECK(max_abs_diff(adjacency_apply_transpose(g, m),
                       naive_matmul(transpose(a), m)) < 1e-10);
  }
}

TEST_CASE("A·e_i is supported exactly on the neighbours of i") {
  SeedStream s(22, "support");
  const Graph g = random_graph(30, 0.1, false, s);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    Matrix e(g.num_nodes, 1);
    e(i, 0) = 1.0;
    const Matrix out = adjacency_apply(g, e);
    std::set<std::size_t> nbrs;
    for (const auto& edge : g.edges) {
      if (edge.source == i) nbrs.insert(edge.target);
      if (edge.target == i) nbrs.insert(edge.source);
    }
    for (std::size_t v = 0; v < g.num_nodes; ++v) CHECK((out(v, 0) != 0.0) == nbrs.count(v));
  }
}

TEST_CASE("sym normalisation uses D^-1/2 A D^-1/2") {
  const Graph tri = load_dataset(testing::fixture("triangle.json")).graphs[0];
  const Matrix a = dense_adjacency(tri, AdjacencyNorm::Sym);
  CHECK(a(0, 1) == doctest::Approx(0.5));
  CHECK(a(0, 0) == 0.0);
  CHECK(max_abs_diff(adjacency_apply(tri, Matrix::identity(3), AdjacencyNorm::Sym), a) < 1e-15);
}

TEST_CASE("degrees and relabeling") {
  const Graph tri = load_dataset(testing::fixture("triangle.json")).graphs[0];
  CHECK(in_degrees(tri) == std::vector<std::size_t>{2, 2, 2});

  SeedStream s(23, "relabel");
  const Graph g = random_graph(12, 0.3, false, s);
  const auto perm = random_permutation(12, s);
  const Graph r = relabel_nodes(g, perm);
  const Matrix a = dense_adjacency(g), b = dense_adjacency(r);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) CHECK(b(perm[i], perm[j]) == a(i, j));
    for (std::size_t c = 0; c < 3; ++c) CHECK(r.node_features(perm[i], c) == g.node_features(i, c));
  }
}

TEST_CASE("dataset JSON round-trips") {
  const Dataset a = load_dataset(testing::fixture("tiny_nodes.json"));
  const Dataset b = parse_dataset(dataset_to_json(a));
  CHECK(dataset_to_json(a) == dataset_to_json(b));
  CHECK(b.graphs[0].node_labels == a.graphs[0].node_labels);
  CHECK(b.graphs[0].masks->test == a.graphs[0].masks->test);

  const auto dir = testing::scratch_dir("graph");
  save_dataset(a, dir / "copy.json");
  CHECK(dataset_to_json(load_dataset(dir / "copy.json")) == dataset_to_json(a));
}

TEST_CASE("multilabel labels keep NaN and regression arity is checked") {
  const std::string text = R"({"format_version":1,"name":"ml","task":"graph-multilabel",
    "metric":"roc-auc","num_classes_or_targets":2,
    "graphs":[{"num_nodes":2,"directed":false,"edges":[[0,1]],
               "node_features":[[1.0],[2.0]],"graph_label":[1.0,null]}]})";
  const Dataset ds = parse_dataset(text);
  const auto& y = std::get<std::vector<double>>(*ds.graphs[0].graph_label);
  CHECK(y[0] == 1.0);
  CHECK(std::isnan(y[1]));

  std::string bad = text;
  bad.replace(bad.find("[1.0,null]"), 10, "[1.0]");
  CHECK_THROWS_KIND(parse_dataset(bad), ErrorKind::Schema);
}

TEST_CASE("graph splits") {
  const Dataset a = load_dataset(testing::fixture("tiny_a.json"));
  CHECK(graph_split(a, "test", 0) == std::vector<std::size_t>{10, 11});
  CHECK_THROWS_KIND(graph_split(a, "holdout", 0), ErrorKind::Config);

  Dataset b = a;
  b.splits.reset();
  const auto tr = graph_split(b, "train", 5), va = graph_split(b, "val", 5),
             te = graph_split(b, "test", 5);
  CHECK(tr.size() + va.size() + te.size() == b.graphs.size());
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(va.begin(), va.end());
  all.insert(te.begin(), te.end());
  CHECK(all.size() == b.graphs.size());
  CHECK(graph_split(b, "train", 5) == tr);
}
