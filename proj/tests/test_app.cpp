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

#include "allin/app.hpp"
#include "allin/experiment.hpp"
#include "support.hpp"

using namespace allin;

TEST_CASE("bench: dense and factored outputs agree at n = 500") {
  BenchOptions o;
  o.n = 500;
  o.h = 512;
  o.c = 64;
  o.seed = 3;
  Matrix factored, dense;
  const BenchResult f = run_bench(o, &factored);
  o.mode = BenchMode::Dense;
  const BenchResult d = run_bench(o, &dense);
  CHECK(max_abs_diff(factored, dense) < 1e-10);
  CHECK(f.dense_bytes == 500u * 500u * 8u);
  // dense materialises n×n on top of what the factored path needs
  CHECK(d.peak_transient_bytes >= f.dense_bytes);
  CHECK(f.peak_transient_bytes < d.peak_transient_bytes);
}

TEST_CASE("bench refuses large dense runs unless forced") {
  BenchOptions o;
  o.n = 50000;
  o.mode = BenchMode::Dense;
  CHECK_THROWS_KIND(run_bench(o), ErrorKind::Config);
  o.n = 0;
  o.mode = BenchMode::Factored;
  CHECK_THROWS_KIND(run_bench(o), ErrorKind::Config);
  CHECK_THROWS_KIND(parse_bench_mode("sparse"), ErrorKind::Config);
}

TEST_CASE("bench JSON omits timings on request") {
  BenchOptions o;
  o.n = 50;
  o.h = 8;
  o.c = 2;
  const auto r = run_bench(o);
  CHECK(bench_result_json(r, false).find("seconds") == std::string::npos);
  CHECK(bench_result_json(r, true).find("best_seconds") != std::string::npos);
}

TEST_CASE("synthetic feature maps act on the right of the same features") {
  SynthOptions o;
  o.sbm.num_graphs = 10;
  o.sbm.nodes = 8;
  o.sbm.feature_dim = 5;
  o.seed = 4;
  o.map_seed = 9;
  const Dataset base = make_synthetic(o);
  o.map = FeatureMap::Orthogonal;
  const Dataset rot = make_synthetic(o);
  o.map = FeatureMap::Permutation;
  const Dataset perm = make_synthetic(o);

  SeedStream qs(9, "synth/map");
  const Matrix q = feature_map_matrix(FeatureMap::Orthogonal, 5, qs);
  CHECK(frobenius_norm(matmul_nt(q, q) - Matrix::identity(5)) < 1e-12);
  for (std::size_t g = 0; g < base.graphs.size(); ++g) {
    CHECK(max_abs_diff(rot.graphs[g].node_features, matmul(base.graphs[g].node_features, q)) <
          1e-12);
    CHECK(rot.graphs[g].edges.size() == base.graphs[g].edges.size());
    CHECK(std::get<std::int64_t>(*rot.graphs[g].graph_label) ==
          std::get<std::int64_t>(*base.graphs[g].graph_label));
    // a permutation only reorders columns, so every row keeps its multiset
    for (std::size_t v = 0; v < 8; ++v) {
      auto a = std::vector<double>(base.graphs[g].node_features.row(v).begin(),
                                   base.graphs[g].node_features.row(v).end());
      auto b = std::vector<double>(perm.graphs[g].node_features.row(v).begin(),
                                   perm.graphs[g].node_features.row(v).end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
  CHECK(validate(base).empty());
  CHECK(base.splits->train.size() == 6);
  CHECK(base.splits->test.size() == 2);
}

TEST_CASE("sbm labels carry signal and both classes appear") {
  SbmConfig c;
  c.num_graphs = 40;
  const Dataset ds = make_sbm_dataset(c, "s", SeedStream(1, "sbm"));
  int ones = 0;
  for (const auto& g : ds.graphs) ones += std::get<std::int64_t>(*g.graph_label) == 1;
  CHECK(ones > 5);
  CHECK(ones < 35);
}

TEST_CASE("a shortened transfer experiment is deterministic") {
  auto o = TransferExperimentOptions::defaults();
  o.repetitions = 1;
  o.sbm.num_graphs = 40;
  o.sbm.nodes = 10;
  o.pretrain.epochs = 2;
  o.transfer.epochs = 2;
  o.encoder.projection.h = 16;
  const auto a = run_transfer_experiment(o);
  const auto b = run_transfer_experiment(o);
  REQUIRE(a.runs.size() == 1);
  CHECK(a.runs[0].target_test_accuracy.size() == 2);
  CHECK(a.mean_source_test == b.mean_source_test);
  CHECK(a.mean_target_test == b.mean_target_test);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i)
    CHECK(metric_record_json(a.metrics[i]) == metric_record_json(b.metrics[i]));
}

TEST_CASE("encode guard and operator count") {
  Dataset ds = load_dataset(testing::fixture("triangle.json"));
  EncodeOptions o;
  o.dump_operators = true;
  o.encoder.k = 1;
  o.encoder.hidden_widths = {8, 8};
  o.encoder.projection.h = 4;
  const std::string out = run_encode(ds, std::nullopt, o);
  CHECK(out.find("\"count\":4") != std::string::npos);
  CHECK(run_encode(ds, std::nullopt, o) == out);

  ds.graphs[0].num_nodes = kEncodeNodeLimit + 1;
  CHECK_THROWS_KIND(run_encode(ds, std::nullopt, o), ErrorKind::Config);
}

TEST_CASE("config hash is FNV-1a") {
  // FNV-1a 64 offset basis for the empty string, and the "a" test vector
  CHECK(config_hash("") == 0xcbf29ce484222325ULL);
  CHECK(config_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
