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
#include <limits>

#include "allin/synthetic.hpp"
#include "allin/training.hpp"
#include "support.hpp"

using namespace allin;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.num_layers = 2;
  c.k = 1;
  c.hidden_widths = {12, 12};
  c.structural_dim = 2;
  c.norm = NormKind::Layer;
  c.projection = {8, ProjectionMode::PerPass, 1};
  return c;
}

TrainConfig quick_train(std::size_t epochs, std::uint64_t seed = 1) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.adam.learning_rate = 1e-3;
  t.seed = seed;
  t.eval_every = 0;
  return t;
}

Dataset sbm(std::size_t graphs, std::uint64_t seed, const std::string& name = "sbm") {
  SbmConfig cfg;
  cfg.num_graphs = graphs;
  cfg.nodes = 20;
  cfg.feature_dim = 6;
  return make_sbm_dataset(cfg, name, SeedStream(seed, "sbm"));
}

Dataset regression_one(double target) {
  Dataset ds;
  ds.name = "reg";
  ds.task = TaskKind::GraphRegression;
  ds.metric = MetricKind::Mae;
  ds.num_classes_or_targets = 1;
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.node_features = Matrix{{1, 0}, {0, 1}, {1, 1}};
  g.graph_label = std::vector<double>{target};
  ds.graphs.push_back(g);
  return ds;
}

std::string metrics_text(const std::vector<MetricRecord>& m) {
  std::string out;
  for (const auto& r : m) out += metric_record_json(r) + "\n";
  return out;
}

}  // namespace

TEST_CASE("loss values") {
  Targets cls;
  cls.classes = {0};
  CHECK(loss(Matrix{{0, 0}}, cls, {LossKind::CrossEntropy}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Targets reg;
  reg.values = Matrix{{1}};
  CHECK(loss(Matrix{{3}}, reg, {LossKind::Mse}) == 4.0);
  CHECK(loss(Matrix{{3}}, reg, {LossKind::MaeEvalOnly}) == 2.0);
  CHECK(loss(Matrix{{0}}, reg, {LossKind::BceMultilabel}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  // large logits stay finite
  CHECK(std::isfinite(loss(Matrix{{1000, -1000}}, cls, {LossKind::CrossEntropy})));
  Targets big;
  big.classes = {1};
  CHECK(loss(Matrix{{1000, -1000}}, big, {LossKind::CrossEntropy}) == doctest::Approx(2000.0));

  Targets masked;
  masked.values = Matrix{{kNaN, kNaN}};
  CHECK(loss(Matrix{{3, -2}}, masked, {LossKind::BceMultilabel}) == 0.0);
  Targets half;
  half.values = Matrix{{1, kNaN}};
  CHECK(loss(Matrix{{0, 50}}, half, {LossKind::BceMultilabel}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_with_grad(Matrix{{0, 50}}, half, {LossKind::BceMultilabel}).grad(0, 1) == 0.0);

  CHECK_THROWS_KIND(loss(Matrix{{1, 2}}, reg, {LossKind::Mse}), ErrorKind::Dimension);
}

TEST_CASE("loss gradients against central differences") {
  SeedStream s(71, "lossgrad");
  const Matrix pred = gaussian_matrix(3, 4, s);
  Targets cls;
  cls.classes = {0, 3, 1};
  Targets vals;
  vals.values = gaussian_matrix(3, 4, s);
  Targets bce;
  bce.values = Matrix{{1, 0, kNaN, 1}, {0, 0, 1, kNaN}, {1, 1, 0, 0}};
  const std::pair<LossKind, const Targets*> cases[] = {
      {LossKind::CrossEntropy, &cls}, {LossKind::Mse, &vals}, {LossKind::BceMultilabel, &bce}};
  for (const auto& [kind, target] : cases) {
    const auto lg = loss_with_grad(pred, *target, {kind});
    for (std::size_t i = 0; i < pred.size(); ++i) {
      Matrix up = pred, dn = pred;
      up.data()[i] += 1e-6;
      dn.data()[i] -= 1e-6;
      const double fd = (loss(up, *target, {kind}) - loss(dn, *target, {kind})) / 2e-6;
      CHECK(lg.grad.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("zero loss gives zero gradients") {
  const Dataset ds = regression_one(0.5);
  const EncoderConfig c = tiny_encoder();
  SeedStream init(1, "init");
  const EncoderParams p = init_encoder_params(c, init);
  TaskHead head = init_head(HeadKind::Linear, ds.task, ds.metric, c.output_width(), 1, init);
  head.params[0] = Matrix(c.output_width(), 1);
  head.params[1] = Matrix{{0.5}};
  const auto ps = make_projection_state(ds, c.projection, 1);
  const Batch b{&ds, {0}, {}};
  const std::vector<Projected> in{project_graph(ds.graphs[0], ps, c)};
  const auto g = batch_gradients(b, in, c, p, head, false);
  CHECK(g.loss == 0.0);
  for_each_param(g.encoder, [](const std::string&, const Matrix& m) {
    for (double v : m.data()) CHECK(v == 0.0);
  });
  for (const auto& m : g.head)
    for (double v : m.data()) CHECK(v == 0.0);
}

TEST_CASE("frozen encoder gradients are exactly zero") {
  const Dataset ds = load_dataset(testing::fixture("tiny_a.json"));
  const EncoderConfig c = tiny_encoder();
  SeedStream init(2, "init");
  const EncoderParams p = init_encoder_params(c, init);
  const TaskHead head = init_head(HeadKind::Mlp, ds.task, ds.metric, c.output_width(), 2, init);
  const auto ps = make_projection_state(ds, c.projection, 2);
  const Batch b{&ds, {0, 1, 2}, {}};
  std::vector<Projected> in;
  for (auto gi : b.graphs) in.push_back(project_graph(ds.graphs[gi], ps, c));
  const auto frozen = batch_gradients(b, in, c, p, head, true);
  const auto live = batch_gradients(b, in, c, p, head, false);
  for_each_param(frozen.encoder, [](const std::string&, const Matrix& m) {
    for (double v : m.data()) CHECK(v == 0.0);
  });
  CHECK(frozen.loss == live.loss);
  CHECK(frozen.head == live.head);
}

TEST_CASE("adam first step and zero gradient") {
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Matrix w{{1.0}};
  adam_step("w", w, Matrix{{2.0}}, st, cfg);
  CHECK(w(0, 0) - 1.0 == doctest::Approx(-0.1 * (2.0 / (2.0 + 1e-8))).epsilon(1e-12));
  CHECK(st.slots.at("w").step == 1);

  AdamState z;
  Matrix v{{3.0, -1.0}};
  adam_step("v", v, Matrix(1, 2), z, cfg);
  CHECK(v == Matrix{{3.0, -1.0}});
  CHECK(z.slots.at("v").m == Matrix(1, 2));

  // moments only decay under a zero gradient
  const Matrix m_before = st.slots.at("w").m, v_before = st.slots.at("w").v;
  const double w_before = w(0, 0);
  adam_step("w", w, Matrix{{0.0}}, st, cfg);
  CHECK(st.slots.at("w").m(0, 0) == doctest::Approx(0.9 * m_before(0, 0)));
  CHECK(st.slots.at("w").v(0, 0) == doctest::Approx(0.999 * v_before(0, 0)));
  CHECK(w(0, 0) < w_before);  // momentum keeps moving it

  CHECK_THROWS_KIND(adam_step("w", w, Matrix(1, 2), st, cfg), ErrorKind::Dimension);
}

TEST_CASE("metrics") {
  CHECK(accuracy(Matrix{{0.1, 0.9}, {2.0, -1.0}}, {1, 0}) == 1.0);
  CHECK(accuracy(Matrix{{0.1, 0.9}, {2.0, -1.0}}, {0, 0}) == 0.5);
  const Matrix y{{1.0}, {2.5}};
  CHECK(mean_absolute_error(y, y) == 0.0);
  CHECK(root_mean_squared_error(Matrix{{1.0}, {3.0}}, Matrix{{0.0}, {0.0}}) ==
        doctest::Approx(std::sqrt(5.0)));
  const std::vector<double> labels{0, 1, 0, 1, 1};
  const std::vector<double> constant(5, 0.3);
  CHECK(roc_auc(constant, labels) == 0.5);
  const std::vector<double> perfect{0.1, 0.8, 0.2, 0.9, 0.7};
  CHECK(roc_auc(perfect, labels) == 1.0);
  // pairs (pos, neg): 2 wins, 1 tie, 3 losses out of 6... computed by hand
  const std::vector<double> mixed{0.5, 0.5, 0.9, 0.1, 0.95};
  // positives 0.5, 0.1, 0.95 vs negatives 0.5, 0.9:
  // 0.5: tie, loss; 0.1: loss, loss; 0.95: win, win -> (2 + 0.5) / 6
  CHECK(roc_auc(mixed, labels) == doctest::Approx(2.5 / 6.0));
  const std::vector<double> one_class(5, 1.0);
  CHECK(roc_auc(perfect, one_class) == 0.5);
}

TEST_CASE("pretrain: two datasets give two heads, zero epochs is the initialisation") {
  const std::vector<Dataset> ds{load_dataset(testing::fixture("tiny_a.json")),
                                load_dataset(testing::fixture("tiny_b.json"))};
  const EncoderConfig c = tiny_encoder();
  const auto two = pretrain(ds, c, quick_train(2));
  CHECK(two.checkpoint.heads.size() == 2);
  CHECK(two.checkpoint.heads.count("tiny-a") == 1);
  CHECK(two.checkpoint.heads.at("tiny-b").inputs == c.output_width());
  CHECK(two.epoch_losses.at("tiny-a").size() == 3);

  const auto zero = pretrain(ds, c, quick_train(0, 9));
  SeedStream init(9, "init");
  CHECK(params_hash(zero.checkpoint.params) == params_hash(init_encoder_params(c, init)));
  CHECK(zero.checkpoint.step == 0);

  std::vector<Dataset> dup{ds[0], ds[0]};
  CHECK_THROWS_KIND(pretrain(dup, c, quick_train(1)), ErrorKind::Config);
  CHECK_THROWS_KIND(pretrain({}, c, quick_train(1)), ErrorKind::Config);
}

TEST_CASE("pretrain is deterministic and independent of the thread count") {
  const std::vector<Dataset> ds{load_dataset(testing::fixture("tiny_a.json")),
                                load_dataset(testing::fixture("tiny_nodes.json"))};
  const EncoderConfig c = tiny_encoder();
  TrainConfig t = quick_train(3, 4);
  t.eval_every = 1;
  const auto a = pretrain(ds, c, t);
  const auto b = pretrain(ds, c, t);
  t.threads = 4;
  const auto d = pretrain(ds, c, t);
  CHECK(checkpoint_to_json(a.checkpoint) == checkpoint_to_json(b.checkpoint));
  CHECK(checkpoint_to_json(a.checkpoint) == checkpoint_to_json(d.checkpoint));
  CHECK(metrics_text(a.metrics) == metrics_text(b.metrics));
  CHECK(metrics_text(a.metrics) == metrics_text(d.metrics));
}

TEST_CASE("checkpoint sink cadence") {
  const std::vector<Dataset> ds{load_dataset(testing::fixture("tiny_a.json"))};
  TrainConfig t = quick_train(5);
  t.checkpoint_every = 2;
  std::vector<std::size_t> epochs;
  pretrain(ds, tiny_encoder(), t, [&](std::size_t e, const Checkpoint&) { epochs.push_back(e); });
  CHECK(epochs == std::vector<std::size_t>{2, 4, 5});
}

TEST_CASE("pretraining learns a separable SBM task") {
  const std::vector<Dataset> ds{sbm(100, 3)};
  EncoderConfig c = tiny_encoder();
  c.projection.h = 32;
  c.hidden_widths = {16, 16};
  TrainConfig t = quick_train(50, 5);
  t.batch_size = 8;
  const auto r = pretrain(ds, c, t);
  const auto& losses = r.epoch_losses.at("sbm");
  CHECK(losses.back() < losses.front());
  ProjectionState eval = make_projection_state(ds[0], c.projection, 5, "check");
  const double acc = evaluate(c, r.checkpoint.params, r.checkpoint.heads.at("sbm"), ds[0],
                              "train", eval, 5);
  CHECK(acc >= 0.9);
}

TEST_CASE("transfer keeps the encoder and accepts a new feature dimension") {
  const std::vector<Dataset> src{load_dataset(testing::fixture("tiny_a.json"))};
  const EncoderConfig c = tiny_encoder();
  const auto pre = pretrain(src, c, quick_train(2));
  const Dataset target = load_dataset(testing::fixture("tiny_b.json"));
  REQUIRE(target.feature_dim() != src[0].feature_dim());
  TrainConfig t = quick_train(3);
  t.head = HeadKind::Linear;
  const auto before = params_hash(pre.checkpoint.params);
  const auto r = transfer(pre.checkpoint, target, t);
  CHECK(r.encoder_hash_before == before);
  CHECK(r.encoder_hash_after == before);
  CHECK(params_hash(pre.checkpoint.params) == before);
  CHECK(r.head.kind == HeadKind::Linear);
  CHECK(r.test_metric >= 0.0);
  CHECK(r.test_metric <= 1.0);
}

TEST_CASE("evaluate refuses an empty split") {
  Dataset ds = load_dataset(testing::fixture("tiny_a.json"));
  ds.splits->val.clear();
  const EncoderConfig c = tiny_encoder();
  SeedStream init(3, "init");
  const EncoderParams p = init_encoder_params(c, init);
  const TaskHead head = init_head(HeadKind::Mlp, ds.task, ds.metric, c.output_width(), 2, init);
  auto ps = make_projection_state(ds, c.projection, 3, "eval");
  CHECK_THROWS_KIND(evaluate(c, p, head, ds, "val", ps, 3), ErrorKind::Config);
  CHECK_NOTHROW(evaluate(c, p, head, ds, "test", ps, 3, 4));
}

TEST_CASE("train config validation and job parsing") {
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_KIND(t.validate(), ErrorKind::Config);
  t = TrainConfig{};
  t.adam.learning_rate = 0.0;
  CHECK_THROWS_KIND(t.validate(), ErrorKind::Config);
  CHECK(TrainConfig{}.adam.learning_rate == 1e-4);
  CHECK(kTransferLearningRate == 1e-3);

  const auto job = parse_train_job(
      R"({"datasets": ["a.json"], "encoder": {"hidden_width": 8}, "train": {"epochs": 2},
          "out": "x.json", "checkpoint_every": 1})",
      "/data");
  CHECK(job.dataset_paths.front() == std::filesystem::path("/data/a.json"));
  CHECK(job.out == std::filesystem::path("/data/x.json"));
  CHECK(job.train.epochs == 2);
  CHECK(job.train.checkpoint_every == 1);
  CHECK(parse_train_job(train_job_to_json(job), "/").train.epochs == 2);

  CHECK_THROWS_KIND(parse_train_job(R"({"datasets": ["a"], "out": "x", "bogus": 1})", "."),
                    ErrorKind::Config);
  CHECK_THROWS_KIND(parse_train_job(R"({"out": "x"})", "."), ErrorKind::Config);
  CHECK_THROWS_KIND(parse_train_job("not json", "."), ErrorKind::Parse);
}

TEST_CASE("metric records serialise as one JSON object") {
  CHECK(metric_record_json({3, "ds", "val", "accuracy", 0.5}) ==
        R"({"epoch":3,"dataset":"ds","split":"val","metric":"accuracy","value":0.5})");
}
