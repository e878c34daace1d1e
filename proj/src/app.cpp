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

#include "allin/app.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>

#include "allin/operators.hpp"
#include "json_util.hpp"

namespace allin {

using detail::ojson;

std::uint64_t config_hash(const std::string& canonical_json) { return fnv1a64(canonical_json); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* to_string(BenchMode mode) noexcept {
  return mode == BenchMode::Dense ? "dense" : "factored";
}

BenchMode parse_bench_mode(const std::string& s) {
  if (s == "dense") return BenchMode::Dense;
  if (s == "factored") return BenchMode::Factored;
  fail(ErrorKind::Config, "unknown bench mode '" + s + "' (dense|factored)");
}

BenchResult run_bench(const BenchOptions& o) { return run_bench(o, nullptr); }

BenchResult run_bench(const BenchOptions& o, Matrix* output) {
  if (o.n == 0 || o.h == 0 || o.c == 0 || o.repeat == 0)
    fail(ErrorKind::Config, "bench: n, h, c and repeat must be positive");
  if (o.mode == BenchMode::Dense && o.n > kDenseBenchLimit && !o.force)
    fail(ErrorKind::Config, "bench: dense mode with n = " + std::to_string(o.n) + " > " +
                                std::to_string(kDenseBenchLimit) + " needs --force");
  BenchResult res;
  res.options = o;
  res.dense_bytes = o.n * o.n * sizeof(double);

  SeedStream s(o.seed, "bench");
  const Matrix r = gaussian_matrix(o.n, o.h, s);
  const Matrix hm = gaussian_matrix(o.n, o.c, s);

  double total = 0.0;
  res.best_seconds = std::numeric_limits<double>::infinity();
  for (std::size_t rep = 0; rep < o.repeat; ++rep) {
    const std::size_t baseline = alloc_stats::current_bytes();
    alloc_stats::reset_peak();
    const auto start = std::chrono::steady_clock::now();
    Matrix out;
    {
      const Operator op = o.mode == BenchMode::Dense ? make_dense(node_cov_dense(r)) : make_factored(r);
      out = apply_operator(op, hm);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.peak_transient_bytes = std::max(res.peak_transient_bytes, alloc_stats::peak_bytes() - baseline);
    total += secs;
    res.best_seconds = std::min(res.best_seconds, secs);
    if (rep + 1 == o.repeat) {
      res.checksum = 0.0;
      for (double v : out.data()) res.checksum += v;
      if (output) *output = std::move(out);
    }
  }
  res.mean_seconds = total / static_cast<double>(o.repeat);
  return res;
}

std::string bench_result_json(const BenchResult& r, bool with_time) {
  ojson j = ojson::object();
  j["n"] = r.options.n;
  j["h"] = r.options.h;
  j["c"] = r.options.c;
  j["mode"] = to_string(r.options.mode);
  j["repeat"] = r.options.repeat;
  j["seed"] = r.options.seed;
  if (with_time) {
    j["best_seconds"] = r.best_seconds;
    j["mean_seconds"] = r.mean_seconds;
  }
  j["peak_transient_bytes"] = r.peak_transient_bytes;
  j["peak_transient_mb"] = static_cast<double>(r.peak_transient_bytes) / 1e6;
  j["dense_bytes"] = r.dense_bytes;
  j["checksum"] = r.checksum;
  return j.dump();
}

namespace {

void write_metrics(const std::filesystem::path& path, const std::vector<MetricRecord>& records) {
  std::string text;
  for (const auto& r : records) text += metric_record_json(r) + "\n";
  detail::write_file(path.string(), text);
}

}  // namespace

std::string run_train(TrainJob job) {
  std::vector<Dataset> datasets;
  for (const auto& p : job.dataset_paths) datasets.push_back(load_dataset(p));
  const std::uint64_t hash = config_hash(train_job_to_json(job));

  std::vector<std::string> written;
  auto sink = [&](std::size_t epoch, const Checkpoint& ckpt) {
    std::filesystem::path path = job.out;
    if (epoch != job.train.epochs) {
      path.replace_filename(job.out.stem().string() + ".epoch" + std::to_string(epoch) +
                            job.out.extension().string());
    }
    save_checkpoint(ckpt, path);
    written.push_back(path.string());
  };
  const PretrainResult res = pretrain(datasets, job.encoder, job.train, sink);
  if (job.metrics_out) write_metrics(*job.metrics_out, res.metrics);

  ojson j = ojson::object();
  j["seed"] = job.train.seed;
  j["config_hash"] = hex64(hash);
  j["checkpoint"] = job.out.string();
  j["checkpoints_written"] = written;
  if (job.metrics_out) j["metrics"] = job.metrics_out->string();
  std::vector<std::string> heads;
  for (const auto& [name, head] : res.checkpoint.heads) heads.push_back(name);
  j["heads"] = heads;
  j["steps"] = res.checkpoint.step;
  ojson losses = ojson::object();
  for (const auto& [name, l] : res.epoch_losses) losses[name] = l.empty() ? 0.0 : l.back();
  j["final_loss"] = losses;
  j["encoder_hash"] = hex64(params_hash(res.checkpoint.params));
  return j.dump();
}

TrainConfig TransferOptions::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.adam.learning_rate = learning_rate;
  t.head = head;
  t.seed = seed;
  t.eval_avg_draws = eval_avg_draws;
  t.eval_every = 0;
  return t;
}

std::string run_transfer(const std::filesystem::path& ckpt_path, const std::filesystem::path& data,
                         const TransferOptions& o) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset target = load_dataset(data);
  const TrainConfig train = o.train_config();
  ojson cfg = ojson::object();
  cfg["ckpt"] = ckpt_path.string();
  cfg["data"] = data.string();
  cfg["head"] = to_string(o.head);
  cfg["epochs"] = o.epochs;
  cfg["batch_size"] = o.batch_size;
  cfg["learning_rate"] = o.learning_rate;
  cfg["seed"] = o.seed;
  cfg["eval_avg_draws"] = o.eval_avg_draws;
  const std::uint64_t hash = config_hash(cfg.dump());

  const TransferResult res = transfer(ckpt, target, train);
  if (o.metrics_out) write_metrics(*o.metrics_out, res.metrics);

  ojson j = ojson::object();
  j["seed"] = o.seed;
  j["config_hash"] = hex64(hash);
  j["dataset"] = target.name;
  j["metric"] = to_string(target.metric);
  j["head"] = to_string(res.head.kind);
  j["train_metric"] = res.train_metric;
  j["val_metric"] = res.val_metric;
  j["test_metric"] = res.test_metric;
  j["encoder_hash_before"] = hex64(res.encoder_hash_before);
  j["encoder_hash_after"] = hex64(res.encoder_hash_after);
  if (o.out) {
    ojson head = ojson::object();
    const auto names = TaskHead::param_names(res.head.kind);
    for (std::size_t i = 0; i < names.size(); ++i) head[names[i]] = detail::matrix_to_json(res.head.params[i]);
    ojson file = j;
    file["head_params"] = head;
    detail::write_file(o.out->string(), file.dump());
    j["out"] = o.out->string();
  }
  return j.dump();
}

std::string run_encode(const Dataset& ds, const std::optional<Checkpoint>& ckpt,
                       const EncodeOptions& o) {
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    if (ds.graphs[gi].num_nodes > kEncodeNodeLimit)
      fail(ErrorKind::Config, "encode: graph " + std::to_string(gi) + " has " +
                                  std::to_string(ds.graphs[gi].num_nodes) + " nodes (limit " +
                                  std::to_string(kEncodeNodeLimit) + ")");
  }
  const EncoderConfig config = ckpt ? ckpt->config : o.encoder;
  config.validate();
  EncoderParams params;
  if (ckpt) {
    params = ckpt->params;
  } else {
    SeedStream init(o.seed, "init");
    params = init_encoder_params(config, init);
  }
  ProjectionState ps = make_projection_state(ds, config.projection, o.seed, "encode");

  ojson j = ojson::object();
  j["dataset"] = ds.name;
  j["seed"] = o.seed;
  j["config_hash"] = hex64(config_hash(encoder_config_to_json(config)));
  j["encoder"] = detail::encoder_config_json(config);
  ojson graphs = ojson::array();
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    ojson gj = ojson::object();
    gj["index"] = gi;
    gj["num_nodes"] = g.num_nodes;
    const auto [r0, r0_edge] = project_graph(g, ps, config);
    if (o.dump_operators) {
      const OperatorSet ops = build_operator_set(g, r0, config.k,
                                                 config.use_edge_ops ? r0_edge : std::nullopt,
                                                 config.operator_options());
      ojson mats = ojson::array();
      std::vector<std::string> order;
      for (const auto& op : ops.ops) {
        mats.push_back(detail::matrix_to_json(to_dense(op)));
        order.push_back(to_string(op.kind()));
      }
      gj["operators"] = {{"count", ops.size()},
                         {"order", order},
                         {"labels", ops.labels},
                         {"matrices", mats}};
    }
    if (o.dump_embeddings)
      gj["embeddings"] = detail::matrix_to_json(encode_projected(g, r0, r0_edge, config, params));
    graphs.push_back(std::move(gj));
    ps.advance(ProjectionMode::PerPass);
  }
  j["graphs"] = std::move(graphs);
  const std::string text = j.dump();
  if (o.out) detail::write_file(o.out->string(), text);
  return text;
}

Dataset make_synthetic(const SynthOptions& o) {
  SeedStream base(o.seed, "synth");
  SeedStream map_stream(o.map_seed, "synth/map");
  const Matrix map = o.map == FeatureMap::Identity
                         ? Matrix()
                         : feature_map_matrix(o.map, o.sbm.feature_dim, map_stream);
  return make_sbm_dataset(o.sbm, o.name, base.derive("graphs"), map);
}

}  // namespace allin
