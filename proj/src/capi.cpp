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

#include "allin/allin.h"

#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "allin/app.hpp"
#include "allin/checks.hpp"
#include "json_util.hpp"

struct allin_dataset {
  allin::Dataset ds;
};

struct allin_checkpoint {
  allin::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

allin_status status_of(allin::ErrorKind kind) {
  using allin::ErrorKind;
  switch (kind) {
    case ErrorKind::Dimension: return ALLIN_ERR_DIMENSION;
    case ErrorKind::Parse: return ALLIN_ERR_PARSE;
    case ErrorKind::Schema: return ALLIN_ERR_SCHEMA;
    case ErrorKind::IndexOutOfRange: return ALLIN_ERR_INDEX;
    case ErrorKind::Config: return ALLIN_ERR_CONFIG;
    case ErrorKind::Version: return ALLIN_ERR_VERSION;
    case ErrorKind::Shape: return ALLIN_ERR_SHAPE;
    case ErrorKind::Io: return ALLIN_ERR_IO;
    case ErrorKind::Internal: return ALLIN_ERR_INTERNAL;
  }
  return ALLIN_ERR_INTERNAL;
}

template <class Fn>
allin_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return ALLIN_OK;
  } catch (const allin::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ALLIN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ALLIN_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json options(const char* text, const char* what) {
  if (!text || !*text) return nlohmann::json::object();
  auto j = allin::detail::parse_json(text, what);
  if (!j.is_object()) allin::fail(allin::ErrorKind::Config, std::string(what) + ": expected object");
  return j;
}

/// Typed accessor that rejects keys outside `allowed`.
class Options {
 public:
  Options(const char* text, const char* what, std::initializer_list<const char*> allowed)
      : j_(options(text, what)), what_(what) {
    for (const auto& [key, value] : j_.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) allin::fail(allin::ErrorKind::Config, what_ + ": unknown option '" + key + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_[key].is_null(); }

  std::size_t count(const char* key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    if (!j_[key].is_number_unsigned()) bad(key, "non-negative integer");
    return j_[key].get<std::size_t>();
  }
  std::uint64_t u64(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    if (!j_[key].is_number_unsigned()) bad(key, "non-negative integer");
    return j_[key].get<std::uint64_t>();
  }
  double real(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    if (!j_[key].is_number()) bad(key, "number");
    return j_[key].get<double>();
  }
  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_[key].is_boolean()) bad(key, "boolean");
    return j_[key].get<bool>();
  }
  std::string str(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_[key].is_string()) bad(key, "string");
    return j_[key].get<std::string>();
  }
  const nlohmann::json& raw(const char* key) const { return j_[key]; }

 private:
  [[noreturn]] void bad(const char* key, const char* type) const {
    allin::fail(allin::ErrorKind::Config, what_ + "." + key + ": expected " + type);
  }
  nlohmann::json j_;
  std::string what_;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

extern "C" {

const char* allin_version(void) { return "1.0.0"; }

const char* allin_status_name(allin_status status) {
  switch (status) {
    case ALLIN_OK: return "ok";
    case ALLIN_ERR_DIMENSION: return "dimension";
    case ALLIN_ERR_PARSE: return "parse";
    case ALLIN_ERR_SCHEMA: return "schema";
    case ALLIN_ERR_INDEX: return "index-out-of-range";
    case ALLIN_ERR_CONFIG: return "config";
    case ALLIN_ERR_VERSION: return "version";
    case ALLIN_ERR_SHAPE: return "shape";
    case ALLIN_ERR_IO: return "io";
    case ALLIN_ERR_INTERNAL: return "internal";
    case ALLIN_ERR_NULL_ARGUMENT: return "null-argument";
  }
  return "unknown";
}

const char* allin_last_error(void) { return g_last_error.c_str(); }

void allin_string_free(char* s) { delete[] s; }

uint64_t allin_config_hash(const char* text) { return allin::config_hash(text ? text : ""); }

allin_status allin_dataset_load(const char* path, allin_dataset** out) {
  if (!path || !out) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new allin_dataset{allin::load_dataset(path)}; });
}

allin_status allin_dataset_parse(const char* json, allin_dataset** out) {
  if (!json || !out) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new allin_dataset{allin::parse_dataset(json)}; });
}

allin_status allin_dataset_save(const allin_dataset* ds, const char* path) {
  if (!ds || !path) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] { allin::save_dataset(ds->ds, path); });
}

allin_status allin_dataset_num_graphs(const allin_dataset* ds, size_t* out) {
  if (!ds || !out) return ALLIN_ERR_NULL_ARGUMENT;
  *out = ds->ds.graphs.size();
  return ALLIN_OK;
}

allin_status allin_dataset_feature_dim(const allin_dataset* ds, size_t* out) {
  if (!ds || !out) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = ds->ds.feature_dim(); });
}

allin_status allin_dataset_validate(const allin_dataset* ds, char** violations_json) {
  if (!ds || !violations_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < ds->ds.graphs.size(); ++i)
      for (const auto& v : allin::validate(ds->ds.graphs[i]))
        arr.push_back({{"graph", i}, {"field", v.field}, {"message", v.message}});
    *violations_json = dup_string(arr.dump());
  });
}

void allin_dataset_free(allin_dataset* ds) { delete ds; }

allin_status allin_checkpoint_load(const char* path, allin_checkpoint** out) {
  if (!path || !out) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new allin_checkpoint{allin::load_checkpoint(path)}; });
}

allin_status allin_checkpoint_num_heads(const allin_checkpoint* ckpt, size_t* out) {
  if (!ckpt || !out) return ALLIN_ERR_NULL_ARGUMENT;
  *out = ckpt->ckpt.heads.size();
  return ALLIN_OK;
}

allin_status allin_checkpoint_encoder_hash(const allin_checkpoint* ckpt, uint64_t* out) {
  if (!ckpt || !out) return ALLIN_ERR_NULL_ARGUMENT;
  *out = allin::params_hash(ckpt->ckpt.params);
  return ALLIN_OK;
}

void allin_checkpoint_free(allin_checkpoint* ckpt) { delete ckpt; }

allin_status allin_verify(const char* suite, uint64_t seed, int with_time, int* all_passed,
                          char** result_json) {
  if (!suite || !all_passed || !result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto names = split_csv(suite);
    if (names.empty()) allin::fail(allin::ErrorKind::Config, "empty suite");
    const auto reports = allin::run_suite(names, seed);
    *all_passed = allin::suite_passed(reports) ? 1 : 0;
    *result_json = dup_string(allin::reports_to_json(reports, with_time != 0));
  });
}

allin_status allin_train(const char* config_json, const char* base_dir,
                         const char* overrides_json, char** result_json) {
  if (!config_json || !result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    auto job = allin::parse_train_job(config_json, base_dir ? base_dir : ".");
    const Options o(overrides_json, "train overrides", {"epochs", "seed", "threads"});
    job.train.epochs = o.count("epochs", job.train.epochs);
    job.train.seed = o.u64("seed", job.train.seed);
    job.train.threads = o.count("threads", job.train.threads);
    *result_json = dup_string(allin::run_train(std::move(job)));
  });
}

allin_status allin_transfer(const char* ckpt_path, const char* data_path,
                            const char* options_json, char** result_json) {
  if (!ckpt_path || !data_path || !result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const Options o(options_json, "transfer options",
                    {"head", "epochs", "batch_size", "learning_rate", "seed", "eval_avg_draws",
                     "out", "metrics_out"});
    allin::TransferOptions t;
    t.head = allin::parse_head_kind(o.str("head", allin::to_string(t.head)));
    t.epochs = o.count("epochs", t.epochs);
    t.batch_size = o.count("batch_size", t.batch_size);
    t.learning_rate = o.real("learning_rate", t.learning_rate);
    t.seed = o.u64("seed", t.seed);
    t.eval_avg_draws = o.count("eval_avg_draws", t.eval_avg_draws);
    if (o.has("out")) t.out = o.str("out", "");
    if (o.has("metrics_out")) t.metrics_out = o.str("metrics_out", "");
    *result_json = dup_string(allin::run_transfer(ckpt_path, data_path, t));
  });
}

allin_status allin_bench(const char* options_json, char** result_json) {
  if (!result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const Options o(options_json, "bench options",
                    {"n", "h", "c", "mode", "repeat", "seed", "force"});
    allin::BenchOptions b;
    b.n = o.count("n", b.n);
    b.h = o.count("h", b.h);
    b.c = o.count("c", b.c);
    b.mode = allin::parse_bench_mode(o.str("mode", allin::to_string(b.mode)));
    b.repeat = o.count("repeat", b.repeat);
    b.seed = o.u64("seed", b.seed);
    b.force = o.flag("force", b.force);
    *result_json = dup_string(allin::bench_result_json(allin::run_bench(b)));
  });
}

allin_status allin_encode(const char* data_path, const char* ckpt_path, const char* options_json,
                          char** result_json) {
  if (!data_path || !result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const Options o(options_json, "encode options",
                    {"dump_operators", "dump_embeddings", "seed", "encoder", "out"});
    allin::EncodeOptions e;
    e.dump_operators = o.flag("dump_operators", false);
    e.dump_embeddings = o.flag("dump_embeddings", false);
    e.seed = o.u64("seed", 0);
    if (o.has("encoder")) e.encoder = allin::detail::encoder_config_from(o.raw("encoder"), e.encoder);
    if (o.has("out")) e.out = o.str("out", "");
    const allin::Dataset ds = allin::load_dataset(data_path);
    std::optional<allin::Checkpoint> ckpt;
    if (ckpt_path) ckpt = allin::load_checkpoint(ckpt_path);
    *result_json = dup_string(allin::run_encode(ds, ckpt, e));
  });
}

allin_status allin_synth(const char* options_json, const char* out_path, char** result_json) {
  if (!out_path || !result_json) return ALLIN_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const Options o(options_json, "synth options",
                    {"graphs", "nodes", "feature_dim", "map", "seed", "map_seed", "name"});
    allin::SynthOptions s;
    s.sbm.num_graphs = o.count("graphs", s.sbm.num_graphs);
    s.sbm.nodes = o.count("nodes", s.sbm.nodes);
    s.sbm.feature_dim = o.count("feature_dim", s.sbm.feature_dim);
    s.map = allin::parse_feature_map(o.str("map", "identity"));
    s.seed = o.u64("seed", 0);
    s.map_seed = o.u64("map_seed", s.seed);
    s.name = o.str("name", s.name);
    const allin::Dataset ds = allin::make_synthetic(s);
    allin::save_dataset(ds, out_path);
    nlohmann::json j = {{"name", ds.name},
                        {"graphs", ds.graphs.size()},
                        {"feature_dim", ds.feature_dim()},
                        {"map", allin::to_string(s.map)},
                        {"seed", s.seed},
                        {"out", out_path}};
    *result_json = dup_string(j.dump());
  });
}

}  // extern "C"
