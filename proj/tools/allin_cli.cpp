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

// Command-line front end. Talks to the library only through allin.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "allin/allin.h"
#include "json.hpp"

namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Owns a string handed out by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { allin_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

int exit_code_for(allin_status s) {
  switch (s) {
    case ALLIN_OK: return kExitOk;
    case ALLIN_ERR_CONFIG:
    case ALLIN_ERR_NULL_ARGUMENT: return kExitUsage;
    default: return kExitFailure;
  }
}

int report_error(allin_status s) {
  std::cerr << "error (" << allin_status_name(s) << "): " << allin_last_error() << "\n";
  return exit_code_for(s);
}

void print_identity(std::uint64_t seed, const std::string& canonical) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(allin_config_hash(canonical.c_str())));
  std::cerr << "seed=" << seed << " config_hash=" << hex << "\n";
}

void print_identity(const json& result) {
  std::cerr << "seed=" << result.value("seed", std::uint64_t{0})
            << " config_hash=" << result.value("config_hash", std::string("?")) << "\n";
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("ALLIN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("ALLIN_THREADS", "expected a positive integer");
  }
  return 1;
}

std::optional<std::string> read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_verify(const std::string& suite, std::uint64_t seed, bool as_json) {
  print_identity(seed, json{{"command", "verify"}, {"suite", suite}, {"seed", seed}}.dump());
  int all_passed = 0;
  LibString out;
  const allin_status s = allin_verify(suite.c_str(), seed, 1, &all_passed, &out.p);
  if (s != ALLIN_OK) return report_error(s);
  if (as_json) {
    std::cout << out.str() << "\n";
  } else {
    const json reports = json::parse(out.str());
    std::printf("%-12s %-15s %14s %14s %9s  %s\n", "check", "status", "statistic", "threshold",
                "seconds", "control");
    for (const auto& r : reports) {
      std::string control = "-";
      if (!r["control"].is_null())
        control = r["control"]["name"].get<std::string>() +
                  (r["control"]["failed"].get<bool>() ? " (failed as required)" : " (DID NOT FAIL)");
      std::printf("%-12s %-15s %14.6g %14.6g %9.2f  %s\n",
                  r["check_name"].get<std::string>().c_str(),
                  r["status"].get<std::string>().c_str(), r["statistic"].get<double>(),
                  r["threshold"].get<double>(), r["wall_time"].get<double>(), control.c_str());
    }
  }
  return all_passed ? kExitOk : kExitFailure;
}

int cmd_train(const std::string& config_path, std::optional<std::size_t> epochs,
              std::optional<std::uint64_t> seed, std::size_t threads) {
  const auto text = read_text(config_path);
  if (!text) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return kExitUsage;
  }
  json overrides = json::object();
  if (epochs) overrides["epochs"] = *epochs;
  if (seed) overrides["seed"] = *seed;
  overrides["threads"] = threads;
  const std::string base = std::filesystem::path(config_path).parent_path().string();
  LibString out;
  const allin_status s = allin_train(text->c_str(), base.empty() ? "." : base.c_str(),
                                     overrides.dump().c_str(), &out.p);
  if (s != ALLIN_OK) return report_error(s);
  const json result = json::parse(out.str());
  print_identity(result);
  std::cout << result.dump(2) << "\n";
  return kExitOk;
}

int cmd_transfer(const std::string& ckpt, const std::string& data, const json& options) {
  LibString out;
  const allin_status s =
      allin_transfer(ckpt.c_str(), data.c_str(), options.dump().c_str(), &out.p);
  if (s != ALLIN_OK) return report_error(s);
  const json result = json::parse(out.str());
  print_identity(result);
  std::cerr << result["metric"].get<std::string>() << " train=" << result["train_metric"]
            << " val=" << result["val_metric"] << " test=" << result["test_metric"] << "\n";
  std::cout << result.dump(2) << "\n";
  return kExitOk;
}

int cmd_bench(const json& options) {
  print_identity(options.value("seed", std::uint64_t{0}), options.dump());
  LibString out;
  const allin_status s = allin_bench(options.dump().c_str(), &out.p);
  if (s != ALLIN_OK) return report_error(s);
  std::cout << json::parse(out.str()).dump(2) << "\n";
  return kExitOk;
}

int cmd_encode(const std::string& data, const std::string& ckpt, const json& options,
               bool print_result) {
  LibString out;
  const allin_status s = allin_encode(data.c_str(), ckpt.empty() ? nullptr : ckpt.c_str(),
                                      options.dump().c_str(), &out.p);
  if (s != ALLIN_OK) return report_error(s);
  const json result = json::parse(out.str());
  print_identity(result);
  if (print_result) std::cout << out.str() << "\n";
  else std::cout << "wrote " << options["out"].get<std::string>() << "\n";
  return kExitOk;
}

int cmd_synth(const json& options, const std::string& out_path) {
  print_identity(options.value("seed", std::uint64_t{0}), options.dump());
  LibString out;
  const allin_status s = allin_synth(options.dump().c_str(), out_path.c_str(), &out.p);
  if (s != ALLIN_OK) return report_error(s);
  std::cout << out.str() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"allin: feature-space agnostic graph encoder"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(allin_version()));

  std::uint64_t seed = 0;
  std::size_t threads_flag = 0;

  auto* verify = app.add_subcommand("verify", "run invariance and oracle checks");
  std::string suite = "all";
  bool as_json = false;
  verify->add_option("--suite", suite,
                     "all|perm|ortho|consistency|witness|jensen|factored|hidden|grad, comma-separated");
  verify->add_option("--seed", seed, "master seed");
  verify->add_flag("--json", as_json, "emit the reports as a JSON array");
  verify->add_option("--threads", threads_flag, "worker cap (falls back to ALLIN_THREADS)");

  auto* train = app.add_subcommand("train", "pretrain an encoder from a config file");
  std::string config_path;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--config", config_path, "training config JSON")->required();
  train->add_option("--epochs", epochs, "override train.epochs");
  train->add_option("--seed", train_seed, "override train.seed");
  train->add_option("--threads", threads_flag, "worker cap (falls back to ALLIN_THREADS)");

  auto* transfer = app.add_subcommand("transfer", "train a new head on a frozen encoder");
  std::string ckpt, data, out, metrics_out, head = "mlp";
  std::size_t t_epochs = 50, t_batch = 16, t_draws = 1;
  double t_lr = 1e-3;
  transfer->add_option("--ckpt", ckpt, "checkpoint")->required();
  transfer->add_option("--data", data, "target dataset")->required();
  transfer->add_option("--out", out, "write the trained head and metrics here");
  transfer->add_option("--metrics-out", metrics_out, "metrics JSON lines");
  transfer->add_option("--head", head, "mlp|linear")->check(CLI::IsMember({"mlp", "linear"}));
  transfer->add_option("--epochs", t_epochs, "head training epochs");
  transfer->add_option("--batch-size", t_batch, "graphs per step");
  transfer->add_option("--lr", t_lr, "head learning rate");
  transfer->add_option("--eval-avg-draws", t_draws, "projections averaged at evaluation");
  transfer->add_option("--seed", seed, "master seed");
  transfer->add_option("--threads", threads_flag, "worker cap (falls back to ALLIN_THREADS)");

  auto* bench = app.add_subcommand("bench", "time covariance operator application");
  std::size_t n = 20000, h = 512, c = 64, repeat = 1;
  std::string mode = "factored";
  bool force = false;
  bench->add_option("--n", n, "nodes");
  bench->add_option("--h", h, "projection width");
  bench->add_option("--c", c, "columns of the operand");
  bench->add_option("--mode", mode, "dense|factored")->check(CLI::IsMember({"dense", "factored"}));
  bench->add_option("--repeat", repeat, "repetitions");
  bench->add_option("--seed", seed, "master seed");
  bench->add_flag("--force", force, "allow dense mode above 20000 nodes");
  bench->add_option("--threads", threads_flag, "worker cap (falls back to ALLIN_THREADS)");

  auto* encode = app.add_subcommand("encode", "export operators and embeddings of small graphs");
  std::string encode_config;
  bool dump_ops = false, dump_emb = false;
  std::optional<std::size_t> encode_k, encode_h, encode_width;
  encode->add_option("--data", data, "dataset")->required();
  encode->add_option("--ckpt", ckpt, "checkpoint (random init when absent)");
  encode->add_option("--config", encode_config, "encoder config JSON when no checkpoint");
  encode->add_option("--k", encode_k, "propagation hops when no checkpoint");
  encode->add_option("--h", encode_h, "projection width when no checkpoint");
  encode->add_option("--hidden-width", encode_width, "layer width when no checkpoint");
  encode->add_flag("--dump-operators", dump_ops, "include dense operator matrices");
  encode->add_flag("--dump-embeddings", dump_emb, "include final node embeddings");
  encode->add_option("--out", out, "output file (stdout when absent)");
  encode->add_option("--seed", seed, "master seed");
  encode->add_option("--threads", threads_flag, "worker cap (falls back to ALLIN_THREADS)");

  auto* synth = app.add_subcommand("synth", "write a synthetic SBM dataset");
  std::size_t graphs = 200, nodes = 30, dim = 16;
  std::string map = "identity", name = "sbm";
  std::optional<std::uint64_t> map_seed;
  synth->add_option("--out", out, "dataset path")->required();
  synth->add_option("--graphs", graphs, "number of graphs");
  synth->add_option("--nodes", nodes, "nodes per graph");
  synth->add_option("--feature-dim", dim, "feature dimension");
  synth->add_option("--map", map, "identity|orthogonal|permutation")
      ->check(CLI::IsMember({"identity", "orthogonal", "permutation"}));
  synth->add_option("--map-seed", map_seed, "seed of the feature map (default: --seed)");
  synth->add_option("--name", name, "dataset name");
  synth->add_option("--seed", seed, "graph seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::size_t threads = 1;
  try {
    threads = resolve_threads(threads_flag);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  if (*verify) return cmd_verify(suite, seed, as_json);
  if (*train) return cmd_train(config_path, epochs, train_seed, threads);
  if (*transfer) {
    json o = {{"head", head},         {"epochs", t_epochs}, {"batch_size", t_batch},
              {"learning_rate", t_lr}, {"seed", seed},      {"eval_avg_draws", t_draws}};
    if (!out.empty()) o["out"] = out;
    if (!metrics_out.empty()) o["metrics_out"] = metrics_out;
    return cmd_transfer(ckpt, data, o);
  }
  if (*bench) {
    return cmd_bench({{"n", n}, {"h", h}, {"c", c}, {"mode", mode}, {"repeat", repeat},
                      {"seed", seed}, {"force", force}});
  }
  if (*encode) {
    json o = {{"dump_operators", dump_ops}, {"dump_embeddings", dump_emb}, {"seed", seed}};
    json enc = json::object();
    if (!encode_config.empty()) {
      const auto text = read_text(encode_config);
      if (!text) {
        std::cerr << "error: cannot read encoder config " << encode_config << "\n";
        return kExitUsage;
      }
      try {
        enc = json::parse(*text);
      } catch (const json::parse_error& e) {
        std::cerr << "error: encoder config: " << e.what() << "\n";
        return kExitUsage;
      }
    }
    if (encode_k) enc["k"] = *encode_k;
    if (encode_h) enc["projection"]["h"] = *encode_h;
    if (encode_width) enc["hidden_width"] = *encode_width;
    if (!enc.empty()) o["encoder"] = enc;
    if (!out.empty()) o["out"] = out;
    return cmd_encode(data, ckpt, o, out.empty());
  }
  if (*synth) {
    json o = {{"graphs", graphs}, {"nodes", nodes},   {"feature_dim", dim},
              {"map", map},       {"seed", seed},     {"map_seed", map_seed.value_or(seed)},
              {"name", name}};
    return cmd_synth(o, out);
  }
  return kExitUsage;
}
