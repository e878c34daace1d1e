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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "allin/allin.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = ALLIN_FIXTURE_DIR;

// Takes ownership of a library string.
json take(char* s) {
  REQUIRE(s != nullptr);
  json j = json::parse(s);
  allin_string_free(s);
  return j;
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "allin-test-capi";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The two-dataset training config with outputs redirected to scratch.
std::string train_config(const std::string& stem) {
  json cfg = json::parse(read(kFixtures / "train_two.json"));
  cfg["out"] = (scratch() / (stem + ".json")).string();
  cfg["metrics_out"] = (scratch() / (stem + ".jsonl")).string();
  return cfg.dump();
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(allin_version()) > 0);
  CHECK(std::string(allin_status_name(ALLIN_OK)) == "ok");
  CHECK(std::string(allin_status_name(ALLIN_ERR_VERSION)) == "version");
  CHECK(allin_config_hash("{}") == allin_config_hash("{}"));
  CHECK(allin_config_hash("{}") != allin_config_hash("{ }"));
}

TEST_CASE("null arguments are rejected") {
  allin_dataset* ds = nullptr;
  CHECK(allin_dataset_load(nullptr, &ds) == ALLIN_ERR_NULL_ARGUMENT);
  CHECK(allin_dataset_load("x", nullptr) == ALLIN_ERR_NULL_ARGUMENT);
  size_t n = 0;
  CHECK(allin_dataset_num_graphs(nullptr, &n) == ALLIN_ERR_NULL_ARGUMENT);
  CHECK(allin_verify("witness", 1, 0, nullptr, nullptr) == ALLIN_ERR_NULL_ARGUMENT);
  allin_dataset_free(nullptr);
  allin_checkpoint_free(nullptr);
  allin_string_free(nullptr);
}

TEST_CASE("dataset handles") {
  allin_dataset* ds = nullptr;
  REQUIRE(allin_dataset_load((kFixtures / "triangle.json").c_str(), &ds) == ALLIN_OK);
  size_t n = 0, d = 0;
  CHECK(allin_dataset_num_graphs(ds, &n) == ALLIN_OK);
  CHECK(allin_dataset_feature_dim(ds, &d) == ALLIN_OK);
  CHECK(n == 1);
  CHECK(d == 2);
  char* v = nullptr;
  REQUIRE(allin_dataset_validate(ds, &v) == ALLIN_OK);
  CHECK(take(v).empty());
  const auto copy = scratch() / "triangle-copy.json";
  CHECK(allin_dataset_save(ds, copy.c_str()) == ALLIN_OK);
  allin_dataset_free(ds);

  allin_dataset* again = nullptr;
  CHECK(allin_dataset_load(copy.c_str(), &again) == ALLIN_OK);
  allin_dataset_free(again);

  allin_dataset* bad = nullptr;
  CHECK(allin_dataset_load((kFixtures / "bad_edge.json").c_str(), &bad) == ALLIN_ERR_INDEX);
  CHECK(bad == nullptr);
  CHECK(std::string(allin_last_error()).find("edges") != std::string::npos);
  CHECK(allin_dataset_load((kFixtures / "overlapping_masks.json").c_str(), &bad) ==
        ALLIN_ERR_SCHEMA);
  CHECK(allin_dataset_load((kFixtures / "version2.json").c_str(), &bad) == ALLIN_ERR_VERSION);
  CHECK(allin_dataset_parse("{", &bad) == ALLIN_ERR_PARSE);
  CHECK(allin_dataset_load("/nonexistent/file.json", &bad) == ALLIN_ERR_IO);
}

TEST_CASE("verify") {
  int ok = 0;
  char* out = nullptr;
  REQUIRE(allin_verify("witness,factored", 7, 0, &ok, &out) == ALLIN_OK);
  CHECK(ok == 1);
  const json reports = take(out);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0]["check_name"] == "witness");
  CHECK(!reports[0].contains("wall_time"));
  CHECK(allin_verify("witness,bogus", 7, 0, &ok, &out) == ALLIN_ERR_CONFIG);
}

TEST_CASE("train, checkpoint and transfer") {
  char* out = nullptr;
  REQUIRE(allin_train(train_config("two").c_str(), kFixtures.c_str(), nullptr, &out) == ALLIN_OK);
  const json res = take(out);
  CHECK(res["heads"].size() == 2);
  CHECK(res["checkpoints_written"].size() == 2);  // epoch 2 and the final one
  CHECK(fs::exists(scratch() / "two.epoch2.json"));
  CHECK(fs::exists(scratch() / "two.jsonl"));

  allin_checkpoint* ck = nullptr;
  REQUIRE(allin_checkpoint_load((scratch() / "two.json").c_str(), &ck) == ALLIN_OK);
  size_t heads = 0;
  uint64_t hash = 0;
  CHECK(allin_checkpoint_num_heads(ck, &heads) == ALLIN_OK);
  CHECK(allin_checkpoint_encoder_hash(ck, &hash) == ALLIN_OK);
  CHECK(heads == 2);
  allin_checkpoint_free(ck);

  // a repeat run reproduces the checkpoint and metrics byte for byte
  REQUIRE(allin_train(train_config("two-again").c_str(), kFixtures.c_str(), nullptr, &out) ==
          ALLIN_OK);
  allin_string_free(out);
  CHECK(read(scratch() / "two.json") == read(scratch() / "two-again.json"));
  CHECK(read(scratch() / "two.jsonl") == read(scratch() / "two-again.jsonl"));

  REQUIRE(allin_train(train_config("zero").c_str(), kFixtures.c_str(), R"({"epochs": 0})", &out) ==
          ALLIN_OK);
  CHECK(take(out)["steps"] == 0);
  CHECK(allin_train(train_config("x").c_str(), kFixtures.c_str(), R"({"epoch": 1})", &out) ==
        ALLIN_ERR_CONFIG);

  const auto ckpt = (scratch() / "two.json").string();
  const auto target = (kFixtures / "tiny_b.json").string();
  REQUIRE(allin_transfer(ckpt.c_str(), target.c_str(),
                         R"({"head": "linear", "epochs": 3, "batch_size": 4})", &out) == ALLIN_OK);
  const json tr = take(out);
  CHECK(tr["head"] == "linear");
  CHECK(tr["encoder_hash_before"] == tr["encoder_hash_after"]);

  CHECK(allin_transfer((kFixtures / "ckpt_version2.json").c_str(), target.c_str(), nullptr, &out) ==
        ALLIN_ERR_VERSION);
  CHECK(allin_transfer(ckpt.c_str(), target.c_str(), R"({"head": "cnn"})", &out) ==
        ALLIN_ERR_CONFIG);
}

TEST_CASE("bench") {
  char* out = nullptr;
  CHECK(allin_bench(R"({"n": 50000, "mode": "dense"})", &out) == ALLIN_ERR_CONFIG);
  REQUIRE(allin_bench(R"({"n": 500, "h": 64, "c": 8, "mode": "factored"})", &out) == ALLIN_OK);
  const json f = take(out);
  REQUIRE(allin_bench(R"({"n": 500, "h": 64, "c": 8, "mode": "dense"})", &out) == ALLIN_OK);
  const json d = take(out);
  CHECK(f["dense_bytes"] == 500 * 500 * 8);
  CHECK(std::abs(f["checksum"].get<double>() - d["checksum"].get<double>()) < 1e-8);
  CHECK(f["peak_transient_bytes"].get<double>() < d["peak_transient_bytes"].get<double>());
}

TEST_CASE("encode") {
  char* out = nullptr;
  const auto tri = (kFixtures / "triangle.json").string();
  REQUIRE(allin_encode(tri.c_str(), nullptr,
                       R"({"dump_operators": true, "dump_embeddings": true,
                           "encoder": {"k": 2, "hidden_width": 10,
                                       "projection": {"h": 8}}})",
                       &out) == ALLIN_OK);
  const json j = take(out);
  const json& g = j["graphs"][0];
  CHECK(g["operators"]["count"] == 2 + 2 + 1);
  CHECK(g["operators"]["order"][0] == "Identity");
  CHECK(g["operators"]["matrices"][2]["shape"] == json::array({3, 3}));
  CHECK(g["embeddings"]["shape"] == json::array({3, 10}));

  const auto big = (scratch() / "big.json").string();
  REQUIRE(allin_synth(R"({"graphs": 5, "nodes": 2000, "feature_dim": 4})", big.c_str(), &out) ==
          ALLIN_OK);
  allin_string_free(out);
  CHECK(allin_encode(big.c_str(), nullptr, R"({"dump_operators": true})", &out) ==
        ALLIN_ERR_CONFIG);
}

TEST_CASE("synth") {
  char* out = nullptr;
  const auto path = (scratch() / "synth.json").string();
  REQUIRE(allin_synth(R"({"graphs": 10, "nodes": 8, "feature_dim": 5, "map": "orthogonal",
                          "seed": 3, "name": "rotated"})",
                      path.c_str(), &out) == ALLIN_OK);
  const json j = take(out);
  CHECK(j["graphs"] == 10);
  CHECK(j["map"] == "orthogonal");
  allin_dataset* ds = nullptr;
  REQUIRE(allin_dataset_load(path.c_str(), &ds) == ALLIN_OK);
  size_t d = 0;
  allin_dataset_feature_dim(ds, &d);
  CHECK(d == 5);
  allin_dataset_free(ds);
  CHECK(allin_synth(R"({"map": "shear"})", path.c_str(), &out) == ALLIN_ERR_CONFIG);
}
