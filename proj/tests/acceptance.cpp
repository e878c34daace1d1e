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

// Acceptance run: every criterion at its stated tolerance and time budget,
// one PASS/FAIL line each. Criteria 1-8 run twice from the same master seed
// and the two metric files must match byte for byte (criterion 9).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "allin/app.hpp"
#include "allin/checks.hpp"
#include "allin/experiment.hpp"

namespace fs = std::filesystem;
using namespace allin;

namespace {

struct Outcome {
  bool passed = false;
  double seconds = 0.0;
  std::string summary;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<bool(std::ostream& metrics, std::string& summary)> body;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool report_ok(const CheckReport& r) {
  // A vacuous pass would mean the criterion was never exercised.
  return r.status == CheckStatus::Passed && (!r.control || r.control->failed);
}

std::string report_line(const CheckReport& r) {
  std::string s = r.check_name + " stat=" + fmt("%.3g", r.statistic) +
                  " thr=" + fmt("%.3g", r.threshold) + " " + to_string(r.status);
  if (r.control) s += r.control->failed ? " control=failed" : " control=PASSED";
  return s;
}

std::vector<Criterion> criteria(std::uint64_t seed) {
  const SuiteOptions so;
  const Matrix x = witness_features();
  std::vector<Criterion> c;

  c.push_back({1, "expressivity witness", 1.0, [=](std::ostream& m, std::string& s) {
                 auto r = check_expressivity_witness(so.witness_trials, seed);
                 m << report_to_json(r, false) << '\n';
                 s = report_line(r);
                 return report_ok(r);
               }});
  c.push_back({2, "expected operator", 10.0, [=](std::ostream& m, std::string& s) {
                 auto r = check_orthogonal_expectation(x, so.ortho_trials, seed, so.ortho_h);
                 m << report_to_json(r, false) << '\n';
                 s = report_line(r);
                 return report_ok(r) && r.statistic <= 0.05;
               }});
  c.push_back({3, "consistency rate", 30.0, [=](std::ostream& m, std::string& s) {
                 auto r = check_consistency_slope(x, so.consistency_h, so.consistency_trials, seed);
                 m << report_to_json(r, false) << '\n';
                 s = report_line(r);
                 return report_ok(r) && r.statistic >= -0.6 && r.statistic <= -0.4;
               }});
  c.push_back({4, "permutation invariance", 60.0, [=](std::ostream& m, std::string& s) {
                 auto p = check_perm_invariance(x, 20000, seed);
                 auto h = check_hidden_invariance(so.encoder, 20000, seed);
                 m << report_to_json(p, false) << '\n' << report_to_json(h, false) << '\n';
                 s = report_line(p) + "; " + report_line(h);
                 return report_ok(p) && report_ok(h) && so.encoder.num_layers == 2;
               }});
  c.push_back({5, "jensen bound", 20.0, [=](std::ostream& m, std::string& s) {
                 auto r = check_jensen(so.encoder, HeadKind::Linear, 100, 512, seed);
                 m << report_to_json(r, false) << '\n';
                 s = report_line(r);
                 return report_ok(r) && r.statistic >= -1e-12;
               }});
  c.push_back({6, "factored/dense", 1e9, [=](std::ostream& m, std::string& s) {
                 auto r = check_factored_dense(seed, 20);
                 m << report_to_json(r, false) << '\n';
                 BenchOptions bo;
                 bo.n = 20000;
                 bo.h = 512;
                 bo.c = 64;
                 bo.seed = seed;
                 auto b = run_bench(bo);
                 m << bench_result_json(b, false) << '\n';
                 const double mb = static_cast<double>(b.peak_transient_bytes) / 1e6;
                 s = report_line(r) + "; bench peak=" + fmt("%.1f MB", mb) +
                     " dense=" + fmt("%.2f GB", static_cast<double>(b.dense_bytes) / 1e9);
                 return report_ok(r) && r.statistic < 1e-10 && mb < 200.0 &&
                        b.dense_bytes == 3'200'000'000ULL;
               }});
  c.push_back({7, "gradient check", 1e9, [=](std::ostream& m, std::string& s) {
                 auto r = check_gradients(so.encoder, 50, seed);
                 m << report_to_json(r, false) << '\n';
                 s = report_line(r);
                 return report_ok(r) && r.statistic < 1e-5;
               }});
  c.push_back({8, "synthetic transfer", 300.0, [=](std::ostream& m, std::string& s) {
                 auto o = TransferExperimentOptions::defaults();
                 o.master_seed = seed;
                 auto r = run_transfer_experiment(o);
                 for (const auto& rec : r.metrics) m << metric_record_json(rec) << '\n';
                 bool ok = r.runs.size() == 5 && r.min_source_train >= 0.9;
                 s = "source test=" + fmt("%.4f", r.mean_source_test) + " targets=";
                 for (std::size_t i = 0; i < r.mean_target_test.size(); ++i) {
                   const double t = r.mean_target_test[i];
                   s += fmt(i ? ",%.4f" : "%.4f", t);
                   ok = ok && std::abs(t - r.mean_source_test) <= 0.05;
                 }
                 s += " min source train=" + fmt("%.3f", r.min_source_train);
                 m << "{\"source_test\":" << fmt("%.17g", r.mean_source_test)
                   << ",\"min_source_train\":" << fmt("%.17g", r.min_source_train) << "}\n";
                 return ok && r.mean_target_test.size() == 2;
               }});
  return c;
}

std::vector<Outcome> run_pass(std::uint64_t seed, const fs::path& file) {
  std::ofstream metrics(file, std::ios::binary);
  std::vector<Outcome> out;
  for (auto& cr : criteria(seed)) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o.passed = cr.body(metrics, o.summary);
    } catch (const std::exception& e) {
      o.summary = std::string("error: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.seconds >= cr.budget_seconds) {
      o.passed = false;
      o.summary += " over budget";
    }
    out.push_back(o);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

int main(int argc, char** argv) {
  std::uint64_t seed = 0;
  std::string dir = (fs::temp_directory_path() / "allin-acceptance").string();
  CLI::App app{"acceptance criteria"};
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out-dir", dir, "where the metric files go");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(dir);

  const auto names = criteria(seed);
  const fs::path a = fs::path(dir) / "run1.jsonl";
  const fs::path b = fs::path(dir) / "run2.jsonl";
  const auto first = run_pass(seed, a);
  run_pass(seed, b);

  bool all = true;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const auto& o = first[i];
    const auto& cr = names[i];
    std::string budget = cr.budget_seconds < 1e8 ? fmt(" / %.0f s", cr.budget_seconds) : "";
    std::printf("%s %d %-24s %s (%.2f s%s)\n", o.passed ? "PASS" : "FAIL", cr.id,
                cr.name.c_str(), o.summary.c_str(), o.seconds, budget.c_str());
    all = all && o.passed;
  }
  const std::string ta = slurp(a), tb = slurp(b);
  const bool same = !ta.empty() && ta == tb;
  std::printf("%s 9 %-24s %zu bytes, %s\n", same ? "PASS" : "FAIL", "determinism", ta.size(),
              same ? "identical" : "files differ");
  all = all && same;
  std::fflush(stdout);
  return all ? 0 : 1;
}
