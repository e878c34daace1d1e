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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "allin/encoder.hpp"
#include "allin/graph.hpp"
#include "allin/numerics.hpp"

namespace allin {

enum class CheckStatus { Passed, Failed, NotApplicable, VacuousPass };

const char* to_string(CheckStatus status) noexcept;

/// Outcome of the negative control run alongside a check. A sound check
/// needs its control to fail.
struct ControlOutcome {
  std::string name;
  double statistic = 0.0;
  bool failed = false;
};

struct CheckReport {
  std::string check_name;
  CheckStatus status = CheckStatus::Failed;
  /// True for Passed and VacuousPass.
  bool passed = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  std::string detail;
  std::optional<ControlOutcome> control;

  bool applicable() const noexcept { return status != CheckStatus::NotApplicable; }
};

/// JSON object for one report; wall time is left out when `with_time` is false
/// so that reports of equal seeds compare byte-for-byte.
std::string report_to_json(const CheckReport& report, bool with_time = true);
std::string reports_to_json(const std::vector<CheckReport>& reports, bool with_time = true);

/// [[1,0,1],[0,1,1],[1,1,0]]: rows all automorphic under NodeCov(X).
Matrix witness_features();

/// Fixed undirected 6-node graph with 6×5 features used by the moment tests.
Graph bundled_graph();

/// Entrywise two-moment comparison of two samples of equally-shaped random
/// matrices. An entry agrees when both the means and the variances differ by
/// at most 4 standard errors.
class MomentTable {
 public:
  explicit MomentTable(std::size_t entries = 0);
  void add(std::span<const double> sample);
  std::size_t count() const noexcept { return count_; }
  std::size_t entries() const noexcept { return shift_.size(); }
  double mean(std::size_t i) const;
  double variance(std::size_t i) const;
  double mean_se(std::size_t i) const;
  double variance_se(std::size_t i) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> shift_, s1_, s2_, s3_, s4_;
};

/// Fraction of entries on which `a` and `b` agree in both moments.
double moment_agreement(const MomentTable& a, const MomentTable& b, double z = 4.0);

inline constexpr double kAgreementThreshold = 0.95;

/// R⁽⁰⁾ and K⁽⁰⁾ of `x`, and R⁽⁰⁾, K⁽⁰⁻²⁾ of the bundled graph, under the
/// features and their column permutation. `perm` fixes P for `x`; otherwise it
/// is drawn from the seed. Requires trials ≥ 1000.
CheckReport check_perm_invariance(const Matrix& x, std::size_t trials, std::uint64_t seed,
                                  const std::optional<std::vector<std::size_t>>& perm = {});

/// Monte Carlo mean of NodeCov(x·Q·C) against Π_c·x·xᵀ·Π_c for Q = I and
/// `random_q` Haar-random Q.
CheckReport check_orthogonal_expectation(const Matrix& x, std::size_t trials, std::uint64_t seed,
                                         std::size_t h = 64, std::size_t random_q = 5);

CheckReport check_consistency_slope(const Matrix& x, const std::vector<std::size_t>& h_list,
                                    std::size_t trials, std::uint64_t seed);

CheckReport check_expressivity_witness(std::size_t trials, std::uint64_t seed);

/// Empirical-measure Jensen gap for a linear head on node outputs of the
/// bundled graph. Not applicable to MLP heads.
CheckReport check_jensen(const EncoderConfig& config, HeadKind head, std::size_t settings,
                         std::size_t draws, std::uint64_t seed);

CheckReport check_factored_dense(std::uint64_t seed, std::size_t instances = 20);

/// H⁽ᴸ⁾ moment test under feature permutation. num_layers = 0 tests H⁽⁰⁾.
CheckReport check_hidden_invariance(const EncoderConfig& config, std::size_t trials,
                                    std::uint64_t seed,
                                    const std::optional<std::vector<std::size_t>>& perm = {});

/// Reverse-mode encoder gradients against central differences, fixed C.
CheckReport check_gradients(const EncoderConfig& config, std::size_t samples,
                            std::uint64_t seed, double step = 1e-5);

struct SuiteOptions {
  std::size_t perm_trials = 20000;
  std::size_t ortho_trials = 10000;
  std::size_t ortho_h = 64;
  std::vector<std::size_t> consistency_h{16, 64, 256, 1024, 4096};
  std::size_t consistency_trials = 50;
  std::size_t witness_trials = 1000;
  std::size_t jensen_settings = 100;
  std::size_t jensen_draws = 512;
  std::size_t factored_instances = 20;
  std::size_t hidden_trials = 20000;
  std::size_t grad_samples = 50;
  /// Encoder used by the jensen, hidden and grad checks.
  EncoderConfig encoder = small_encoder();

  static EncoderConfig small_encoder();
};

/// Canonical check names in suite order.
const std::vector<std::string>& check_names();

/// Runs each named check ("all" expands to every check). Unknown names throw
/// a Config error before anything runs.
std::vector<CheckReport> run_suite(const std::vector<std::string>& names, std::uint64_t seed,
                                   const SuiteOptions& options = {});

/// True iff every applicable report passed.
bool suite_passed(const std::vector<CheckReport>& reports) noexcept;

}  // namespace allin
