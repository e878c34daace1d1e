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

#include "allin/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "allin/operators.hpp"
#include "allin/projection.hpp"
#include "allin/training.hpp"
#include "json_util.hpp"

namespace allin {

const char* to_string(CheckStatus status) noexcept {
  switch (status) {
    case CheckStatus::Passed: return "passed";
    case CheckStatus::Failed: return "failed";
    case CheckStatus::NotApplicable: return "not-applicable";
    case CheckStatus::VacuousPass: return "vacuous-pass";
  }
  return "?";
}

namespace {

detail::ojson report_json(const CheckReport& r, bool with_time) {
  detail::ojson j = detail::ojson::object();
  j["check_name"] = r.check_name;
  j["passed"] = r.passed;
  j["status"] = to_string(r.status);
  j["statistic"] = r.statistic;
  j["threshold"] = r.threshold;
  j["trials"] = r.trials;
  j["seed"] = r.seed;
  if (with_time) j["wall_time"] = r.wall_time;
  j["detail"] = r.detail;
  if (r.control) {
    j["control"] = {{"name", r.control->name},
                    {"statistic", r.control->statistic},
                    {"failed", r.control->failed}};
  } else {
    j["control"] = nullptr;
  }
  return j;
}

/// Times `body`, which fills everything but name, seed, trials and timing.
CheckReport timed(const std::string& name, std::uint64_t seed, std::size_t trials,
                  const std::function<void(CheckReport&)>& body) {
  CheckReport r;
  r.check_name = name;
  r.seed = seed;
  r.trials = trials;
  const auto start = std::chrono::steady_clock::now();
  body(r);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Positive statistic passed and control (if any) failed.
void settle(CheckReport& r, bool positive_ok) {
  const bool control_ok = !r.control || r.control->failed;
  r.passed = positive_ok && control_ok;
  r.status = r.passed ? CheckStatus::Passed : CheckStatus::Failed;
  if (positive_ok && !control_ok) r.detail += (r.detail.empty() ? "" : "; ") + std::string("negative control did not fail");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string report_to_json(const CheckReport& report, bool with_time) {
  return report_json(report, with_time).dump();
}

std::string reports_to_json(const std::vector<CheckReport>& reports, bool with_time) {
  detail::ojson arr = detail::ojson::array();
  for (const auto& r : reports) arr.push_back(report_json(r, with_time));
  return arr.dump(2);
}

Matrix witness_features() { return Matrix{{1, 0, 1}, {0, 1, 1}, {1, 1, 0}}; }

Graph bundled_graph() {
  Graph g;
  g.num_nodes = 6;
  g.directed = false;
  g.edges = {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 5}, {1, 4}};
  g.node_features = Matrix{{0.9, -0.3, 1.2, 0.0, 0.4},
                           {-0.5, 1.1, 0.2, 0.7, -1.0},
                           {0.3, 0.8, -0.6, 1.5, 0.1},
                           {1.4, -0.2, 0.0, -0.8, 0.6},
                           {-1.1, 0.5, 0.9, 0.3, 1.3},
                           {0.2, -1.4, -0.7, 0.6, -0.2}};
  return g;
}

// ---------------------------------------------------------------------------
// MomentTable

MomentTable::MomentTable(std::size_t entries)
    : shift_(entries), s1_(entries), s2_(entries), s3_(entries), s4_(entries) {}

void MomentTable::add(std::span<const double> sample) {
  if (sample.size() != shift_.size())
    fail(ErrorKind::Dimension, "MomentTable: sample size differs from table size");
  if (count_ == 0) std::copy(sample.begin(), sample.end(), shift_.begin());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double d = sample[i] - shift_[i];
    const double d2 = d * d;
    s1_[i] += d;
    s2_[i] += d2;
    s3_[i] += d2 * d;
    s4_[i] += d2 * d2;
  }
  ++count_;
}

double MomentTable::mean(std::size_t i) const {
  return shift_[i] + s1_[i] / static_cast<double>(count_);
}

double MomentTable::variance(std::size_t i) const {
  const double t = static_cast<double>(count_);
  const double m1 = s1_[i] / t;
  return std::max(0.0, s2_[i] / t - m1 * m1);
}

double MomentTable::mean_se(std::size_t i) const {
  return std::sqrt(variance(i) / static_cast<double>(count_));
}

double MomentTable::variance_se(std::size_t i) const {
  const double t = static_cast<double>(count_);
  const double m1 = s1_[i] / t, m2 = s2_[i] / t, m3 = s3_[i] / t, m4 = s4_[i] / t;
  const double c4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
  const double var = variance(i);
  return std::sqrt(std::max(0.0, c4 - var * var) / t);
}

double moment_agreement(const MomentTable& a, const MomentTable& b, double z) {
  if (a.entries() != b.entries() || a.count() == 0 || b.count() == 0)
    fail(ErrorKind::Dimension, "moment_agreement: incompatible tables");
  if (a.entries() == 0) return 1.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.entries(); ++i) {
    // Round-off slack so that deterministic entries compare exactly-equal.
    const double tol_m = 1e-12 * (1.0 + std::abs(a.mean(i)) + std::abs(b.mean(i)));
    const double tol_v = 1e-12 * (1.0 + a.variance(i) + b.variance(i));
    const bool mean_ok = std::abs(a.mean(i) - b.mean(i)) <=
                         z * std::hypot(a.mean_se(i), b.mean_se(i)) + tol_m;
    const bool var_ok = std::abs(a.variance(i) - b.variance(i)) <=
                        z * std::hypot(a.variance_se(i), b.variance_se(i)) + tol_v;
    agree += mean_ok && var_ok;
  }
  return static_cast<double>(agree) / static_cast<double>(a.entries());
}

// ---------------------------------------------------------------------------
// Permutation invariance of R⁽⁰⁾ and K⁽ᵖ⁾

namespace {

using Sampler = std::function<Matrix(std::size_t d, std::size_t h, SeedStream&)>;

Matrix isotropic(std::size_t d, std::size_t h, SeedStream& s) { return gaussian_matrix(d, h, s); }

/// Broken sampler for negative controls: row i scaled by 4^(2i/(d-1) - 1).
Matrix anisotropic(std::size_t d, std::size_t h, SeedStream& s) {
  Matrix c = gaussian_matrix(d, h, s);
  for (std::size_t i = 0; i < d; ++i) {
    const double e = d > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(d - 1) - 1.0 : 0.0;
    const double scale = std::pow(4.0, e);
    for (double& v : c.row(i)) v *= scale;
  }
  return c;
}

std::vector<std::size_t> reversal(std::size_t d) {
  std::vector<std::size_t> p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = d - 1 - i;
  return p;
}

Graph with_features(const Graph& g, Matrix x) {
  Graph out = g;
  out.node_features = std::move(x);
  return out;
}

constexpr std::size_t kPermH = 8;
constexpr std::size_t kPermHops = 2;

/// Minimum over blocks of the fraction of agreeing entries.
double perm_agreement(const Matrix& x, const std::vector<std::size_t>& p_x,
                      const std::vector<std::size_t>& p_g, std::size_t trials,
                      const Sampler& sampler, const SeedStream& base) {
  const Graph g = bundled_graph();
  const Matrix xp = matmul(x, permutation_matrix(p_x));
  const Graph gp = with_features(g, matmul(g.node_features, permutation_matrix(p_g)));
  const std::size_t n = x.rows(), m = g.num_nodes;

  // Blocks: x R⁽⁰⁾, x K⁽⁰⁾, graph R⁽⁰⁾, graph K⁽⁰⁾..K⁽²⁾.
  auto make_tables = [&] {
    std::vector<MomentTable> t;
    t.emplace_back(n * kPermH);
    t.emplace_back(n * n);
    t.emplace_back(m * kPermH);
    for (std::size_t p = 0; p <= kPermHops; ++p) t.emplace_back(m * m);
    return t;
  };
  auto tables_a = make_tables(), tables_b = make_tables();

  auto sample = [&](const Matrix& feat, const Graph& graph, SeedStream& s,
                    std::vector<MomentTable>& tables) {
    const Matrix r = matmul(feat, sampler(feat.cols(), kPermH, s));
    tables[0].add(r.data());
    tables[1].add(node_cov_dense(r).data());
    const Matrix rg = matmul(graph.node_features, sampler(graph.node_features.cols(), kPermH, s));
    tables[2].add(rg.data());
    const OperatorSet ops = build_operator_set(graph, rg, kPermHops);
    for (std::size_t p = 0; p <= kPermHops; ++p) tables[3 + p].add(to_dense(ops.ops[2 + p]).data());
  };

  SeedStream sa = base.derive("a"), sb = base.derive("b");
  for (std::size_t t = 0; t < trials; ++t) {
    sample(x, g, sa, tables_a);
    sample(xp, gp, sb, tables_b);
  }
  double worst = 1.0;
  for (std::size_t i = 0; i < tables_a.size(); ++i)
    worst = std::min(worst, moment_agreement(tables_a[i], tables_b[i]));
  return worst;
}

}  // namespace

CheckReport check_perm_invariance(const Matrix& x, std::size_t trials, std::uint64_t seed,
                                  const std::optional<std::vector<std::size_t>>& perm) {
  if (trials < 1000) fail(ErrorKind::Config, "perm check needs at least 1000 trials");
  if (x.empty()) fail(ErrorKind::Dimension, "perm check: empty feature matrix");
  return timed("perm", seed, trials, [&](CheckReport& r) {
    SeedStream base(seed, "check/perm");
    SeedStream perm_stream = base.derive("perm");
    const auto p_x = perm ? *perm : random_permutation(x.cols(), perm_stream);
    const auto p_g = random_permutation(bundled_graph().node_features.cols(), perm_stream);
    if (p_x.size() != x.cols()) fail(ErrorKind::Dimension, "perm check: permutation length != d");

    r.statistic = perm_agreement(x, p_x, p_g, trials, isotropic, base.derive("positive"));
    r.threshold = kAgreementThreshold;
    const double ctrl = perm_agreement(x, reversal(x.cols()),
                                       reversal(bundled_graph().node_features.cols()), trials,
                                       anisotropic, base.derive("control"));
    r.control = ControlOutcome{"anisotropic sampler, reversed features", ctrl,
                               ctrl < kAgreementThreshold};
    r.detail = "min agreement over R0, K0 (x) and R0, K0..K2 (6-node graph)";
    settle(r, r.statistic >= r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Expectation under orthogonal transforms

namespace {

/// (1/h)·r·rᵀ: covariance without centering, for negative controls.
Matrix uncentered_cov(const Matrix& r) {
  Matrix k = matmul_nt(r, r);
  k *= 1.0 / static_cast<double>(r.cols());
  return k;
}

}  // namespace

CheckReport check_orthogonal_expectation(const Matrix& x, std::size_t trials,
                                         std::uint64_t seed, std::size_t h,
                                         std::size_t random_q) {
  if (trials == 0 || h == 0) fail(ErrorKind::Config, "ortho check: trials and h must be positive");
  return timed("ortho", seed, trials, [&](CheckReport& r) {
    SeedStream base(seed, "check/ortho");
    const Matrix target = expected_cov(x);
    const double target_norm = frobenius_norm(target);
    r.threshold = 0.05;
    if (target_norm == 0.0) {
      r.status = CheckStatus::VacuousPass;
      r.passed = true;
      r.detail = "expected covariance is zero";
      return;
    }
    auto mc_mean = [&](const Matrix& feat, SeedStream& s, bool centered) {
      Matrix acc(feat.rows(), feat.rows());
      for (std::size_t t = 0; t < trials; ++t) {
        const Matrix rr = matmul(feat, gaussian_matrix(feat.cols(), h, s));
        acc += centered ? node_cov_dense(rr) : uncentered_cov(rr);
      }
      acc *= 1.0 / static_cast<double>(trials);
      return acc;
    };

    SeedStream q_stream = base.derive("q");
    double worst = 0.0;
    for (std::size_t q = 0; q <= random_q; ++q) {
      const Matrix feat = q == 0 ? x : matmul(x, random_orthogonal(x.cols(), q_stream));
      SeedStream s = base.derive("draws").derive(q);
      worst = std::max(worst, frobenius_norm(mc_mean(feat, s, true) - target) / target_norm);
    }
    r.statistic = worst;
    SeedStream cs = base.derive("control");
    const double ctrl = frobenius_norm(mc_mean(x, cs, false) - target) / target_norm;
    r.control = ControlOutcome{"no centering", ctrl, ctrl > r.threshold};
    r.detail = "max relative Frobenius distance over Q = I and " + std::to_string(random_q) +
               " random Q, h = " + std::to_string(h);
    settle(r, r.statistic <= r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Consistency rate

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

CheckReport check_consistency_slope(const Matrix& x, const std::vector<std::size_t>& h_list,
                                    std::size_t trials, std::uint64_t seed) {
  if (h_list.size() < 2) fail(ErrorKind::Config, "consistency check needs at least two h values");
  if (std::set<std::size_t>(h_list.begin(), h_list.end()).size() != h_list.size() ||
      std::find(h_list.begin(), h_list.end(), 0) != h_list.end())
    fail(ErrorKind::Config, "consistency check: h values must be distinct and positive");
  if (trials == 0) fail(ErrorKind::Config, "consistency check: trials must be positive");
  return timed("consistency", seed, trials, [&](CheckReport& r) {
    SeedStream base(seed, "check/consistency");
    const Matrix target = expected_cov(x);
    r.threshold = 0.1;  // |slope + 0.5| ≤ 0.1

    auto medians = [&](bool centered, const std::string& tag) {
      std::vector<double> out;
      for (std::size_t hi = 0; hi < h_list.size(); ++hi) {
        SeedStream s = base.derive(tag).derive(hi);
        std::vector<double> errs;
        for (std::size_t t = 0; t < trials; ++t) {
          const Matrix rr = matmul(x, gaussian_matrix(x.cols(), h_list[hi], s));
          errs.push_back(frobenius_norm((centered ? node_cov_dense(rr) : uncentered_cov(rr)) - target));
        }
        out.push_back(median(std::move(errs)));
      }
      return out;
    };

    const auto med = medians(true, "positive");
    if (std::all_of(med.begin(), med.end(), [](double e) { return e == 0.0; })) {
      r.status = CheckStatus::VacuousPass;
      r.passed = true;
      r.statistic = 0.0;
      r.detail = "all errors exactly zero";
      return;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < h_list.size(); ++i) {
      lx.push_back(std::log(static_cast<double>(h_list[i])));
      ly.push_back(std::log(med[i]));
    }
    r.statistic = ls_slope(lx, ly);

    const auto cmed = medians(false, "control");
    std::vector<double> cy;
    for (double e : cmed) cy.push_back(std::log(std::max(e, std::numeric_limits<double>::min())));
    const double cslope = ls_slope(lx, cy);
    r.control = ControlOutcome{"no centering", cslope, std::abs(cslope + 0.5) > r.threshold};
    r.detail = "log-log slope of median Frobenius error; pass iff slope in [-0.6, -0.4]";
    settle(r, std::abs(r.statistic + 0.5) <= r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Expressivity witness

CheckReport check_expressivity_witness(std::size_t trials, std::uint64_t seed) {
  if (trials == 0) fail(ErrorKind::Config, "witness check: trials must be positive");
  return timed("witness", seed, trials, [&](CheckReport& r) {
    const Matrix x = witness_features();
    const Matrix k_det = node_cov_dense(x);
    double det_err = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) det_err = std::max(det_err, std::abs(k_det(i, j) + 1.0 / 9.0));
    const bool det_ok = det_err <= 1e-12;

    // u = 0, v = 1, w = 2: the draw distinguishes u from v through w.
    auto distinguishes = [](const Matrix& k) { return std::abs(k(0, 2) - k(1, 2)) > 1e-9; };
    SeedStream s(seed, "check/witness");
    std::size_t count = 0;
    for (std::size_t t = 0; t < trials; ++t)
      count += distinguishes(node_cov_dense(matmul(x, gaussian_matrix(3, 8, s))));

    const double need = static_cast<double>(std::max<std::size_t>(trials - 1, 1));
    std::size_t ctrl = 0;
    for (std::size_t t = 0; t < trials; ++t)
      ctrl += distinguishes(node_cov_dense(matmul(x, Matrix::identity(3))));

    r.statistic = static_cast<double>(count);
    r.threshold = need;
    r.control = ControlOutcome{"C = I", static_cast<double>(ctrl),
                               static_cast<double>(ctrl) < need};
    r.detail = "NodeCov(X) off-diagonal max error " + fmt(det_err) + "; distinguishing draws " +
               std::to_string(count) + "/" + std::to_string(trials) + " at h = 8";
    settle(r, det_ok && r.statistic >= need);
  });
}

// ---------------------------------------------------------------------------
// Jensen gap with a linear head

CheckReport check_jensen(const EncoderConfig& config, HeadKind head, std::size_t settings,
                         std::size_t draws, std::uint64_t seed) {
  if (settings == 0 || draws == 0) fail(ErrorKind::Config, "jensen check: counts must be positive");
  config.validate();
  return timed("jensen", seed, settings * draws, [&](CheckReport& r) {
    r.threshold = -1e-12;
    if (head != HeadKind::Linear) {
      r.status = CheckStatus::NotApplicable;
      r.passed = false;
      r.detail = "convexity hypothesis needs a linear head";
      return;
    }
    const Graph g = bundled_graph();
    const std::size_t n = g.num_nodes, classes = 3;
    SeedStream base(seed, "check/jensen");
    double worst = std::numeric_limits<double>::infinity();
    double worst_ctrl = std::numeric_limits<double>::infinity();

    for (std::size_t s = 0; s < settings; ++s) {
      SeedStream ss = base.derive(s);
      const EncoderParams params = init_encoder_params(config, ss);
      const TaskHead lin = init_head(HeadKind::Linear, TaskKind::NodeClassification,
                                     MetricKind::Accuracy, config.output_width(), classes, ss);
      Targets ce_t, mse_t;
      for (std::size_t v = 0; v < n; ++v) ce_t.classes.push_back(static_cast<std::int64_t>(ss.next_below(classes)));
      mse_t.values = gaussian_matrix(n, classes, ss);

      Matrix h_mean(n, config.output_width());
      double mean_ce = 0.0, mean_mse = 0.0;
      for (std::size_t t = 0; t < draws; ++t) {
        const Matrix c = gaussian_matrix(g.node_features.cols(), config.projection.h, ss);
        const Matrix h = encode_projected(g, matmul(g.node_features, c), std::nullopt, config, params);
        const Matrix scores = head_forward(h, lin);
        mean_ce += loss(scores, ce_t, {LossKind::CrossEntropy});
        mean_mse += loss(scores, mse_t, {LossKind::Mse});
        h_mean += h;
      }
      const double inv = 1.0 / static_cast<double>(draws);
      h_mean *= inv;
      mean_ce *= inv;
      mean_mse *= inv;
      const Matrix at_mean = head_forward(h_mean, lin);
      const double mse_at_mean = loss(at_mean, mse_t, {LossKind::Mse});
      worst = std::min({worst, mean_ce - loss(at_mean, ce_t, {LossKind::CrossEntropy}),
                        mean_mse - mse_at_mean});
      // Negated MSE is concave, so its gap has the opposite sign.
      worst_ctrl = std::min(worst_ctrl, -mean_mse + mse_at_mean);
    }
    r.statistic = worst;
    r.detail = "min over settings of mean loss minus loss at mean representation (MSE, CE)";
    // One draw makes the gap identically zero for any loss, so no control can fail.
    if (draws > 1)
      r.control = ControlOutcome{"concave loss (negated MSE)", worst_ctrl, worst_ctrl < r.threshold};
    else
      r.detail += "; single draw, control skipped";
    settle(r, r.statistic >= r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Factored vs dense application

CheckReport check_factored_dense(std::uint64_t seed, std::size_t instances) {
  if (instances == 0) fail(ErrorKind::Config, "factored check: instances must be positive");
  return timed("factored", seed, instances, [&](CheckReport& r) {
    SeedStream base(seed, "check/factored");
    double worst = 0.0, worst_ctrl = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
      SeedStream s = base.derive(i);
      // The first instance is the largest admitted size.
      const std::size_t n = i == 0 ? 200 : 2 + s.next_below(199);
      const std::size_t h = i == 0 ? 512 : 1 + s.next_below(512);
      const std::size_t c = i == 0 ? 64 : 1 + s.next_below(64);
      const Matrix rr = gaussian_matrix(n, h, s);
      const Matrix hm = gaussian_matrix(n, c, s);
      const Matrix dense = matmul(node_cov_dense(rr), hm);
      worst = std::max(worst, max_abs_diff(apply_operator(make_factored(rr), hm), dense));
      Matrix uncentered = matmul(rr, matmul_tn(rr, hm));
      uncentered *= 1.0 / static_cast<double>(h);
      worst_ctrl = std::max(worst_ctrl, max_abs_diff(uncentered, dense));
    }
    r.statistic = worst;
    r.threshold = 1e-10;
    r.control = ControlOutcome{"uncentered factor", worst_ctrl, worst_ctrl >= r.threshold};
    r.detail = "max abs difference of K·H, dense vs factored";
    settle(r, r.statistic < r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Hidden-representation invariance

namespace {

Matrix hidden_output(const Graph& g, const Matrix& c, const EncoderConfig& config,
                     const EncoderParams& params) {
  const Matrix r0 = matmul(g.node_features, c);
  if (config.num_layers == 0) return build_h0(r0, rwse(g, config.structural_dim));
  return encode_projected(g, r0, std::nullopt, config, params);
}

/// Fixed projection whose entries depend on the feature index.
Matrix index_projection(std::size_t d, std::size_t h) {
  Matrix c(d, h);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < h; ++j)
      c(i, j) = std::cos(static_cast<double>((i + 1) * (j + 2))) * static_cast<double>(i + 1);
  return c;
}

}  // namespace

CheckReport check_hidden_invariance(const EncoderConfig& config, std::size_t trials,
                                    std::uint64_t seed,
                                    const std::optional<std::vector<std::size_t>>& perm) {
  if (trials < 2) fail(ErrorKind::Config, "hidden check needs at least 2 trials");
  if (config.num_layers > 0) config.validate();
  if (config.use_edge_ops) fail(ErrorKind::Config, "hidden check runs without edge operators");
  return timed("hidden", seed, trials, [&](CheckReport& r) {
    SeedStream base(seed, "check/hidden");
    const Graph g = bundled_graph();
    const std::size_t d = g.node_features.cols();
    SeedStream perm_stream = base.derive("perm");
    const auto p = perm ? *perm : random_permutation(d, perm_stream);
    if (p.size() != d) fail(ErrorKind::Dimension, "hidden check: permutation length != d");
    const Graph gp = with_features(g, matmul(g.node_features, permutation_matrix(p)));

    EncoderParams params;
    if (config.num_layers > 0) {
      SeedStream ps = base.derive("params");
      params = init_encoder_params(config, ps);
    }
    const std::size_t width = config.num_layers == 0 ? config.input_width() : config.output_width();
    const std::size_t h = config.projection.h;

    MomentTable ta(g.num_nodes * width), tb(g.num_nodes * width);
    SeedStream sa = base.derive("a"), sb = base.derive("b");
    for (std::size_t t = 0; t < trials; ++t) {
      ta.add(hidden_output(g, gaussian_matrix(d, h, sa), config, params).data());
      tb.add(hidden_output(gp, gaussian_matrix(d, h, sb), config, params).data());
    }
    r.statistic = moment_agreement(ta, tb);
    r.threshold = kAgreementThreshold;

    const Graph gr = with_features(g, matmul(g.node_features, permutation_matrix(reversal(d))));
    MomentTable ca(g.num_nodes * width), cb(g.num_nodes * width);
    const Matrix fixed = index_projection(d, h);
    for (std::size_t t = 0; t < 2; ++t) {
      ca.add(hidden_output(g, fixed, config, params).data());
      cb.add(hidden_output(gr, fixed, config, params).data());
    }
    const double ctrl = moment_agreement(ca, cb);
    r.control = ControlOutcome{"feature-indexed deterministic projection", ctrl,
                               ctrl < kAgreementThreshold};
    r.detail = "H(L) moment agreement, L = " + std::to_string(config.num_layers);
    settle(r, r.statistic >= r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

constexpr double kGradThreshold = 1e-5;

// Central differences carry round-off of a few ulps of |L| per evaluation,
// divided by the step; gradients below that over the threshold cannot be
// resolved to it, so they are compared on this absolute scale instead.
double fd_floor(double loss_value, double step) {
  return 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(loss_value)) /
         step / kGradThreshold;
}

double rel_error(double a, double f, double floor) {
  const double denom = std::max({std::abs(a), std::abs(f), floor});
  return std::abs(a - f) / denom;
}

}  // namespace

CheckReport check_gradients(const EncoderConfig& config, std::size_t samples, std::uint64_t seed,
                            double step) {
  config.validate();
  if (samples == 0) fail(ErrorKind::Config, "grad check: samples must be positive");
  if (config.use_edge_ops) fail(ErrorKind::Config, "grad check runs without edge operators");
  return timed("grad", seed, samples, [&](CheckReport& r) {
    SeedStream base(seed, "check/grad");
    Dataset ds;
    ds.name = "grad-fixture";
    ds.task = TaskKind::GraphClassification;
    ds.metric = MetricKind::Accuracy;
    ds.num_classes_or_targets = 2;
    ds.graphs.push_back(bundled_graph());
    ds.graphs[0].graph_label = std::int64_t{1};

    SeedStream ps = base.derive("params");
    EncoderParams params = init_encoder_params(config, ps);
    const TaskHead head = init_head(HeadKind::Mlp, ds.task, ds.metric, config.output_width(), 2, ps);
    SeedStream cs = base.derive("projection");
    const std::size_t d = ds.graphs[0].node_features.cols();
    const std::vector<Projected> inputs{
        {matmul(ds.graphs[0].node_features, gaussian_matrix(d, config.projection.h, cs)),
         std::nullopt}};
    const std::vector<Projected> stale{
        {matmul(ds.graphs[0].node_features, gaussian_matrix(d, config.projection.h, cs)),
         std::nullopt}};
    const Batch batch{&ds, {0}, {}};

    const auto grads = batch_gradients(batch, inputs, config, params, head, false);
    const auto stale_grads = batch_gradients(batch, stale, config, params, head, false);

    std::vector<Matrix*> p_list;
    std::vector<const Matrix*> g_list, sg_list;
    for_each_param(params, [&](const std::string&, Matrix& m) { p_list.push_back(&m); });
    for_each_param(grads.encoder, [&](const std::string&, const Matrix& m) { g_list.push_back(&m); });
    for_each_param(stale_grads.encoder, [&](const std::string&, const Matrix& m) { sg_list.push_back(&m); });
    std::size_t total = 0;
    for (auto* m : p_list) total += m->size();

    SeedStream pick = base.derive("sample");
    const double floor = fd_floor(grads.loss, step);
    double worst = 0.0, worst_ctrl = 0.0;
    std::size_t resolvable = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      std::size_t flat = pick.next_below(total), t = 0;
      while (flat >= p_list[t]->size()) flat -= p_list[t++]->size();
      double& theta = p_list[t]->data()[flat];
      const double saved = theta;
      theta = saved + step;
      const double up = batch_loss(batch, inputs, config, params, head);
      theta = saved - step;
      const double down = batch_loss(batch, inputs, config, params, head);
      theta = saved;
      const double fd = (up - down) / (2.0 * step);
      const double analytic = g_list[t]->data()[flat];
      resolvable += std::max(std::abs(analytic), std::abs(fd)) > floor;
      worst = std::max(worst, rel_error(analytic, fd, floor));
      worst_ctrl = std::max(worst_ctrl, rel_error(sg_list[t]->data()[flat], fd, floor));
    }
    r.statistic = worst;
    r.threshold = kGradThreshold;
    r.control = ControlOutcome{"gradient from a stale projection", worst_ctrl,
                               worst_ctrl >= r.threshold};
    r.detail = "max relative error over sampled encoder parameters, step " + fmt(step) +
               ", gradients below " + fmt(floor) + " compared absolutely";
    if (resolvable == 0 && r.statistic < r.threshold) {
      // Every sampled gradient is at the noise floor (e.g. all units dead).
      r.status = CheckStatus::VacuousPass;
      r.passed = true;
      r.detail += "; vacuous: no sampled gradient above the floor";
      return;
    }
    settle(r, r.statistic < r.threshold);
  });
}

// ---------------------------------------------------------------------------
// Suite

EncoderConfig SuiteOptions::small_encoder() {
  EncoderConfig c;
  c.num_layers = 2;
  c.k = 1;
  c.hidden_widths = {12, 12};
  c.structural_dim = 2;
  c.norm = NormKind::Layer;
  c.projection.h = 8;
  c.projection.mode = ProjectionMode::PerPass;
  return c;
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"witness", "ortho",    "consistency", "perm",
                                              "jensen",  "factored", "hidden",      "grad"};
  return names;
}

std::vector<CheckReport> run_suite(const std::vector<std::string>& names, std::uint64_t seed,
                                   const SuiteOptions& o) {
  std::vector<std::string> todo;
  for (const auto& n : names) {
    if (n == "all") {
      for (const auto& c : check_names())
        if (std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
    } else if (std::find(check_names().begin(), check_names().end(), n) == check_names().end()) {
      fail(ErrorKind::Config, "unknown check '" + n + "'");
    } else if (std::find(todo.begin(), todo.end(), n) == todo.end()) {
      todo.push_back(n);
    }
  }
  const Matrix x = witness_features();
  std::vector<CheckReport> out;
  for (const auto& n : todo) {
    if (n == "witness") out.push_back(check_expressivity_witness(o.witness_trials, seed));
    else if (n == "ortho") out.push_back(check_orthogonal_expectation(x, o.ortho_trials, seed, o.ortho_h));
    else if (n == "consistency") out.push_back(check_consistency_slope(x, o.consistency_h, o.consistency_trials, seed));
    else if (n == "perm") out.push_back(check_perm_invariance(x, o.perm_trials, seed));
    else if (n == "jensen") out.push_back(check_jensen(o.encoder, HeadKind::Linear, o.jensen_settings, o.jensen_draws, seed));
    else if (n == "factored") out.push_back(check_factored_dense(seed, o.factored_instances));
    else if (n == "hidden") out.push_back(check_hidden_invariance(o.encoder, o.hidden_trials, seed));
    else if (n == "grad") out.push_back(check_gradients(o.encoder, o.grad_samples, seed));
  }
  return out;
}

bool suite_passed(const std::vector<CheckReport>& reports) noexcept {
  return std::all_of(reports.begin(), reports.end(),
                     [](const CheckReport& r) { return !r.applicable() || r.passed; });
}

}  // namespace allin
