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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allin/graph.hpp"
#include "allin/numerics.hpp"
#include "allin/operators.hpp"
#include "allin/projection.hpp"

namespace allin {

enum class NormKind { None, Layer, Batch };
enum class HeadKind { Mlp, Linear };

const char* to_string(NormKind norm) noexcept;
const char* to_string(HeadKind head) noexcept;
NormKind parse_norm(const std::string& s);
HeadKind parse_head_kind(const std::string& s);

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr std::size_t kHeadHiddenWidth = 128;

struct EncoderConfig {
  std::size_t num_layers = 2;
  /// h⁽ℓ⁾ for ℓ = 1..L; each must be divisible by the operator count.
  std::vector<std::size_t> hidden_widths{24, 24};
  std::size_t k = 0;
  std::size_t structural_dim = 0;
  NormKind norm = NormKind::Layer;
  bool use_edge_ops = false;
  ProjectionConfig projection;
  AdjacencyNorm adjacency_norm = AdjacencyNorm::None;
  bool spectral_rescale = false;

  std::size_t input_width() const noexcept { return projection.h + structural_dim; }
  std::size_t output_width() const noexcept {
    return hidden_widths.empty() ? input_width() : hidden_widths.back();
  }
  std::size_t num_operators() const noexcept { return operator_count(k, use_edge_ops); }
  OperatorOptions operator_options() const noexcept {
    return {adjacency_norm, spectral_rescale};
  }
  /// Throws Config on an inconsistent configuration.
  void validate() const;
};

struct LayerParams {
  /// One h⁽ℓ⁻¹⁾ × (h⁽ℓ⁾/|𝒪|) weight and 1 × (h⁽ℓ⁾/|𝒪|) bias per operator slot.
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
  /// 1 × h⁽ℓ⁾ affine parameters; empty when norm is None.
  Matrix gamma;
  Matrix beta;
};

struct EncoderParams {
  std::vector<LayerParams> layers;
};

/// Visits every parameter in canonical order:
/// layer{ℓ}.op{o}.weight, layer{ℓ}.op{o}.bias for each o, then
/// layer{ℓ}.norm.gamma, layer{ℓ}.norm.beta.
void for_each_param(EncoderParams& params,
                    const std::function<void(const std::string&, Matrix&)>& fn);
void for_each_param(const EncoderParams& params,
                    const std::function<void(const std::string&, const Matrix&)>& fn);

/// Glorot-uniform weights, zero biases, unit gamma, zero beta.
EncoderParams init_encoder_params(const EncoderConfig& config, SeedStream& stream);
EncoderParams zeros_like(const EncoderParams& params);
/// FNV-1a over the raw bytes of every parameter.
std::uint64_t params_hash(const EncoderParams& params);

struct TaskHead {
  HeadKind kind = HeadKind::Mlp;
  TaskKind task = TaskKind::GraphClassification;
  MetricKind metric = MetricKind::Accuracy;
  std::size_t inputs = 0;
  std::size_t hidden = kHeadHiddenWidth;
  std::size_t outputs = 0;
  /// Linear: {fc.weight, fc.bias}. Mlp: {fc1.weight, fc1.bias, fc2.weight, fc2.bias}.
  std::vector<Matrix> params;

  static std::vector<std::string> param_names(HeadKind kind);
};

TaskHead init_head(HeadKind kind, TaskKind task, MetricKind metric, std::size_t inputs,
                   std::size_t outputs, SeedStream& stream);

/// Column t-1 holds diag(Pᵗ), P = D⁻¹A; computed with one sparse
/// propagation per walk length and n columns tracked at once.
Matrix rwse(const Graph& g, std::size_t h_s);

/// [r0 | s]; with zero structural columns this is r0.
Matrix build_h0(const Matrix& r0, const Matrix& s);

/// Intermediates of one layer needed by the backward pass.
struct LayerCache {
  Matrix input;
  Matrix pre_norm;
  Matrix normalized;  // x̂, empty for NormKind::None
  std::vector<double> inv_std;
  Matrix output;
};

/// σ(norm(⊕_O (O·h_in·W_O + b_O))).
Matrix layer_forward(const Matrix& h_in, const OperatorSet& ops, const LayerParams& params,
                     NormKind norm, LayerCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns ∂L/∂h_in.
Matrix layer_backward(const LayerCache& cache, const OperatorSet& ops,
                      const LayerParams& params, NormKind norm, const Matrix& d_out,
                      LayerParams& grads);

/// Everything the encoder backward pass needs from one forward pass.
struct EncoderTape {
  OperatorSet ops;
  std::vector<LayerCache> layers;
};

/// Runs the layer stack from given projected node (and edge) features.
Matrix encode_projected(const Graph& g, const Matrix& r0,
                        const std::optional<Matrix>& r0_edge, const EncoderConfig& config,
                        const EncoderParams& params, EncoderTape* tape = nullptr);

/// Node and edge projections of `g` under the state's current C, in the form
/// encode_projected expects (edge rows aggregated to nodes, or zeros when the
/// graph has no edge features but edge operators are configured).
std::pair<Matrix, std::optional<Matrix>> project_graph(const Graph& g,
                                                       const ProjectionState& ps,
                                                       const EncoderConfig& config);

/// H⁽ᴸ⁾ using the state's current C. The caller decides when to advance it.
Matrix encoder_forward(const Graph& g, const ProjectionState& ps,
                       const EncoderConfig& config, const EncoderParams& params,
                       EncoderTape* tape = nullptr);

void encoder_backward(const EncoderTape& tape, const EncoderConfig& config,
                      const EncoderParams& params, const Matrix& d_final,
                      EncoderParams& grads);

enum class PoolMode { Mean };

/// Column means; 1×c.
Matrix pool_graph(const Matrix& h_final, PoolMode mode = PoolMode::Mean);

struct HeadCache {
  Matrix input;
  Matrix hidden_pre;  // Mlp only
};

/// Raw scores, one row per input row.
Matrix head_forward(const Matrix& embedding, const TaskHead& head,
                    HeadCache* cache = nullptr);
/// Accumulates into `grads` (same layout as head.params); returns ∂L/∂input.
Matrix head_backward(const HeadCache& cache, const TaskHead& head, const Matrix& d_scores,
                     std::vector<Matrix>& grads);

/// Index of the largest score, lowest index on ties.
std::size_t argmax(std::span<const double> scores);

struct Checkpoint {
  int format_version = 1;
  EncoderConfig config;
  EncoderParams params;
  std::map<std::string, TaskHead> heads;
  std::uint64_t master_seed = 0;
  std::uint64_t step = 0;
};

inline constexpr int kCheckpointVersion = 1;

std::string encoder_config_to_json(const EncoderConfig& config);
/// Parses an encoder config object, starting from defaults for missing keys.
EncoderConfig encoder_config_from_json(const std::string& json_text);

std::string checkpoint_to_json(const Checkpoint& ckpt);
/// `expected`, when given, must agree with the stored config's shapes.
Checkpoint checkpoint_from_json(const std::string& json_text,
                                const EncoderConfig* expected = nullptr);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const EncoderConfig* expected = nullptr);

}  // namespace allin
