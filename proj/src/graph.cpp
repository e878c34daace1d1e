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

#include "allin/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace allin {

using nlohmann::json;

const char* to_string(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::NodeClassification: return "node-classification";
    case TaskKind::GraphClassification: return "graph-classification";
    case TaskKind::GraphRegression: return "graph-regression";
    case TaskKind::GraphMultilabel: return "graph-multilabel";
  }
  return "?";
}

const char* to_string(MetricKind metric) noexcept {
  switch (metric) {
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::Mae: return "mae";
    case MetricKind::Rmse: return "rmse";
    case MetricKind::RocAuc: return "roc-auc";
  }
  return "?";
}

TaskKind parse_task(const std::string& s) {
  for (auto t : {TaskKind::NodeClassification, TaskKind::GraphClassification,
                 TaskKind::GraphRegression, TaskKind::GraphMultilabel}) {
    if (s == to_string(t)) return t;
  }
  fail(ErrorKind::Schema, "task: unknown task kind '" + s + "'");
}

MetricKind parse_metric(const std::string& s) {
  for (auto m : {MetricKind::Accuracy, MetricKind::Mae, MetricKind::Rmse,
                 MetricKind::RocAuc}) {
    if (s == to_string(m)) return m;
  }
  fail(ErrorKind::Schema, "metric: unknown metric '" + s + "'");
}

std::size_t Dataset::feature_dim() const {
  if (graphs.empty()) fail(ErrorKind::Schema, "dataset has no graphs");
  return graphs.front().feature_dim();
}

std::optional<std::size_t> Dataset::edge_feature_dim() const {
  for (const auto& g : graphs)
    if (g.edge_features) return g.edge_features->cols();
  return std::nullopt;
}

namespace {

std::string at(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

void check_finite(const Matrix& m, const std::string& field,
                  std::vector<Violation>& out) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        out.push_back({at(at(field, i), j), "non-finite value"});
}

}  // namespace

std::vector<Violation> validate(const Graph& g) {
  std::vector<Violation> out;
  const std::size_t n = g.num_nodes;
  if (n == 0) out.push_back({"num_nodes", "graph has no nodes"});

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [s, t] = g.edges[e];
    if (s >= n || t >= n) {
      out.push_back({at("edges", e), "endpoint out of range [0, " +
                                         std::to_string(n) + ")"});
      continue;
    }
    if (s == t) {
      out.push_back({at("edges", e), "self-loop"});
      continue;
    }
    auto key = g.directed ? std::pair{s, t} : std::pair{std::min(s, t), std::max(s, t)};
    if (!seen.insert(key).second)
      out.push_back({at("edges", e), "duplicate edge"});
  }

  if (g.node_features.rows() != n) {
    out.push_back({"node_features", "row count " +
                                        std::to_string(g.node_features.rows()) +
                                        " != num_nodes " + std::to_string(n)});
  }
  if (g.node_features.cols() == 0)
    out.push_back({"node_features", "feature dimension is zero"});
  check_finite(g.node_features, "node_features", out);

  if (g.edge_features) {
    if (g.edge_features->rows() != g.edges.size()) {
      out.push_back({"edge_features", "row count " +
                                          std::to_string(g.edge_features->rows()) +
                                          " != number of edges " +
                                          std::to_string(g.edges.size())});
    }
    if (g.edge_features->cols() == 0 && !g.edges.empty())
      out.push_back({"edge_features", "feature dimension is zero"});
    check_finite(*g.edge_features, "edge_features", out);
  }

  if (g.node_labels && g.node_labels->size() != n)
    out.push_back({"node_labels", "length != num_nodes"});

  if (g.masks) {
    const auto& m = *g.masks;
    const std::pair<const char*, const std::vector<bool>*> parts[] = {
        {"masks.train", &m.train}, {"masks.val", &m.val}, {"masks.test", &m.test}};
    bool lengths_ok = true;
    for (const auto& [name, mask] : parts) {
      if (mask->size() != n) {
        out.push_back({name, "length != num_nodes"});
        lengths_ok = false;
      }
    }
    if (lengths_ok) {
      for (std::size_t i = 0; i < n; ++i) {
        const int members = int(m.train[i]) + int(m.val[i]) + int(m.test[i]);
        if (members > 1) out.push_back({at("masks", i), "node in more than one split"});
      }
    }
  }
  return out;
}

std::vector<Violation> validate(const Dataset& ds) {
  std::vector<Violation> out;
  if (ds.graphs.empty()) {
    out.push_back({"graphs", "dataset has no graphs"});
    return out;
  }
  if (ds.num_classes_or_targets == 0)
    out.push_back({"num_classes_or_targets", "must be positive"});

  const std::size_t d = ds.graphs.front().feature_dim();
  const auto de = ds.edge_feature_dim();
  const auto k = ds.num_classes_or_targets;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    const std::string prefix = at("graphs", gi) + ".";
    for (auto& v : validate(g)) out.push_back({prefix + v.field, v.message});
    if (g.feature_dim() != d)
      out.push_back({prefix + "node_features", "feature dimension differs across graphs"});
    if (g.edge_features && de && g.edge_features->cols() != *de && !g.edges.empty())
      out.push_back({prefix + "edge_features", "edge feature dimension differs across graphs"});

    switch (ds.task) {
      case TaskKind::NodeClassification:
        if (!g.node_labels) out.push_back({prefix + "node_labels", "required"});
        else
          for (std::size_t i = 0; i < g.node_labels->size(); ++i) {
            const auto y = (*g.node_labels)[i];
            if (y < 0 || static_cast<std::size_t>(y) >= k)
              out.push_back({prefix + at("node_labels", i), "class out of range"});
          }
        if (!g.masks) out.push_back({prefix + "masks", "required"});
        break;
      case TaskKind::GraphClassification:
        if (!g.graph_label || !std::holds_alternative<std::int64_t>(*g.graph_label)) {
          out.push_back({prefix + "graph_label", "integer class required"});
        } else {
          const auto y = std::get<std::int64_t>(*g.graph_label);
          if (y < 0 || static_cast<std::size_t>(y) >= k)
            out.push_back({prefix + "graph_label", "class out of range"});
        }
        break;
      case TaskKind::GraphRegression:
      case TaskKind::GraphMultilabel:
        if (!g.graph_label || !std::holds_alternative<std::vector<double>>(*g.graph_label)) {
          out.push_back({prefix + "graph_label", "float vector required"});
        } else if (std::get<std::vector<double>>(*g.graph_label).size() != k) {
          out.push_back({prefix + "graph_label", "arity != num_classes_or_targets"});
        }
        break;
    }
  }
  if (ds.task == TaskKind::NodeClassification && ds.graphs.size() != 1)
    out.push_back({"graphs", "node-classification datasets hold exactly one graph"});

  if (ds.splits) {
    std::set<std::size_t> used;
    const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
        {"splits.train", &ds.splits->train},
        {"splits.val", &ds.splits->val},
        {"splits.test", &ds.splits->test}};
    for (const auto& [name, idx] : parts) {
      for (std::size_t i = 0; i < idx->size(); ++i) {
        const auto gi = (*idx)[i];
        if (gi >= ds.graphs.size())
          out.push_back({at(name, i), "graph index out of range"});
        else if (!used.insert(gi).second)
          out.push_back({at(name, i), "graph in more than one split"});
      }
    }
  }
  return out;
}

namespace {

[[noreturn]] void schema(const std::string& field, const std::string& msg) {
  fail(ErrorKind::Schema, field + ": " + msg);
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      schema(where + key, "unknown key");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema(where + key, "missing");
  return *it;
}

Matrix parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array()) schema(field, "expected array of rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& r = j[i];
    if (!r.is_array()) schema(at(field, i), "expected array");
    std::vector<double> row;
    row.reserve(r.size());
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (!r[c].is_number()) schema(at(at(field, i), c), "expected number");
      row.push_back(r[c].get<double>());
    }
    if (!rows.empty() && row.size() != rows.front().size())
      schema(at(field, i), "ragged row");
    rows.push_back(std::move(row));
  }
  return Matrix::from_rows(rows);
}

std::vector<bool> parse_mask(const json& j, const std::string& field) {
  if (!j.is_array()) schema(field, "expected array of booleans");
  std::vector<bool> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_boolean()) schema(at(field, i), "expected boolean");
    out.push_back(j[i].get<bool>());
  }
  return out;
}

std::size_t parse_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    schema(field, "expected non-negative integer");
  return j.get<std::size_t>();
}

Graph parse_graph(const json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected object");
  reject_unknown_keys(j, {"num_nodes", "directed", "edges", "node_features",
                          "edge_features", "node_labels", "graph_label", "masks"},
                      where + ".");
  Graph g;
  g.num_nodes = parse_count(require(j, "num_nodes", where + "."), where + ".num_nodes");
  const auto& directed = require(j, "directed", where + ".");
  if (!directed.is_boolean()) schema(where + ".directed", "expected boolean");
  g.directed = directed.get<bool>();

  const auto& edges = require(j, "edges", where + ".");
  if (!edges.is_array()) schema(where + ".edges", "expected array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& pair = edges[e];
    const std::string field = where + "." + at("edges", e);
    if (!pair.is_array() || pair.size() != 2) schema(field, "expected [source, target]");
    const auto s = parse_count(pair[0], field);
    const auto t = parse_count(pair[1], field);
    if (s >= g.num_nodes || t >= g.num_nodes) {
      fail(ErrorKind::IndexOutOfRange,
           field + ": endpoint out of range for " + std::to_string(g.num_nodes) +
               " nodes");
    }
    g.edges.push_back({s, t});
  }

  g.node_features = parse_matrix(require(j, "node_features", where + "."),
                                 where + ".node_features");
  if (auto it = j.find("edge_features"); it != j.end())
    g.edge_features = parse_matrix(*it, where + ".edge_features");

  if (auto it = j.find("node_labels"); it != j.end()) {
    if (!it->is_array()) schema(where + ".node_labels", "expected array");
    std::vector<std::int64_t> labels;
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_number_integer())
        schema(where + "." + at("node_labels", i), "expected integer");
      labels.push_back((*it)[i].get<std::int64_t>());
    }
    g.node_labels = std::move(labels);
  }

  if (auto it = j.find("graph_label"); it != j.end()) {
    if (it->is_number_integer()) {
      g.graph_label = it->get<std::int64_t>();
    } else if (it->is_array()) {
      std::vector<double> values;
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& v = (*it)[i];
        if (v.is_null()) values.push_back(std::nan(""));
        else if (v.is_number()) values.push_back(v.get<double>());
        else schema(where + "." + at("graph_label", i), "expected number or null");
      }
      g.graph_label = std::move(values);
    } else {
      schema(where + ".graph_label", "expected integer or array");
    }
  }

  if (auto it = j.find("masks"); it != j.end()) {
    if (!it->is_object()) schema(where + ".masks", "expected object");
    reject_unknown_keys(*it, {"train", "val", "test"}, where + ".masks.");
    SplitMasks m;
    m.train = parse_mask(require(*it, "train", where + ".masks."), where + ".masks.train");
    m.val = parse_mask(require(*it, "val", where + ".masks."), where + ".masks.val");
    m.test = parse_mask(require(*it, "test", where + ".masks."), where + ".masks.test");
    g.masks = std::move(m);
  }
  return g;
}

std::vector<std::size_t> parse_index_list(const json& j, const std::string& field) {
  if (!j.is_array()) schema(field, "expected array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_count(j[i], at(field, i)));
  return out;
}

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

}  // namespace

Dataset parse_dataset(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("dataset JSON: ") + e.what());
  }
  if (!j.is_object()) schema("<root>", "expected object");
  reject_unknown_keys(j, {"format_version", "name", "task", "metric",
                          "num_classes_or_targets", "graphs", "splits"},
                      "");
  const auto& version = require(j, "format_version", "");
  if (!version.is_number_integer() || version.get<int>() != 1)
    fail(ErrorKind::Version, "format_version: expected 1");

  Dataset ds;
  const auto& name = require(j, "name", "");
  if (!name.is_string()) schema("name", "expected string");
  ds.name = name.get<std::string>();
  const auto& task = require(j, "task", "");
  if (!task.is_string()) schema("task", "expected string");
  ds.task = parse_task(task.get<std::string>());
  const auto& metric = require(j, "metric", "");
  if (!metric.is_string()) schema("metric", "expected string");
  ds.metric = parse_metric(metric.get<std::string>());
  ds.num_classes_or_targets =
      parse_count(require(j, "num_classes_or_targets", ""), "num_classes_or_targets");

  const auto& graphs = require(j, "graphs", "");
  if (!graphs.is_array()) schema("graphs", "expected array");
  for (std::size_t i = 0; i < graphs.size(); ++i)
    ds.graphs.push_back(parse_graph(graphs[i], at("graphs", i)));

  if (auto it = j.find("splits"); it != j.end()) {
    if (!it->is_object()) schema("splits", "expected object");
    reject_unknown_keys(*it, {"train", "val", "test"}, "splits.");
    GraphSplits s;
    s.train = parse_index_list(require(*it, "train", "splits."), "splits.train");
    s.val = parse_index_list(require(*it, "val", "splits."), "splits.val");
    s.test = parse_index_list(require(*it, "test", "splits."), "splits.test");
    ds.splits = std::move(s);
  }

  const auto violations = validate(ds);
  if (!violations.empty()) {
    const auto& v = violations.front();
    const auto kind = v.message.find("out of range") != std::string::npos
                          ? ErrorKind::IndexOutOfRange
                          : ErrorKind::Schema;
    fail(kind, v.field + ": " + v.message);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string dataset_to_json(const Dataset& ds) {
  json j = json::object();
  j["format_version"] = 1;
  j["name"] = ds.name;
  j["task"] = to_string(ds.task);
  j["metric"] = to_string(ds.metric);
  j["num_classes_or_targets"] = ds.num_classes_or_targets;
  json graphs = json::array();
  for (const auto& g : ds.graphs) {
    json jg;
    jg["num_nodes"] = g.num_nodes;
    jg["directed"] = g.directed;
    json edges = json::array();
    for (const auto& e : g.edges) edges.push_back({e.source, e.target});
    jg["edges"] = std::move(edges);
    jg["node_features"] = matrix_rows(g.node_features);
    if (g.edge_features) jg["edge_features"] = matrix_rows(*g.edge_features);
    if (g.node_labels) jg["node_labels"] = *g.node_labels;
    if (g.graph_label) {
      if (const auto* c = std::get_if<std::int64_t>(&*g.graph_label)) {
        jg["graph_label"] = *c;
      } else {
        json values = json::array();
        for (double v : std::get<std::vector<double>>(*g.graph_label)) {
          if (std::isnan(v)) values.push_back(nullptr);
          else values.push_back(v);
        }
        jg["graph_label"] = std::move(values);
      }
    }
    if (g.masks) {
      jg["masks"] = {{"train", g.masks->train},
                     {"val", g.masks->val},
                     {"test", g.masks->test}};
    }
    graphs.push_back(std::move(jg));
  }
  j["graphs"] = std::move(graphs);
  if (ds.splits) {
    j["splits"] = {{"train", ds.splits->train},
                   {"val", ds.splits->val},
                   {"test", ds.splits->test}};
  }
  return j.dump();
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << dataset_to_json(ds) << '\n';
}

namespace {

std::vector<double> sym_weights(const Graph& g) {
  std::vector<std::size_t> out_deg(g.num_nodes, 0), in_deg(g.num_nodes, 0);
  for (const auto& e : g.edges) {
    ++out_deg[e.source];
    ++in_deg[e.target];
    if (!g.directed) {
      ++out_deg[e.target];
      ++in_deg[e.source];
    }
  }
  std::vector<double> w(g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    w[i] = 1.0 / std::sqrt(static_cast<double>(out_deg[e.source]) *
                           static_cast<double>(in_deg[e.target]));
  }
  return w;
}

void require_rows(const Graph& g, const Matrix& m, const char* op) {
  if (m.rows() != g.num_nodes) {
    fail(ErrorKind::Dimension, std::string(op) + ": matrix has " +
                                   std::to_string(m.rows()) + " rows, graph has " +
                                   std::to_string(g.num_nodes) + " nodes");
  }
}

void accumulate_row(std::span<double> dst, std::span<const double> src, double w) {
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
}

Matrix propagate(const Graph& g, const Matrix& m, AdjacencyNorm norm, bool transpose) {
  Matrix out(m.rows(), m.cols());
  std::vector<double> weights;
  if (norm == AdjacencyNorm::Sym) weights = sym_weights(g);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto [from, to] = transpose ? std::pair{e.target, e.source}
                                      : std::pair{e.source, e.target};
    accumulate_row(out.row(to), m.row(from), w);
    if (!g.directed) accumulate_row(out.row(from), m.row(to), w);
  }
  return out;
}

}  // namespace

Matrix adjacency_apply(const Graph& g, const Matrix& m, AdjacencyNorm norm) {
  require_rows(g, m, "adjacency_apply");
  return propagate(g, m, norm, false);
}

Matrix adjacency_apply_transpose(const Graph& g, const Matrix& m, AdjacencyNorm norm) {
  require_rows(g, m, "adjacency_apply_transpose");
  return propagate(g, m, norm, true);
}

Matrix dense_adjacency(const Graph& g, AdjacencyNorm norm) {
  return adjacency_apply(g, Matrix::identity(g.num_nodes), norm);
}

std::vector<std::size_t> in_degrees(const Graph& g) {
  std::vector<std::size_t> deg(g.num_nodes, 0);
  for (const auto& e : g.edges) {
    ++deg[e.target];
    if (!g.directed) ++deg[e.source];
  }
  return deg;
}

Graph relabel_nodes(const Graph& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.num_nodes)
    fail(ErrorKind::Dimension, "relabel_nodes: permutation length != num_nodes");
  Graph out = g;
  for (auto& e : out.edges) {
    e.source = perm[e.source];
    e.target = perm[e.target];
  }
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    std::copy(g.node_features.row(i).begin(), g.node_features.row(i).end(),
              out.node_features.row(perm[i]).begin());
  }
  if (g.node_labels)
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      (*out.node_labels)[perm[i]] = (*g.node_labels)[i];
  if (g.masks) {
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      out.masks->train[perm[i]] = g.masks->train[i];
      out.masks->val[perm[i]] = g.masks->val[i];
      out.masks->test[perm[i]] = g.masks->test[i];
    }
  }
  return out;
}

std::vector<std::size_t> graph_split(const Dataset& ds, const std::string& split,
                                     std::uint64_t seed) {
  if (split != "train" && split != "val" && split != "test")
    fail(ErrorKind::Config, "unknown split '" + split + "'");
  if (ds.splits) {
    if (split == "train") return ds.splits->train;
    if (split == "val") return ds.splits->val;
    return ds.splits->test;
  }
  const std::size_t total = ds.graphs.size();
  SeedStream stream(seed, "split/" + ds.name);
  auto order = random_permutation(total, stream);
  const std::size_t n_train = (total * 8) / 10;
  const std::size_t n_val = (total - n_train) / 2;
  std::vector<std::size_t> out;
  std::size_t lo = 0, hi = n_train;
  if (split == "val") lo = n_train, hi = n_train + n_val;
  if (split == "test") lo = n_train + n_val, hi = total;
  out.assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
             order.begin() + static_cast<std::ptrdiff_t>(hi));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace allin
