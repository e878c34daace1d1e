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

#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace allin::detail {

ojson matrix_to_json(const Matrix& m) {
  ojson j = ojson::object();
  j["shape"] = {m.rows(), m.cols()};
  j["data"] = std::vector<double>(m.data().begin(), m.data().end());
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data"))
    fail(ErrorKind::Parse, field + ": expected {shape, data}");
  const auto& shape = j["shape"];
  const auto& data = j["data"];
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() ||
      !shape[1].is_number_unsigned() || !data.is_array())
    fail(ErrorKind::Parse, field + ": malformed shape or data");
  Matrix m(shape[0].get<std::size_t>(), shape[1].get<std::size_t>());
  if (data.size() != m.size())
    fail(ErrorKind::Shape, field + ": data length does not match shape");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!data[i].is_number()) fail(ErrorKind::Parse, field + ": non-numeric entry");
    m.data()[i] = data[i].get<double>();
  }
  return m;
}

ojson encoder_config_json(const EncoderConfig& c) {
  ojson j = ojson::object();
  j["num_layers"] = c.num_layers;
  j["hidden_width"] = c.hidden_widths;
  j["k"] = c.k;
  j["structural_dim"] = c.structural_dim;
  j["norm"] = to_string(c.norm);
  j["use_edge_ops"] = c.use_edge_ops;
  j["projection"] = {{"h", c.projection.h},
                     {"mode", to_string(c.projection.mode)},
                     {"refresh_interval", c.projection.refresh_interval}};
  j["adjacency_norm"] = c.adjacency_norm == AdjacencyNorm::Sym ? "sym" : "none";
  j["spectral_rescale"] = c.spectral_rescale;
  return j;
}

namespace {

std::size_t count_field(const nlohmann::json& j, const std::string& name) {
  if (!j.is_number_unsigned())
    fail(ErrorKind::Config, name + ": expected non-negative integer");
  return j.get<std::size_t>();
}

bool bool_field(const nlohmann::json& j, const std::string& name) {
  if (!j.is_boolean()) fail(ErrorKind::Config, name + ": expected boolean");
  return j.get<bool>();
}

std::string string_field(const nlohmann::json& j, const std::string& name) {
  if (!j.is_string()) fail(ErrorKind::Config, name + ": expected string");
  return j.get<std::string>();
}

}  // namespace

EncoderConfig encoder_config_from(const nlohmann::json& j, EncoderConfig c) {
  if (!j.is_object()) fail(ErrorKind::Config, "encoder config: expected object");
  bool widths_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "num_layers") {
      c.num_layers = count_field(value, key);
    } else if (key == "hidden_width") {
      widths_given = true;
      if (value.is_array()) {
        c.hidden_widths.clear();
        for (const auto& w : value) c.hidden_widths.push_back(count_field(w, key));
      } else {
        c.hidden_widths.assign(1, count_field(value, key));
      }
    } else if (key == "k") {
      c.k = count_field(value, key);
    } else if (key == "structural_dim") {
      c.structural_dim = count_field(value, key);
    } else if (key == "norm") {
      c.norm = parse_norm(string_field(value, key));
    } else if (key == "use_edge_ops") {
      c.use_edge_ops = bool_field(value, key);
    } else if (key == "projection") {
      if (!value.is_object()) fail(ErrorKind::Config, "projection: expected object");
      for (const auto& [pk, pv] : value.items()) {
        if (pk == "h") c.projection.h = count_field(pv, "projection.h");
        else if (pk == "mode") c.projection.mode = parse_projection_mode(string_field(pv, "projection.mode"));
        else if (pk == "refresh_interval") c.projection.refresh_interval = count_field(pv, "projection.refresh_interval");
        else fail(ErrorKind::Config, "projection." + pk + ": unknown key");
      }
    } else if (key == "adjacency_norm") {
      const auto s = string_field(value, key);
      if (s == "none") c.adjacency_norm = AdjacencyNorm::None;
      else if (s == "sym") c.adjacency_norm = AdjacencyNorm::Sym;
      else fail(ErrorKind::Config, "adjacency_norm: expected none or sym");
    } else if (key == "spectral_rescale") {
      c.spectral_rescale = bool_field(value, key);
    } else {
      fail(ErrorKind::Config, "encoder." + key + ": unknown key");
    }
  }
  // A single width applies to every layer.
  if (c.hidden_widths.size() == 1 && c.num_layers > 1) {
    c.hidden_widths.assign(c.num_layers, c.hidden_widths.front());
  } else if (!widths_given && c.hidden_widths.size() != c.num_layers &&
             !c.hidden_widths.empty()) {
    c.hidden_widths.assign(c.num_layers, c.hidden_widths.front());
  }
  return c;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, what + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << contents;
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

}  // namespace allin::detail
