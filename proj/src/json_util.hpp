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

// JSON helpers shared by the checkpoint, config and report writers.

#include <string>

#include "allin/encoder.hpp"
#include "allin/numerics.hpp"
#include "json.hpp"

namespace allin::detail {

using ojson = nlohmann::ordered_json;

/// {"shape":[r,c],"data":[...]} with row-major data.
ojson matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);

ojson encoder_config_json(const EncoderConfig& config);
/// Fields absent from `j` keep the values already in `base`.
EncoderConfig encoder_config_from(const nlohmann::json& j, EncoderConfig base = {});

nlohmann::json parse_json(const std::string& text, const std::string& what);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace allin::detail
