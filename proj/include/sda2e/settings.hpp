// Copyright 2026 The sda2e Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SDA2E_SETTINGS_HPP_
#define SDA2E_SETTINGS_HPP_

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sda2e/active.hpp"
#include "sda2e/data.hpp"
#include "sda2e/model.hpp"

namespace sda2e {

using Json = nlohmann::ordered_json;

// Ordered key=value pairs.
using Settings = std::vector<std::pair<std::string, std::string>>;

// Parses `key = value` lines. Blank lines and lines starting with '#' are
// skipped. Throws ConfigError with the line number on malformed input or a
// repeated key.
Settings parse_settings(std::istream& in, std::string_view source = "<stream>");
Settings load_settings(const std::string& path);
void write_settings(const Settings& settings, std::ostream& out);

// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view key, std::string_view text);
std::size_t parse_count(std::string_view key, std::string_view text);
std::uint64_t parse_u64(std::string_view key, std::string_view text);

// Keys: d k hidden alpha beta gamma delta margin rho lambda lr_g lr_d lr_a
// batch_size epochs seed attention attention_rank sharpness optimizer
Settings model_settings(const Sda2eConfig& config);
// Returns false for an unknown key; throws ConfigError on a bad value.
bool apply_model_setting(Sda2eConfig& config, std::string_view key,
                         std::string_view value);

// Keys: strategy iterations budget error_percentile sim_percentile metric
// retrain ndcg_at cold_start_fraction seed
Settings session_settings(const SessionConfig& config);
bool apply_session_setting(SessionConfig& config, std::string_view key,
                           std::string_view value);

// Keys: n d anomaly_fraction normal_clusters density noise mode
// anomaly_groups shift_fraction seed
Settings synthetic_settings(const SyntheticSpec& spec);
bool apply_synthetic_setting(SyntheticSpec& spec, std::string_view key,
                             std::string_view value);

Json settings_to_json(const Settings& settings);
// Accepts strings, numbers, booleans, null and arrays of numbers.
Settings settings_from_json(const Json& object);

Json model_config_json(const Sda2eConfig& config);
Sda2eConfig model_config_from_json(const Json& object,
                                   Sda2eConfig base = {});
Json session_config_json(const SessionConfig& config);
SessionConfig session_config_from_json(const Json& object,
                                       SessionConfig base = {});

std::string hex64(std::uint64_t v);

}  // namespace sda2e

#endif  // SDA2E_SETTINGS_HPP_
