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

#include "sda2e/settings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "sda2e/error.hpp"

namespace sda2e {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view text,
                            std::string_view expected) {
  throw ConfigError(std::string(key) + ": expected " + std::string(expected) +
                    ", got '" + std::string(text) + "'");
}

std::string join_counts(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_count_list(std::string_view key,
                                          std::string_view text) {
  std::vector<std::size_t> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto part = trim(text.substr(
        start, comma == std::string_view::npos ? text.npos : comma - start));
    out.push_back(parse_count(key, part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view attention_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::kAuto: return "auto";
    case AttentionMode::kDense: return "dense";
    case AttentionMode::kLowRank: return "low_rank";
  }
  return "auto";
}

std::string_view anomaly_mode_name(AnomalyMode m) {
  return m == AnomalyMode::kUniformRare ? "uniform_rare" : "cluster_shifted";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() ||
      !std::isfinite(v)) {
    bad_value(key, text, "a finite number");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    bad_value(key, text, "a non-negative integer");
  }
  return v;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
  return static_cast<std::size_t>(parse_u64(key, text));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

Settings parse_settings(std::istream& in, std::string_view source) {
  Settings out;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    auto where = [&] {
      return std::string(source) + ":" + std::to_string(line_no) + ": ";
    };
    if (eq == std::string_view::npos) {
      throw ConfigError(where() + "expected key=value");
    }
    const auto key = trim(t.substr(0, eq));
    const auto value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(where() + "empty key");
    if (!seen.emplace(key).second) {
      throw ConfigError(where() + "repeated key '" + std::string(key) + "'");
    }
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_settings(in, path);
}

void write_settings(const Settings& settings, std::ostream& out) {
  for (const auto& [k, v] : settings) out << k << '=' << v << '\n';
}

Settings model_settings(const Sda2eConfig& c) {
  return {
      {"d", std::to_string(c.d)},
      {"k", std::to_string(c.k)},
      {"hidden", join_counts(c.hidden)},
      {"alpha", format_double(c.alpha)},
      {"beta", format_double(c.beta)},
      {"gamma", format_double(c.gamma)},
      {"delta", format_double(c.delta)},
      {"margin", format_double(c.margin)},
      {"rho", format_double(c.rho)},
      {"lambda", format_double(c.lambda)},
      {"lr_g", format_double(c.lr_g)},
      {"lr_d", format_double(c.lr_d)},
      {"lr_a", format_double(c.lr_a)},
      {"batch_size", std::to_string(c.batch_size)},
      {"epochs", std::to_string(c.epochs)},
      {"seed", std::to_string(c.seed)},
      {"attention", std::string(attention_name(c.attention_mode))},
      {"attention_rank", std::to_string(c.attention_rank)},
      {"sharpness", format_double(c.sharpness)},
      {"optimizer", c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"},
  };
}

bool apply_model_setting(Sda2eConfig& c, std::string_view key,
                         std::string_view value) {
  if (key == "d") c.d = parse_count(key, value);
  else if (key == "k") c.k = parse_count(key, value);
  else if (key == "hidden") c.hidden = parse_count_list(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "beta") c.beta = parse_double(key, value);
  else if (key == "gamma") c.gamma = parse_double(key, value);
  else if (key == "delta") c.delta = parse_double(key, value);
  else if (key == "margin") c.margin = parse_double(key, value);
  else if (key == "rho") c.rho = parse_double(key, value);
  else if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "lr_g") c.lr_g = parse_double(key, value);
  else if (key == "lr_d") c.lr_d = parse_double(key, value);
  else if (key == "lr_a") c.lr_a = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = parse_count(key, value);
  else if (key == "epochs") c.epochs = parse_count(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "attention_rank") c.attention_rank = parse_count(key, value);
  else if (key == "sharpness") c.sharpness = parse_double(key, value);
  else if (key == "attention") {
    if (value == "auto") c.attention_mode = AttentionMode::kAuto;
    else if (value == "dense") c.attention_mode = AttentionMode::kDense;
    else if (value == "low_rank") c.attention_mode = AttentionMode::kLowRank;
    else bad_value(key, value, "auto, dense or low_rank");
  } else if (key == "optimizer") {
    if (value == "adam") c.optimizer = OptimizerKind::kAdam;
    else if (value == "sgd") c.optimizer = OptimizerKind::kSgd;
    else bad_value(key, value, "adam or sgd");
  } else {
    return false;
  }
  return true;
}

Settings session_settings(const SessionConfig& c) {
  return {
      {"strategy", std::string(strategy_name(c.strategy))},
      {"iterations", std::to_string(c.iterations)},
      {"budget", std::to_string(c.budget)},
      {"error_percentile", format_double(c.error_percentile)},
      {"sim_percentile", format_double(c.sim_percentile)},
      {"metric", std::string(metric_name(c.metric))},
      {"retrain", std::string(retrain_policy_name(c.retrain))},
      {"ndcg_at", c.ndcg_at ? std::to_string(*c.ndcg_at) : "full"},
      {"cold_start_fraction", format_double(c.cold_start_fraction)},
      {"seed", std::to_string(c.seed)},
  };
}

bool apply_session_setting(SessionConfig& c, std::string_view key,
                           std::string_view value) {
  try {
    if (key == "strategy") c.strategy = parse_strategy(value);
    else if (key == "iterations") c.iterations = parse_count(key, value);
    else if (key == "budget") c.budget = parse_count(key, value);
    else if (key == "error_percentile") {
      c.error_percentile = parse_double(key, value);
    } else if (key == "sim_percentile") {
      c.sim_percentile = parse_double(key, value);
    } else if (key == "metric") c.metric = parse_metric(value);
    else if (key == "retrain") c.retrain = parse_retrain_policy(value);
    else if (key == "ndcg_at") {
      if (value == "full" || value.empty()) c.ndcg_at.reset();
      else c.ndcg_at = parse_count(key, value);
    } else if (key == "cold_start_fraction") {
      c.cold_start_fraction = parse_double(key, value);
    } else if (key == "seed") c.seed = parse_u64(key, value);
    else return false;
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) throw;
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  return true;
}

Settings synthetic_settings(const SyntheticSpec& s) {
  return {
      {"n", std::to_string(s.n)},
      {"d", std::to_string(s.d)},
      {"anomaly_fraction", format_double(s.anomaly_fraction)},
      {"normal_clusters", std::to_string(s.normal_clusters)},
      {"density", format_double(s.density)},
      {"noise", format_double(s.noise)},
      {"mode", std::string(anomaly_mode_name(s.mode))},
      {"anomaly_groups", std::to_string(s.anomaly_groups)},
      {"shift_fraction", format_double(s.shift_fraction)},
      {"seed", std::to_string(s.seed)},
  };
}

bool apply_synthetic_setting(SyntheticSpec& s, std::string_view key,
                             std::string_view value) {
  if (key == "n") s.n = parse_count(key, value);
  else if (key == "d") s.d = parse_count(key, value);
  else if (key == "anomaly_fraction") {
    s.anomaly_fraction = parse_double(key, value);
  } else if (key == "normal_clusters") {
    s.normal_clusters = parse_count(key, value);
  } else if (key == "density") s.density = parse_double(key, value);
  else if (key == "noise") s.noise = parse_double(key, value);
  else if (key == "mode") {
    if (value == "cluster_shifted") s.mode = AnomalyMode::kClusterShifted;
    else if (value == "uniform_rare") s.mode = AnomalyMode::kUniformRare;
    else bad_value(key, value, "cluster_shifted or uniform_rare");
  } else if (key == "anomaly_groups") {
    s.anomaly_groups = parse_count(key, value);
  } else if (key == "shift_fraction") {
    s.shift_fraction = parse_double(key, value);
  } else if (key == "seed") s.seed = parse_u64(key, value);
  else return false;
  return true;
}

Json settings_to_json(const Settings& settings) {
  Json out = Json::object();
  for (const auto& [k, v] : settings) out[k] = v;
  return out;
}

Settings settings_from_json(const Json& object) {
  if (!object.is_object()) throw ConfigError("config must be a JSON object");
  Settings out;
  for (auto it = object.begin(); it != object.end(); ++it) {
    const Json& v = it.value();
    std::string text;
    if (v.is_string()) {
      text = v.get<std::string>();
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      text = v.dump();
    } else if (v.is_number_float()) {
      text = format_double(v.get<double>());
    } else if (v.is_boolean()) {
      text = v.get<bool>() ? "true" : "false";
    } else if (v.is_null()) {
      text = "";
    } else if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer() && !v[i].is_number_unsigned()) {
          throw ConfigError(it.key() + ": array entries must be integers");
        }
        if (i > 0) text += ',';
        text += v[i].dump();
      }
    } else {
      throw ConfigError(it.key() + ": unsupported value type");
    }
    out.emplace_back(it.key(), std::move(text));
  }
  return out;
}

Json model_config_json(const Sda2eConfig& config) {
  return settings_to_json(model_settings(config));
}

Sda2eConfig model_config_from_json(const Json& object, Sda2eConfig base) {
  for (const auto& [k, v] : settings_from_json(object)) {
    if (!apply_model_setting(base, k, v)) {
      throw ConfigError("unknown model setting '" + k + "'");
    }
  }
  return base;
}

Json session_config_json(const SessionConfig& config) {
  return settings_to_json(session_settings(config));
}

SessionConfig session_config_from_json(const Json& object,
                                       SessionConfig base) {
  for (const auto& [k, v] : settings_from_json(object)) {
    if (!apply_session_setting(base, k, v)) {
      throw ConfigError("unknown session setting '" + k + "'");
    }
  }
  return base;
}

}  // namespace sda2e
