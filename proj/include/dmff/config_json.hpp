#pragma once

// JSON mapping for the configuration structs. Field names mirror the struct
// members; every field is optional and falls back to the struct default.

#include <string>

#include "json.hpp"

#include "dmff/dmff.hpp"
#include "dmff/synthetic.hpp"
#include "dmff/train.hpp"

namespace dmff {

inline nlohmann::ordered_json to_json(const DmffConfig& c) {
  nlohmann::ordered_json j;
  j["shrink_variant"] = std::string(to_string(c.shrink_variant));
  j["shrink_window"] = c.shrink_window;
  j["heads"] = c.heads;
  j["ffn_hidden"] = c.ffn_hidden;
  j["iterations"] = c.iterations;
  j["mode"] = std::string(to_string(c.mode));
  j["input_duplication"] = std::string(to_string(c.input_duplication));
  j["update"] = std::string(to_string(c.update));
  return j;
}

namespace detail {
template <class J>
std::size_t get_size(const J& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(std::string("config field '") + key + "' must be a non-negative integer");
  return v.template get<std::size_t>();
}

template <class J>
std::string get_string(const J& j, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(std::string("config field '") + key + "' must be a string");
  return v.template get<std::string>();
}
}  // namespace detail

template <class J>
DmffConfig dmff_config_from_json(const J& j) {
  if (!j.is_object()) throw ConfigError("dmff config must be a JSON object");
  DmffConfig c;
  c.shrink_variant = parse_shrink_variant(detail::get_string(j, "shrink_variant", std::string(to_string(c.shrink_variant))));
  c.shrink_window = detail::get_size(j, "shrink_window", c.shrink_window);
  c.heads = detail::get_size(j, "heads", c.heads);
  c.ffn_hidden = detail::get_size(j, "ffn_hidden", c.ffn_hidden);
  c.iterations = detail::get_size(j, "iterations", c.iterations);
  c.mode = parse_fusion_mode(detail::get_string(j, "mode", std::string(to_string(c.mode))));
  c.input_duplication =
      parse_input_duplication(detail::get_string(j, "input_duplication", std::string(to_string(c.input_duplication))));
  c.update = parse_update_order(detail::get_string(j, "update", std::string(to_string(c.update))));
  return c;
}

namespace detail {
template <class J>
double get_double(const J& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string("config field '") + key + "' must be a number");
  return v.template get<double>();
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const SyntheticPairSpec& s) {
  nlohmann::ordered_json j;
  j["H"] = s.height;
  j["W"] = s.width;
  j["C"] = s.channels;
  j["blob_count"] = s.blob_count;
  j["seed"] = s.seed;
  j["complementarity"] = s.complementarity;
  return j;
}

template <class J>
SyntheticPairSpec synthetic_spec_from_json(const J& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  SyntheticPairSpec s;
  s.height = detail::get_size(j, "H", s.height);
  s.width = detail::get_size(j, "W", s.width);
  s.channels = detail::get_size(j, "C", s.channels);
  s.blob_count = detail::get_size(j, "blob_count", s.blob_count);
  s.seed = detail::get_size(j, "seed", s.seed);
  s.complementarity = detail::get_double(j, "complementarity", s.complementarity);
  return s;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["lr0"] = c.lr0;
  j["lr_min"] = c.lr_min;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["exempt_scalars_from_decay"] = c.exempt_scalars_from_decay;
  j["dmff"] = to_json(c.dmff);
  j["data"] = to_json(c.data);
  return j;
}

template <class J>
TrainConfig train_config_from_json(const J& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  c.lr0 = detail::get_double(j, "lr0", c.lr0);
  c.lr_min = detail::get_double(j, "lr_min", c.lr_min);
  c.momentum = detail::get_double(j, "momentum", c.momentum);
  c.weight_decay = detail::get_double(j, "weight_decay", c.weight_decay);
  c.steps = detail::get_size(j, "steps", c.steps);
  c.seed = detail::get_size(j, "seed", c.seed);
  c.samples = detail::get_size(j, "samples", c.samples);
  if (j.contains("exempt_scalars_from_decay")) {
    const auto& v = j.at("exempt_scalars_from_decay");
    if (!v.is_boolean()) throw ConfigError("config field 'exempt_scalars_from_decay' must be a boolean");
    c.exempt_scalars_from_decay = v.template get<bool>();
  }
  if (j.contains("dmff")) c.dmff = dmff_config_from_json(j.at("dmff"));
  if (j.contains("data")) c.data = synthetic_spec_from_json(j.at("data"));
  return c;
}

}  // namespace dmff
