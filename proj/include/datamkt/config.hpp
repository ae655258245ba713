// Copyright 2026 The datamkt Authors
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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "datamkt/core.hpp"
#include "datamkt/mechanism.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

using nlohmann::json;

/// Configuration problems carry a dotted path to the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_object(const json& j, const std::string& context) {
  if (!j.is_object())
    throw ConfigError(context + ": expected an object");
}

/// Rejects keys outside the documented schema so typos fail loudly.
inline void require_keys(const json& j, const std::string& context,
                         std::initializer_list<const char*> allowed) {
  require_object(j, context);
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(context + ": unknown key \"" + item.key() + "\"");
  }
}

template <typename T>
T get_field(const json& j, const std::string& context, const char* key) {
  if (!j.contains(key))
    throw ConfigError(context + ": missing required key \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(context + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_field_or(const json& j, const std::string& context, const char* key,
               T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(context + "." + key + ": " + e.what());
  }
}

inline QualityFunction quality_from_json(const json& j) {
  if (j.is_null()) return QualityFunction::sigmoid();
  require_keys(j, "quality", {"name", "domain"});
  const std::string name = get_field<std::string>(j, "quality", "name");
  std::optional<double> domain;
  if (j.contains("domain")) domain = get_field<double>(j, "quality", "domain");
  try {
    return quality_by_name(name, domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("quality: ") + e.what());
  }
}

inline GridSpec grid_from_json(const json& j) {
  require_keys(j, "grid", {"upper_bound", "step", "include_empty"});
  try {
    return GridSpec(get_field<double>(j, "grid", "upper_bound"),
                    get_field<double>(j, "grid", "step"),
                    get_field_or<bool>(j, "grid", "include_empty", false));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
}

/// A model plus the pieces mechanisms may need to attach to it.
struct MarketSetup {
  ModelPtr model;
  QualityFunction quality;
  std::optional<std::vector<std::vector<double>>> alpha;  // linear family only
};

inline ModelPtr model_from_json(const json& j,
                                std::optional<std::vector<std::vector<double>>>*
                                    alpha_out = nullptr) {
  require_object(j, "model");
  const std::string family = get_field<std::string>(j, "model", "family");
  if (family == "linear" || family == "linear-externality") {
    require_keys(j, "model", {"family", "alpha", "strict_diagonal"});
    auto alpha =
        get_field<std::vector<std::vector<double>>>(j, "model", "alpha");
    const bool strict = get_field_or<bool>(j, "model", "strict_diagonal", false);
    if (alpha_out) *alpha_out = alpha;
    try {
      return std::make_shared<LinearExternalityModel>(std::move(alpha), strict);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  if (family == "power-market") {
    require_keys(j, "model", {"family", "agents", "alpha"});
    return std::make_shared<PowerMarketModel>(
        get_field_or<int>(j, "model", "agents", 2),
        get_field<double>(j, "model", "alpha"));
  }
  if (family == "fixed-market" || family == "proportional-fixed-market") {
    require_keys(j, "model", {"family", "agents"});
    return std::make_shared<ProportionalFixedMarketModel>(
        get_field_or<int>(j, "model", "agents", 2));
  }
  if (family == "quasi-monotone") {
    require_keys(j, "model", {"family", "own", "cross"});
    std::vector<SmoothOwnTerm> own;
    for (const json& t : j.at("own")) {
      require_keys(t, "model.own[]", {"linear", "quadratic", "saturating"});
      own.push_back(SmoothOwnTerm{
          get_field_or<double>(t, "model.own[]", "linear", 0.0),
          get_field_or<double>(t, "model.own[]", "quadratic", 0.0),
          get_field_or<double>(t, "model.own[]", "saturating", 0.0)});
    }
    std::vector<std::vector<SmoothCrossTerm>> cross;
    for (const json& row : j.at("cross")) {
      std::vector<SmoothCrossTerm> r;
      for (const json& t : row) {
        require_keys(t, "model.cross[][]", {"linear", "quadratic"});
        r.push_back(SmoothCrossTerm{
            get_field_or<double>(t, "model.cross[][]", "linear", 0.0),
            get_field_or<double>(t, "model.cross[][]", "quadratic", 0.0)});
      }
      cross.push_back(std::move(r));
    }
    try {
      return smooth_quasi_monotone(own, cross);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  throw ConfigError("model: unknown family \"" + family + "\"");
}

inline MarketSetup market_from_json(const json& config) {
  require_object(config, "config");
  if (!config.contains("model"))
    throw ConfigError("config: missing required key \"model\"");
  std::optional<std::vector<std::vector<double>>> alpha;
  ModelPtr model = model_from_json(config.at("model"), &alpha);
  QualityFunction quality = quality_from_json(
      config.contains("quality") ? config.at("quality") : json(nullptr));
  return MarketSetup{std::move(model), std::move(quality), std::move(alpha)};
}

/// Builds a named mechanism against a market setup. Names: "free",
/// "mep+best-model", "mep+efficient-linear" (linear models only), "vcg"
/// (family = "best-model" or "give-withhold").
inline Mechanism mechanism_from_json(const json& j, const MarketSetup& setup) {
  require_keys(j, "mechanism", {"name", "family"});
  const std::string name = get_field<std::string>(j, "mechanism", "name");
  const int n = setup.model->agent_count();
  if (name == "free") return free_mechanism(n, setup.quality);
  if (name == "mep+best-model")
    return mep_mechanism(best_model_allocation(n, setup.quality), setup.model,
                         setup.quality);
  if (name == "mep+efficient-linear") {
    if (!setup.alpha)
      throw ConfigError(
          "mechanism: mep+efficient-linear needs a linear-externality model");
    return mep_mechanism(efficient_linear_allocation(*setup.alpha, setup.quality),
                         setup.model, setup.quality);
  }
  if (name == "vcg") {
    const std::string family =
        get_field_or<std::string>(j, "mechanism", "family", "give-withhold");
    std::vector<AllocationRule> rules;
    if (family == "best-model") {
      rules.push_back(best_model_allocation(n, setup.quality));
    } else if (family == "give-withhold") {
      rules = give_withhold_family(n, setup.quality);
    } else {
      throw ConfigError("mechanism: unknown vcg family \"" + family + "\"");
    }
    return vcg_mechanism(setup.model, std::move(rules), setup.quality);
  }
  throw ConfigError("mechanism: unknown name \"" + name + "\"");
}

}  // namespace datamkt
