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

// Command-line front end. Exit codes: 0 = ran and the checked property holds
// (experiments always count as 0 on completion), 1 = ran but the property
// fails or no desirable mechanism exists, 2 = usage or configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "datamkt/audit.hpp"
#include "datamkt/conditions.hpp"
#include "datamkt/config.hpp"
#include "datamkt/existence.hpp"
#include "datamkt/experiment.hpp"
#include "datamkt/serialize.hpp"

namespace {

using datamkt::json;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailed = 1;
constexpr int kExitUsage = 2;

int default_threads() {
  if (const char* env = std::getenv("DATAMKT_THREADS")) {
    try {
      return std::stoi(env);
    } catch (...) {
      return 0;
    }
  }
  return 0;  // auto
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw datamkt::ConfigError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw datamkt::ConfigError("config: " + std::string(e.what()));
  }
}

// "D=1,eps=0.25" -> grid json. Accepted keys: D, eps, include_empty.
json parse_grid_flag(const std::string& text) {
  json grid = json::object();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw datamkt::ConfigError("--grid: expected key=value, got \"" + item +
                                 "\"");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "D")
        grid["upper_bound"] = std::stod(value);
      else if (key == "eps")
        grid["step"] = std::stod(value);
      else if (key == "include_empty")
        grid["include_empty"] = value == "1" || value == "true";
      else
        throw datamkt::ConfigError("--grid: unknown key \"" + key + "\"");
    } catch (const std::invalid_argument&) {
      throw datamkt::ConfigError("--grid: bad number in \"" + item + "\"");
    }
  }
  return grid;
}

void emit(const std::string& payload, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << payload;
    if (!payload.empty() && payload.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(output_path, std::ios::binary);
  if (!out) throw datamkt::ConfigError("output: cannot write " + output_path);
  out << payload;
}

// Fills config["model"] from shorthand flags. "linear" without an explicit
// alpha means the n x n identity matrix.
void apply_model_flags(json& config, const std::string& model_name,
                       std::optional<double> growth, int agents) {
  if (model_name.empty()) return;
  json& model = config["model"];
  if (model_name == "linear" || model_name == "linear-externality") {
    model["family"] = "linear-externality";
    if (!model.contains("alpha")) {
      std::vector<std::vector<double>> eye(agents,
                                           std::vector<double>(agents, 0.0));
      for (int i = 0; i < agents; ++i) eye[i][i] = 1.0;
      model["alpha"] = eye;
    }
  } else if (model_name == "power-market") {
    model["family"] = "power-market";
    if (!model.contains("agents")) model["agents"] = agents;
    if (growth) model["alpha"] = *growth;
  } else if (model_name == "fixed-market" ||
             model_name == "proportional-fixed-market") {
    model["family"] = "proportional-fixed-market";
    if (!model.contains("agents")) model["agents"] = agents;
  } else {
    throw datamkt::ConfigError("--model: unknown shorthand \"" + model_name +
                               "\" (use a config file for custom families)");
  }
}

// Reads config["experiment"] into the experiment configs; flags set on the
// command line override these afterwards.
template <typename Setter>
void read_experiment_field(const json& experiment, const char* key,
                           const Setter& set) {
  if (experiment.contains(key)) set(experiment.at(key));
}

json experiment_section(const json& config) {
  if (!config.contains("experiment")) return json::object();
  const json& section = config.at("experiment");
  datamkt::require_keys(section, "experiment",
                        {"seed", "samples", "n_min", "n_max", "t2_min",
                         "t2_max", "t2_step", "alpha_min", "alpha_max",
                         "alpha_step", "cap", "agents"});
  return section;
}

struct CommonArgs {
  std::string config_path;
  std::string output;
  std::string format = "json";
  int threads = default_threads();
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_format = false) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--output", args.output,
                  "write results here instead of stdout");
  cmd->add_option("--threads", args.threads, "worker threads (0 = auto)");
  if (with_format)
    cmd->add_option("--format", args.format, "output format: json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

int run_audit(const json& config, const std::string& property,
              std::optional<double> tolerance_flag, double quad_step,
              const CommonArgs& args) {
  // Grid audits default to 1e-9; the quadrature-based checkers to 1e-6.
  const bool condition_check = property == "necessary" || property == "sufficient";
  const double tolerance =
      tolerance_flag.value_or(condition_check ? 1e-6 : datamkt::kDefaultTolerance);
  datamkt::MarketSetup setup = datamkt::market_from_json(config);
  if (!config.contains("grid"))
    throw datamkt::ConfigError("audit: pick a grid (--grid or config \"grid\")");
  const datamkt::GridSpec grid = datamkt::grid_from_json(config.at("grid"));

  // The ratio/power market families live on identity quality; size it to the
  // grid when the config does not choose a quality function. Must happen
  // before the mechanism is built so its rules share the same quality.
  if (!config.contains("quality")) {
    const std::string family =
        config.at("model").value("family", std::string());
    if (family == "power-market" || family == "proportional-fixed-market" ||
        family == "fixed-market")
      setup.quality = datamkt::QualityFunction::identity(
          grid.upper_bound() * setup.model->agent_count() + 2.0);
  }

  if (!config.contains("mechanism"))
    throw datamkt::ConfigError(
        "audit: pick a mechanism (--mechanism or config \"mechanism\")");
  const datamkt::Mechanism mech =
      datamkt::mechanism_from_json(config.at("mechanism"), setup);

  const datamkt::ValuationModel& model = *setup.model;
  const datamkt::QualityFunction& quality = setup.quality;
  const int threads = args.threads;
  std::optional<datamkt::AuditReport> report;
  if (property == "ic") {
    report = datamkt::audit_ic(mech, model, quality, grid, tolerance, threads);
  } else if (property == "ir") {
    report = datamkt::audit_ir(mech, model, quality, grid, tolerance, threads);
  } else if (property == "wbb") {
    report = datamkt::audit_wbb(mech, grid, tolerance, threads);
  } else if (property == "efficiency" || property == "desirable") {
    const auto family =
        datamkt::give_withhold_family(model.agent_count(), quality);
    report = property == "efficiency"
                 ? datamkt::audit_efficiency(mech, model, quality, grid, family,
                                             tolerance, threads)
                 : datamkt::audit_desirable(mech, model, quality, grid, family,
                                            tolerance, threads);
  } else if (property == "necessary" || property == "sufficient") {
    report = property == "necessary"
                 ? datamkt::check_necessary_conditions(
                       mech, model, quality, grid, quad_step, tolerance, threads)
                 : datamkt::check_sufficient_conditions(
                       mech, model, quality, grid, quad_step, tolerance,
                       threads);
  } else {
    throw datamkt::ConfigError("audit: unknown property \"" + property + "\"");
  }

  emit(datamkt::to_json(*report).dump(2), args.output);
  std::cerr << "audit " << datamkt::audit_property_name(report->property)
            << " of " << mech.label << ": "
            << (report->passed ? "passed" : "FAILED") << " ("
            << report->violations.size() << " violations, " << report->checks
            << " checks)\n";
  return report->passed ? kExitOk : kExitPropertyFailed;
}

int run_existence(json config, std::optional<double> upper,
                  std::optional<double> step, const std::string& allocation,
                  double tolerance, const CommonArgs& args) {
  if (upper) config["grid"]["upper_bound"] = *upper;
  if (step) config["grid"]["step"] = *step;
  if (!config.contains("grid"))
    throw datamkt::ConfigError("existence: pick a grid (--D/--eps or config)");
  const datamkt::GridSpec grid = datamkt::grid_from_json(config.at("grid"));

  datamkt::MarketSetup setup = datamkt::market_from_json(config);
  // Identity quality sized to the whole grid unless the config says otherwise.
  if (!config.contains("quality")) {
    const double domain = grid.upper_bound() * setup.model->agent_count() + 2.0;
    setup.quality = datamkt::QualityFunction::identity(domain);
  }

  datamkt::AllocationRule alloc =
      allocation == "efficient-linear" && setup.alpha
          ? datamkt::efficient_linear_allocation(*setup.alpha, setup.quality)
          : datamkt::best_model_allocation(setup.model->agent_count(),
                                           setup.quality);
  if (allocation == "efficient-linear" && !setup.alpha)
    throw datamkt::ConfigError(
        "existence: efficient-linear needs a linear-externality model");
  if (allocation != "efficient-linear" && allocation != "best-model")
    throw datamkt::ConfigError("existence: unknown allocation \"" + allocation +
                               "\"");

  const datamkt::PaymentTable table = datamkt::desirable_exists(
      *setup.model, setup.quality, alloc, grid, tolerance, args.threads);

  if (args.format == "csv")
    emit(datamkt::to_csv(table), args.output);
  else
    emit(datamkt::to_json(table).dump(2), args.output);

  if (table.feasible) {
    std::cerr << "desirable mechanism exists; revenue-maximal payments "
                 "emitted\n";
    return kExitOk;
  }
  std::ostringstream witness;
  if (table.witness) {
    witness << " at profile (";
    for (std::size_t i = 0; i < table.witness->size(); ++i)
      witness << (i ? ", " : "") << datamkt::format_double((*table.witness)[i]);
    witness << ")";
  }
  std::cerr << "no desirable mechanism: maximal payments lose money"
            << witness.str() << "\n";
  return kExitPropertyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "datamkt: mechanisms, truthfulness audits and existence analysis for "
      "multi-party data-sharing markets"};
  app.require_subcommand(1);

  // --- audit ---
  CommonArgs audit_args;
  auto* audit = app.add_subcommand("audit", "run a property audit on a grid");
  std::string audit_mechanism, audit_model, audit_grid,
      audit_property = "desirable";
  std::string vcg_family = "give-withhold";
  std::optional<double> audit_tol;
  std::optional<double> audit_growth;
  double audit_quad = 1e-3;
  int audit_agents = 2;
  add_common(audit, audit_args);
  audit->add_option("--mechanism", audit_mechanism,
                    "mep+efficient-linear | mep+best-model | vcg | free");
  audit->add_option("--vcg-family", vcg_family,
                    "vcg allocation family: give-withhold | best-model");
  audit->add_option("--model", audit_model,
                    "linear | power-market | fixed-market");
  audit->add_option("--alpha", audit_growth, "power-market growth exponent");
  audit->add_option("--grid", audit_grid, "D=<upper>,eps=<step>");
  audit->add_option("--property", audit_property,
                    "ic | ir | wbb | efficiency | desirable | necessary | "
                    "sufficient");
  audit->add_option("--tolerance", audit_tol,
                    "comparison tolerance (default 1e-9; 1e-6 for the "
                    "condition checkers)");
  audit->add_option("--quad-step", audit_quad,
                    "step for the condition checkers' quadrature");
  audit->add_option("--agents", audit_agents, "agents for model shorthands");

  // --- existence ---
  CommonArgs exist_args;
  auto* existence = app.add_subcommand(
      "existence", "decide whether a desirable mechanism exists on a grid");
  std::string exist_model, exist_allocation = "best-model";
  std::optional<double> exist_growth;
  std::optional<double> exist_upper, exist_step;
  double exist_tol = datamkt::kDefaultTolerance;
  int exist_agents = 2;
  add_common(existence, exist_args, /*with_format=*/true);
  existence->add_option("--model", exist_model,
                        "linear | power-market | fixed-market");
  existence->add_option("--alpha", exist_growth,
                        "power-market growth exponent");
  existence->add_option("--agents", exist_agents, "number of agents");
  existence->add_option("--D", exist_upper, "grid upper bound");
  existence->add_option("--eps", exist_step, "grid step");
  existence->add_option("--allocation", exist_allocation,
                        "best-model | efficient-linear");
  existence->add_option("--tolerance", exist_tol, "budget slack tolerance");

  // --- boundary ---
  CommonArgs boundary_args;
  auto* boundary = app.add_subcommand(
      "boundary", "sweep the feasible data-disparity boundary over growth "
                  "rates");
  datamkt::BoundarySweepConfig boundary_cfg;
  add_common(boundary, boundary_args);
  boundary->add_option("--alpha-min", boundary_cfg.alpha_min, "lowest growth");
  boundary->add_option("--alpha-max", boundary_cfg.alpha_max, "highest growth");
  boundary->add_option("--alpha-step", boundary_cfg.alpha_step, "growth step");
  boundary->add_option("--cap", boundary_cfg.cap, "largest span scanned");
  boundary->add_option("--agents", boundary_cfg.agents, "number of agents");

  // --- mep (scaling experiment) ---
  CommonArgs mep_args;
  auto* mep = app.add_subcommand(
      "mep", "revenue/welfare/model-quality of the maximal-exploitation "
             "mechanism as the market grows");
  datamkt::ScalingConfig scaling_cfg;
  add_common(mep, mep_args);
  mep->add_option("--seed", scaling_cfg.seed, "root RNG seed");
  mep->add_option("--samples", scaling_cfg.samples, "draws per market size");
  mep->add_option("--n-min", scaling_cfg.n_min, "smallest market");
  mep->add_option("--n-max", scaling_cfg.n_max, "largest market");

  // --- sweep (type sweep experiment) ---
  CommonArgs sweep_args;
  auto* sweep = app.add_subcommand(
      "sweep", "two-agent sweep of the opponent's type under the "
               "maximal-exploitation mechanism");
  datamkt::TypeSweepConfig sweep_cfg;
  add_common(sweep, sweep_args);
  sweep->add_option("--seed", sweep_cfg.seed, "root RNG seed");
  sweep->add_option("--samples", sweep_cfg.samples, "draws per sweep point");
  sweep->add_option("--t2-min", sweep_cfg.t2_min, "sweep start");
  sweep->add_option("--t2-max", sweep_cfg.t2_max, "sweep end");
  sweep->add_option("--t2-step", sweep_cfg.t2_step, "sweep step");

  // --- vcg-example ---
  CommonArgs vcg_args;
  auto* vcg_example = app.add_subcommand(
      "vcg-example",
      "the fixed-market instance where the harm-based mechanism is untruthful");
  add_common(vcg_example, vcg_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (audit->parsed()) {
      json config = load_config(audit_args.config_path);
      apply_model_flags(config, audit_model, audit_growth, audit_agents);
      if (!audit_grid.empty()) config["grid"] = parse_grid_flag(audit_grid);
      if (!audit_mechanism.empty()) {
        config["mechanism"]["name"] = audit_mechanism;
        if (audit_mechanism == "vcg")
          config["mechanism"]["family"] = vcg_family;
      }
      return run_audit(config, audit_property, audit_tol, audit_quad,
                       audit_args);
    }
    if (existence->parsed()) {
      json config = load_config(exist_args.config_path);
      apply_model_flags(config, exist_model, exist_growth, exist_agents);
      if (!config.contains("model"))
        throw datamkt::ConfigError(
            "existence: pick a model (--model or config \"model\")");
      return run_existence(std::move(config), exist_upper, exist_step,
                           exist_allocation, exist_tol, exist_args);
    }
    if (boundary->parsed()) {
      const json section = experiment_section(load_config(boundary_args.config_path));
      read_experiment_field(section, "alpha_min", [&](const json& v) {
        if (boundary->count("--alpha-min") == 0) boundary_cfg.alpha_min = v.get<double>();
      });
      read_experiment_field(section, "alpha_max", [&](const json& v) {
        if (boundary->count("--alpha-max") == 0) boundary_cfg.alpha_max = v.get<double>();
      });
      read_experiment_field(section, "alpha_step", [&](const json& v) {
        if (boundary->count("--alpha-step") == 0) boundary_cfg.alpha_step = v.get<double>();
      });
      read_experiment_field(section, "cap", [&](const json& v) {
        if (boundary->count("--cap") == 0) boundary_cfg.cap = v.get<int>();
      });
      read_experiment_field(section, "agents", [&](const json& v) {
        if (boundary->count("--agents") == 0) boundary_cfg.agents = v.get<int>();
      });
      boundary_cfg.threads = boundary_args.threads;
      const auto rows = datamkt::boundary_sweep(boundary_cfg);
      emit(datamkt::to_csv(rows), boundary_args.output);
      return kExitOk;
    }
    if (mep->parsed()) {
      const json section = experiment_section(load_config(mep_args.config_path));
      read_experiment_field(section, "seed", [&](const json& v) {
        if (mep->count("--seed") == 0) scaling_cfg.seed = v.get<std::uint64_t>();
      });
      read_experiment_field(section, "samples", [&](const json& v) {
        if (mep->count("--samples") == 0) scaling_cfg.samples = v.get<int>();
      });
      read_experiment_field(section, "n_min", [&](const json& v) {
        if (mep->count("--n-min") == 0) scaling_cfg.n_min = v.get<int>();
      });
      read_experiment_field(section, "n_max", [&](const json& v) {
        if (mep->count("--n-max") == 0) scaling_cfg.n_max = v.get<int>();
      });
      scaling_cfg.threads = mep_args.threads;
      const auto rows = datamkt::mep_scaling_experiment(scaling_cfg);
      emit(datamkt::to_csv(rows), mep_args.output);
      return kExitOk;
    }
    if (sweep->parsed()) {
      const json section = experiment_section(load_config(sweep_args.config_path));
      read_experiment_field(section, "seed", [&](const json& v) {
        if (sweep->count("--seed") == 0) sweep_cfg.seed = v.get<std::uint64_t>();
      });
      read_experiment_field(section, "samples", [&](const json& v) {
        if (sweep->count("--samples") == 0) sweep_cfg.samples = v.get<int>();
      });
      read_experiment_field(section, "t2_min", [&](const json& v) {
        if (sweep->count("--t2-min") == 0) sweep_cfg.t2_min = v.get<double>();
      });
      read_experiment_field(section, "t2_max", [&](const json& v) {
        if (sweep->count("--t2-max") == 0) sweep_cfg.t2_max = v.get<double>();
      });
      read_experiment_field(section, "t2_step", [&](const json& v) {
        if (sweep->count("--t2-step") == 0) sweep_cfg.t2_step = v.get<double>();
      });
      sweep_cfg.threads = sweep_args.threads;
      const auto rows = datamkt::mep_type_sweep(sweep_cfg);
      emit(datamkt::to_csv(rows), sweep_args.output);
      return kExitOk;
    }
    if (vcg_example->parsed()) {
      const datamkt::VcgCounterexampleReport report =
          datamkt::vcg_counterexample_report();
      emit(datamkt::to_json(report).dump(2), vcg_args.output);
      std::cerr << "truthful u1 = " << report.truthful_u1.str()
                << ", deviating u1 = " << report.deviating_u1.str()
                << (report.ic_violation ? " -> truthfulness violated\n"
                                        : "\n");
      return report.ic_violation ? kExitPropertyFailed : kExitOk;
    }
  } catch (const datamkt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
