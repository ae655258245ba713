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

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "datamkt/audit.hpp"
#include "datamkt/core.hpp"
#include "datamkt/existence.hpp"
#include "datamkt/experiment.hpp"

namespace datamkt {

/// Shortest round-trip decimal text for a double. Locale-independent: always
/// '.' as the decimal separator, no grouping.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// --- CSV ---------------------------------------------------------------
// All CSV output uses LF line endings and format_double for numbers, so a
// fixed seed yields byte-identical files on any platform.

inline std::string to_csv(const std::vector<ScalingRow>& rows) {
  std::string out = "n,revenue,welfare,best_quality\n";
  for (const ScalingRow& r : rows) {
    out += std::to_string(r.agents);
    out += ',';
    out += format_double(r.revenue);
    out += ',';
    out += format_double(r.welfare);
    out += ',';
    out += format_double(r.best_quality);
    out += '\n';
  }
  return out;
}

inline std::string to_csv(const std::vector<TypeSweepRow>& rows) {
  std::string out = "t2,welfare,revenue,uti_1,uti_2\n";
  for (const TypeSweepRow& r : rows) {
    out += format_double(r.t2);
    out += ',';
    out += format_double(r.welfare);
    out += ',';
    out += format_double(r.revenue);
    out += ',';
    out += format_double(r.uti_1);
    out += ',';
    out += format_double(r.uti_2);
    out += '\n';
  }
  return out;
}

inline std::string to_csv(const std::vector<BoundaryRow>& rows) {
  std::string out = "alpha,boundary,open_above\n";
  for (const BoundaryRow& r : rows) {
    out += format_double(r.alpha);
    out += ',';
    out += std::to_string(r.boundary);
    out += ',';
    out += r.open_above ? '1' : '0';
    out += '\n';
  }
  return out;
}

/// Tabular dump of a payment table: one line per (agent, report level, slice
/// of the others). Absent agents in the slice print as "empty"; coordinates
/// are ';'-joined.
inline std::string to_csv(const PaymentTable& table) {
  std::string out = "agent,t,others,p_max\n";
  for (int agent = 0; agent < table.agents(); ++agent) {
    for (std::size_t slice = 0; slice < table.slice_count(); ++slice) {
      const ReportProfile others = table.decode_slice(slice);
      std::string coords;
      for (std::size_t k = 0; k < others.size(); ++k) {
        if (k > 0) coords += ';';
        coords += others[k].participates() ? format_double(others[k].size())
                                           : "empty";
      }
      for (int t = 0; t < table.grid().num_points(); ++t) {
        out += std::to_string(agent);
        out += ',';
        out += format_double(table.grid().point(t));
        out += ',';
        out += coords;
        out += ',';
        out += format_double(table.at(agent, slice, t));
        out += '\n';
      }
    }
  }
  return out;
}

// --- JSON ---------------------------------------------------------------

using nlohmann::json;

inline json to_json(const GridSpec& grid) {
  return json{{"upper_bound", grid.upper_bound()},
              {"step", grid.step()},
              {"include_empty", grid.include_empty()}};
}

inline GridSpec grid_spec_from_json(const json& j) {
  return GridSpec(j.at("upper_bound").get<double>(),
                  j.at("step").get<double>(),
                  j.value("include_empty", false));
}

inline json to_json(const Report& r) {
  if (!r.participates()) return nullptr;
  return r.size();
}

inline Report report_from_json(const json& j) {
  if (j.is_null()) return Report::none();
  return Report::of(j.get<double>());
}

inline json to_json(const AuditViolation& v) {
  return json{{"profile", v.profile},
              {"agent", v.agent},
              {"deviation", v.deviation ? to_json(*v.deviation) : json(nullptr)},
              {"has_deviation", v.deviation.has_value()},
              {"margin", v.margin},
              {"detail", v.detail}};
}

inline AuditViolation audit_violation_from_json(const json& j) {
  AuditViolation v;
  v.profile = j.at("profile").get<std::vector<double>>();
  v.agent = j.at("agent").get<int>();
  if (j.at("has_deviation").get<bool>())
    v.deviation = report_from_json(j.at("deviation"));
  v.margin = j.at("margin").get<double>();
  v.detail = j.at("detail").get<std::string>();
  return v;
}

inline json to_json(const AuditReport& report) {
  json violations = json::array();
  for (const AuditViolation& v : report.violations)
    violations.push_back(to_json(v));
  return json{{"property", audit_property_name(report.property)},
              {"passed", report.passed},
              {"tolerance", report.tolerance},
              {"grid", to_json(report.grid)},
              {"checks", report.checks},
              {"min_margin", report.min_margin},
              {"max_margin", report.max_margin},
              {"violations", violations}};
}

inline AuditReport audit_report_from_json(const json& j) {
  AuditReport report(audit_property_from_name(j.at("property").get<std::string>()),
                     j.at("tolerance").get<double>(),
                     grid_spec_from_json(j.at("grid")));
  report.passed = j.at("passed").get<bool>();
  report.checks = j.at("checks").get<std::size_t>();
  report.min_margin = j.at("min_margin").get<double>();
  report.max_margin = j.at("max_margin").get<double>();
  for (const json& v : j.at("violations"))
    report.violations.push_back(audit_violation_from_json(v));
  return report;
}

inline json to_json(const PaymentTable& table) {
  json entries = json::array();
  for (int agent = 0; agent < table.agents(); ++agent) {
    for (std::size_t slice = 0; slice < table.slice_count(); ++slice) {
      const ReportProfile others = table.decode_slice(slice);
      json coords = json::array();
      for (const Report& r : others) coords.push_back(to_json(r));
      for (int t = 0; t < table.grid().num_points(); ++t)
        entries.push_back(json{{"agent", agent},
                               {"t", table.grid().point(t)},
                               {"others", coords},
                               {"p_max", table.at(agent, slice, t)}});
    }
  }
  return json{{"grid", to_json(table.grid())},
              {"agents", table.agents()},
              {"feasible", table.feasible},
              {"witness", table.witness ? json(*table.witness) : json(nullptr)},
              {"entries", entries}};
}

inline PaymentTable payment_table_from_json(const json& j) {
  PaymentTable table(grid_spec_from_json(j.at("grid")),
                     j.at("agents").get<int>());
  table.feasible = j.at("feasible").get<bool>();
  if (!j.at("witness").is_null())
    table.witness = j.at("witness").get<std::vector<double>>();
  for (const json& entry : j.at("entries")) {
    ReportProfile others;
    for (const json& coord : entry.at("others"))
      others.push_back(report_from_json(coord));
    table.at(entry.at("agent").get<int>(), table.slice_code(others),
             table.grid().index_of(entry.at("t").get<double>())) =
        entry.at("p_max").get<double>();
  }
  return table;
}

inline json to_json(const std::vector<BoundaryRow>& rows) {
  json arr = json::array();
  for (const BoundaryRow& r : rows)
    arr.push_back(json{{"alpha", r.alpha},
                       {"boundary", r.boundary},
                       {"open_above", r.open_above}});
  return arr;
}

inline json to_json(const VcgCounterexampleReport& r) {
  return json{{"true_types", r.true_types},
              {"deviation_report", r.deviation_report},
              {"truthful_u1", r.truthful_u1.str()},
              {"deviating_u1", r.deviating_u1.str()},
              {"ic_margin", r.ic_margin.str()},
              {"truthful_u1_float", r.truthful_u1_float},
              {"deviating_u1_float", r.deviating_u1_float},
              {"ic_violation", r.ic_violation},
              {"auditor_flagged", r.auditor_flagged},
              {"auditor_violations", r.auditor_violations}};
}

}  // namespace datamkt
