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

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "datamkt/core.hpp"
#include "datamkt/mechanism.hpp"
#include "datamkt/parallel.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

enum class AuditProperty {
  kIncentiveCompatibility,
  kIndividualRationality,
  kWeakBudgetBalance,
  kEfficiency,
  kDesirable,
  kNecessaryConditions,
  kSufficientConditions,
};

inline const char* audit_property_name(AuditProperty p) {
  switch (p) {
    case AuditProperty::kIncentiveCompatibility: return "ic";
    case AuditProperty::kIndividualRationality: return "ir";
    case AuditProperty::kWeakBudgetBalance: return "wbb";
    case AuditProperty::kEfficiency: return "efficiency";
    case AuditProperty::kDesirable: return "desirable";
    case AuditProperty::kNecessaryConditions: return "necessary-conditions";
    case AuditProperty::kSufficientConditions: return "sufficient-conditions";
  }
  return "unknown";
}

inline AuditProperty audit_property_from_name(const std::string& name) {
  for (AuditProperty p :
       {AuditProperty::kIncentiveCompatibility,
        AuditProperty::kIndividualRationality,
        AuditProperty::kWeakBudgetBalance, AuditProperty::kEfficiency,
        AuditProperty::kDesirable, AuditProperty::kNecessaryConditions,
        AuditProperty::kSufficientConditions})
    if (name == audit_property_name(p)) return p;
  throw std::invalid_argument("unknown audit property: " + name);
}

/// One failed check: the true profile where it happened, who could profit (or
/// -1 for profile-level properties), the action that beats honesty, and the
/// negative slack.
struct AuditViolation {
  std::vector<double> profile;
  int agent = -1;
  std::optional<Report> deviation;
  double margin = 0.0;
  std::string detail;
};

/// Result of one property audit over a grid. `passed` holds exactly when no
/// violation was recorded; min/max margin summarize the slack seen across all
/// checks (0 when nothing was checked).
struct AuditReport {
  AuditReport(AuditProperty property_, double tolerance_, GridSpec grid_)
      : property(property_), tolerance(tolerance_), grid(grid_) {}

  AuditProperty property;
  bool passed = true;
  double tolerance;
  GridSpec grid;
  std::size_t checks = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_margin = -std::numeric_limits<double>::infinity();
  std::vector<AuditViolation> violations;

  void record_check(double margin) {
    ++checks;
    min_margin = std::min(min_margin, margin);
    max_margin = std::max(max_margin, margin);
  }

  void finalize() {
    passed = violations.empty();
    if (checks == 0) {
      min_margin = 0.0;
      max_margin = 0.0;
    }
  }

  void absorb(AuditReport&& other) {
    checks += other.checks;
    min_margin = std::min(min_margin, other.min_margin);
    max_margin = std::max(max_margin, other.max_margin);
    violations.insert(violations.end(),
                      std::make_move_iterator(other.violations.begin()),
                      std::make_move_iterator(other.violations.end()));
  }
};

namespace detail {

inline std::size_t pow_count(std::size_t base, int exp) {
  std::size_t total = 1;
  for (int k = 0; k < exp; ++k) total *= base;
  return total;
}

/// Decodes a flat index into per-agent grid indices, agent 0 most significant.
inline void decode_indices(std::size_t flat, std::size_t base, int n,
                           std::span<int> out) {
  for (int k = n - 1; k >= 0; --k) {
    out[k] = static_cast<int>(flat % base);
    flat /= base;
  }
}

/// Utility of one agent under the same arithmetic as run_mechanism, without
/// materializing the full outcome. Hot path of the audits.
inline double agent_utility(const Mechanism& mechanism,
                            const ValuationModel& model,
                            const QualityFunction& q,
                            const TypeProfile& true_types,
                            const ReportProfile& reports, int agent) {
  const std::vector<double> x = mechanism.allocation.allocate(reports);
  const double p = mechanism.payment.charge_one
                       ? mechanism.payment.charge_one(reports, agent)
                       : mechanism.payment.charge(reports)[agent];
  const std::vector<double> quals = effective_qualities(x, true_types, q);
  return model.value_of(agent, quals) - p;
}

/// Shared driver: enumerates true grid profiles in ascending flat order,
/// splits them across chunk-local reports, merges in chunk order. The body
/// sees (local report, profile indices, profile values).
template <typename Body>
AuditReport profile_audit(AuditProperty property, const GridSpec& grid, int n,
                          double tol, int threads, const Body& body) {
  const std::vector<double> pts = grid.numeric_points();
  const std::size_t g = pts.size();
  const std::size_t total = pow_count(g, n);
  const auto chunks = make_chunks(total, threads);

  std::vector<AuditReport> parts;
  parts.reserve(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c)
    parts.emplace_back(property, tol, grid);

  run_chunks(chunks, [&](const ChunkRange& chunk) {
    AuditReport& local = parts[chunk.index];
    std::vector<int> idx(n);
    TypeProfile types(n);
    for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
      decode_indices(flat, g, n, idx);
      for (int k = 0; k < n; ++k) types[k] = pts[idx[k]];
      body(local, idx, types, pts);
    }
  });

  AuditReport report(property, tol, grid);
  for (auto& part : parts) report.absorb(std::move(part));
  report.finalize();
  return report;
}

}  // namespace detail

/// Checks that no agent can profit by under-reporting while everyone else is
/// honest: at every grid profile of true types, every agent, every report
/// below his type, honesty must win up to `tol`. Non-participation is audited
/// separately (see audit_ir).
inline AuditReport audit_ic(const Mechanism& mechanism,
                            const ValuationModel& model,
                            const QualityFunction& q, const GridSpec& grid,
                            double tol = kDefaultTolerance, int threads = 1) {
  const int n = model.agent_count();
  return detail::profile_audit(
      AuditProperty::kIncentiveCompatibility, grid, n, tol, threads,
      [&](AuditReport& local, const std::vector<int>& idx,
          const TypeProfile& types, const std::vector<double>& pts) {
        ReportProfile reports = truthful_reports(types);
        const Outcome truthful =
            run_mechanism(mechanism, model, q, types, reports);
        for (int i = 0; i < n; ++i) {
          for (int r = 0; r < idx[i]; ++r) {
            reports[i] = Report::of(pts[r]);
            const double u_dev =
                detail::agent_utility(mechanism, model, q, types, reports, i);
            const double margin = truthful.utilities[i] - u_dev;
            local.record_check(margin);
            if (margin < -tol)
              local.violations.push_back(AuditViolation{
                  types, i, Report::of(pts[r]), margin, "under-report"});
          }
          reports[i] = Report::of(types[i]);
        }
      });
}

/// Checks that honest participation beats staying out at every grid profile:
/// the counterfactual re-runs the allocation without the agent, charges him
/// nothing, and leaves him his own-data model.
inline AuditReport audit_ir(const Mechanism& mechanism,
                            const ValuationModel& model,
                            const QualityFunction& q, const GridSpec& grid,
                            double tol = kDefaultTolerance, int threads = 1) {
  const int n = model.agent_count();
  return detail::profile_audit(
      AuditProperty::kIndividualRationality, grid, n, tol, threads,
      [&](AuditReport& local, const std::vector<int>&, const TypeProfile& types,
          const std::vector<double>&) {
        ReportProfile reports = truthful_reports(types);
        const Outcome truthful =
            run_mechanism(mechanism, model, q, types, reports);
        for (int i = 0; i < n; ++i) {
          reports[i] = Report::none();
          const double u_out =
              detail::agent_utility(mechanism, model, q, types, reports, i);
          const double margin = truthful.utilities[i] - u_out;
          local.record_check(margin);
          if (margin < -tol)
            local.violations.push_back(
                AuditViolation{types, i, Report::none(), margin, "stay-out"});
          reports[i] = Report::of(types[i]);
        }
      });
}

/// Checks that the platform never loses money at truthful profiles.
inline AuditReport audit_wbb(const Mechanism& mechanism, const GridSpec& grid,
                             double tol = kDefaultTolerance, int threads = 1) {
  const int n = mechanism.payment.agents;
  return detail::profile_audit(
      AuditProperty::kWeakBudgetBalance, grid, n, tol, threads,
      [&](AuditReport& local, const std::vector<int>&, const TypeProfile& types,
          const std::vector<double>&) {
        const std::vector<double> p =
            mechanism.payment.charge(truthful_reports(types));
        double revenue = 0.0;
        for (double pi : p) revenue += pi;
        local.record_check(revenue);
        if (revenue < -tol)
          local.violations.push_back(AuditViolation{
              types, -1, std::nullopt, revenue, "negative-revenue"});
      });
}

/// Checks that the mechanism's allocation attains the best welfare available
/// in `family` at every truthful grid profile.
inline AuditReport audit_efficiency(const Mechanism& mechanism,
                                    const ValuationModel& model,
                                    const QualityFunction& q,
                                    const GridSpec& grid,
                                    std::span<const AllocationRule> family,
                                    double tol = kDefaultTolerance,
                                    int threads = 1) {
  if (family.empty())
    throw std::invalid_argument("audit_efficiency: allocation family is empty");
  const int n = model.agent_count();
  return detail::profile_audit(
      AuditProperty::kEfficiency, grid, n, tol, threads,
      [&](AuditReport& local, const std::vector<int>&, const TypeProfile& types,
          const std::vector<double>&) {
        const ReportProfile reports = truthful_reports(types);
        const std::vector<double> x = mechanism.allocation.allocate(reports);
        const double mech_welfare =
            market_size(model, effective_qualities(x, types, q));
        double best = -std::numeric_limits<double>::infinity();
        for (const AllocationRule& rule : family) {
          const std::vector<double> xr = rule.allocate(reports);
          best = std::max(
              best, market_size(model, effective_qualities(xr, types, q)));
        }
        const double margin = mech_welfare - best;
        local.record_check(margin);
        if (margin < -tol)
          local.violations.push_back(
              AuditViolation{types, -1, std::nullopt, margin, "welfare-gap"});
      });
}

/// The full bar: truthful, rational, efficient against `family`, and never
/// loses money. Violations of the four audits are concatenated.
inline AuditReport audit_desirable(const Mechanism& mechanism,
                                   const ValuationModel& model,
                                   const QualityFunction& q,
                                   const GridSpec& grid,
                                   std::span<const AllocationRule> family,
                                   double tol = kDefaultTolerance,
                                   int threads = 1) {
  AuditReport report(AuditProperty::kDesirable, tol, grid);
  auto merge = [&report](AuditReport part, const char* tag) {
    for (AuditViolation& v : part.violations) {
      v.detail = std::string(tag) + ":" + v.detail;
      report.violations.push_back(std::move(v));
    }
    report.checks += part.checks;
    report.min_margin = std::min(report.min_margin, part.min_margin);
    report.max_margin = std::max(report.max_margin, part.max_margin);
  };
  merge(audit_ic(mechanism, model, q, grid, tol, threads), "ic");
  merge(audit_ir(mechanism, model, q, grid, tol, threads), "ir");
  merge(audit_wbb(mechanism, grid, tol, threads), "wbb");
  merge(audit_efficiency(mechanism, model, q, grid, family, tol, threads),
        "efficiency");
  report.finalize();
  return report;
}

}  // namespace datamkt
