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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "datamkt/audit.hpp"
#include "datamkt/core.hpp"
#include "datamkt/mechanism.hpp"
#include "datamkt/parallel.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

// Numerical checkers for the payment/allocation conditions that every
// truthful and rational mechanism must satisfy (necessary side) and that are
// enough to guarantee both properties (sufficient side).
//
// Necessary side, for every agent i and fixed others t_{-i}:
//   (1) p_i(0, t_-i) <= v_i(x(0,t_-i), 0, t_-i) - v_i(x(empty,t_-i), 0, t_-i)
//   (2) p_i(b, t_-i) - p_i(a, t_-i) <= integral over [a,b] of the
//       report-derivative of v_i along the truthful diagonal.
// Sufficient side adds:
//   (3) the report-derivative at report a, viewed as a function of the true
//       type, is smallest at the truthful point, and
//   (4) the payment increment is bounded by the diagonal integral minus the
//       growth of the stay-out value in the true type.
//
// The deployed quality q_i = max{x_i, Q(t_i)} is kinked; derivatives through
// it are taken along the allocation path: report-derivative =
// sum_j dv_i/dq_j (at the effective qualities) * dx_j/dr, model partials
// analytic where available and central differences otherwise, allocation
// derivatives by central differences of step quad_step. Integrals are
// composite trapezoid sums on nodes of width quad_step, which must divide the
// grid step.

namespace detail {

/// Per-(agent, slice) machinery for the condition checkers.
class SliceProbe {
 public:
  SliceProbe(const Mechanism& mechanism, const ValuationModel& model,
             const QualityFunction& q, int agent,
             const std::vector<double>& others, double quad_step)
      : mechanism_(mechanism),
        model_(model),
        q_(q),
        agent_(agent),
        h_(quad_step),
        n_(model.agent_count()) {
    reports_.reserve(n_);
    types_.resize(n_);
    double rest = 0.0;
    int slot = 0;
    for (int j = 0; j < n_; ++j) {
      if (j == agent_) {
        reports_.push_back(Report::of(0.0));
        types_[j] = 0.0;
      } else {
        reports_.push_back(Report::of(others[slot]));
        types_[j] = others[slot];
        rest += others[slot];
        ++slot;
      }
    }
    rest_sum_ = rest;
    exit_allocation_ = allocate(Report::none());
  }

  int agent() const { return agent_; }

  std::vector<double> allocate(const Report& r) {
    reports_[agent_] = r;
    return mechanism_.allocation.allocate(reports_);
  }

  double payment_at(double report) {
    reports_[agent_] = Report::of(report);
    return mechanism_.payment.charge(reports_)[agent_];
  }

  /// v_i at allocation x when the agent's true type is s and the others are
  /// truthful.
  double value_with_type(std::span<const double> x, double s) {
    types_[agent_] = s;
    const std::vector<double> quals = effective_qualities(x, types_, q_);
    return model_.value_of(agent_, quals);
  }

  double exit_value(double s) { return value_with_type(exit_allocation_, s); }

  /// dx_j/dr at report r, central differences; one-sided where the domain of
  /// the quality function (or r >= 0) would be left.
  std::vector<double> allocation_derivative(double r) {
    const bool central_up =
        r + h_ + rest_sum_ <= q_.domain_max() - kDomainSlack;
    const double hi = central_up ? r + h_ : r;
    const double lo = r - h_ >= 0.0 ? r - h_ : r;
    if (hi == lo)
      throw std::invalid_argument(
          "condition check: cannot differentiate the allocation at " +
          std::to_string(r));
    const std::vector<double> x_hi = allocate(Report::of(hi));
    const std::vector<double> x_lo = allocate(Report::of(lo));
    std::vector<double> d(n_);
    for (int j = 0; j < n_; ++j) d[j] = (x_hi[j] - x_lo[j]) / (hi - lo);
    return d;
  }

  /// Report-derivative of v_i at report r and true type s, taken through the
  /// allocation path.
  double report_derivative(double r, double s,
                           const std::vector<double>& dx_dr) {
    const std::vector<double> x = allocate(Report::of(r));
    types_[agent_] = s;
    const std::vector<double> quals = effective_qualities(x, types_, q_);
    double g = 0.0;
    for (int j = 0; j < n_; ++j) {
      if (dx_dr[j] == 0.0) continue;
      const double partial =
          model_.has_analytic_partials()
              ? model_.partial(agent_, j, quals)
              : numeric_partial(model_, agent_, j, quals, h_);
      g += partial * dx_dr[j];
    }
    return g;
  }

  double report_derivative(double r, double s) {
    return report_derivative(r, s, allocation_derivative(r));
  }

  /// d/ds of the stay-out value at true type s, central differences.
  double exit_type_derivative(double s) {
    const bool central_up = s + h_ <= q_.domain_max() - kDomainSlack;
    const double hi = central_up ? s + h_ : s;
    const double lo = s - h_ >= 0.0 ? s - h_ : s;
    return (exit_value(hi) - exit_value(lo)) / (hi - lo);
  }

 private:
  const Mechanism& mechanism_;
  const ValuationModel& model_;
  const QualityFunction& q_;
  int agent_;
  double h_;
  int n_;
  double rest_sum_ = 0.0;
  ReportProfile reports_;
  TypeProfile types_;
  std::vector<double> exit_allocation_;
};

/// Cumulative trapezoid sums of f over nodes k*h, k = 0..node_count-1.
/// out[k] = integral from 0 to k*h.
template <typename F>
std::vector<double> cumulative_trapezoid(int node_count, double h, const F& f) {
  std::vector<double> cumulative(node_count, 0.0);
  double prev = f(0.0);
  for (int k = 1; k < node_count; ++k) {
    const double cur = f(static_cast<double>(k) * h);
    cumulative[k] = cumulative[k - 1] + 0.5 * (prev + cur) * h;
    prev = cur;
  }
  return cumulative;
}

inline int quad_nodes_per_grid_step(const GridSpec& grid, double quad_step) {
  const double ratio = grid.step() / quad_step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument(
        "condition check: quad_step must evenly divide the grid step");
  return static_cast<int>(rounded);
}

enum class ConditionSide { kNecessary, kSufficient };

inline AuditReport check_conditions(ConditionSide side,
                                    const Mechanism& mechanism,
                                    const ValuationModel& model,
                                    const QualityFunction& q,
                                    const GridSpec& grid, double quad_step,
                                    double tol, int threads) {
  const int n = model.agent_count();
  const std::vector<double> pts = grid.numeric_points();
  const std::size_t g = pts.size();
  const int per_step = quad_nodes_per_grid_step(grid, quad_step);
  const int node_count = per_step * (static_cast<int>(g) - 1) + 1;
  const auto node_of = [per_step](int grid_index) {
    return grid_index * per_step;
  };

  const AuditProperty property = side == ConditionSide::kNecessary
                                     ? AuditProperty::kNecessaryConditions
                                     : AuditProperty::kSufficientConditions;
  const std::size_t slices = pow_count(g, n - 1);
  const std::size_t total = slices * static_cast<std::size_t>(n);
  const auto chunks = make_chunks(total, threads);

  std::vector<AuditReport> parts;
  parts.reserve(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c)
    parts.emplace_back(property, tol, grid);

  run_chunks(chunks, [&](const ChunkRange& chunk) {
    AuditReport& local = parts[chunk.index];
    std::vector<int> idx(n - 1);
    std::vector<double> others(n - 1);
    for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
      const int agent = static_cast<int>(flat % n);
      const std::size_t slice = flat / n;
      decode_indices(slice, g, n - 1, idx);
      for (int k = 0; k < n - 1; ++k) others[k] = pts[idx[k]];

      SliceProbe probe(mechanism, model, q, agent, others, quad_step);

      // Full profile (for violation records) with the agent's slot at 0.
      std::vector<double> profile(n, 0.0);
      for (int j = 0, slot = 0; j < n; ++j)
        if (j != agent) profile[j] = others[slot++];

      // Participation bound at the bottom report.
      {
        const std::vector<double> x0 = probe.allocate(Report::of(0.0));
        const double bound =
            probe.value_with_type(x0, 0.0) - probe.exit_value(0.0);
        const double margin = bound - probe.payment_at(0.0);
        local.record_check(margin);
        if (margin < -tol)
          local.violations.push_back(AuditViolation{
              profile, agent, Report::of(0.0), margin, "eq1:bottom-payment"});
      }

      // Diagonal integrand: report-derivative along truthful reports.
      const std::vector<double> diag = cumulative_trapezoid(
          node_count, quad_step,
          [&](double s) { return probe.report_derivative(s, s); });

      std::vector<double> payments(g);
      for (std::size_t k = 0; k < g; ++k) payments[k] = probe.payment_at(pts[k]);

      if (side == ConditionSide::kNecessary) {
        for (std::size_t a = 0; a < g; ++a) {
          for (std::size_t b = a + 1; b < g; ++b) {
            const double rhs = diag[node_of(b)] - diag[node_of(a)];
            const double margin = rhs - (payments[b] - payments[a]);
            local.record_check(margin);
            if (margin < -tol)
              local.violations.push_back(AuditViolation{
                  profile, agent, Report::of(pts[a]), margin,
                  "eq2:payment-increment t'=" + std::to_string(pts[a]) +
                      " t=" + std::to_string(pts[b])});
          }
        }
      } else {
        // Allocation condition: the report-derivative at report a is
        // smallest at the truthful true type.
        for (std::size_t a = 0; a < g; ++a) {
          const std::vector<double> dx = probe.allocation_derivative(pts[a]);
          const double at_truth = probe.report_derivative(pts[a], pts[a], dx);
          for (std::size_t b = a + 1; b < g; ++b) {
            const double above = probe.report_derivative(pts[a], pts[b], dx);
            const double margin = above - at_truth;
            local.record_check(margin);
            if (margin < -tol)
              local.violations.push_back(AuditViolation{
                  profile, agent, Report::of(pts[a]), margin,
                  "eq3:allocation-monotonicity t'=" + std::to_string(pts[a]) +
                      " t=" + std::to_string(pts[b])});
          }
        }
        const std::vector<double> exit_growth = cumulative_trapezoid(
            node_count, quad_step,
            [&](double s) { return probe.exit_type_derivative(s); });
        for (std::size_t a = 0; a < g; ++a) {
          for (std::size_t b = a + 1; b < g; ++b) {
            const double rhs = (diag[node_of(b)] - diag[node_of(a)]) -
                               (exit_growth[node_of(b)] - exit_growth[node_of(a)]);
            const double margin = rhs - (payments[b] - payments[a]);
            local.record_check(margin);
            if (margin < -tol)
              local.violations.push_back(AuditViolation{
                  profile, agent, Report::of(pts[a]), margin,
                  "eq4:payment-increment t'=" + std::to_string(pts[a]) +
                      " t=" + std::to_string(pts[b])});
          }
        }
      }
    }
  });

  AuditReport report(property, tol, grid);
  for (auto& part : parts) report.absorb(std::move(part));
  report.finalize();
  return report;
}

}  // namespace detail

/// Conditions every truthful and rational mechanism satisfies: the bottom
/// payment is capped by the participation surplus at type 0, and payment
/// increments are capped by the diagonal report-derivative integral.
inline AuditReport check_necessary_conditions(
    const Mechanism& mechanism, const ValuationModel& model,
    const QualityFunction& q, const GridSpec& grid, double quad_step = 1e-3,
    double tol = 1e-6, int threads = 1) {
  return detail::check_conditions(detail::ConditionSide::kNecessary, mechanism,
                                  model, q, grid, quad_step, tol, threads);
}

/// Conditions that guarantee a mechanism is truthful and rational: the
/// necessary bottom-payment bound, the allocation-monotonicity condition, and
/// the tighter payment-increment bound with the stay-out growth subtracted.
inline AuditReport check_sufficient_conditions(
    const Mechanism& mechanism, const ValuationModel& model,
    const QualityFunction& q, const GridSpec& grid, double quad_step = 1e-3,
    double tol = 1e-6, int threads = 1) {
  return detail::check_conditions(detail::ConditionSide::kSufficient, mechanism,
                                  model, q, grid, quad_step, tol, threads);
}

}  // namespace datamkt
