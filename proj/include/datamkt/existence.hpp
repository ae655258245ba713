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
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "datamkt/core.hpp"
#include "datamkt/mechanism.hpp"
#include "datamkt/parallel.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

// Decides whether any payment rule can make the given allocation truthful,
// rational and budget-balanced on a type grid, and produces the
// revenue-maximal payments when one exists.
//
// For a fixed agent and fixed reports of the others, the payment at each
// report level is bounded above by the participation surplus (rationality)
// and payment increments between report levels are bounded by value
// differences (truthfulness). These difference constraints form a DAG (gap
// edges only point from lower to higher reports), so the pointwise-maximal
// feasible payments are single-source shortest paths from a zero-payment base
// vertex, computable in one ascending dynamic-programming pass. The
// allocation supports a desirable mechanism iff those maximal payments sum to
// a nonnegative budget at every truthful profile.

namespace detail {

/// Value of `agent` when he submits `submitted` while his data is really
/// `true_type` and the other agents submit `others` (in agent order with the
/// agent's slot removed; absent agents contribute no data and deploy only
/// what they are allocated, i.e. nothing).
inline double scenario_value(const ValuationModel& model,
                             const QualityFunction& q,
                             const AllocationRule& alloc, int agent,
                             const Report& submitted, double true_type,
                             std::span<const Report> others) {
  const int n = model.agent_count();
  if (static_cast<int>(others.size()) != n - 1)
    throw std::invalid_argument("scenario_value: wrong slice size");
  ReportProfile profile;
  profile.reserve(n);
  int slot = 0;
  for (int j = 0; j < n; ++j)
    profile.push_back(j == agent ? submitted : others[slot++]);
  const std::vector<double> x = alloc.allocate(profile);
  std::vector<double> quals(n);
  slot = 0;
  for (int j = 0; j < n; ++j) {
    if (j == agent) {
      quals[j] = std::max(x[j], q(true_type));
    } else {
      const Report& r = others[slot++];
      quals[j] = r.participates() ? std::max(x[j], q(r.size())) : x[j];
    }
  }
  return model.value_of(agent, quals);
}

}  // namespace detail

/// Rationality cap on the payment of `agent` reporting (truthfully) t while
/// the others submit `others`: his value inside minus his value after
/// walking away (where he pays nothing and keeps his own-data model).
inline double payment_upper_bound(const ValuationModel& model,
                                  const QualityFunction& q,
                                  const AllocationRule& alloc, int agent,
                                  double t, std::span<const Report> others) {
  return detail::scenario_value(model, q, alloc, agent, Report::of(t), t,
                                others) -
         detail::scenario_value(model, q, alloc, agent, Report::none(), t,
                                others);
}

/// Truthfulness cap on the payment increment between report levels: the value
/// gained by raising the report from `low` to `high` when the agent's data is
/// really `high`. In the under-report scenario he still deploys the better of
/// the allocated model and his own full-data model.
inline double gap(const ValuationModel& model, const QualityFunction& q,
                  const AllocationRule& alloc, int agent, double low,
                  double high, std::span<const Report> others) {
  if (low > high + kDomainSlack)
    throw std::invalid_argument("gap: low report exceeds high report");
  return detail::scenario_value(model, q, alloc, agent, Report::of(high), high,
                                others) -
         detail::scenario_value(model, q, alloc, agent, Report::of(low), high,
                                others);
}

/// Difference-constraint graph for one agent and one fixed slice of the
/// others' submissions: a zero-payment base vertex plus one vertex per grid
/// report level. Rationality caps weight the base->level edges, truthfulness
/// gaps weight the lower->higher edges, so the graph is a DAG ordered by
/// report level and shortest distances fall out of one ascending pass.
class ConstraintGraph {
 public:
  static ConstraintGraph build(const ValuationModel& model,
                               const QualityFunction& q,
                               const AllocationRule& alloc, int agent,
                               std::span<const Report> others,
                               const GridSpec& grid) {
    const std::vector<double> pts = grid.numeric_points();
    const std::size_t g = pts.size();
    ConstraintGraph graph;
    graph.caps_.resize(g);
    graph.gaps_.resize(g * (g - 1) / 2);
    for (std::size_t k = 0; k < g; ++k) {
      graph.caps_[k] =
          payment_upper_bound(model, q, alloc, agent, pts[k], others);
      const double v_in = detail::scenario_value(
          model, q, alloc, agent, Report::of(pts[k]), pts[k], others);
      for (std::size_t j = 0; j < k; ++j) {
        const double v_under = detail::scenario_value(
            model, q, alloc, agent, Report::of(pts[j]), pts[k], others);
        graph.gaps_[pack(j, k)] = v_in - v_under;
      }
    }
    return graph;
  }

  int levels() const { return static_cast<int>(caps_.size()); }

  /// Weight of the base -> level edge.
  double rationality_cap(int level) const { return caps_[level]; }

  /// Weight of the lower -> higher edge; requires lower < higher.
  double gap_weight(int lower, int higher) const {
    if (lower >= higher)
      throw std::invalid_argument("ConstraintGraph: edges point upward only");
    return gaps_[pack(lower, higher)];
  }

  /// Shortest distances from the base vertex, one ascending DAG pass.
  std::vector<double> shortest_from_base() const {
    std::vector<double> dist(caps_);
    for (std::size_t k = 0; k < caps_.size(); ++k)
      for (std::size_t j = 0; j < k; ++j)
        dist[k] = std::min(dist[k], dist[j] + gaps_[pack(j, k)]);
    return dist;
  }

 private:
  static std::size_t pack(std::size_t lower, std::size_t higher) {
    return higher * (higher - 1) / 2 + lower;
  }

  std::vector<double> caps_;
  std::vector<double> gaps_;
};

/// Maximal feasible payments for one agent over all grid report levels, the
/// others' submissions held fixed.
inline std::vector<double> max_payments_slice(const ValuationModel& model,
                                              const QualityFunction& q,
                                              const AllocationRule& alloc,
                                              int agent,
                                              std::span<const Report> others,
                                              const GridSpec& grid) {
  return ConstraintGraph::build(model, q, alloc, agent, others, grid)
      .shortest_from_base();
}

/// Revenue-maximal payments for every agent, report level and slice of the
/// others' submissions, plus the verdict on whether they balance the budget.
class PaymentTable {
 public:
  PaymentTable(GridSpec grid, int agents)
      : grid_(grid),
        agents_(agents),
        slice_count_(detail_pow(static_cast<std::size_t>(grid.num_points()) + 1,
                                agents - 1)),
        values_(static_cast<std::size_t>(agents) * slice_count_ *
                static_cast<std::size_t>(grid.num_points())) {}

  const GridSpec& grid() const { return grid_; }
  int agents() const { return agents_; }
  std::size_t slice_count() const { return slice_count_; }

  bool feasible = true;
  std::optional<std::vector<double>> witness;  // truthful profile, if any

  /// Digit encoding of one slice coordinate: 0 means the agent stayed out,
  /// 1 + k means grid point k.
  std::size_t slice_code(std::span<const Report> others) const {
    if (static_cast<int>(others.size()) != agents_ - 1)
      throw std::invalid_argument("PaymentTable: wrong slice size");
    const std::size_t base = static_cast<std::size_t>(grid_.num_points()) + 1;
    std::size_t code = 0;
    std::size_t weight = 1;
    for (const Report& r : others) {
      const std::size_t digit =
          r.participates()
              ? 1 + static_cast<std::size_t>(grid_.index_of(r.size()))
              : 0;
      code += digit * weight;
      weight *= base;
    }
    return code;
  }

  ReportProfile decode_slice(std::size_t code) const {
    const std::size_t base = static_cast<std::size_t>(grid_.num_points()) + 1;
    ReportProfile others;
    others.reserve(agents_ - 1);
    for (int k = 0; k < agents_ - 1; ++k) {
      const std::size_t digit = code % base;
      code /= base;
      others.push_back(digit == 0 ? Report::none()
                                  : Report::of(grid_.point(
                                        static_cast<int>(digit - 1))));
    }
    return others;
  }

  double& at(int agent, std::size_t slice, int t_index) {
    return values_[flat(agent, slice, t_index)];
  }
  double at(int agent, std::size_t slice, int t_index) const {
    return values_[flat(agent, slice, t_index)];
  }

  /// Payment of `agent` for a full report profile (his own report numeric).
  double payment_for(int agent, const ReportProfile& reports) const {
    if (static_cast<int>(reports.size()) != agents_)
      throw std::invalid_argument("PaymentTable: wrong profile size");
    ReportProfile others;
    others.reserve(agents_ - 1);
    for (int j = 0; j < agents_; ++j)
      if (j != agent) others.push_back(reports[j]);
    return at(agent, slice_code(others), grid_.index_of(reports[agent].size()));
  }

 private:
  static std::size_t detail_pow(std::size_t base, int exp) {
    std::size_t total = 1;
    for (int k = 0; k < exp; ++k) total *= base;
    return total;
  }

  std::size_t flat(int agent, std::size_t slice, int t_index) const {
    return (static_cast<std::size_t>(agent) * slice_count_ + slice) *
               static_cast<std::size_t>(grid_.num_points()) +
           static_cast<std::size_t>(t_index);
  }

  GridSpec grid_;
  int agents_;
  std::size_t slice_count_;
  std::vector<double> values_;
};

/// Decides whether the allocation admits a desirable mechanism on the grid.
/// Computes the maximal payments for every (agent, slice), slices range over
/// all combinations of the others' grid reports and staying out, then checks
/// that they sum to a nonnegative budget at every truthful profile. The first
/// failing profile (profiles enumerated ascending, agent 0 most significant)
/// becomes the witness.
inline PaymentTable desirable_exists(const ValuationModel& model,
                                     const QualityFunction& q,
                                     const AllocationRule& alloc,
                                     const GridSpec& grid,
                                     double tol = kDefaultTolerance,
                                     int threads = 1) {
  const int n = model.agent_count();
  PaymentTable table(grid, n);
  const std::size_t g = grid.num_points();
  const std::size_t total = table.slice_count() * static_cast<std::size_t>(n);

  const auto chunks = make_chunks(total, threads);
  run_chunks(chunks, [&](const ChunkRange& chunk) {
    for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
      const int agent = static_cast<int>(flat % n);
      const std::size_t slice = flat / n;
      const ReportProfile others = table.decode_slice(slice);
      const std::vector<double> dist =
          max_payments_slice(model, q, alloc, agent, others, grid);
      for (std::size_t k = 0; k < g; ++k)
        table.at(agent, slice, static_cast<int>(k)) = dist[k];
    }
  });

  // Budget test over truthful profiles (numeric coordinates only).
  const std::vector<double> pts = grid.numeric_points();
  std::size_t profiles = 1;
  for (int k = 0; k < n; ++k) profiles *= g;
  std::vector<int> idx(n);
  ReportProfile others;
  others.reserve(n - 1);
  for (std::size_t flat = 0; flat < profiles; ++flat) {
    std::size_t rest = flat;
    for (int k = n - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rest % g);
      rest /= g;
    }
    double budget = 0.0;
    for (int i = 0; i < n; ++i) {
      others.clear();
      for (int j = 0; j < n; ++j)
        if (j != i) others.push_back(Report::of(pts[idx[j]]));
      budget += table.at(i, table.slice_code(others), idx[i]);
    }
    if (budget < -tol) {
      table.feasible = false;
      std::vector<double> witness(n);
      for (int k = 0; k < n; ++k) witness[k] = pts[idx[k]];
      table.witness = std::move(witness);
      break;
    }
  }
  return table;
}

/// Payment rule that reads an agent's charge out of a feasible table;
/// together with the allocation that produced the table this is the
/// revenue-maximal desirable mechanism.
inline PaymentRule table_payment_rule(std::shared_ptr<const PaymentTable> table) {
  PaymentRule rule;
  rule.label = "max-table";
  rule.agents = table->agents();
  rule.charge = [table](const ReportProfile& reports) {
    std::vector<double> p(reports.size(), 0.0);
    for (std::size_t i = 0; i < reports.size(); ++i)
      if (reports[i].participates())
        p[i] = table->payment_for(static_cast<int>(i), reports);
    return p;
  };
  rule.charge_one = [table](const ReportProfile& reports, int agent) {
    return reports[agent].participates() ? table->payment_for(agent, reports)
                                         : 0.0;
  };
  return rule;
}

/// Independent feasibility decision for tiny instances (n <= 2, at most six
/// grid points): materializes every rationality and truthfulness constraint,
/// runs unordered constraint propagation to its fixpoint (all-pairs
/// relaxation, no DAG-order insight), and checks the budget sums directly.
inline bool brute_force_oracle(const ValuationModel& model,
                               const QualityFunction& q,
                               const AllocationRule& alloc,
                               const GridSpec& grid,
                               double tol = kDefaultTolerance) {
  const int n = model.agent_count();
  const int g = grid.num_points();
  if (n > 2 || g > 6)
    throw std::invalid_argument(
        "brute_force_oracle: instance too large (need n <= 2 and at most six "
        "grid points)");
  const std::vector<double> pts = grid.numeric_points();

  // Direct scenario arithmetic, kept separate from detail::scenario_value on
  // purpose: the oracle must not share the code path it certifies.
  const auto value_when = [&](int agent, const std::optional<double>& submit,
                              double true_type,
                              const std::optional<double>& other) {
    ReportProfile profile;
    for (int j = 0; j < n; ++j) {
      const std::optional<double>& r = j == agent ? submit : other;
      profile.push_back(r ? Report::of(*r) : Report::none());
    }
    const std::vector<double> x = alloc.allocate(profile);
    std::vector<double> quals(n);
    for (int j = 0; j < n; ++j) {
      if (j == agent)
        quals[j] = std::max(x[j], q(true_type));
      else
        quals[j] = other ? std::max(x[j], q(*other)) : x[j];
    }
    return model.value_of(agent, quals);
  };

  // Slices of the single other agent: index 0 = stays out, 1 + k = point k.
  // (For n = 1 there is exactly one, empty, slice.)
  const int slice_count = n == 1 ? 1 : g + 1;
  std::vector<std::vector<double>> payments(
      static_cast<std::size_t>(n) * slice_count);
  const auto other_of = [&](int slice) -> std::optional<double> {
    if (n == 1 || slice == 0) return std::nullopt;
    return pts[slice - 1];
  };

  for (int agent = 0; agent < n; ++agent) {
    for (int slice = 0; slice < slice_count; ++slice) {
      const std::optional<double> other = other_of(slice);
      std::vector<double>& p = payments[agent * slice_count + slice];
      p.resize(g);
      for (int k = 0; k < g; ++k)
        p[k] = value_when(agent, pts[k], pts[k], other) -
               value_when(agent, std::nullopt, pts[k], other);
      // Unordered relaxation until nothing moves.
      bool changed = true;
      while (changed) {
        changed = false;
        for (int hi = 0; hi < g; ++hi) {
          for (int lo = 0; lo < g; ++lo) {
            if (pts[lo] >= pts[hi]) continue;
            const double bound = value_when(agent, pts[hi], pts[hi], other) -
                                 value_when(agent, pts[lo], pts[hi], other);
            if (p[hi] > p[lo] + bound + 1e-15) {
              p[hi] = p[lo] + bound;
              changed = true;
            }
          }
        }
      }
    }
  }

  for (int a = 0; a < g; ++a) {
    if (n == 1) {
      if (payments[0][a] < -tol) return false;
      continue;
    }
    for (int b = 0; b < g; ++b) {
      const double budget =
          payments[0 * slice_count + (1 + b)][a] +  // agent 0, other reports b
          payments[1 * slice_count + (1 + a)][b];   // agent 1, other reports a
      if (budget < -tol) return false;
    }
  }
  return true;
}

struct DisparityResult {
  int boundary = 0;      // largest grid span that still admits a mechanism
  bool open_above = false;  // still feasible at the scan cap
  std::vector<char> feasible_by_span;  // entry d-1 answers span d
};

/// Scans data-disparity spans 1..cap (grid step normalized to 1) for the
/// power-law market with the best-model allocation and reports the largest
/// feasible span. The scan is linear and records the whole sequence, so a
/// non-monotone transition would be visible rather than silently bisected
/// away. For two agents the per-slice shortest-path distances are reused
/// across spans: distances only depend on grid points at or below the span,
/// so one pass at the cap answers every smaller span.
inline DisparityResult disparity_boundary(double alpha, int cap, int agents = 2,
                                          double tol = kDefaultTolerance,
                                          int threads = 1) {
  if (!(alpha >= -1.0) || !(alpha <= 0.0))
    throw std::invalid_argument(
        "disparity_boundary: growth exponent must lie in [-1, 0]");
  if (cap < 1) throw std::invalid_argument("disparity_boundary: cap must be >= 1");
  if (agents < 2)
    throw std::invalid_argument("disparity_boundary: need at least two agents");

  const auto model = PowerMarketModel(agents, alpha);
  const QualityFunction q =
      QualityFunction::identity(static_cast<double>(agents) * cap + 2.0);
  const AllocationRule alloc = best_model_allocation(agents, q);

  DisparityResult result;
  result.feasible_by_span.assign(cap, 0);

  if (agents == 2) {
    const GridSpec full(static_cast<double>(cap), 1.0);
    const std::size_t g = full.num_points();  // cap + 1
    // dist[agent][slice][t]: slice 0 = other stays out, 1 + k = other at k.
    std::vector<std::vector<double>> dist(2 * (g + 1));
    const auto chunks = make_chunks(dist.size(), threads);
    run_chunks(chunks, [&](const ChunkRange& chunk) {
      for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
        const int agent = static_cast<int>(flat / (g + 1));
        const std::size_t slice = flat % (g + 1);
        const Report other = slice == 0
                                 ? Report::none()
                                 : Report::of(full.point(static_cast<int>(slice - 1)));
        const ReportProfile others{other};
        dist[flat] = max_payments_slice(model, q, alloc, agent, others, full);
      }
    });
    const auto budget = [&](std::size_t t0, std::size_t t1) {
      return dist[0 * (g + 1) + (1 + t1)][t0] + dist[1 * (g + 1) + (1 + t0)][t1];
    };
    double running_min = budget(0, 0);
    for (int span = 1; span <= cap; ++span) {
      const std::size_t d = static_cast<std::size_t>(span);
      for (std::size_t k = 0; k <= d; ++k) {
        running_min = std::min(running_min, budget(d, k));
        running_min = std::min(running_min, budget(k, d));
      }
      result.feasible_by_span[span - 1] = running_min >= -tol ? 1 : 0;
    }
  } else {
    for (int span = 1; span <= cap; ++span) {
      const GridSpec grid(static_cast<double>(span), 1.0);
      result.feasible_by_span[span - 1] =
          desirable_exists(model, q, alloc, grid, tol, threads).feasible ? 1 : 0;
    }
  }

  for (int span = cap; span >= 1; --span) {
    if (result.feasible_by_span[span - 1]) {
      result.boundary = span;
      break;
    }
  }
  result.open_above = result.feasible_by_span[cap - 1] != 0;
  return result;
}

}  // namespace datamkt
