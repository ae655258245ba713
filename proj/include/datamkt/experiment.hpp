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

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "datamkt/audit.hpp"
#include "datamkt/core.hpp"
#include "datamkt/existence.hpp"
#include "datamkt/mechanism.hpp"
#include "datamkt/parallel.hpp"
#include "datamkt/rational.hpp"
#include "datamkt/rng.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

// Seeded simulation harness. Every run derives one RNG substream per
// (experiment, sweep point, sample) from the root seed, so serial and
// parallel executions produce bit-identical rows. Draw order inside a sample
// is part of the contract: externality matrix first (row-major), then types.

inline constexpr std::uint64_t kScalingStream = 1;
inline constexpr std::uint64_t kTypeSweepStream = 2;

/// One sampled market: off-diagonal externality coefficients uniform on
/// [-1, 1), diagonals uniform on [0, 1) when `positive_diagonal` is set (an
/// agent's own model never hurts him, which the truthfulness guarantee and
/// the reported revenue/welfare behavior both need), and types uniform on
/// [0, 1).
struct SampledLinearInstance {
  std::vector<std::vector<double>> alpha;
  TypeProfile types;
};

inline SampledLinearInstance sample_linear_instance(Substream& stream, int agents,
                                                    bool positive_diagonal) {
  SampledLinearInstance inst;
  inst.alpha.assign(agents, std::vector<double>(agents));
  for (int i = 0; i < agents; ++i)
    for (int j = 0; j < agents; ++j) {
      double draw = stream.uniform(-1.0, 1.0);
      if (positive_diagonal && i == j) draw = 0.5 * (draw + 1.0);  // to [0, 1)
      inst.alpha[i][j] = draw;
    }
  inst.types.resize(agents);
  for (int i = 0; i < agents; ++i) inst.types[i] = stream.uniform(0.0, 1.0);
  return inst;
}

struct ScalingConfig {
  std::uint64_t seed = 20260809;
  int samples = 50;
  int n_min = 2;
  int n_max = 16;
  int threads = 1;
};

struct ScalingRow {
  int agents = 0;
  double revenue = 0.0;       // mean platform revenue
  double welfare = 0.0;       // mean total value
  double best_quality = 0.0;  // mean quality of the best trainable model
};

/// Revenue, welfare and best trained-model quality of the
/// maximal-exploitation mechanism as the market grows from n_min to n_max
/// agents; sigmoid quality, truthful reports, means over `samples` draws.
inline std::vector<ScalingRow> mep_scaling_experiment(const ScalingConfig& cfg) {
  if (cfg.samples < 1 || cfg.n_min < 1 || cfg.n_max < cfg.n_min)
    throw std::invalid_argument("mep_scaling_experiment: bad configuration");
  const QualityFunction q = QualityFunction::sigmoid();
  const int n_count = cfg.n_max - cfg.n_min + 1;
  const std::size_t total =
      static_cast<std::size_t>(n_count) * static_cast<std::size_t>(cfg.samples);

  struct Sample {
    double revenue = 0.0, welfare = 0.0, best_quality = 0.0;
  };
  std::vector<Sample> samples(total);

  const auto chunks = make_chunks(total, cfg.threads);
  run_chunks(chunks, [&](const ChunkRange& chunk) {
    for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
      const int n = cfg.n_min + static_cast<int>(flat / cfg.samples);
      const std::uint64_t k = flat % cfg.samples;
      Substream stream(cfg.seed, {kScalingStream,
                                  static_cast<std::uint64_t>(n), k});
      const SampledLinearInstance inst =
          sample_linear_instance(stream, n, /*positive_diagonal=*/true);
      const auto model = std::make_shared<LinearExternalityModel>(inst.alpha);
      const Mechanism mech =
          mep_mechanism(efficient_linear_allocation(inst.alpha, q), model, q);
      const Outcome out =
          run_mechanism(mech, *model, q, inst.types, truthful_reports(inst.types));
      double contributed = 0.0;
      for (double t : inst.types) contributed += t;
      samples[flat] = Sample{out.revenue, out.welfare, q(contributed)};
    }
  });

  std::vector<ScalingRow> rows;
  rows.reserve(n_count);
  for (int j = 0; j < n_count; ++j) {
    ScalingRow row;
    row.agents = cfg.n_min + j;
    for (int k = 0; k < cfg.samples; ++k) {
      const Sample& s = samples[static_cast<std::size_t>(j) * cfg.samples + k];
      row.revenue += s.revenue;
      row.welfare += s.welfare;
      row.best_quality += s.best_quality;
    }
    row.revenue /= cfg.samples;
    row.welfare /= cfg.samples;
    row.best_quality /= cfg.samples;
    rows.push_back(row);
  }
  return rows;
}

struct TypeSweepConfig {
  std::uint64_t seed = 20260809;
  int samples = 50;
  double t2_min = 0.0;
  double t2_max = 2.0;
  double t2_step = 0.1;
  int threads = 1;
};

struct TypeSweepRow {
  double t2 = 0.0;
  double welfare = 0.0;
  double revenue = 0.0;
  double uti_1 = 0.0;  // the agent whose type stays at 1
  double uti_2 = 0.0;  // the agent whose type sweeps
};

/// Two-agent sweep: agent 1's type pinned at 1, agent 2's type swept across
/// [t2_min, t2_max]; fresh externality draws per sample, truthful reports.
inline std::vector<TypeSweepRow> mep_type_sweep(const TypeSweepConfig& cfg) {
  if (cfg.samples < 1 || !(cfg.t2_step > 0.0) || cfg.t2_max < cfg.t2_min)
    throw std::invalid_argument("mep_type_sweep: bad configuration");
  const QualityFunction q = QualityFunction::sigmoid();
  const int points =
      static_cast<int>(std::floor((cfg.t2_max - cfg.t2_min) / cfg.t2_step +
                                  1e-9)) +
      1;
  const std::size_t total =
      static_cast<std::size_t>(points) * static_cast<std::size_t>(cfg.samples);

  struct Sample {
    double welfare = 0.0, revenue = 0.0, u1 = 0.0, u2 = 0.0;
  };
  std::vector<Sample> samples(total);

  const auto chunks = make_chunks(total, cfg.threads);
  run_chunks(chunks, [&](const ChunkRange& chunk) {
    for (std::size_t flat = chunk.begin; flat < chunk.end; ++flat) {
      const std::uint64_t j = flat / cfg.samples;
      const std::uint64_t k = flat % cfg.samples;
      const double t2 = cfg.t2_min + static_cast<double>(j) * cfg.t2_step;
      Substream stream(cfg.seed, {kTypeSweepStream, j, k});
      SampledLinearInstance inst =
          sample_linear_instance(stream, 2, /*positive_diagonal=*/true);
      inst.types = {1.0, t2};
      const auto model = std::make_shared<LinearExternalityModel>(inst.alpha);
      const Mechanism mech =
          mep_mechanism(efficient_linear_allocation(inst.alpha, q), model, q);
      const Outcome out =
          run_mechanism(mech, *model, q, inst.types, truthful_reports(inst.types));
      samples[flat] =
          Sample{out.welfare, out.revenue, out.utilities[0], out.utilities[1]};
    }
  });

  std::vector<TypeSweepRow> rows;
  rows.reserve(points);
  for (int j = 0; j < points; ++j) {
    TypeSweepRow row;
    row.t2 = cfg.t2_min + static_cast<double>(j) * cfg.t2_step;
    for (int k = 0; k < cfg.samples; ++k) {
      const Sample& s = samples[static_cast<std::size_t>(j) * cfg.samples + k];
      row.welfare += s.welfare;
      row.revenue += s.revenue;
      row.uti_1 += s.u1;
      row.uti_2 += s.u2;
    }
    row.welfare /= cfg.samples;
    row.revenue /= cfg.samples;
    row.uti_1 /= cfg.samples;
    row.uti_2 /= cfg.samples;
    rows.push_back(row);
  }
  return rows;
}

struct BoundarySweepConfig {
  double alpha_min = -1.0;
  double alpha_max = -0.668;
  double alpha_step = 0.002;
  int cap = 500;
  int agents = 2;
  double tol = kDefaultTolerance;
  int threads = 1;
};

struct BoundaryRow {
  double alpha = 0.0;
  int boundary = 0;
  bool open_above = false;
};

inline std::vector<BoundaryRow> boundary_sweep_over(
    const std::vector<double>& alphas, int cap, int agents,
    double tol = kDefaultTolerance, int threads = 1) {
  std::vector<BoundaryRow> rows(alphas.size());
  const auto chunks = make_chunks(alphas.size(), threads);
  run_chunks(chunks, [&](const ChunkRange& chunk) {
    for (std::size_t k = chunk.begin; k < chunk.end; ++k) {
      const DisparityResult r = disparity_boundary(alphas[k], cap, agents, tol,
                                                   /*threads=*/1);
      rows[k] = BoundaryRow{alphas[k], r.boundary, r.open_above};
    }
  });
  return rows;
}

/// Largest feasible data disparity per market growth rate, swept across
/// [alpha_min, alpha_max] in steps of alpha_step. Deterministic (no sampling).
inline std::vector<BoundaryRow> boundary_sweep(const BoundarySweepConfig& cfg) {
  if (!(cfg.alpha_step > 0.0) || cfg.alpha_max < cfg.alpha_min)
    throw std::invalid_argument("boundary_sweep: bad configuration");
  std::vector<double> alphas;
  const int points = static_cast<int>(std::floor(
                         (cfg.alpha_max - cfg.alpha_min) / cfg.alpha_step +
                         1e-9)) +
                     1;
  alphas.reserve(points);
  for (int k = 0; k < points; ++k)
    alphas.push_back(cfg.alpha_min + static_cast<double>(k) * cfg.alpha_step);
  return boundary_sweep_over(alphas, cfg.cap, cfg.agents, cfg.tol, cfg.threads);
}

/// The two-agent fixed-market instance where the harm-based mechanism fails
/// to be truthful: types (10, 1), proportional value split, identity quality,
/// best-model allocation. Exact fractions from rational arithmetic alongside
/// the floating-point mechanism run.
struct VcgCounterexampleReport {
  TypeProfile true_types{10.0, 1.0};
  double deviation_report = 3.0;
  Rational truthful_u1;
  Rational deviating_u1;
  Rational ic_margin;  // deviating minus truthful
  double truthful_u1_float = 0.0;
  double deviating_u1_float = 0.0;
  bool ic_violation = false;      // exact: deviating > truthful
  bool auditor_flagged = false;   // grid audit found the same deviation
  std::size_t auditor_violations = 0;
};

inline VcgCounterexampleReport vcg_counterexample_report() {
  VcgCounterexampleReport report;
  const Rational t1(10), t2(1), dev(3);

  // Exact arithmetic, mirroring each mechanism step.
  const auto proportional = [](const Rational& qa, const Rational& qb) {
    return qa / (qa + qb);
  };
  {
    // Truthful: both report honestly, everyone gets the pooled model.
    const Rational pooled = t1 + t2;
    const Rational q1 = Rational::max(pooled, t1), q2 = Rational::max(pooled, t2);
    const Rational v1 = proportional(q1, q2);
    // Harm payment: others' value had agent 1 stayed out, minus now.
    const Rational exit_q1 = t1;  // own-data model only
    const Rational exit_q2 = Rational::max(t2, t2);
    const Rational p1 =
        proportional(exit_q2, exit_q1) - proportional(q2, q1);
    report.truthful_u1 = v1 - p1;
  }
  {
    // Agent 1 reports 3 = 3 * t2 instead of 10.
    const Rational pooled = dev + t2;
    const Rational q1_true = Rational::max(pooled, t1);  // keeps his own model
    const Rational q2 = Rational::max(pooled, t2);
    const Rational v1 = proportional(q1_true, q2);
    // The platform prices from reports alone.
    const Rational q1_reported = Rational::max(pooled, dev);
    const Rational exit_q1 = dev;
    const Rational exit_q2 = Rational::max(t2, t2);
    const Rational p1 =
        proportional(exit_q2, exit_q1) - proportional(q2, q1_reported);
    report.deviating_u1 = v1 - p1;
  }
  report.ic_margin = report.deviating_u1 - report.truthful_u1;
  report.ic_violation = report.ic_margin > Rational(0);

  // Floating-point mechanism run.
  const auto model = std::make_shared<ProportionalFixedMarketModel>(2);
  const QualityFunction q = QualityFunction::identity(21.0);
  std::vector<AllocationRule> family{best_model_allocation(2, q)};
  const Mechanism mech = vcg_mechanism(model, family, q);
  const TypeProfile types{10.0, 1.0};
  report.truthful_u1_float =
      run_mechanism(mech, *model, q, types, truthful_reports(types))
          .utilities[0];
  report.deviating_u1_float =
      run_mechanism(mech, *model, q, types,
                    ReportProfile{Report::of(3.0), Report::of(1.0)})
          .utilities[0];

  // Grid audit over whole-number types up to 10 must flag the same deviation.
  const AuditReport audit =
      audit_ic(mech, *model, q, GridSpec(10.0, 1.0), 1e-9);
  report.auditor_violations = audit.violations.size();
  for (const AuditViolation& v : audit.violations) {
    if (v.agent == 0 && v.profile == std::vector<double>{10.0, 1.0} &&
        v.deviation && v.deviation->participates() &&
        v.deviation->size() == 3.0)
      report.auditor_flagged = true;
  }
  return report;
}

}  // namespace datamkt
