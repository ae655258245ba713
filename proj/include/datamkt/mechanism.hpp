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
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "datamkt/core.hpp"
#include "datamkt/valuation.hpp"

namespace datamkt {

/// Maps a report profile to the model quality each agent receives.
/// Non-participants always receive 0; participants receive at least the
/// quality of their own-report model and at most the quality of a model
/// trained on every contributed report.
struct AllocationRule {
  std::string label;
  int agents = 0;
  std::function<std::vector<double>(const ReportProfile&)> allocate;
};

/// Maps a report profile to the amount each agent pays the platform.
/// Non-participants pay nothing. `charge_one`, when set, must agree with
/// charge(reports)[agent]; it spares the audits the other agents' payments.
/// Wrappers that replace `charge` must clear or replace it.
struct PaymentRule {
  std::string label;
  int agents = 0;
  std::function<std::vector<double>(const ReportProfile&)> charge;
  std::function<double(const ReportProfile&, int)> charge_one;
};

struct Mechanism {
  std::string label;
  AllocationRule allocation;
  PaymentRule payment;

  Mechanism(std::string label_, AllocationRule allocation_, PaymentRule payment_)
      : label(std::move(label_)),
        allocation(std::move(allocation_)),
        payment(std::move(payment_)) {
    if (allocation.agents != payment.agents)
      throw std::invalid_argument(
          "Mechanism: allocation and payment rules disagree on agent count");
  }
};

/// Sum of participating report sizes: the data the platform can train on.
inline double contributed_data(const ReportProfile& reports) {
  double total = 0.0;
  for (const Report& r : reports)
    if (r.participates()) total += r.size();
  return total;
}

/// Deployed qualities when allocation x meets a profile treated as the agents'
/// data: participants keep the better of the allocated model and their
/// own-data model, absent agents have only the allocation (0 when the rule
/// gave them nothing).
inline std::vector<double> effective_qualities(std::span<const double> x,
                                               const ReportProfile& data,
                                               const QualityFunction& q) {
  if (x.size() != data.size())
    throw std::invalid_argument("effective_qualities: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = data[i].participates() ? effective_quality(x[i], q, data[i].size())
                                    : x[i];
  return out;
}

inline std::vector<double> effective_qualities(std::span<const double> x,
                                               const TypeProfile& types,
                                               const QualityFunction& q) {
  if (x.size() != types.size())
    throw std::invalid_argument("effective_qualities: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = effective_quality(x[i], q, types[i]);
  return out;
}

/// Every participant gets the best model the platform can train from all
/// contributions; non-participants get nothing.
inline AllocationRule best_model_allocation(int agents, QualityFunction q) {
  AllocationRule rule;
  rule.label = "best-model";
  rule.agents = agents;
  rule.allocate = [agents, q](const ReportProfile& reports) {
    if (static_cast<int>(reports.size()) != agents)
      throw std::invalid_argument("best-model allocation: wrong profile size");
    const double best = q(contributed_data(reports));
    std::vector<double> x(reports.size(), 0.0);
    for (std::size_t i = 0; i < reports.size(); ++i)
      if (reports[i].participates()) x[i] = best;
    return x;
  };
  return rule;
}

/// Welfare-maximizing rule for linear externalities: agent i gets the best
/// trainable model when his net influence on the market (column sum of alpha)
/// is nonnegative, otherwise only his own-report model. The own-report floor
/// is behaviorally equivalent to excluding him, since he can always fall
/// back to his own data.
inline AllocationRule efficient_linear_allocation(
    const std::vector<std::vector<double>>& alpha, QualityFunction q) {
  const int n = static_cast<int>(alpha.size());
  std::vector<char> give(n, 0);
  for (int j = 0; j < n; ++j) {
    double col = 0.0;
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(alpha[i].size()) != n)
        throw std::invalid_argument(
            "efficient linear allocation: matrix is not square");
      col += alpha[i][j];
    }
    give[j] = col >= 0.0 ? 1 : 0;
  }
  AllocationRule rule;
  rule.label = "efficient-linear";
  rule.agents = n;
  rule.allocate = [n, give, q](const ReportProfile& reports) {
    if (static_cast<int>(reports.size()) != n)
      throw std::invalid_argument(
          "efficient linear allocation: wrong profile size");
    const double best = q(contributed_data(reports));
    std::vector<double> x(reports.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      if (!reports[i].participates()) continue;
      x[i] = give[i] ? best : q(reports[i].size());
    }
    return x;
  };
  return rule;
}

/// One member of the give/withhold lattice: agents in `give_mask` get the best
/// trainable model, the rest keep their own-report model.
inline AllocationRule give_withhold_allocation(int agents, QualityFunction q,
                                               std::uint32_t give_mask) {
  if (agents > 31)
    throw std::invalid_argument("give/withhold lattice: too many agents");
  AllocationRule rule;
  std::string tag;
  for (int i = 0; i < agents; ++i)
    tag += (give_mask >> i) & 1u ? 'G' : 'W';
  rule.label = "lattice:" + tag;
  rule.agents = agents;
  rule.allocate = [agents, q, give_mask](const ReportProfile& reports) {
    if (static_cast<int>(reports.size()) != agents)
      throw std::invalid_argument("lattice allocation: wrong profile size");
    const double best = q(contributed_data(reports));
    std::vector<double> x(reports.size(), 0.0);
    for (int i = 0; i < agents; ++i) {
      if (!reports[i].participates()) continue;
      x[i] = (give_mask >> i) & 1u ? best : q(reports[i].size());
    }
    return x;
  };
  return rule;
}

/// All 2^n give/withhold combinations, withhold-everyone first, give-everyone
/// last.
inline std::vector<AllocationRule> give_withhold_family(
    int agents, const QualityFunction& q) {
  std::vector<AllocationRule> family;
  family.reserve(std::size_t{1} << agents);
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << agents); ++mask)
    family.push_back(give_withhold_allocation(agents, q, mask));
  return family;
}

inline PaymentRule zero_payment(int agents) {
  PaymentRule rule;
  rule.label = "zero";
  rule.agents = agents;
  rule.charge = [agents](const ReportProfile& reports) {
    if (static_cast<int>(reports.size()) != agents)
      throw std::invalid_argument("zero payment: wrong profile size");
    return std::vector<double>(reports.size(), 0.0);
  };
  rule.charge_one = [](const ReportProfile&, int) { return 0.0; };
  return rule;
}

/// Maximal exploitation payment: each participant is charged the full value
/// difference between joining and staying out, both sides evaluated at the
/// reported profile (the platform never sees true types). Staying out means
/// the allocation is re-run without the agent and he keeps his own-report
/// model.
inline std::vector<double> mep_payment(const AllocationRule& allocation,
                                       const ValuationModel& model,
                                       const QualityFunction& q,
                                       const ReportProfile& reports) {
  const int n = model.agent_count();
  if (static_cast<int>(reports.size()) != n)
    throw std::invalid_argument("mep_payment: wrong profile size");
  const std::vector<double> x_in = allocation.allocate(reports);
  const std::vector<double> q_in = effective_qualities(x_in, reports, q);
  std::vector<double> p(n, 0.0);
  ReportProfile exited = reports;
  for (int i = 0; i < n; ++i) {
    if (!reports[i].participates()) continue;
    exited[i] = Report::none();
    const std::vector<double> x_out = allocation.allocate(exited);
    const std::vector<double> q_out = effective_qualities(x_out, reports, q);
    p[i] = model.value_of(i, q_in) - model.value_of(i, q_out);
    exited[i] = reports[i];
  }
  return p;
}

inline PaymentRule mep_payment_rule(AllocationRule allocation, ModelPtr model,
                                    QualityFunction q) {
  PaymentRule rule;
  rule.label = "mep";
  rule.agents = model->agent_count();
  rule.charge = [allocation, model, q](const ReportProfile& reports) {
    return mep_payment(allocation, *model, q, reports);
  };
  rule.charge_one = [allocation, model, q](const ReportProfile& reports,
                                           int agent) {
    if (!reports[agent].participates()) return 0.0;
    const std::vector<double> x_in = allocation.allocate(reports);
    const std::vector<double> q_in = effective_qualities(x_in, reports, q);
    ReportProfile exited = reports;
    exited[agent] = Report::none();
    const std::vector<double> x_out = allocation.allocate(exited);
    const std::vector<double> q_out = effective_qualities(x_out, reports, q);
    return model->value_of(agent, q_in) - model->value_of(agent, q_out);
  };
  return rule;
}

inline Mechanism mep_mechanism(AllocationRule allocation, ModelPtr model,
                               QualityFunction q) {
  std::string label = "mep+" + allocation.label;
  PaymentRule payment = mep_payment_rule(allocation, std::move(model), q);
  return Mechanism(std::move(label), std::move(allocation), std::move(payment));
}

/// Best model for everyone, no payments.
inline Mechanism free_mechanism(int agents, QualityFunction q) {
  return Mechanism("free", best_model_allocation(agents, q),
                   zero_payment(agents));
}

struct VcgEvaluation {
  std::size_t chosen_rule = 0;
  std::vector<double> allocation;
  std::vector<double> payments;
};

namespace detail {

/// Index of the welfare-maximizing family member at `reports`, treating the
/// reports as the agents' data. Ties break toward the earlier member.
inline std::size_t vcg_argmax(const ValuationModel& model,
                              std::span<const AllocationRule> family,
                              const QualityFunction& q,
                              const ReportProfile& reports) {
  std::size_t best = 0;
  double best_welfare = 0.0;
  for (std::size_t k = 0; k < family.size(); ++k) {
    const std::vector<double> x = family[k].allocate(reports);
    const std::vector<double> quals = effective_qualities(x, reports, q);
    const double welfare = market_size(model, quals);
    if (k == 0 || welfare > best_welfare) {
      best = k;
      best_welfare = welfare;
    }
  }
  return best;
}

}  // namespace detail

/// Classic harm-based mechanism: pick the welfare-maximizing allocation from
/// the family at the reported profile, then charge each agent the drop his
/// participation causes in everyone else's value. The no-i counterfactual
/// re-optimizes over the family at the reduced profile.
inline VcgEvaluation vcg_evaluate(const ValuationModel& model,
                                  std::span<const AllocationRule> family,
                                  const QualityFunction& q,
                                  const ReportProfile& reports) {
  if (family.empty())
    throw std::invalid_argument("vcg: allocation family is empty");
  const int n = model.agent_count();
  if (static_cast<int>(reports.size()) != n)
    throw std::invalid_argument("vcg: wrong profile size");

  VcgEvaluation result;
  result.chosen_rule = detail::vcg_argmax(model, family, q, reports);
  result.allocation = family[result.chosen_rule].allocate(reports);
  const std::vector<double> q_in =
      effective_qualities(result.allocation, reports, q);

  result.payments.assign(n, 0.0);
  ReportProfile exited = reports;
  for (int i = 0; i < n; ++i) {
    if (!reports[i].participates()) continue;
    exited[i] = Report::none();
    const std::size_t rule_out = detail::vcg_argmax(model, family, q, exited);
    const std::vector<double> x_out = family[rule_out].allocate(exited);
    // Others' values in both scenarios are measured at the full reported
    // profile; the exiting agent falls back to his own-report model.
    const std::vector<double> q_out = effective_qualities(x_out, reports, q);
    double others_without = 0.0;
    double others_with = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      others_without += model.value_of(j, q_out);
      others_with += model.value_of(j, q_in);
    }
    result.payments[i] = others_without - others_with;
    exited[i] = reports[i];
  }
  return result;
}

inline Mechanism vcg_mechanism(ModelPtr model, std::vector<AllocationRule> family,
                               QualityFunction q) {
  if (family.empty())
    throw std::invalid_argument("vcg: allocation family is empty");
  const int n = model->agent_count();
  auto shared_family =
      std::make_shared<const std::vector<AllocationRule>>(std::move(family));
  AllocationRule allocation;
  allocation.label = "vcg-welfare-argmax";
  allocation.agents = n;
  allocation.allocate = [model, shared_family, q](const ReportProfile& reports) {
    const std::size_t k =
        detail::vcg_argmax(*model, *shared_family, q, reports);
    return (*shared_family)[k].allocate(reports);
  };
  PaymentRule payment;
  payment.label = "vcg-harm";
  payment.agents = n;
  payment.charge = [model, shared_family, q](const ReportProfile& reports) {
    return vcg_evaluate(*model, *shared_family, q, reports).payments;
  };
  return Mechanism("vcg", std::move(allocation), std::move(payment));
}

/// Runs a mechanism end to end: allocation and payments from the reports,
/// deployed qualities from the *true* types, values and utilities from the
/// model. Rejects reports above the true type.
inline Outcome run_mechanism(const Mechanism& mechanism,
                             const ValuationModel& model,
                             const QualityFunction& q,
                             const TypeProfile& true_types,
                             const ReportProfile& reports) {
  validate_types(true_types);
  validate_reports_against_types(reports, true_types);
  if (static_cast<int>(true_types.size()) != model.agent_count())
    throw std::invalid_argument("run_mechanism: profile size mismatch");

  Outcome outcome;
  outcome.allocation = mechanism.allocation.allocate(reports);
  outcome.payments = mechanism.payment.charge(reports);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].participates()) {
      if (outcome.allocation[i] != 0.0)
        throw std::logic_error(mechanism.label +
                               ": allocated to a non-participant");
      if (outcome.payments[i] != 0.0)
        throw std::logic_error(mechanism.label +
                               ": charged a non-participant");
    }
  }
  outcome.effective_qualities =
      effective_qualities(outcome.allocation, true_types, q);
  outcome.values = model.values(outcome.effective_qualities);
  outcome.utilities.resize(outcome.values.size());
  for (std::size_t i = 0; i < outcome.values.size(); ++i) {
    outcome.utilities[i] = outcome.values[i] - outcome.payments[i];
    outcome.revenue += outcome.payments[i];
    outcome.welfare += outcome.values[i];
  }
  return outcome;
}

}  // namespace datamkt
