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

#include "datamkt/conditions.hpp"

#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "datamkt/audit.hpp"
#include "datamkt/rng.hpp"

namespace datamkt {
namespace {

// Smooth two-agent market with convex own-value terms; convexity keeps the
// allocation-monotonicity condition satisfiable by pooled-model rules.
std::shared_ptr<QuasiMonotoneModel> convex_instance(Substream& stream) {
  return smooth_quasi_monotone(
      {SmoothOwnTerm{stream.uniform(0.2, 1.0), stream.uniform(0.1, 0.5), 0.0},
       SmoothOwnTerm{stream.uniform(0.2, 1.0), stream.uniform(0.1, 0.5), 0.0}},
      {{SmoothCrossTerm{stream.uniform(-1.0, 1.0), stream.uniform(-0.3, 0.3)}},
       {SmoothCrossTerm{stream.uniform(-1.0, 1.0),
                        stream.uniform(-0.3, 0.3)}}});
}

// Concave (saturating) own-value terms; still strictly increasing.
std::shared_ptr<QuasiMonotoneModel> concave_instance(Substream& stream) {
  return smooth_quasi_monotone(
      {SmoothOwnTerm{stream.uniform(0.2, 0.8), 0.0, stream.uniform(0.2, 1.0)},
       SmoothOwnTerm{stream.uniform(0.2, 0.8), 0.0, stream.uniform(0.2, 1.0)}},
      {{SmoothCrossTerm{stream.uniform(-1.0, 1.0), 0.0}},
       {SmoothCrossTerm{stream.uniform(-1.0, 1.0), 0.0}}});
}

Mechanism overcharge(const Mechanism& mech, double delta) {
  PaymentRule payment = mech.payment;
  payment.charge = [base = mech.payment.charge,
                    delta](const ReportProfile& r) {
    std::vector<double> p = base(r);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (r[i].participates()) p[i] += delta;
    return p;
  };
  payment.charge_one = nullptr;
  return Mechanism(mech.label + "+overcharge", mech.allocation, payment);
}

TEST(NecessaryConditions, MepPassesOnSmoothMarkets) {
  const QualityFunction q = QualityFunction::sigmoid();
  Substream stream(61);
  for (int k = 0; k < 4; ++k) {
    const auto model =
        k % 2 == 0 ? convex_instance(stream) : concave_instance(stream);
    const Mechanism mech =
        mep_mechanism(best_model_allocation(2, q), model, q);
    const AuditReport report = check_necessary_conditions(
        mech, *model, q, GridSpec(1.0, 0.25), 1e-3, 1e-6);
    EXPECT_TRUE(report.passed) << "instance " << k;
  }
}

TEST(NecessaryConditions, OverchargeFailsTheBottomPaymentBound) {
  const QualityFunction q = QualityFunction::sigmoid();
  Substream stream(67);
  const auto model = convex_instance(stream);
  const Mechanism mech =
      overcharge(mep_mechanism(best_model_allocation(2, q), model, q), 0.01);
  const AuditReport report = check_necessary_conditions(
      mech, *model, q, GridSpec(1.0, 0.25), 1e-3, 1e-6);
  EXPECT_FALSE(report.passed);
  bool eq1_failed = false;
  for (const AuditViolation& v : report.violations)
    if (v.detail.rfind("eq1", 0) == 0) {
      eq1_failed = true;
      EXPECT_NEAR(v.margin, -0.01, 1e-9);
    }
  EXPECT_TRUE(eq1_failed);
}

TEST(NecessaryConditions, FreeMechanismWithMonotoneAllocationPasses) {
  const QualityFunction q = QualityFunction::identity(4.0);
  const auto model = std::make_shared<PowerMarketModel>(2, 0.0);
  const Mechanism mech = free_mechanism(2, q);
  const AuditReport report = check_necessary_conditions(
      mech, *model, q, GridSpec(1.0, 0.25), 1e-3, 1e-6);
  EXPECT_TRUE(report.passed);
}

TEST(NecessaryConditions, ToleranceHoldsAsTheStepShrinks) {
  const QualityFunction q = QualityFunction::sigmoid();
  Substream stream(71);
  const auto model = concave_instance(stream);
  const Mechanism mech = mep_mechanism(best_model_allocation(2, q), model, q);
  EXPECT_TRUE(check_necessary_conditions(mech, *model, q, GridSpec(1.0, 0.25),
                                         5e-3, 1e-5)
                  .passed);
  EXPECT_TRUE(check_necessary_conditions(mech, *model, q, GridSpec(1.0, 0.25),
                                         1e-3, 1e-6)
                  .passed);
}

TEST(SufficientConditions, FreeMechanismOnTheFlatPowerMarketPasses) {
  const QualityFunction q = QualityFunction::identity(4.0);
  const auto model = std::make_shared<PowerMarketModel>(2, 0.0);
  const Mechanism mech = free_mechanism(2, q);
  const AuditReport report = check_sufficient_conditions(
      mech, *model, q, GridSpec(1.0, 0.25), 1e-3, 1e-6);
  EXPECT_TRUE(report.passed);
}

TEST(SufficientConditions, PassingMechanismsAreTruthfulAndRational) {
  const QualityFunction q = QualityFunction::sigmoid();
  Substream stream(73);
  int passes = 0;
  for (int k = 0; k < 6; ++k) {
    const auto model =
        k % 2 == 0 ? convex_instance(stream) : concave_instance(stream);
    const Mechanism mech =
        mep_mechanism(best_model_allocation(2, q), model, q);
    const GridSpec grid(1.0, 0.25);
    const AuditReport sufficient =
        check_sufficient_conditions(mech, *model, q, grid, 1e-3, 1e-6);
    if (sufficient.passed) {
      ++passes;
      EXPECT_TRUE(audit_ic(mech, *model, q, grid, 1e-9).passed);
      EXPECT_TRUE(audit_ir(mech, *model, q, grid, 1e-9).passed);
    }
  }
  // The convex instances are built to clear the allocation-monotonicity bar.
  EXPECT_GT(passes, 0);
}

TEST(SufficientConditions, WithholdingFromOneFixedMarketAgentIsFlagged) {
  // Pool everyone's data for agent 1 but leave agent 0 his own-report model.
  // In the fixed market agent 0 then profits from under-reporting (it chokes
  // his rival's model while his own quality is pinned by his true data), the
  // report-derivative is smallest away from the truthful type, and the
  // allocation-monotonicity check fires.
  const QualityFunction q = QualityFunction::identity(6.0);
  const auto model = std::make_shared<ProportionalFixedMarketModel>(2);
  const Mechanism mech("lopsided-free", give_withhold_allocation(2, q, 0b10u),
                       zero_payment(2));
  const GridSpec grid(1.0, 0.25);
  const AuditReport sufficient =
      check_sufficient_conditions(mech, *model, q, grid, 1e-3, 1e-6);
  EXPECT_FALSE(sufficient.passed);
  bool eq3_failed = false;
  for (const AuditViolation& v : sufficient.violations)
    if (v.detail.rfind("eq3", 0) == 0) eq3_failed = true;
  EXPECT_TRUE(eq3_failed);
  // Cross-check with the brute-force audit: under-reporting really pays.
  EXPECT_FALSE(audit_ic(mech, *model, q, grid, 1e-9).passed);
}

TEST(ConditionChecks, QuadStepMustDivideTheGridStep) {
  const QualityFunction q = QualityFunction::identity(4.0);
  const auto model = std::make_shared<PowerMarketModel>(2, 0.0);
  const Mechanism mech = free_mechanism(2, q);
  EXPECT_THROW(check_necessary_conditions(mech, *model, q, GridSpec(1.0, 0.25),
                                          3e-3, 1e-6),
               std::invalid_argument);
}

}  // namespace
}  // namespace datamkt
