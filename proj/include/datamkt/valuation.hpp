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
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "datamkt/core.hpp"

namespace datamkt {

/// Market value of each agent as a function of the deployed model qualities.
/// An agent's value may depend on everyone's quality; that externality is
/// what the whole toolkit is about.
class ValuationModel {
 public:
  virtual ~ValuationModel() = default;

  virtual std::string label() const = 0;
  virtual int agent_count() const = 0;

  /// Value of agent i at quality vector q.
  virtual double value_of(int i, std::span<const double> q) const = 0;

  virtual std::vector<double> values(std::span<const double> q) const {
    check_dimension(q);
    std::vector<double> out(agent_count());
    for (int i = 0; i < agent_count(); ++i) out[i] = value_of(i, q);
    return out;
  }

  /// Families with closed-form derivatives expose them; they cross-check the
  /// finite-difference probes.
  virtual bool has_analytic_partials() const { return false; }

  /// dv_i/dq_j, only when has_analytic_partials().
  virtual double partial(int i, int j, std::span<const double> q) const {
    (void)i;
    (void)j;
    (void)q;
    throw std::logic_error(label() + ": no analytic partial derivatives");
  }

 protected:
  void check_dimension(std::span<const double> q) const {
    if (static_cast<int>(q.size()) != agent_count())
      throw std::invalid_argument(label() + ": quality vector has dimension " +
                                  std::to_string(q.size()) + ", expected " +
                                  std::to_string(agent_count()));
  }
};

using ModelPtr = std::shared_ptr<const ValuationModel>;

/// Total value generated across all agents at quality vector q.
inline double market_size(const ValuationModel& model,
                          std::span<const double> q) {
  double total = 0.0;
  for (int i = 0; i < model.agent_count(); ++i) total += model.value_of(i, q);
  return total;
}

/// Central-difference estimate of dv_i/dq_j, one-sided at the q_j = 0 edge.
inline double numeric_partial(const ValuationModel& model, int i, int j,
                              std::span<const double> q, double step = 1e-6) {
  std::vector<double> probe(q.begin(), q.end());
  const double lo = std::max(0.0, q[j] - step);
  const double hi = q[j] + step;
  probe[j] = hi;
  const double v_hi = model.value_of(i, probe);
  probe[j] = lo;
  const double v_lo = model.value_of(i, probe);
  return (v_hi - v_lo) / (hi - lo);
}

/// v_i = sum_j alpha[i][j] * q_j. alpha[i][j] is agent j's influence on agent
/// i: negative for rivals, positive for collaborators. A strict model requires
/// a positive diagonal (an agent's own model helps him), which is what the
/// truthfulness guarantees need; the experiment samplers may relax it.
class LinearExternalityModel : public ValuationModel {
 public:
  explicit LinearExternalityModel(std::vector<std::vector<double>> alpha,
                                  bool require_positive_diagonal = false)
      : alpha_(std::move(alpha)) {
    const std::size_t n = alpha_.size();
    if (n == 0) throw std::invalid_argument("LinearExternalityModel: empty matrix");
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha_[i].size() != n)
        throw std::invalid_argument(
            "LinearExternalityModel: matrix is not square");
      if (require_positive_diagonal && !(alpha_[i][i] > 0.0))
        throw std::invalid_argument(
            "LinearExternalityModel: diagonal entry " + std::to_string(i) +
            " must be positive in strict mode");
    }
  }

  std::string label() const override { return "linear-externality"; }
  int agent_count() const override { return static_cast<int>(alpha_.size()); }

  double value_of(int i, std::span<const double> q) const override {
    check_dimension(q);
    const auto& row = alpha_[i];
    double v = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) v += row[j] * q[j];
    return v;
  }

  bool has_analytic_partials() const override { return true; }
  double partial(int i, int j, std::span<const double>) const override {
    return alpha_[i][j];
  }

  const std::vector<std::vector<double>>& alpha() const { return alpha_; }

  /// Column sum: the net influence of agent j's model on the whole market.
  double column_sum(int j) const {
    double s = 0.0;
    for (const auto& row : alpha_) s += row[j];
    return s;
  }

 private:
  std::vector<std::vector<double>> alpha_;
};

/// v_i = F_i(q_i) + theta_i(q_{-i}) with F_i strictly increasing and theta_i
/// arbitrary. q_{-i} is passed in agent order with position i removed.
class QuasiMonotoneModel : public ValuationModel {
 public:
  using OwnQualityFn = std::function<double(double)>;
  using OthersFn = std::function<double(std::span<const double>)>;

  QuasiMonotoneModel(std::vector<OwnQualityFn> own,
                     std::vector<OthersFn> others)
      : own_(std::move(own)), others_(std::move(others)) {
    if (own_.empty() || own_.size() != others_.size())
      throw std::invalid_argument(
          "QuasiMonotoneModel: need one F and one theta per agent");
  }

  std::string label() const override { return "quasi-monotone"; }
  int agent_count() const override { return static_cast<int>(own_.size()); }

  double value_of(int i, std::span<const double> q) const override {
    check_dimension(q);
    std::vector<double> rest;
    rest.reserve(q.size() - 1);
    for (int j = 0; j < agent_count(); ++j)
      if (j != i) rest.push_back(q[j]);
    return own_[i](q[i]) + others_[i](rest);
  }

 private:
  std::vector<OwnQualityFn> own_;
  std::vector<OthersFn> others_;
};

/// Parameters of one smooth own-quality term
/// F(z) = linear*z + quadratic*z^2 + saturating*(1 - e^-z); all coefficients
/// nonnegative and linear + saturating > 0 keeps F strictly increasing on
/// z >= 0.
struct SmoothOwnTerm {
  double linear = 0.0;
  double quadratic = 0.0;
  double saturating = 0.0;
};

/// Parameters of one smooth cross term w*z + s*z^2 applied to another agent's
/// quality; sign-unrestricted.
struct SmoothCrossTerm {
  double linear = 0.0;
  double quadratic = 0.0;
};

/// Builds a smooth, config-constructible quasi-monotone model:
/// v_i = F_i(q_i) + sum over others k of cross[i][k] applied to q_k.
/// cross[i] lists the other agents in ascending index order.
inline std::shared_ptr<class QuasiMonotoneModel> smooth_quasi_monotone(
    const std::vector<SmoothOwnTerm>& own,
    const std::vector<std::vector<SmoothCrossTerm>>& cross);

/// v_i = (sum_j q_j)^growth * q_i. growth >= -1 keeps the market growing
/// (total size (sum q)^{growth+1} non-decreasing in every quality); growth = 0
/// removes competition entirely. The all-zero quality point is defined as a
/// zero-value market.
class PowerMarketModel : public ValuationModel {
 public:
  PowerMarketModel(int agents, double growth_exponent)
      : agents_(agents), growth_(growth_exponent) {
    if (agents_ < 1)
      throw std::invalid_argument("PowerMarketModel: need at least one agent");
  }

  std::string label() const override { return "power-market"; }
  int agent_count() const override { return agents_; }
  double growth_exponent() const { return growth_; }

  double value_of(int i, std::span<const double> q) const override {
    check_dimension(q);
    double total = 0.0;
    for (double qj : q) total += qj;
    if (total <= 0.0) return 0.0;
    return std::pow(total, growth_) * q[i];
  }

  bool has_analytic_partials() const override { return true; }
  double partial(int i, int j, std::span<const double> q) const override {
    check_dimension(q);
    double total = 0.0;
    for (double qj : q) total += qj;
    if (total <= 0.0) {
      // Right-limit at the zero-value market point: v_i(t e_j) = d_ij t^{g+1},
      // so the slope is d_ij when g = 0 and vanishes for g > 0.
      if (growth_ == 0.0) return i == j ? 1.0 : 0.0;
      return 0.0;
    }
    const double outer = growth_ * std::pow(total, growth_ - 1.0) * q[i];
    return i == j ? outer + std::pow(total, growth_) : outer;
  }

 private:
  int agents_;
  double growth_;
};

/// v_i = q_i / sum_j q_j: a fixed unit market split in proportion to deployed
/// quality. The all-zero point is a zero-value market.
class ProportionalFixedMarketModel : public ValuationModel {
 public:
  explicit ProportionalFixedMarketModel(int agents) : agents_(agents) {
    if (agents_ < 1)
      throw std::invalid_argument(
          "ProportionalFixedMarketModel: need at least one agent");
  }

  std::string label() const override { return "proportional-fixed-market"; }
  int agent_count() const override { return agents_; }

  double value_of(int i, std::span<const double> q) const override {
    check_dimension(q);
    double total = 0.0;
    for (double qj : q) total += qj;
    if (total <= 0.0) return 0.0;
    return q[i] / total;
  }

  bool has_analytic_partials() const override { return true; }
  double partial(int i, int j, std::span<const double> q) const override {
    check_dimension(q);
    double total = 0.0;
    for (double qj : q) total += qj;
    if (total <= 0.0) return 0.0;
    const double base = -q[i] / (total * total);
    return i == j ? base + 1.0 / total : base;
  }

 private:
  int agents_;
};

inline std::shared_ptr<QuasiMonotoneModel> smooth_quasi_monotone(
    const std::vector<SmoothOwnTerm>& own,
    const std::vector<std::vector<SmoothCrossTerm>>& cross) {
  const int n = static_cast<int>(own.size());
  if (n == 0 || cross.size() != own.size())
    throw std::invalid_argument(
        "smooth_quasi_monotone: need one own term and one cross row per agent");
  std::vector<QuasiMonotoneModel::OwnQualityFn> fs;
  std::vector<QuasiMonotoneModel::OthersFn> thetas;
  for (int i = 0; i < n; ++i) {
    const SmoothOwnTerm t = own[i];
    if (!(t.linear >= 0.0) || !(t.quadratic >= 0.0) || !(t.saturating >= 0.0) ||
        !(t.linear + t.saturating > 0.0))
      throw std::invalid_argument(
          "smooth_quasi_monotone: own term must be nonnegative with "
          "linear + saturating > 0");
    if (static_cast<int>(cross[i].size()) != n - 1)
      throw std::invalid_argument(
          "smooth_quasi_monotone: cross row must cover the other agents");
    fs.push_back([t](double z) {
      return t.linear * z + t.quadratic * z * z +
             t.saturating * (1.0 - std::exp(-z));
    });
    const std::vector<SmoothCrossTerm> row = cross[i];
    thetas.push_back([row](std::span<const double> rest) {
      double v = 0.0;
      for (std::size_t k = 0; k < rest.size(); ++k)
        v += row[k].linear * rest[k] + row[k].quadratic * rest[k] * rest[k];
      return v;
    });
  }
  return std::make_shared<QuasiMonotoneModel>(std::move(fs), std::move(thetas));
}

struct CompetitivenessWitness {
  int i = 0;  // whose value falls
  int j = 0;  // whose quality rose
  std::vector<double> qualities;
  double derivative = 0.0;
};

struct CompetitivenessReport {
  bool non_competitive = true;
  std::optional<CompetitivenessWitness> witness;
};

/// Decides whether the market is non-competitive (no agent's value ever falls
/// when someone's model improves) by probing dv_i/dq_j with finite differences
/// at every point of probe_grid^n. Central differences in the interior,
/// one-sided at the probe-box edges. Returns the first offending triple.
inline CompetitivenessReport is_non_competitive(const ValuationModel& model,
                                                const GridSpec& probe_grid,
                                                double tol = kDefaultTolerance,
                                                double fd_step = 1e-4) {
  const int n = model.agent_count();
  const auto pts = probe_grid.numeric_points();
  const std::size_t g = pts.size();
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= g;

  std::vector<double> q(n), probe(n);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (int k = n - 1; k >= 0; --k) {
      q[k] = pts[rest % g];
      rest /= g;
    }
    for (int j = 0; j < n; ++j) {
      probe.assign(q.begin(), q.end());
      const double lo = std::max(0.0, q[j] - fd_step);
      const double hi = std::min(probe_grid.upper_bound(), q[j] + fd_step);
      for (int i = 0; i < n; ++i) {
        probe[j] = hi;
        const double v_hi = model.value_of(i, probe);
        probe[j] = lo;
        const double v_lo = model.value_of(i, probe);
        const double d = (v_hi - v_lo) / (hi - lo);
        if (d < -tol) {
          CompetitivenessReport report;
          report.non_competitive = false;
          report.witness = CompetitivenessWitness{i, j, q, d};
          return report;
        }
      }
    }
  }
  return CompetitivenessReport{};
}

}  // namespace datamkt
