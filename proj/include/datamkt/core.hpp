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
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace datamkt {

/// Default comparison tolerance for audits and feasibility checks. The market
/// definitions use exact inequalities; numerics need slack.
inline constexpr double kDefaultTolerance = 1e-9;

/// Slack for domain/range validation, absorbing float drift in sums of grid
/// points (e.g. 0.1 + 0.2 > 0.3).
inline constexpr double kDomainSlack = 1e-9;

/// What one agent submits to the platform: either a valid-data size, or a
/// refusal to participate. Non-participation is a distinct state, never a
/// magic number: reporting 0 (joining with an empty contribution) and staying
/// out are different actions and the allocation and payment rules treat
/// them differently.
class Report {
 public:
  /// The non-participation report.
  static Report none() { return Report(std::nullopt); }

  /// A participating report of `size` valid data units.
  static Report of(double size) {
    if (!(size >= 0.0))
      throw std::invalid_argument("Report: size must be nonnegative, got " +
                                  std::to_string(size));
    return Report(size);
  }

  bool participates() const { return size_.has_value(); }

  double size() const {
    if (!size_)
      throw std::logic_error("Report: non-participating report has no size");
    return *size_;
  }

  friend bool operator==(const Report& a, const Report& b) {
    return a.size_ == b.size_;
  }
  friend bool operator!=(const Report& a, const Report& b) { return !(a == b); }

 private:
  explicit Report(std::optional<double> size) : size_(size) {}
  std::optional<double> size_;
};

/// True valid-data sizes, one per agent, all nonnegative.
using TypeProfile = std::vector<double>;

/// Submitted reports, one per agent.
using ReportProfile = std::vector<Report>;

inline ReportProfile truthful_reports(const TypeProfile& types) {
  ReportProfile reports;
  reports.reserve(types.size());
  for (double t : types) reports.push_back(Report::of(t));
  return reports;
}

inline void validate_types(const TypeProfile& types) {
  for (std::size_t i = 0; i < types.size(); ++i)
    if (!(types[i] >= 0.0))
      throw std::invalid_argument("type profile: entry " + std::to_string(i) +
                                  " is negative");
}

/// Checks the reporting restriction: a numeric report never exceeds the true
/// type (agents can degrade their dataset, not forge a better one).
inline void validate_reports_against_types(const ReportProfile& reports,
                                           const TypeProfile& types) {
  if (reports.size() != types.size())
    throw std::invalid_argument("report profile: length mismatch with types");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].participates()) continue;
    const double slack = kDomainSlack * std::max(1.0, types[i]);
    if (reports[i].size() > types[i] + slack)
      throw std::invalid_argument(
          "report profile: agent " + std::to_string(i) + " reports " +
          std::to_string(reports[i].size()) + " above true type " +
          std::to_string(types[i]));
  }
}

/// Monotone map from valid data size to trained-model quality, with a declared
/// evaluation domain [0, domain_max]. Registry entries keep quality in [0, 1];
/// identity with a larger declared domain is available for the ratio-based
/// market families, whose values only depend on monotone scale.
class QualityFunction {
 public:
  QualityFunction(std::string label, std::function<double(double)> fn,
                  double domain_max, double max_quality)
      : label_(std::move(label)),
        fn_(std::move(fn)),
        domain_max_(domain_max),
        max_quality_(max_quality) {
    if (!(domain_max_ > 0.0))
      throw std::invalid_argument("QualityFunction: domain_max must be > 0");
  }

  double operator()(double size) const {
    if (!(size >= -kDomainSlack))
      throw std::invalid_argument("QualityFunction(" + label_ +
                                  "): negative data size");
    if (size > domain_max_ + kDomainSlack)
      throw std::invalid_argument(
          "QualityFunction(" + label_ + "): size " + std::to_string(size) +
          " outside declared domain [0, " + std::to_string(domain_max_) + "]");
    return fn_(std::max(size, 0.0));
  }

  const std::string& label() const { return label_; }
  double domain_max() const { return domain_max_; }

  /// Largest quality the function can emit on its domain.
  double max_quality() const { return max_quality_; }

  /// Q(t) = t on [0, domain_max]. Satisfies the unit quality bound only when
  /// domain_max <= 1.
  static QualityFunction identity(double domain_max = 1.0) {
    return QualityFunction("identity", [](double s) { return s; }, domain_max,
                           domain_max);
  }

  /// Q(t) = (1 - e^-t) / (1 + e^-t), strictly increasing from 0 toward 1.
  static QualityFunction sigmoid() {
    return QualityFunction(
        "sigmoid",
        [](double s) {
          const double e = std::exp(-s);
          return (1.0 - e) / (1.0 + e);
        },
        std::numeric_limits<double>::infinity(), 1.0);
  }

 private:
  std::string label_;
  std::function<double(double)> fn_;
  double domain_max_;
  double max_quality_;
};

/// Looks up a registered quality function by name ("identity", "sigmoid").
/// `domain` overrides the identity domain; sigmoid ignores it.
inline QualityFunction quality_by_name(const std::string& name,
                                       std::optional<double> domain = {}) {
  if (name == "identity") return QualityFunction::identity(domain.value_or(1.0));
  if (name == "sigmoid") return QualityFunction::sigmoid();
  throw std::invalid_argument("unknown quality function: " + name);
}

inline std::vector<std::string> quality_registry_names() {
  return {"identity", "sigmoid"};
}

/// Returns a quality function that answers grid-aligned sizes from a
/// precomputed table (indices are multiples of `step` up to `max_size`) and
/// falls back to the wrapped function elsewhere. Audits over a fixed grid
/// evaluate Q only at grid sums; the table removes the transcendental cost.
inline QualityFunction with_grid_cache(const QualityFunction& q, double step,
                                       double max_size) {
  if (!(step > 0.0) || !(max_size > 0.0))
    throw std::invalid_argument("with_grid_cache: step and max_size must be > 0");
  const std::size_t count = static_cast<std::size_t>(std::llround(max_size / step)) + 1;
  auto table = std::make_shared<std::vector<double>>();
  table->reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    table->push_back(q(static_cast<double>(k) * step));
  const double inv_step = 1.0 / step;
  QualityFunction base = q;
  return QualityFunction(
      q.label(),
      [table, base, inv_step, step](double s) {
        const auto k = std::llround(s * inv_step);
        if (k >= 0 && static_cast<std::size_t>(k) < table->size() &&
            std::abs(s - static_cast<double>(k) * step) <=
                kDomainSlack * std::max(1.0, s)) {
          return (*table)[static_cast<std::size_t>(k)];
        }
        return base(s);
      },
      q.domain_max(), q.max_quality());
}

/// The model an agent actually deploys: the better of the allocated model and
/// the one trained on his own data alone.
inline double effective_quality(double allocated, const QualityFunction& q,
                                double type) {
  if (!(allocated >= -kDomainSlack) ||
      allocated > q.max_quality() + kDomainSlack)
    throw std::invalid_argument(
        "effective_quality: allocated quality " + std::to_string(allocated) +
        " outside [0, " + std::to_string(q.max_quality()) + "]");
  if (!(type >= 0.0))
    throw std::invalid_argument("effective_quality: negative data size");
  return std::max(allocated, q(type));
}

/// Uniform discretization of the type space: points 0, step, 2*step, ..,
/// upper_bound, optionally preceded by the non-participation report when
/// enumerated via points().
class GridSpec {
 public:
  GridSpec(double upper_bound, double step, bool include_empty = false)
      : upper_bound_(upper_bound), step_(step), include_empty_(include_empty) {
    if (!(upper_bound_ > 0.0))
      throw std::invalid_argument("GridSpec: upper_bound must be > 0");
    if (!(step_ > 0.0)) throw std::invalid_argument("GridSpec: step must be > 0");
    const double ratio = upper_bound_ / step_;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument(
          "GridSpec: upper_bound/step must be a positive integer, got " +
          std::to_string(ratio));
    steps_ = static_cast<int>(rounded);
  }

  double upper_bound() const { return upper_bound_; }
  double step() const { return step_; }
  bool include_empty() const { return include_empty_; }

  /// Number of numeric grid points (upper_bound/step + 1).
  int num_points() const { return steps_ + 1; }

  double point(int k) const {
    if (k < 0 || k > steps_)
      throw std::out_of_range("GridSpec: point index out of range");
    return k == steps_ ? upper_bound_ : static_cast<double>(k) * step_;
  }

  /// Index of a size that is expected to lie on the grid.
  int index_of(double size) const {
    const auto k = std::llround(size / step_);
    if (k < 0 || k > steps_ ||
        std::abs(size - static_cast<double>(k) * step_) >
            1e-9 * std::max(1.0, size))
      throw std::invalid_argument("GridSpec: size " + std::to_string(size) +
                                  " is not a grid point");
    return static_cast<int>(k);
  }

  std::vector<double> numeric_points() const {
    std::vector<double> pts;
    pts.reserve(num_points());
    for (int k = 0; k <= steps_; ++k) pts.push_back(point(k));
    return pts;
  }

 private:
  double upper_bound_;
  double step_;
  bool include_empty_;
  int steps_;
};

/// Ordered enumeration of the grid as reports; the non-participation report
/// comes first when the grid asks for it.
inline ReportProfile grid_points(const GridSpec& grid) {
  ReportProfile pts;
  pts.reserve(grid.num_points() + (grid.include_empty() ? 1 : 0));
  if (grid.include_empty()) pts.push_back(Report::none());
  for (int k = 0; k < grid.num_points(); ++k)
    pts.push_back(Report::of(grid.point(k)));
  return pts;
}

/// Everything a single mechanism evaluation produces.
struct Outcome {
  std::vector<double> allocation;           // model quality handed to each agent
  std::vector<double> payments;             // charged by the platform
  std::vector<double> effective_qualities;  // models the agents actually deploy
  std::vector<double> values;               // market value per agent
  std::vector<double> utilities;            // value minus payment
  double revenue = 0.0;
  double welfare = 0.0;
};

}  // namespace datamkt
