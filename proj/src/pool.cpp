#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>

#include "recontact/error.hpp"
#include "recontact/mi.hpp"

namespace recontact::mi {

namespace {

double quantile975(double df) {
  if (std::isinf(df)) return boost::math::quantile(boost::math::normal(), 0.975);
  return boost::math::quantile(boost::math::students_t(df), 0.975);
}

}  // namespace

PooledEstimate pool(const std::vector<Estimate>& estimates) {
  const auto m = static_cast<int>(estimates.size());
  if (m < 2) throw InsufficientImputations("pooling needs at least 2 estimates, got " + std::to_string(m));
  double qbar = 0.0;
  double wbar = 0.0;
  for (const auto& e : estimates) {
    if (!(e.variance >= 0.0) || !std::isfinite(e.point)) throw DomainError("estimates need finite points and variances >= 0");
    qbar += e.point;
    wbar += e.variance;
  }
  qbar /= m;
  wbar /= m;
  const bool identical = std::all_of(estimates.begin(), estimates.end(),
                                     [&](const Estimate& e) { return e.point == estimates[0].point; });
  double b = 0.0;
  if (identical) {
    qbar = estimates[0].point;
  } else {
    for (const auto& e : estimates) b += (e.point - qbar) * (e.point - qbar);
    b /= m - 1;
  }

  PooledEstimate out;
  out.m = m;
  out.point = qbar;
  out.within_var = wbar;
  out.between_var = b;
  const double inflated = (1.0 + 1.0 / m) * b;
  out.total_var = wbar + inflated;
  if (b > 0.0) {
    const double r = 1.0 + wbar / inflated;
    out.df = (m - 1) * r * r;
  }
  const double half = quantile975(out.df) * std::sqrt(out.total_var);
  out.ci_low = qbar - half;
  out.ci_high = qbar + half;
  return out;
}

PooledEstimate normal_interval(double point, double variance) {
  PooledEstimate out;
  out.m = 1;
  out.point = point;
  out.within_var = variance;
  out.total_var = variance;
  const double half = quantile975(out.df) * std::sqrt(variance);
  out.ci_low = point - half;
  out.ci_high = point + half;
  return out;
}

PooledEstimate estimate_prevalence(const MultipleImputations& imputations, Indicator indicator,
                                   const Subgroup& subgroup) {
  std::vector<Estimate> estimates;
  for (const auto& table : imputations.completed) {
    std::size_t n = 0;
    std::size_t hits = 0;
    for (const auto& row : table.rows) {
      if (!subgroup.contains(row)) continue;
      const auto v = indicator_value(row.questionnaire, indicator);
      if (!v) throw DomainError(std::string(to_string(indicator)) + " is not fully imputed");
      ++n;
      hits += *v;
    }
    if (n == 0) throw DomainError("subgroup '" + subgroup.label() + "' is empty");
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    estimates.push_back({p, p * (1.0 - p) / static_cast<double>(n)});
  }
  return pool(estimates);
}

PooledEstimate complete_case_prevalence(const CohortTable& table, Indicator indicator, const Subgroup& subgroup) {
  std::size_t n = 0;
  std::size_t hits = 0;
  for (const auto& row : table.rows) {
    if (row.group != GroupLabel::Participant || !subgroup.contains(row)) continue;
    const auto v = indicator_value(row.questionnaire, indicator);
    if (!v) continue;
    ++n;
    hits += *v;
  }
  if (n == 0) throw DomainError("no observed " + std::string(to_string(indicator)) + " among participants in '" +
                                subgroup.label() + "'");
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return normal_interval(p, p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace recontact::mi
