#include "recontact/assumption.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <set>
#include <sstream>

#include "recontact/error.hpp"
#include <json.hpp>

namespace recontact::assumption {

using glm::DesignMatrix;
using glm::Index;
using glm::MatrixXd;
using glm::VectorXd;
using json = nlohmann::ordered_json;

namespace {

constexpr double kZ = 1.959963984540054;
constexpr std::size_t kSmallCohort = 500;
constexpr std::size_t kSmallGroup = 30;

double decades(const Background& b) { return b.age / 10.0; }

std::string region_column(Region r) { return "region_" + std::string(to_string(r)); }

std::vector<std::string> background_names(bool with_regions) {
  std::vector<std::string> names{glm::kInterceptName, kAgeMen, kAgeWomen, kFemale};
  if (with_regions)
    for (int r = 1; r < kNumRegions; ++r) names.push_back(region_column(static_cast<Region>(r)));
  return names;
}

// Fills intercept, ages, sex and (optionally) regions; returns the next column.
Index fill_background(MatrixXd& X, Index i, const Background& b, bool with_regions) {
  X(i, 0) = 1.0;
  X(i, 1) = b.female() ? 0.0 : decades(b);
  X(i, 2) = b.female() ? decades(b) : 0.0;
  X(i, 3) = b.female() ? 1.0 : 0.0;
  Index c = 4;
  if (with_regions) {
    for (int r = 1; r < kNumRegions; ++r) X(i, c++) = b.region == static_cast<Region>(r) ? 1.0 : 0.0;
  }
  return c;
}

DesignMatrix group_design(const CohortTable& table, bool with_regions) {
  auto names = background_names(with_regions);
  names.emplace_back(kParticipant);
  names.emplace_back(kRecontact);
  MatrixXd X(static_cast<Index>(table.size()), static_cast<Index>(names.size()));
  for (Index i = 0; i < X.rows(); ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const Index c = fill_background(X, i, row.background, with_regions);
    X(i, c) = row.group == GroupLabel::Participant ? 1.0 : 0.0;
    X(i, c + 1) = row.group == GroupLabel::RecontactRespondent ? 1.0 : 0.0;
  }
  return {std::move(X), std::move(names)};
}

VectorXd response(const std::vector<CohortRow>& rows, Horizon h) {
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Index>(i)) = rows[i].hosp.at(h);
  return y;
}

Interval wald(double estimate, double variance) {
  const double half = kZ * std::sqrt(std::max(variance, 0.0));
  return {estimate, estimate - half, estimate + half};
}

}  // namespace

DesignMatrix count_design(const CohortTable& table) { return group_design(table, true); }
DesignMatrix zero_design(const CohortTable& table) { return group_design(table, false); }

glm::ZinbFit fit_hospitalization_model(const CohortTable& table, Horizon horizon) {
  const auto counts = table.group_counts();
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (counts[g] == 0)
      throw DegenerateDataError("group " + std::string(to_string(kGroups[g])) +
                                " has no rows; its indicator cannot be estimated");
  }
  return glm::fit_zinb(count_design(table), zero_design(table), response(table.rows, horizon));
}

Interval count_interval(const glm::ZinbFit& fit, const std::string& name) {
  const Index j = fit.count_index(name);
  return wald(fit.count_coefficients(j), fit.covariance(j, j));
}

Interval zero_interval(const glm::ZinbFit& fit, const std::string& name) {
  const auto it = std::find(fit.zero_names.begin(), fit.zero_names.end(), name);
  if (it == fit.zero_names.end()) throw DesignError("unknown zero-model column '" + name + "'");
  const Index j = static_cast<Index>(it - fit.zero_names.begin());
  const Index k = fit.count_coefficients.size() + j;
  return wald(fit.zero_coefficients(j), fit.covariance(k, k));
}

Verdicts verdicts_from_fit(const glm::ZinbFit& fit) {
  Verdicts v;
  v.participant = count_interval(fit, kParticipant);
  v.recontact = count_interval(fit, kRecontact);
  v.assumption2_supported = v.participant.contains_zero();
  v.assumption3_supported = v.recontact.contains_zero();
  return v;
}

bool AssumptionReport::complete() const {
  return std::all_of(horizons.begin(), horizons.end(), [](const HorizonResult& h) { return h.ok(); });
}

const HorizonResult& AssumptionReport::at(Horizon h) const {
  for (const auto& r : horizons)
    if (r.horizon == h) return r;
  throw DomainError("horizon " + std::string(horizon_flag(h)) + " was not evaluated");
}

AssumptionReport evaluate_assumptions(const CohortTable& table, const std::vector<Horizon>& horizons) {
  AssumptionReport report;
  report.n_rows = table.size();
  report.group_sizes = table.group_counts();
  if (table.size() < kSmallCohort)
    report.warnings.push_back("small sample: " + std::to_string(table.size()) +
                              " rows; intervals are wide and the Wald approximation may be poor");
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (report.group_sizes[g] < kSmallGroup)
      report.warnings.push_back("small group: " + std::string(to_string(kGroups[g])) + " has " +
                                std::to_string(report.group_sizes[g]) + " rows");
  }

  report.horizons.resize(horizons.size());
  const int n = static_cast<int>(horizons.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < n; ++k) {
    auto& r = report.horizons[static_cast<std::size_t>(k)];
    r.horizon = horizons[static_cast<std::size_t>(k)];
    try {
      r.fit = fit_hospitalization_model(table, r.horizon);
      r.verdicts = verdicts_from_fit(*r.fit);
      if (!r.fit->converged) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "fit did not converge (score norm %.3g)", r.fit->score_norm);
        r.error = buf;
      }
    } catch (const std::exception& e) {
      r.fit.reset();
      r.error = e.what();
    }
  }
  return report;
}

const std::vector<std::string>& assumptions_legend() {
  static const std::vector<std::string> legend{
      "(1) Participants and non-participants have the same distribution of the health "
      "indicators (complete-case analysis).",
      "(2) Given the background variables, participants and non-participants have the same "
      "distribution of the health indicators (MI-MAR, MI-MAR-NR).",
      "(3) Given the background variables, re-contact respondents and the remaining "
      "non-participants have the same distribution of the health indicators (MI-MNAR).",
  };
  return legend;
}

namespace {

json interval_json(const Interval& i) { return {{"estimate", i.estimate}, {"low", i.low}, {"high", i.high}}; }

std::string display_name(const std::string& column) {
  if (column == glm::kInterceptName) return "Intercept";
  if (column == kAgeMen) return "Age: Men (10 years)";
  if (column == kAgeWomen) return "Age: Women (10 years)";
  if (column == kFemale) return "Sex (Woman)";
  if (column == kParticipant) return "Participant (Yes)";
  if (column == kRecontact) return "Re-contact respondent (Yes)";
  for (int r = 1; r < kNumRegions; ++r) {
    const auto region = static_cast<Region>(r);
    if (column == region_column(region)) return "Region: " + std::string(to_string(region));
  }
  return column;
}

std::string pad(std::string s, std::size_t width) {
  s.append(s.size() < width ? width - s.size() : 1, ' ');
  return s;
}

std::string interval_text(const Interval& i) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f, %.2f)", i.estimate, i.low, i.high);
  return buf;
}

}  // namespace

std::string report_json(const AssumptionReport& report) {
  json j;
  j["n_rows"] = report.n_rows;
  json sizes = json::object();
  for (std::size_t g = 0; g < kNumGroups; ++g) sizes[std::string(to_string(kGroups[g]))] = report.group_sizes[g];
  j["group_sizes"] = sizes;
  j["warnings"] = report.warnings;
  j["horizons"] = json::array();
  for (const auto& h : report.horizons) {
    json e;
    e["horizon"] = std::string(horizon_flag(h.horizon));
    e["ok"] = h.ok();
    e["error"] = h.error;
    if (h.fit) {
      e["fit"] = json::parse(glm::to_json(*h.fit));
      e["participant"] = interval_json(h.verdicts.participant);
      e["recontact"] = interval_json(h.verdicts.recontact);
      e["assumption2_supported"] = h.verdicts.assumption2_supported;
      e["assumption3_supported"] = h.verdicts.assumption3_supported;
    }
    j["horizons"].push_back(std::move(e));
  }
  j["legend"] = assumptions_legend();
  return j.dump(2) + "\n";
}

std::string report_text(const AssumptionReport& report) {
  constexpr std::size_t kLabel = 30;
  constexpr std::size_t kCell = 24;
  std::ostringstream out;
  out << "Hospitalization model: zero-inflated negative binomial, 95% Wald intervals\n";
  out << "n = " << report.n_rows;
  for (std::size_t g = 0; g < kNumGroups; ++g) out << ", " << to_string(kGroups[g]) << " " << report.group_sizes[g];
  out << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  out << "\n";

  auto block = [&](const char* title, bool count) {
    out << pad(title, kLabel);
    for (const auto& h : report.horizons) out << pad(std::string(to_string(h.horizon)), kCell);
    out << "\n";
    const glm::ZinbFit* first = nullptr;
    for (const auto& h : report.horizons)
      if (h.fit) {
        first = &*h.fit;
        break;
      }
    if (!first) {
      out << "  (no successful fit)\n";
      return;
    }
    const auto& names = count ? first->count_names : first->zero_names;
    for (const auto& name : names) {
      out << pad(display_name(name), kLabel);
      for (const auto& h : report.horizons) {
        if (!h.fit) {
          out << pad("--", kCell);
          continue;
        }
        out << pad(interval_text(count ? count_interval(*h.fit, name) : zero_interval(*h.fit, name)), kCell);
      }
      out << "\n";
    }
  };
  block("Count model", true);
  out << "\n";
  block("Zero model", false);
  out << "\n";

  out << "Verdicts (count-model indicators; interval containing 0 = no difference)\n";
  for (const auto& h : report.horizons) {
    out << "  " << to_string(h.horizon) << ": ";
    if (!h.fit) {
      out << "fit failed: " << h.error << "\n";
      continue;
    }
    out << "assumption (2): " << (h.verdicts.assumption2_supported ? "supported" : "violated")
        << "; assumption (3): " << (h.verdicts.assumption3_supported ? "supported" : "not supported");
    if (!h.error.empty()) out << " [" << h.error << "]";
    out << "\n";
  }
  out << "\nAssumptions\n";
  for (const auto& line : assumptions_legend()) out << "  " << line << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Per 1000

Per1000 observed_per_1000(const CohortTable& table, Horizon horizon, const Subgroup& subgroup) {
  Per1000 p;
  double sum = 0.0;
  for (const auto& row : table.rows) {
    if (!subgroup.contains(row)) continue;
    ++p.n;
    sum += row.hosp.at(horizon);
  }
  if (p.n == 0) return p;
  const double mean = sum / static_cast<double>(p.n);
  double ss = 0.0;
  for (const auto& row : table.rows) {
    if (!subgroup.contains(row)) continue;
    const double d = row.hosp.at(horizon) - mean;
    ss += d * d;
  }
  const double var = p.n > 1 ? ss / static_cast<double>(p.n - 1) : 0.0;
  const double half = kZ * std::sqrt(var / static_cast<double>(p.n));
  p.available = true;
  p.estimate = 1000.0 * mean;
  p.ci_low = 1000.0 * (mean - half);
  p.ci_high = 1000.0 * (mean + half);
  return p;
}

namespace {

// Count part of the method models: background plus the questionnaire
// covariates of the smoking and alcohol imputation models.
std::vector<std::string> method_count_names() {
  auto names = background_names(true);
  names.insert(names.end(), {"education_Mid", "education_High", "civil_status_Cohabiting", "civil_status_Single",
                             "civil_status_Divorced", "civil_status_Widow", "hypertension", "high_chol", "bp_recent",
                             "chol_recent"});
  return names;
}

double flag(const std::optional<bool>& v, const char* name) {
  if (!v) throw DomainError(std::string(name) + " is not imputed");
  return *v ? 1.0 : 0.0;
}

void fill_method_row(MatrixXd& X, Index i, const CohortRow& row) {
  Index c = fill_background(X, i, row.background, true);
  const auto& q = row.questionnaire;
  if (!q.education || !q.civil_status) throw DomainError("covariates are not imputed");
  X(i, c++) = *q.education == Education::Mid;
  X(i, c++) = *q.education == Education::High;
  for (int s = 1; s < kNumCivilStatus; ++s) X(i, c++) = *q.civil_status == static_cast<CivilStatus>(s);
  X(i, c++) = flag(q.hypertension, "hypertension");
  X(i, c++) = flag(q.high_chol, "high_chol");
  X(i, c++) = flag(q.bp_recent, "bp_recent");
  X(i, c++) = flag(q.chol_recent, "chol_recent");
}

struct Design {
  MatrixXd count;
  MatrixXd zero;
};

Design method_design(const std::vector<CohortRow>& rows) {
  const auto names = method_count_names();
  Design d{MatrixXd(static_cast<Index>(rows.size()), static_cast<Index>(names.size())),
           MatrixXd(static_cast<Index>(rows.size()), 4)};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Index>(i);
    fill_method_row(d.count, r, rows[i]);
    fill_background(d.zero, r, rows[i].background, false);
  }
  return d;
}

// A fitted model expanded back to the full column set, with the
// covariance of (beta, gamma) for the delta method.
struct FittedModel {
  bool constant_zero = false;
  bool zero_disabled = false;
  VectorXd count;
  VectorXd zero;
  double theta = 1.0;
  MatrixXd covariance;

  // Expected count, its model variance, and the gradient of the expected
  // count with respect to (beta, gamma) added into `grad`.
  void predict(const VectorXd& xc, const VectorXd& xz, double& mean, double& variance, VectorXd& grad) const {
    if (constant_zero) {
      mean = variance = 0.0;
      return;
    }
    const double mu = std::exp(xc.dot(count));
    const double pi = zero_disabled ? 0.0 : 1.0 / (1.0 + std::exp(-xz.dot(zero)));
    mean = (1.0 - pi) * mu;
    variance = (1.0 - pi) * mu * (1.0 + mu / theta + pi * mu);
    const Index p = count.size();
    grad.head(p) += mean * xc;
    if (!zero_disabled) grad.tail(zero.size()) -= pi * mean * xz;
  }
};

// Fits on the selected rows, dropping columns constant within them. Falls
// back to plain NB when the zero-inflated fit fails or does not converge.
FittedModel fit_method_model(const Design& full, const std::vector<Index>& rows, const VectorXd& y_all,
                             const std::string& label, std::set<std::string>& notes) {
  FittedModel m;
  const auto names = method_count_names();
  const auto zero_names = background_names(false);
  const Index pc = full.count.cols();
  const Index pz = full.zero.cols();
  m.count = VectorXd::Zero(pc);
  m.zero = VectorXd::Zero(pz);
  m.covariance = MatrixXd::Zero(pc + pz, pc + pz);
  if (rows.empty()) throw DomainError(label + ": no rows to fit");
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Index>(i)) = y_all(rows[i]);
  if (y.maxCoeff() == 0.0) {
    notes.insert(label + ": all counts are zero; expected counts set to 0");
    m.constant_zero = true;
    return m;
  }

  auto select = [&](const MatrixXd& X, std::vector<Index>& kept, bool note_dropped) {
    kept.clear();
    for (Index j = 0; j < X.cols(); ++j) {
      bool varies = j == 0;
      for (std::size_t i = 1; i < rows.size() && !varies; ++i) varies = X(rows[i], j) != X(rows[0], j);
      if (varies) kept.push_back(j);
      else if (note_dropped) notes.insert(label + ": dropped constant column " + names[static_cast<std::size_t>(j)]);
    }
    MatrixXd sub(static_cast<Index>(rows.size()), static_cast<Index>(kept.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < kept.size(); ++k) sub(static_cast<Index>(i), static_cast<Index>(k)) = X(rows[i], kept[k]);
    return sub;
  };
  std::vector<Index> kc, kz;
  MatrixXd Xc = select(full.count, kc, true);
  MatrixXd Xz = select(full.zero, kz, false);
  std::vector<std::string> cn, zn;
  for (auto j : kc) cn.push_back(names[static_cast<std::size_t>(j)]);
  for (auto j : kz) zn.push_back(zero_names[static_cast<std::size_t>(j)]);
  const DesignMatrix dc(std::move(Xc), cn);
  const DesignMatrix dz(std::move(Xz), zn);

  // Position of each kept coefficient in the full (beta, gamma) vector.
  std::vector<Index> slot;
  for (auto j : kc) slot.push_back(j);
  for (auto j : kz) slot.push_back(pc + j);

  try {
    const auto fit = glm::fit_zinb(dc, dz, y);
    if (!fit.converged) throw FitError("zero-inflated fit did not converge");
    for (std::size_t k = 0; k < kc.size(); ++k) m.count(kc[k]) = fit.count_coefficients(static_cast<Index>(k));
    for (std::size_t k = 0; k < kz.size(); ++k) m.zero(kz[k]) = fit.zero_coefficients(static_cast<Index>(k));
    m.theta = fit.theta;
    for (std::size_t a = 0; a < slot.size(); ++a)
      for (std::size_t b = 0; b < slot.size(); ++b)
        m.covariance(slot[a], slot[b]) = fit.covariance(static_cast<Index>(a), static_cast<Index>(b));
    return m;
  } catch (const Error& e) {
    notes.insert(label + ": zero-inflated model unavailable (" + std::string(e.what()) +
                 "); negative binomial used");
  }
  const auto nb = glm::fit_negbin(dc, y);
  if (!nb.converged) throw FitError(label + ": negative binomial fit did not converge");
  for (std::size_t k = 0; k < kc.size(); ++k) m.count(kc[k]) = nb.coefficients(static_cast<Index>(k));
  for (std::size_t a = 0; a < kc.size(); ++a)
    for (std::size_t b = 0; b < kc.size(); ++b)
      m.covariance(kc[a], kc[b]) = nb.covariance(static_cast<Index>(a), static_cast<Index>(b));
  m.zero_disabled = true;
  m.theta = nb.dispersion;
  return m;
}

std::size_t cell_of(const CohortRow& row) {
  return (static_cast<std::size_t>(row.background.sex) * kNumAgeGroups +
          static_cast<std::size_t>(row.background.age_group())) * kNumGroups + static_cast<std::size_t>(row.group);
}

constexpr std::size_t kCells = 2 * kNumAgeGroups * kNumGroups;

bool cell_in(std::size_t cell, const Subgroup& s) {
  const auto group = static_cast<GroupLabel>(cell % kNumGroups);
  const auto age = static_cast<AgeGroup>((cell / kNumGroups) % kNumAgeGroups);
  const auto sex = static_cast<Sex>(cell / (kNumGroups * kNumAgeGroups));
  return (!s.sex || *s.sex == sex) && (!s.age_group || *s.age_group == age) && (!s.group || *s.group == group);
}

}  // namespace

MethodPredictions::MethodPredictions(const mi::MultipleImputations& imputations,
                                     const std::vector<Horizon>& horizons)
    : strategy_(imputations.strategy), horizons_(horizons) {
  const int m = imputations.m();
  if (m < 2) throw InsufficientImputations("hospitalization predictions need at least 2 imputations");
  const auto& first = imputations.completed.front().rows;
  const std::size_t n = first.size();

  // Which fit each row is predicted from, and which rows each fit uses.
  // Fit 0 always covers participants.
  std::vector<std::size_t> model_of(n, 0);
  std::vector<std::vector<Index>> fit_rows(1);
  std::vector<std::string> fit_labels{"Participant"};
  if (strategy_ == mi::Strategy::MiMnar) {
    fit_rows.emplace_back();
    fit_labels.emplace_back("RecontactRespondent");
  } else if (strategy_ == mi::Strategy::MiMar) {
    fit_labels[0] = "Participant+RecontactRespondent";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = first[i].group;
    const auto r = static_cast<Index>(i);
    switch (strategy_) {
      case mi::Strategy::MiMnar:
        if (g == GroupLabel::Participant) fit_rows[0].push_back(r);
        if (g == GroupLabel::RecontactRespondent) fit_rows[1].push_back(r);
        model_of[i] = g == GroupLabel::Participant ? 0 : 1;
        break;
      case mi::Strategy::MiMar:
        if (g != GroupLabel::NonParticipant) fit_rows[0].push_back(r);
        break;
      case mi::Strategy::MiMarNr:
        if (g == GroupLabel::Participant) fit_rows[0].push_back(r);
        break;
    }
  }

  predictions_.assign(horizons.size(), std::vector<Aggregate>(static_cast<std::size_t>(m)));
  std::vector<std::set<std::string>> notes(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
  const auto n_params = static_cast<Index>(method_count_names().size() + background_names(false).size());

#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < m; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    try {
      const auto& rows = imputations.completed[ks].rows;
      const Design design = method_design(rows);
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        const VectorXd y = response(rows, horizons[h]);
        auto& agg = predictions_[h][ks];
        agg.cells.assign(kCells, Cell{});
        for (auto& c : agg.cells) c.grad.assign(fit_rows.size(), VectorXd::Zero(n_params));
        std::vector<FittedModel> models;
        for (std::size_t f = 0; f < fit_rows.size(); ++f) {
          const std::string label = fit_labels[f] + "/" + std::string(horizon_flag(horizons[h]));
          models.push_back(fit_method_model(design, fit_rows[f], y, label, notes[ks]));
          agg.covariance.push_back(models.back().covariance);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const auto r = static_cast<Index>(i);
          auto& cell = agg.cells[cell_of(rows[i])];
          double mean = 0.0;
          double var = 0.0;
          models[model_of[i]].predict(design.count.row(r).transpose(), design.zero.row(r).transpose(), mean, var,
                                      cell.grad[model_of[i]]);
          ++cell.n;
          cell.mean_sum += mean;
          cell.var_sum += var;
        }
      }
    } catch (...) {
      errors[ks] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::set<std::string> merged;
  for (const auto& s : notes) merged.insert(s.begin(), s.end());
  notes_.assign(merged.begin(), merged.end());
}

mi::PooledEstimate MethodPredictions::per_1000(Horizon horizon, const Subgroup& subgroup) const {
  const auto it = std::find(horizons_.begin(), horizons_.end(), horizon);
  if (it == horizons_.end()) throw DomainError("horizon " + std::string(horizon_flag(horizon)) + " was not predicted");
  const auto& per_imputation = predictions_[static_cast<std::size_t>(it - horizons_.begin())];
  std::vector<mi::Estimate> estimates;
  for (const auto& agg : per_imputation) {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;
    std::vector<VectorXd> grad;
    for (const auto& cov : agg.covariance) grad.push_back(VectorXd::Zero(cov.rows()));
    for (std::size_t c = 0; c < agg.cells.size(); ++c) {
      if (!cell_in(c, subgroup)) continue;
      const auto& cell = agg.cells[c];
      n += cell.n;
      mean += cell.mean_sum;
      var += cell.var_sum;
      for (std::size_t f = 0; f < grad.size(); ++f) grad[f] += cell.grad[f];
    }
    if (n == 0) throw DomainError("subgroup '" + subgroup.label() + "' is empty");
    // Count noise of the rows plus parameter uncertainty of each fit.
    for (std::size_t f = 0; f < grad.size(); ++f) var += grad[f].dot(agg.covariance[f] * grad[f]);
    const double nd = static_cast<double>(n);
    estimates.push_back({1000.0 * mean / nd, 1e6 * var / (nd * nd)});
  }
  return mi::pool(estimates);
}

// ---------------------------------------------------------------------------
// Table

namespace {

const std::array<Subgroup, 3> kSexBlocks{Subgroup::men(), Subgroup::women(), Subgroup::both()};
const std::array<const char*, 3> kSexNames{"Men", "Women", "Both"};

Per1000 from_pooled(const mi::PooledEstimate& e, std::size_t n) {
  return {true, e.point, e.ci_low, e.ci_high, n};
}

}  // namespace

HospitalizationTable hospitalization_table(const CohortTable& table,
                                           const std::vector<const MethodPredictions*>& methods,
                                           const std::vector<Horizon>& horizons) {
  HospitalizationTable t;
  t.horizons = horizons;
  auto observed = [&](std::string label, std::optional<GroupLabel> group) {
    HospitalizationTable::Line line{std::move(label), {}};
    for (std::size_t s = 0; s < 3; ++s) {
      Subgroup sg = kSexBlocks[s];
      sg.group = group;
      for (auto h : horizons) line.cells[s].push_back(observed_per_1000(table, h, sg));
    }
    t.lines.push_back(std::move(line));
  };
  observed("Full cohort", std::nullopt);
  observed("Participants only", GroupLabel::Participant);
  observed("Re-contact resp.", GroupLabel::RecontactRespondent);
  observed("Non-participants", GroupLabel::NonParticipant);
  for (const auto* method : methods) {
    HospitalizationTable::Line line{std::string(mi::display_name(method->strategy())), {}};
    for (std::size_t s = 0; s < 3; ++s) {
      for (auto h : horizons) {
        Per1000 cell;
        try {
          const auto n = observed_per_1000(table, h, kSexBlocks[s]).n;
          cell = from_pooled(method->per_1000(h, kSexBlocks[s]), n);
        } catch (const DomainError&) {
        }
        line.cells[s].push_back(cell);
      }
    }
    t.lines.push_back(std::move(line));
  }
  return t;
}

std::string hospitalization_text(const HospitalizationTable& t) {
  constexpr std::size_t kLabel = 22;
  constexpr std::size_t kCell = 22;
  std::ostringstream out;
  out << "Hospitalizations per 1000 (95% interval)\n";
  for (std::size_t s = 0; s < 3; ++s) {
    out << pad(std::string(kSexNames[s]) + ":", kLabel);
    for (auto h : t.horizons) out << pad(std::string(to_string(h)), kCell);
    out << "\n";
    for (const auto& line : t.lines) {
      const bool method = line.label.rfind("MI-", 0) == 0;
      const bool full = line.label == "Full cohort";
      out << pad((method || full ? "" : "  ") + line.label, kLabel);
      for (const auto& c : line.cells[s]) {
        if (!c.available) {
          out << pad("--", kCell);
          continue;
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.0f (%.0f,%.0f)", c.estimate, c.ci_low, c.ci_high);
        out << pad(buf, kCell);
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

std::string hospitalization_csv(const HospitalizationTable& t) {
  std::ostringstream out;
  out << "sex,source,horizon,estimate,ci_low,ci_high\n";
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& line : t.lines) {
      for (std::size_t h = 0; h < t.horizons.size(); ++h) {
        const auto& c = line.cells[s][h];
        out << kSexBlocks[s].label() << ',' << line.label << ',' << horizon_flag(t.horizons[h]) << ',';
        if (c.available)
          out << format_real(c.estimate) << ',' << format_real(c.ci_low) << ',' << format_real(c.ci_high);
        else
          out << ",,";
        out << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace recontact::assumption
