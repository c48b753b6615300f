#pragma once

// Fully conditional specification multiple imputation under three strategies
// for using re-contact data, and pooling of the completed-data estimates.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recontact/cohort.hpp"

namespace recontact::mi {

enum class Strategy : std::uint8_t {
  /// Separate fits per group; non-participants drawn from the re-contact fit.
  MiMnar,
  /// One fit over participants and re-contact respondents.
  MiMar,
  /// One fit over participants; re-contact answers are discarded first.
  MiMarNr
};

inline constexpr std::array<Strategy, 3> kStrategies{Strategy::MiMnar, Strategy::MiMar,
                                                     Strategy::MiMarNr};

/// CLI spelling: mi-mnar, mi-mar, mi-mar-nr.
std::string_view to_string(Strategy);
/// Report spelling: MI-MNAR, MI-MAR, MI-MAR-NR.
std::string_view display_name(Strategy);
std::optional<Strategy> parse_strategy(std::string_view);

/// Questionnaire fields the engine imputes.
enum class Variable : std::uint8_t {
  Education,
  CivilStatus,
  Hypertension,
  HighChol,
  BpRecent,
  CholRecent,
  DailySmoker,
  HeavyAlcohol
};

inline constexpr int kNumVariables = 8;
inline constexpr std::array<Variable, kNumVariables> kVariables{
    Variable::Education, Variable::CivilStatus, Variable::Hypertension, Variable::HighChol,
    Variable::BpRecent,  Variable::CholRecent,  Variable::DailySmoker,  Variable::HeavyAlcohol};

/// Column name in the cohort schema (heavy_alcohol for the derived flag).
std::string_view to_string(Variable);
std::optional<Variable> parse_variable(std::string_view);
/// Number of levels: 3 for education, 5 for civil status, 2 otherwise.
int levels(Variable);

/// One conditional model. Sex, age and region always enter as predictors;
/// `covariates` lists the questionnaire variables on top of them.
struct TargetModel {
  Variable target;
  std::vector<Variable> covariates;
};

struct ImputationModelSpec {
  std::vector<TargetModel> targets;
  int m = 20;
  int cycles = 20;
  /// Ridge penalty for every inner logistic fit; 0 keeps plain maximum
  /// likelihood and the small-stratum check.
  double ridge = 0.0;

  /// Covariates first, then smoking and heavy alcohol; every variable is
  /// predicted by all the others.
  static ImputationModelSpec standard();
  /// Throws ConfigError.
  void validate() const;
};

/// Mean of the imputed cells of one variable after each cycle, per chain.
/// For categorical variables the share outside the reference level.
struct Trace {
  Variable variable;
  std::vector<std::vector<double>> chains;
};

struct MultipleImputations {
  Strategy strategy = Strategy::MiMnar;
  std::uint64_t seed = 0;
  ImputationModelSpec spec;
  std::vector<CohortTable> completed;
  std::vector<Trace> traces;
  /// Predictors dropped from individual fits (constant, collinear or
  /// separating within the fitting subsample), one line each.
  std::vector<std::string> notes;

  int m() const { return static_cast<int>(completed.size()); }
};

/// Runs spec.m independent chains of spec.cycles sweeps. Chain k draws from
/// its own stream derived from (seed, k), so results do not depend on
/// scheduling. Throws SmallStratumError or ImputationError.
MultipleImputations fcs_impute(const CohortTable& table, const ImputationModelSpec& spec,
                               Strategy strategy, std::uint64_t seed);

/// Run manifest without the completed tables.
std::string manifest_json(const MultipleImputations& imputations);

// ---------------------------------------------------------------------------
// Pooling

struct PooledEstimate {
  double point = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;
  double total_var = 0.0;
  /// Infinite when the between-imputation variance is zero.
  double df = std::numeric_limits<double>::infinity();
  double ci_low = 0.0;
  double ci_high = 0.0;
  int m = 0;

  double ci_width() const { return ci_high - ci_low; }
};

struct Estimate {
  double point;
  double variance;
};

/// Combining rules over m >= 2 completed-data estimates.
PooledEstimate pool(const std::vector<Estimate>& estimates);

/// Single-estimate interval with B = 0 and normal quantiles.
PooledEstimate normal_interval(double point, double variance);

/// Per-imputation prevalence with binomial variance p(1-p)/n, pooled.
PooledEstimate estimate_prevalence(const MultipleImputations& imputations, Indicator indicator,
                                   const Subgroup& subgroup);

/// Participants' observed values only.
PooledEstimate complete_case_prevalence(const CohortTable& table, Indicator indicator,
                                        const Subgroup& subgroup);

}  // namespace recontact::mi
