#pragma once

// Evidence on the participation assumptions from register-based
// hospitalization counts: a zero-inflated NB model with group indicators,
// and expected counts per 1000 for the observed groups and for each
// imputation strategy.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "recontact/cohort.hpp"
#include "recontact/glm.hpp"
#include "recontact/mi.hpp"

namespace recontact::assumption {

// Column names of the hospitalization model.
inline constexpr const char* kAgeMen = "age_men";
inline constexpr const char* kAgeWomen = "age_women";
inline constexpr const char* kFemale = "female";
inline constexpr const char* kParticipant = "participant";
inline constexpr const char* kRecontact = "recontact";

/// Count part: intercept, age (decades) for men and for women, female, four
/// region dummies against North Karelia, participant and re-contact
/// indicators. Non-participants are the reference group.
glm::DesignMatrix count_design(const CohortTable& table);
/// Zero part: as the count part without the regions.
glm::DesignMatrix zero_design(const CohortTable& table);

glm::ZinbFit fit_hospitalization_model(const CohortTable& table, Horizon horizon);

struct Interval {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;

  bool contains_zero() const { return low <= 0.0 && 0.0 <= high; }
};

/// 95% Wald interval for a named count or zero coefficient.
Interval count_interval(const glm::ZinbFit& fit, const std::string& name);
Interval zero_interval(const glm::ZinbFit& fit, const std::string& name);

struct Verdicts {
  Interval participant;
  Interval recontact;
  /// No participant/non-participant difference in the count rate.
  bool assumption2_supported = false;
  /// No re-contact/non-participant difference in the count rate.
  bool assumption3_supported = false;
};

/// Depends on the fitted count coefficients and covariance only.
Verdicts verdicts_from_fit(const glm::ZinbFit& fit);

struct HorizonResult {
  Horizon horizon = Horizon::Full;
  /// Empty when the fit threw; `error` then says why.
  std::optional<glm::ZinbFit> fit;
  std::string error;
  Verdicts verdicts;

  bool ok() const { return fit.has_value() && error.empty(); }
};

struct AssumptionReport {
  std::size_t n_rows = 0;
  std::array<std::size_t, kNumGroups> group_sizes{};
  std::vector<HorizonResult> horizons;
  std::vector<std::string> warnings;

  bool complete() const;
  const HorizonResult& at(Horizon h) const;
};

/// Fits every requested horizon (concurrently when threads allow). A failing
/// horizon, including a fit that does not converge, is recorded and the
/// others still run.
AssumptionReport evaluate_assumptions(const CohortTable& table,
                                      const std::vector<Horizon>& horizons = {kHorizons.begin(),
                                                                              kHorizons.end()});

std::string report_json(const AssumptionReport& report);
/// Coefficient table (count block then zero block), verdicts per horizon and
/// the assumptions legend.
std::string report_text(const AssumptionReport& report);

/// The three assumptions the strategies rest on, one line each.
const std::vector<std::string>& assumptions_legend();

// ---------------------------------------------------------------------------
// Hospitalizations per 1000

struct Per1000 {
  bool available = false;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Mean observed count x1000 over rows in `subgroup`, with a normal interval
/// from the sample standard deviation. Unavailable for an empty subgroup.
Per1000 observed_per_1000(const CohortTable& table, Horizon horizon, const Subgroup& subgroup);

/// Model-based expected counts under one imputation strategy. In every
/// completed dataset a ZINB is fitted on the rows the strategy treats as
/// informative (count part: sex, age, region and the questionnaire
/// covariates; zero part: sex and age), and each row gets the expected count
/// from the model of its group: participants' fit for participants, and for
/// the other rows the re-contact fit (MI-MNAR), the pooled fit (MI-MAR) or
/// the participants' fit (MI-MAR-NR).
class MethodPredictions {
 public:
  MethodPredictions(const mi::MultipleImputations& imputations, const std::vector<Horizon>& horizons);

  mi::Strategy strategy() const { return strategy_; }
  /// Average of the expected counts x1000, pooled over imputations. The
  /// within-imputation variance adds the model variance of the counts to a
  /// delta-method term for the estimated coefficients.
  /// Throws DomainError for an empty subgroup or an unfitted horizon.
  mi::PooledEstimate per_1000(Horizon horizon, const Subgroup& subgroup) const;
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  // Sums over the rows of one sex x age band x group cell; grad holds the
  // gradient of the summed expected count per fitted model.
  struct Cell {
    std::size_t n = 0;
    double mean_sum = 0.0;
    double var_sum = 0.0;
    std::vector<glm::VectorXd> grad;
  };
  struct Aggregate {
    std::vector<Cell> cells;
    std::vector<glm::MatrixXd> covariance;
  };
  mi::Strategy strategy_;
  std::vector<Horizon> horizons_;
  // [horizon][imputation]
  std::vector<std::vector<Aggregate>> predictions_;
  std::vector<std::string> notes_;
};

/// Rows "Full cohort", the three observed groups and one per method, for
/// men, women and both, across the given horizons.
struct HospitalizationTable {
  std::vector<Horizon> horizons;
  struct Line {
    std::string label;
    /// [sex block: men, women, both][horizon]
    std::array<std::vector<Per1000>, 3> cells;
  };
  std::vector<Line> lines;
};

HospitalizationTable hospitalization_table(const CohortTable& table,
                                           const std::vector<const MethodPredictions*>& methods,
                                           const std::vector<Horizon>& horizons);
std::string hospitalization_text(const HospitalizationTable& t);
/// Long format: sex,source,horizon,estimate,ci_low,ci_high.
std::string hospitalization_csv(const HospitalizationTable& t);

}  // namespace recontact::assumption
