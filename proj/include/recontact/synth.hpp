#pragma once

// Synthetic cohorts: stratified background, covariates and true outcomes for
// every invitee, a participation mechanism, nested hospitalization counts and
// questionnaire masking by group.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recontact/cohort.hpp"

namespace recontact::synth {

/// Logistic (or log-linear, for counts) predictor written as named terms.
/// Interactions are written "a:b". A fixed probability replaces the logistic
/// link entirely and may be 0 or 1.
struct LinearPredictor {
  std::vector<std::pair<std::string, double>> terms;
  std::optional<double> fixed_probability;

  double coefficient(const std::string& term) const;
  LinearPredictor& set(const std::string& term, double value);
};

struct ZinbGenerator {
  LinearPredictor count;
  LinearPredictor zero;
  double theta = 1.0;
};

struct HospitalizationModel {
  /// Horizon drawn directly from its ZINB; the others are derived from it.
  Horizon anchor = Horizon::Full;
  ZinbGenerator full;
  ZinbGenerator five_year;
  ZinbGenerator one_year;

  const ZinbGenerator& at(Horizon h) const;
  ZinbGenerator& at(Horizon h);
};

enum class Mechanism { Selection, PatternMixture };

/// strata_targets[region][sex][age band].
using StrataTargets = std::array<std::array<std::array<int, kNumAgeGroups>, 2>, kNumRegions>;

struct SynthConfig {
  int schema_version = 1;
  int n_invitees = 10000;
  StrataTargets strata_targets{};
  Mechanism mechanism = Mechanism::Selection;

  LinearPredictor participation;
  LinearPredictor recontact;

  /// Baseline-category logits against Low / Married.
  LinearPredictor education_mid;
  LinearPredictor education_high;
  LinearPredictor civil_cohabiting;
  LinearPredictor civil_single;
  LinearPredictor civil_divorced;
  LinearPredictor civil_widow;
  LinearPredictor hypertension;
  LinearPredictor high_chol;
  LinearPredictor bp_recent;
  LinearPredictor chol_recent;

  LinearPredictor smoking;
  LinearPredictor heavy_alcohol;

  HospitalizationModel hosp;

  /// Independent item non-response among participants' covariates.
  double item_missing_rate = 0.0;
  /// Item non-response on smoking and alcohol among participants and
  /// re-contact respondents.
  double outcome_item_missing_rate = 0.0;
  std::optional<std::uint64_t> seed;
};

/// Throws ConfigError naming the offending field.
void validate(const SynthConfig& config);

std::string to_json(const SynthConfig& config);
SynthConfig config_from_json(const std::string& text);
SynthConfig load_config(const std::string& path);
/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const SynthConfig& config);

/// Strata from marginal shares by largest-remainder rounding of the products.
StrataTargets make_strata(int n, const std::array<double, kNumRegions>& region_shares,
                          double female_share, const std::array<double, kNumAgeGroups>& band_shares);

/// Built-in configurations. `paper` is calibrated to the published group
/// marginals with a selection mechanism; `five_year` anchors the counts at
/// the five-year horizon; `table3` shifts count intercepts so cohort means
/// track the published per-1000 rates.
SynthConfig paper_config();
SynthConfig five_year_config();
SynthConfig table3_config();

struct EffectSizes {
  /// Log-odds shift of re-contact respondents and non-participants relative
  /// to participants.
  double smoking_shift = 0.3;
  double alcohol_shift = 0.4;
};

/// Pattern-mixture config where group membership is independent of
/// everything (MCAR at zero effect) and re-contact respondents and
/// non-participants share outcome models. The default smoking shift puts
/// non-participants about 5 points above participants.
SynthConfig make_assumption3_config(const EffectSizes& effects = {});

/// Looks up a built-in config by name: paper, five-year, table3, assumption3.
std::optional<SynthConfig> preset(const std::string& name);
std::vector<std::string> preset_names();

/// Same proportions at round(n * scale) invitees.
SynthConfig scaled(const SynthConfig& config, double scale);

CohortTable generate_cohort(const SynthConfig& config, std::uint64_t seed);

/// Exact prevalence over the unmasked truth.
double truth_prevalence(const CohortTable& cohort, Indicator indicator, const Subgroup& subgroup);

/// Expected prevalence under the generating model, integrating the outcome
/// probabilities over `draws` simulated backgrounds.
double superpopulation_prevalence(const SynthConfig& config, Indicator indicator,
                                  const Subgroup& subgroup, int draws = 400000,
                                  std::uint64_t seed = 12345);

/// Per-row expected count E_h = (1 - pi) mu under the generator.
double expected_hospitalizations(const SynthConfig& config, const Background& background,
                                 GroupLabel group, Horizon horizon);

}  // namespace recontact::synth
