#pragma once

// Cohort schema: one row per invitee with background variables from the
// sampling frame, the participation group, questionnaire answers (possibly
// missing) and register-based hospitalization counts.

#include <array>
#include <iosfwd>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace recontact {

enum class Sex : std::uint8_t { Male, Female };
enum class Region : std::uint8_t { NorthKarelia, NorthernSavonia, TurkuLoimaa, HelsinkiVantaa, Oulu };
enum class AgeGroup : std::uint8_t { Age25to34, Age35to44, Age45to54, Age55to64, Age65to74 };
enum class GroupLabel : std::uint8_t { Participant, RecontactRespondent, NonParticipant };
enum class Education : std::uint8_t { Low, Mid, High };
enum class CivilStatus : std::uint8_t { Married, Cohabiting, Single, Divorced, Widow };
enum class Horizon : std::uint8_t { Full, FiveYear, OneYear };

inline constexpr int kNumRegions = 5;
inline constexpr int kNumAgeGroups = 5;
inline constexpr int kNumGroups = 3;
inline constexpr int kNumEducation = 3;
inline constexpr int kNumCivilStatus = 5;
inline constexpr int kMinAge = 25;
inline constexpr int kMaxAge = 74;

inline constexpr std::array<Region, kNumRegions> kRegions{
    Region::NorthKarelia, Region::NorthernSavonia, Region::TurkuLoimaa, Region::HelsinkiVantaa,
    Region::Oulu};
inline constexpr std::array<GroupLabel, kNumGroups> kGroups{
    GroupLabel::Participant, GroupLabel::RecontactRespondent, GroupLabel::NonParticipant};
inline constexpr std::array<Horizon, 3> kHorizons{Horizon::Full, Horizon::FiveYear,
                                                  Horizon::OneYear};

std::string_view to_string(Sex);
std::string_view to_string(Region);
std::string_view to_string(AgeGroup);
std::string_view to_string(GroupLabel);
std::string_view to_string(Education);
std::string_view to_string(CivilStatus);
std::string_view to_string(Horizon);

std::optional<Sex> parse_sex(std::string_view);
std::optional<Region> parse_region(std::string_view);
std::optional<GroupLabel> parse_group(std::string_view);
std::optional<Education> parse_education(std::string_view);
std::optional<CivilStatus> parse_civil_status(std::string_view);
/// Accepts the CLI spellings "full", "5y", "1y".
std::optional<Horizon> parse_horizon(std::string_view);
std::string_view horizon_flag(Horizon);

/// Floor of age to its 10-year band. Precondition: 25 <= age <= 74.
AgeGroup age_group_of(int age);

struct Background {
  Sex sex = Sex::Male;
  int age = kMinAge;
  Region region = Region::NorthKarelia;

  AgeGroup age_group() const { return age_group_of(age); }
  bool female() const { return sex == Sex::Female; }
};

/// Questionnaire answers. Every field is optional; heavy_alcohol is derived
/// from alcohol_portions when the latter is present, and may be set on its
/// own by imputation.
struct Questionnaire {
  std::optional<bool> daily_smoker;
  std::optional<double> alcohol_portions;
  std::optional<bool> heavy_alcohol;
  std::optional<Education> education;
  std::optional<CivilStatus> civil_status;
  std::optional<bool> hypertension;
  std::optional<bool> high_chol;
  std::optional<bool> bp_recent;
  std::optional<bool> chol_recent;

  bool any_present() const;
  bool operator==(const Questionnaire&) const = default;
};

struct HospitalizationCounts {
  int full_history = 0;
  int five_year = 0;
  int one_year = 0;

  int at(Horizon h) const;
  bool operator==(const HospitalizationCounts&) const = default;
};

struct CohortRow {
  std::int64_t id = 0;
  Background background;
  GroupLabel group = GroupLabel::Participant;
  Questionnaire questionnaire;
  HospitalizationCounts hosp;
};

/// Generated data keeps the unmasked questionnaire of every row, aligned
/// with CohortTable::rows, for scoring.
struct SyntheticProvenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<Questionnaire> truth;
};

struct IngestedProvenance {
  std::string path;
};

using Provenance = std::variant<SyntheticProvenance, IngestedProvenance>;

struct CohortTable {
  std::vector<CohortRow> rows;
  Provenance provenance = IngestedProvenance{};

  std::size_t size() const { return rows.size(); }
  std::array<std::size_t, kNumGroups> group_counts() const;
  bool has_truth() const;
  /// Unmasked questionnaire for row i; throws UnavailableTruth on ingested data.
  const Questionnaire& truth(std::size_t i) const;
};

// ---------------------------------------------------------------------------
// Classification rules

/// Participation group from the two survey outcomes. Re-contact letters went
/// to exam non-participants only, so both flags true is an invalid record.
GroupLabel classify_group(bool completed_exam, bool returned_recontact_questionnaire,
                          std::int64_t id = 0);

/// Heavy use is strictly more than 16 portions a week for women and 24 for
/// men (one portion = 12 g of pure alcohol).
bool classify_heavy_alcohol(Sex sex, double portions_per_week);

double heavy_alcohol_threshold(Sex sex);

// ---------------------------------------------------------------------------
// Indicators and subgroups

enum class Indicator : std::uint8_t { DailySmoking, HeavyAlcohol };

std::string_view to_string(Indicator);
std::optional<bool> indicator_value(const Questionnaire& q, Indicator indicator);

/// Row filter used for prevalence estimates; unset fields match everything.
struct Subgroup {
  std::optional<Sex> sex;
  std::optional<AgeGroup> age_group;
  std::optional<GroupLabel> group;

  bool contains(const CohortRow& row) const;
  /// "men", "women" or "both", with age band and group appended when set.
  std::string label() const;

  static Subgroup men() { return {Sex::Male, std::nullopt, std::nullopt}; }
  static Subgroup women() { return {Sex::Female, std::nullopt, std::nullopt}; }
  static Subgroup both() { return {}; }
};

// ---------------------------------------------------------------------------
// CSV I/O

inline constexpr std::string_view kCohortCsvHeader =
    "id,sex,age,region,group,daily_smoker,alcohol_portions,education,civil_status,"
    "hypertension,high_chol,bp_recent,chol_recent,hosp_full,hosp_5y,hosp_1y";

inline constexpr std::string_view kTruthCsvHeader =
    "id,daily_smoker,alcohol_portions,education,civil_status,hypertension,high_chol,"
    "bp_recent,chol_recent";

/// Loads and validates a cohort file. Errors carry the 1-based line number
/// and the column name.
CohortTable load_cohort(const std::string& path);
CohortTable parse_cohort(std::string_view csv_text, const std::string& source_name);

void write_cohort(const CohortTable& table, std::ostream& out);
void write_cohort(const CohortTable& table, const std::string& path);
std::string cohort_to_csv(const CohortTable& table);

/// Imputed datasets: the cohort schema plus a trailing heavy_alcohol column,
/// since imputation fills the flag without inventing portions.
void write_completed_cohort(const CohortTable& table, const std::string& path);

/// Truth tables for synthetic cohorts (`*.truth.csv`).
void write_truth(const CohortTable& table, const std::string& path);
/// Attaches a truth file to a loaded cohort, turning its provenance into
/// SyntheticProvenance{seed, config_hash}. Ids must match row by row.
void attach_truth(CohortTable& table, const std::string& truth_path, std::uint64_t seed,
                  const std::string& config_hash);

/// Re-checks every schema invariant on an in-memory table, independently of
/// the loader. Throws LoadError whose line is row index + 2.
void validate_cohort(const CohortTable& table);

/// Formats a real exactly (shortest round-trip representation).
std::string format_real(double value);

}  // namespace recontact
