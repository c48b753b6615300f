#include "recontact/cohort.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "recontact/error.hpp"

namespace recontact {

namespace {

constexpr std::array<std::string_view, 2> kSexNames{"Male", "Female"};
constexpr std::array<std::string_view, kNumRegions> kRegionNames{
    "NorthKarelia", "NorthernSavonia", "TurkuLoimaa", "HelsinkiVantaa", "Oulu"};
constexpr std::array<std::string_view, kNumAgeGroups> kAgeGroupNames{"25-34", "35-44", "45-54",
                                                                     "55-64", "65-74"};
constexpr std::array<std::string_view, kNumGroups> kGroupNames{
    "Participant", "RecontactRespondent", "NonParticipant"};
constexpr std::array<std::string_view, kNumEducation> kEducationNames{"Low", "Mid", "High"};
constexpr std::array<std::string_view, kNumCivilStatus> kCivilNames{
    "Married", "Cohabiting", "Single", "Divorced", "Widow"};
constexpr std::array<std::string_view, 3> kHorizonNames{"full", "five-year", "one-year"};
constexpr std::array<std::string_view, 3> kHorizonFlags{"full", "5y", "1y"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view text, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::string_view, N>& names) {
  const auto index = static_cast<std::size_t>(value);
  return index < N ? names[index] : std::string_view{"?"};
}

enum Column : std::size_t {
  kId,
  kSex,
  kAge,
  kRegion,
  kGroup,
  kSmoker,
  kPortions,
  kEducation,
  kCivil,
  kHypertension,
  kHighChol,
  kBpRecent,
  kCholRecent,
  kHospFull,
  kHosp5y,
  kHosp1y,
  kNumColumns
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

const std::vector<std::string_view>& header_columns() {
  static const std::vector<std::string_view> columns = split_fields(kCohortCsvHeader);
  return columns;
}

class RowParser {
 public:
  RowParser(std::size_t line, const std::vector<std::string_view>& fields)
      : line_(line), fields_(fields) {}

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw LoadError(line_, std::string(header_columns()[column]), what);
  }

  std::string_view raw(std::size_t column) const { return fields_[column]; }

  template <typename Int>
  Int integer(std::size_t column) const {
    const auto text = raw(column);
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
      fail(column, "expected an integer, got '" + std::string(text) + "'");
    }
    return value;
  }

  int count(std::size_t column) const {
    const int value = integer<int>(column);
    if (value < 0) fail(column, "count must be nonnegative");
    return value;
  }

  std::optional<bool> flag(std::size_t column) const {
    const auto text = raw(column);
    if (text.empty()) return std::nullopt;
    if (text == "0") return false;
    if (text == "1") return true;
    fail(column, "expected 0, 1 or empty, got '" + std::string(text) + "'");
  }

  std::optional<double> real(std::size_t column) const {
    const auto text = raw(column);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail(column, "expected a real number, got '" + std::string(text) + "'");
    }
    return value;
  }

  template <typename Enum, typename Parse>
  std::optional<Enum> level(std::size_t column, Parse parse, bool required) const {
    const auto text = raw(column);
    if (text.empty()) {
      if (required) fail(column, "value is required");
      return std::nullopt;
    }
    auto value = parse(text);
    if (!value) fail(column, "unknown level '" + std::string(text) + "'");
    return value;
  }

 private:
  std::size_t line_;
  const std::vector<std::string_view>& fields_;
};

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

void append_flag(std::string& out, const std::optional<bool>& value) {
  if (value) out += *value ? '1' : '0';
}

template <typename Enum>
void append_level(std::string& out, const std::optional<Enum>& value) {
  if (value) out += to_string(*value);
}

void append_questionnaire(std::string& out, const Questionnaire& q) {
  append_flag(out, q.daily_smoker);
  out += ',';
  if (q.alcohol_portions) out += format_real(*q.alcohol_portions);
  out += ',';
  append_level(out, q.education);
  out += ',';
  append_level(out, q.civil_status);
  out += ',';
  append_flag(out, q.hypertension);
  out += ',';
  append_flag(out, q.high_chol);
  out += ',';
  append_flag(out, q.bp_recent);
  out += ',';
  append_flag(out, q.chol_recent);
}

void append_row(std::string& out, const CohortRow& row) {
  out += std::to_string(row.id);
  out += ',';
  out += to_string(row.background.sex);
  out += ',';
  out += std::to_string(row.background.age);
  out += ',';
  out += to_string(row.background.region);
  out += ',';
  out += to_string(row.group);
  out += ',';
  append_questionnaire(out, row.questionnaire);
  out += ',';
  out += std::to_string(row.hosp.full_history);
  out += ',';
  out += std::to_string(row.hosp.five_year);
  out += ',';
  out += std::to_string(row.hosp.one_year);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(0, "", "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace

std::string_view to_string(Sex v) { return name_of(v, kSexNames); }
std::string_view to_string(Region v) { return name_of(v, kRegionNames); }
std::string_view to_string(AgeGroup v) { return name_of(v, kAgeGroupNames); }
std::string_view to_string(GroupLabel v) { return name_of(v, kGroupNames); }
std::string_view to_string(Education v) { return name_of(v, kEducationNames); }
std::string_view to_string(CivilStatus v) { return name_of(v, kCivilNames); }
std::string_view to_string(Horizon v) { return name_of(v, kHorizonNames); }
std::string_view horizon_flag(Horizon v) { return name_of(v, kHorizonFlags); }

std::optional<Sex> parse_sex(std::string_view s) { return lookup<Sex>(s, kSexNames); }
std::optional<Region> parse_region(std::string_view s) { return lookup<Region>(s, kRegionNames); }
std::optional<GroupLabel> parse_group(std::string_view s) {
  return lookup<GroupLabel>(s, kGroupNames);
}
std::optional<Education> parse_education(std::string_view s) {
  return lookup<Education>(s, kEducationNames);
}
std::optional<CivilStatus> parse_civil_status(std::string_view s) {
  return lookup<CivilStatus>(s, kCivilNames);
}
std::optional<Horizon> parse_horizon(std::string_view s) {
  return lookup<Horizon>(s, kHorizonFlags);
}

AgeGroup age_group_of(int age) {
  if (age < kMinAge || age > kMaxAge) {
    throw DomainError("age " + std::to_string(age) + " outside [25, 74]");
  }
  return static_cast<AgeGroup>((age - kMinAge) / 10);
}

bool Questionnaire::any_present() const {
  return daily_smoker || alcohol_portions || heavy_alcohol || education || civil_status ||
         hypertension || high_chol || bp_recent || chol_recent;
}

int HospitalizationCounts::at(Horizon h) const {
  switch (h) {
    case Horizon::Full:
      return full_history;
    case Horizon::FiveYear:
      return five_year;
    case Horizon::OneYear:
      return one_year;
  }
  return full_history;
}

std::array<std::size_t, kNumGroups> CohortTable::group_counts() const {
  std::array<std::size_t, kNumGroups> counts{};
  for (const auto& row : rows) ++counts[static_cast<std::size_t>(row.group)];
  return counts;
}

bool CohortTable::has_truth() const {
  const auto* synthetic = std::get_if<SyntheticProvenance>(&provenance);
  return synthetic != nullptr && synthetic->truth.size() == rows.size();
}

const Questionnaire& CohortTable::truth(std::size_t i) const {
  if (!has_truth()) throw UnavailableTruth("cohort carries no unmasked truth (ingested data)");
  return std::get<SyntheticProvenance>(provenance).truth.at(i);
}

GroupLabel classify_group(bool completed_exam, bool returned_recontact_questionnaire,
                          std::int64_t id) {
  if (completed_exam && returned_recontact_questionnaire) {
    throw InvalidRecord(id, "exam participant cannot have a re-contact questionnaire");
  }
  if (completed_exam) return GroupLabel::Participant;
  if (returned_recontact_questionnaire) return GroupLabel::RecontactRespondent;
  return GroupLabel::NonParticipant;
}

double heavy_alcohol_threshold(Sex sex) { return sex == Sex::Female ? 16.0 : 24.0; }

bool classify_heavy_alcohol(Sex sex, double portions_per_week) {
  if (!(portions_per_week >= 0.0)) {
    throw DomainError("alcohol portions must be nonnegative");
  }
  return portions_per_week > heavy_alcohol_threshold(sex);
}

std::string_view to_string(Indicator v) {
  return v == Indicator::DailySmoking ? "daily_smoking" : "heavy_alcohol";
}

std::optional<bool> indicator_value(const Questionnaire& q, Indicator indicator) {
  return indicator == Indicator::DailySmoking ? q.daily_smoker : q.heavy_alcohol;
}

bool Subgroup::contains(const CohortRow& row) const {
  if (sex && row.background.sex != *sex) return false;
  if (age_group && row.background.age_group() != *age_group) return false;
  if (group && row.group != *group) return false;
  return true;
}

std::string Subgroup::label() const {
  std::string out = !sex ? "both" : (*sex == Sex::Male ? "men" : "women");
  if (age_group) out += " " + std::string(to_string(*age_group));
  if (group) out += " " + std::string(to_string(*group));
  return out;
}

std::string format_real(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw NumericalError("cannot format real");
  return std::string(buffer, ptr);
}

CohortTable parse_cohort(std::string_view text, const std::string& source_name) {
  CohortTable table;
  table.provenance = IngestedProvenance{source_name};

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  std::unordered_set<std::int64_t> ids;

  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = chomp(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (!header_seen) {
      const auto& expected = header_columns();
      for (std::size_t c = 0; c < expected.size(); ++c) {
        if (c >= fields.size() || fields[c] != expected[c]) {
          throw LoadError(line_no, std::string(expected[c]),
                          "schema mismatch: header must be '" + std::string(kCohortCsvHeader) +
                              "'");
        }
      }
      if (fields.size() != expected.size()) {
        throw LoadError(line_no, std::string(fields[expected.size()]),
                        "schema mismatch: unexpected extra column");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    if (fields.size() != kNumColumns) {
      throw LoadError(line_no, "",
                      "expected " + std::to_string(kNumColumns) + " fields, got " +
                          std::to_string(fields.size()));
    }

    RowParser p(line_no, fields);
    CohortRow row;
    row.id = p.integer<std::int64_t>(kId);
    if (!ids.insert(row.id).second) p.fail(kId, "duplicate id " + std::to_string(row.id));

    row.background.sex = *p.level<Sex>(kSex, parse_sex, true);
    row.background.age = p.integer<int>(kAge);
    if (row.background.age < kMinAge || row.background.age > kMaxAge) {
      p.fail(kAge, "age " + std::to_string(row.background.age) + " outside [25, 74]");
    }
    row.background.region = *p.level<Region>(kRegion, parse_region, true);
    row.group = *p.level<GroupLabel>(kGroup, parse_group, true);

    auto& q = row.questionnaire;
    q.daily_smoker = p.flag(kSmoker);
    q.alcohol_portions = p.real(kPortions);
    if (q.alcohol_portions) {
      if (*q.alcohol_portions < 0.0) p.fail(kPortions, "portions must be nonnegative");
      q.heavy_alcohol = classify_heavy_alcohol(row.background.sex, *q.alcohol_portions);
    }
    q.education = p.level<Education>(kEducation, parse_education, false);
    q.civil_status = p.level<CivilStatus>(kCivil, parse_civil_status, false);
    q.hypertension = p.flag(kHypertension);
    q.high_chol = p.flag(kHighChol);
    q.bp_recent = p.flag(kBpRecent);
    q.chol_recent = p.flag(kCholRecent);

    if (row.group == GroupLabel::NonParticipant) {
      for (std::size_t c = kSmoker; c <= kCholRecent; ++c) {
        if (!fields[c].empty()) p.fail(c, "non-participant rows must have no questionnaire data");
      }
    }

    row.hosp.full_history = p.count(kHospFull);
    row.hosp.five_year = p.count(kHosp5y);
    row.hosp.one_year = p.count(kHosp1y);
    if (row.hosp.five_year > row.hosp.full_history) {
      p.fail(kHosp5y, "five-year count exceeds full-history count");
    }
    if (row.hosp.one_year > row.hosp.five_year) {
      p.fail(kHosp1y, "one-year count exceeds five-year count");
    }
    table.rows.push_back(row);
  }
  if (!header_seen) throw LoadError(1, "", "empty file: header required");
  if (table.rows.empty()) throw LoadError(line_no, "", "cohort has no rows");
  return table;
}

CohortTable load_cohort(const std::string& path) { return parse_cohort(read_file(path), path); }

std::string cohort_to_csv(const CohortTable& table) {
  std::string out;
  out.reserve(64 * (table.rows.size() + 1));
  out += kCohortCsvHeader;
  out += '\n';
  for (const auto& row : table.rows) {
    append_row(out, row);
    out += '\n';
  }
  return out;
}

void write_cohort(const CohortTable& table, std::ostream& out) { out << cohort_to_csv(table); }

void write_cohort(const CohortTable& table, const std::string& path) {
  write_file(path, cohort_to_csv(table));
}

void write_completed_cohort(const CohortTable& table, const std::string& path) {
  std::string out;
  out += kCohortCsvHeader;
  out += ",heavy_alcohol\n";
  for (const auto& row : table.rows) {
    append_row(out, row);
    out += ',';
    append_flag(out, row.questionnaire.heavy_alcohol);
    out += '\n';
  }
  write_file(path, out);
}

void write_truth(const CohortTable& table, const std::string& path) {
  std::string out;
  out += kTruthCsvHeader;
  out += '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out += std::to_string(table.rows[i].id);
    out += ',';
    append_questionnaire(out, table.truth(i));
    out += '\n';
  }
  write_file(path, out);
}

void attach_truth(CohortTable& table, const std::string& truth_path, std::uint64_t seed,
                  const std::string& config_hash) {
  const std::string text = read_file(truth_path);
  // Reuse the row parser by padding truth lines into the cohort layout.
  std::vector<Questionnaire> truth;
  truth.reserve(table.rows.size());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const auto line = chomp(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kTruthCsvHeader) throw LoadError(1, "", "truth schema mismatch");
      continue;
    }
    if (line.empty()) continue;
    const auto idx = truth.size();
    if (idx >= table.rows.size()) throw LoadError(line_no, "id", "more truth rows than cohort rows");
    const auto& row = table.rows[idx];
    const auto tf = split_fields(line);
    if (tf.size() != 9) throw LoadError(line_no, "", "expected 9 fields");
    std::vector<std::string_view> fields(kNumColumns, std::string_view{});
    fields[kId] = tf[0];
    for (std::size_t c = 1; c < 9; ++c) fields[kSmoker + c - 1] = tf[c];
    RowParser p(line_no, fields);
    if (p.integer<std::int64_t>(kId) != row.id) p.fail(kId, "truth id does not match cohort row");
    Questionnaire q;
    q.daily_smoker = p.flag(kSmoker);
    q.alcohol_portions = p.real(kPortions);
    if (q.alcohol_portions) q.heavy_alcohol = classify_heavy_alcohol(row.background.sex, *q.alcohol_portions);
    q.education = p.level<Education>(kEducation, parse_education, false);
    q.civil_status = p.level<CivilStatus>(kCivil, parse_civil_status, false);
    q.hypertension = p.flag(kHypertension);
    q.high_chol = p.flag(kHighChol);
    q.bp_recent = p.flag(kBpRecent);
    q.chol_recent = p.flag(kCholRecent);
    truth.push_back(q);
  }
  if (truth.size() != table.rows.size()) {
    throw LoadError(line_no, "id", "truth file row count does not match cohort");
  }
  table.provenance = SyntheticProvenance{seed, config_hash, std::move(truth)};
}

void validate_cohort(const CohortTable& table) {
  if (table.rows.empty()) throw LoadError(1, "", "cohort has no rows");
  std::unordered_set<std::int64_t> ids;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    auto check = [&](bool ok, const char* column, const char* what) {
      if (!ok) throw LoadError(line, column, what);
    };
    check(ids.insert(row.id).second, "id", "duplicate id");
    check(static_cast<int>(row.background.sex) < 2, "sex", "unknown level");
    check(row.background.age >= kMinAge && row.background.age <= kMaxAge, "age",
          "age outside [25, 74]");
    check(static_cast<int>(row.background.region) < kNumRegions, "region", "unknown level");
    check(static_cast<int>(row.group) < kNumGroups, "group", "unknown level");

    const auto& q = row.questionnaire;
    if (row.group == GroupLabel::NonParticipant) {
      check(!q.daily_smoker, "daily_smoker", "non-participant with questionnaire data");
      check(!q.alcohol_portions && !q.heavy_alcohol, "alcohol_portions",
            "non-participant with questionnaire data");
      check(!q.education, "education", "non-participant with questionnaire data");
      check(!q.civil_status, "civil_status", "non-participant with questionnaire data");
      check(!q.hypertension, "hypertension", "non-participant with questionnaire data");
      check(!q.high_chol, "high_chol", "non-participant with questionnaire data");
      check(!q.bp_recent, "bp_recent", "non-participant with questionnaire data");
      check(!q.chol_recent, "chol_recent", "non-participant with questionnaire data");
    }
    if (q.alcohol_portions) {
      check(std::isfinite(*q.alcohol_portions) && *q.alcohol_portions >= 0.0, "alcohol_portions",
            "portions must be a nonnegative real");
      const bool heavy = *q.alcohol_portions > heavy_alcohol_threshold(row.background.sex);
      check(q.heavy_alcohol.has_value() && *q.heavy_alcohol == heavy, "alcohol_portions",
            "heavy_alcohol flag disagrees with portions");
    }
    if (q.education) {
      check(static_cast<int>(*q.education) < kNumEducation, "education", "unknown level");
    }
    if (q.civil_status) {
      check(static_cast<int>(*q.civil_status) < kNumCivilStatus, "civil_status", "unknown level");
    }
    const auto& h = row.hosp;
    check(h.full_history >= 0 && h.five_year >= 0 && h.one_year >= 0, "hosp_full",
          "negative count");
    check(h.five_year <= h.full_history, "hosp_5y", "five-year count exceeds full history");
    check(h.one_year <= h.five_year, "hosp_1y", "one-year count exceeds five-year count");
  }
}

}  // namespace recontact
