#include "recontact/summary.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>

#include "recontact/error.hpp"

namespace recontact {

namespace {

constexpr double kZ = 1.959963984540054;

SummaryCell proportion(std::size_t hits, std::size_t n) {
  SummaryCell c;
  c.n = n;
  if (n == 0) return c;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  const double half = kZ * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  c.available = true;
  c.estimate = 100.0 * p;
  c.ci_low = 100.0 * (p - half);
  c.ci_high = 100.0 * (p + half);
  return c;
}

SummaryCell mean_of(const std::vector<double>& values) {
  SummaryCell c;
  c.n = values.size();
  if (values.empty()) return c;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  const double half = kZ * sd / std::sqrt(static_cast<double>(values.size()));
  c.available = true;
  c.estimate = mean;
  c.ci_low = mean - half;
  c.ci_high = mean + half;
  return c;
}

// Share of rows (passing `keep`) where `value` is true, skipping rows where
// it is missing.
using Filter = std::function<bool(const CohortRow&)>;
using Value = std::function<std::optional<bool>(const CohortRow&)>;

std::array<SummaryCell, kNumGroups> share(const CohortTable& table, const Filter& keep, const Value& value) {
  std::array<std::size_t, kNumGroups> hits{};
  std::array<std::size_t, kNumGroups> n{};
  for (const auto& row : table.rows) {
    if (!keep(row)) continue;
    const auto v = value(row);
    if (!v) continue;
    const auto g = static_cast<std::size_t>(row.group);
    ++n[g];
    hits[g] += *v;
  }
  std::array<SummaryCell, kNumGroups> out;
  for (std::size_t g = 0; g < kNumGroups; ++g) out[g] = proportion(hits[g], n[g]);
  return out;
}

std::string age_label(AgeGroup a) { return "Age group " + std::string(to_string(a)) + ", %"; }

}  // namespace

const SummaryRow& CohortSummary::row(const std::string& label) const {
  for (const auto& r : rows)
    if (r.label == label) return r;
  throw DomainError("no summary row '" + label + "'");
}

CohortSummary summarize_cohort(const CohortTable& table) {
  CohortSummary s;
  s.group_sizes = table.group_counts();
  const Filter all = [](const CohortRow&) { return true; };
  auto add = [&](std::string label, int indent, std::array<SummaryCell, kNumGroups> cells) {
    s.rows.push_back({std::move(label), indent, false, cells});
  };
  auto heading = [&](std::string label) { s.rows.push_back({std::move(label), 0, true, {}}); };

  add("Women, %", 0, share(table, all, [](const CohortRow& r) { return std::optional<bool>(r.background.female()); }));

  std::array<std::vector<double>, kNumGroups> ages;
  for (const auto& row : table.rows) ages[static_cast<std::size_t>(row.group)].push_back(row.background.age);
  std::array<SummaryCell, kNumGroups> age_cells;
  for (std::size_t g = 0; g < kNumGroups; ++g) age_cells[g] = mean_of(ages[g]);
  add("Mean age, years", 0, age_cells);
  for (int a = 0; a < kNumAgeGroups; ++a) {
    const auto band = static_cast<AgeGroup>(a);
    add(age_label(band), 1, share(table, all, [band](const CohortRow& r) {
          return std::optional<bool>(r.background.age_group() == band);
        }));
  }

  heading("Education");
  for (auto level : {Education::High, Education::Mid, Education::Low}) {
    add(std::string(to_string(level)) + ", %", 1, share(table, all, [level](const CohortRow& r) -> std::optional<bool> {
          if (!r.questionnaire.education) return std::nullopt;
          return *r.questionnaire.education == level;
        }));
  }
  heading("Civil status");
  for (int c = 0; c < kNumCivilStatus; ++c) {
    const auto level = static_cast<CivilStatus>(c);
    add(std::string(to_string(level)) + ", %", 1, share(table, all, [level](const CohortRow& r) -> std::optional<bool> {
          if (!r.questionnaire.civil_status) return std::nullopt;
          return *r.questionnaire.civil_status == level;
        }));
  }

  for (auto indicator : {Indicator::DailySmoking, Indicator::HeavyAlcohol}) {
    const std::string name = indicator == Indicator::DailySmoking ? "Daily smokers" : "Heavy alcohol users";
    for (auto sex : {Sex::Male, Sex::Female}) {
      const Value value = [indicator](const CohortRow& r) { return indicator_value(r.questionnaire, indicator); };
      add(name + ", " + (sex == Sex::Male ? "men" : "women") + " %", 0,
          share(table, [sex](const CohortRow& r) { return r.background.sex == sex; }, value));
      for (int a = 0; a < kNumAgeGroups; ++a) {
        const auto band = static_cast<AgeGroup>(a);
        add(age_label(band), 1, share(table, [sex, band](const CohortRow& r) {
              return r.background.sex == sex && r.background.age_group() == band;
            }, value));
      }
    }
  }
  return s;
}

namespace {

std::string cell_text(const SummaryCell& c) {
  if (!c.available) return "--";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f (%.1f,%.1f)", c.estimate, c.ci_low, c.ci_high);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  s.append(s.size() < width ? width - s.size() : 1, ' ');
  return s;
}

}  // namespace

std::string summary_text(const CohortSummary& summary) {
  constexpr std::size_t kLabel = 34;
  constexpr std::size_t kCell = 22;
  std::ostringstream out;
  out << pad("", kLabel) << pad("Participants", kCell) << pad("Re-contact resp.", kCell) << "Non-participants\n";
  out << pad("N", kLabel);
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    const std::string n = std::to_string(summary.group_sizes[g]);
    out << (g + 1 < kNumGroups ? pad(n, kCell) : n);
  }
  out << '\n';
  for (const auto& row : summary.rows) {
    std::string label = std::string(2 * static_cast<std::size_t>(row.indent), ' ') + row.label;
    if (row.heading) {
      out << label << '\n';
      continue;
    }
    out << pad(label, kLabel);
    for (std::size_t g = 0; g < kNumGroups; ++g) {
      const std::string c = cell_text(row.cells[g]);
      out << (g + 1 < kNumGroups ? pad(c, kCell) : c);
    }
    out << '\n';
  }
  return out.str();
}

std::string summary_csv(const CohortSummary& summary) {
  std::ostringstream out;
  out << "row,group,n,estimate,ci_low,ci_high\n";
  for (std::size_t g = 0; g < kNumGroups; ++g)
    out << "N," << to_string(kGroups[g]) << ',' << summary.group_sizes[g] << ",,,\n";
  std::string parent;
  for (const auto& row : summary.rows) {
    if (row.indent == 0) parent = row.label;
    if (row.heading) continue;
    const std::string label = row.indent == 0 ? row.label : parent + " / " + row.label;
    for (std::size_t g = 0; g < kNumGroups; ++g) {
      const auto& c = row.cells[g];
      out << '"' << label << "\"," << to_string(kGroups[g]) << ',' << c.n << ',';
      if (c.available)
        out << format_real(c.estimate) << ',' << format_real(c.ci_low) << ',' << format_real(c.ci_high);
      else
        out << ",,";
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace recontact
