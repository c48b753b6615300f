#pragma once

// Per-group descriptive table: counts, shares and means with Wald intervals,
// laid out like a survey's "characteristics of respondents" table.

#include <array>
#include <string>
#include <vector>

#include "recontact/cohort.hpp"

namespace recontact {

/// One cell. Shares are in percent; `available` is false when the
/// denominator is empty (e.g. questionnaire items for non-participants).
struct SummaryCell {
  bool available = false;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

struct SummaryRow {
  std::string label;
  int indent = 0;
  /// Heading rows carry no numbers.
  bool heading = false;
  std::array<SummaryCell, kNumGroups> cells;
};

struct CohortSummary {
  std::array<std::size_t, kNumGroups> group_sizes{};
  std::vector<SummaryRow> rows;

  const SummaryRow& row(const std::string& label) const;
};

/// Proportions use p +- 1.96 sqrt(p(1-p)/n) over the non-missing answers;
/// the mean age uses the sample standard deviation.
CohortSummary summarize_cohort(const CohortTable& table);

std::string summary_text(const CohortSummary& summary);
/// Long format: row,group,n,estimate,ci_low,ci_high; unavailable cells have
/// empty numeric fields.
std::string summary_csv(const CohortSummary& summary);

}  // namespace recontact
