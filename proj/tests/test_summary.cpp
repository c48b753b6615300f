#include <doctest.h>

#include <cmath>
#include <map>

#include "recontact/summary.hpp"
#include "recontact/synth.hpp"

using namespace recontact;

namespace {

using doctest::Approx;

CohortRow row(std::int64_t id, Sex sex, int age, GroupLabel g) {
  CohortRow r;
  r.id = id;
  r.background = {sex, age, Region::Oulu};
  r.group = g;
  return r;
}

}  // namespace

TEST_CASE("four-row hand cohort") {
  CohortTable t;
  auto a = row(1, Sex::Female, 30, GroupLabel::Participant);
  a.questionnaire.daily_smoker = true;
  a.questionnaire.education = Education::High;
  auto b = row(2, Sex::Male, 40, GroupLabel::Participant);
  b.questionnaire.daily_smoker = false;
  b.questionnaire.education = Education::Low;
  auto c = row(3, Sex::Male, 60, GroupLabel::Participant);
  c.questionnaire.daily_smoker = true;
  auto d = row(4, Sex::Male, 50, GroupLabel::NonParticipant);
  t.rows = {a, b, c, d};

  const auto s = summarize_cohort(t);
  CHECK(s.group_sizes == std::array<std::size_t, 3>{3, 0, 1});

  const auto& women = s.row("Women, %").cells[0];
  CHECK(women.estimate == Approx(100.0 / 3.0));
  const double half = 1.959963984540054 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 3.0);
  CHECK(women.ci_low == Approx(100.0 * (1.0 / 3.0 - half)));
  CHECK(women.ci_high == Approx(100.0 * (1.0 / 3.0 + half)));

  const auto& age = s.row("Mean age, years").cells[0];
  CHECK(age.estimate == Approx(130.0 / 3.0));
  const double sd = std::sqrt(((30 - 130.0 / 3) * (30 - 130.0 / 3) + (40 - 130.0 / 3) * (40 - 130.0 / 3) +
                               (60 - 130.0 / 3) * (60 - 130.0 / 3)) / 2.0);
  CHECK(age.ci_high - age.estimate == Approx(1.959963984540054 * sd / std::sqrt(3.0)));

  // Education observed for two participants: one High, one Low.
  CHECK(s.row("High, %").cells[0].estimate == Approx(50.0));
  CHECK(s.row("High, %").cells[0].n == 2);

  // Men smoking: one of two male participants.
  CHECK(s.row("Daily smokers, men %").cells[0].estimate == Approx(50.0));
  CHECK(s.row("Daily smokers, women %").cells[0].estimate == Approx(100.0));
  CHECK(s.row("Daily smokers, women %").cells[0].ci_low == Approx(100.0));

  // Empty group and unanswered items are not available, never NaN.
  CHECK_FALSE(s.row("Women, %").cells[1].available);
  CHECK_FALSE(s.row("Daily smokers, men %").cells[2].available);
  CHECK(s.row("Mean age, years").cells[2].estimate == Approx(50.0));
}

TEST_CASE("all-female cohort gives 100% with zero width") {
  CohortTable t;
  for (int i = 0; i < 20; ++i) t.rows.push_back(row(i + 1, Sex::Female, 25 + i, GroupLabel::Participant));
  const auto& c = summarize_cohort(t).row("Women, %").cells[0];
  CHECK(c.estimate == 100.0);
  CHECK(c.ci_low == 100.0);
  CHECK(c.ci_high == 100.0);
}

TEST_CASE("categorical shares sum to 100 within each group") {
  const auto t = synth::generate_cohort(synth::paper_config(), 3);
  const auto s = summarize_cohort(t);
  CHECK(s.group_sizes[0] + s.group_sizes[1] + s.group_sizes[2] == t.size());

  std::map<std::string, std::array<double, 3>> sums;
  std::string parent;
  for (const auto& r : s.rows) {
    if (r.indent == 0) parent = r.label;
    if (r.heading || r.indent == 0) continue;
    for (std::size_t g = 0; g < 3; ++g)
      if (r.cells[g].available) sums[parent][g] += r.cells[g].estimate;
  }
  for (const char* block : {"Mean age, years", "Education", "Civil status"}) {
    CAPTURE(block);
    const auto& by_group = sums[block];
    for (std::size_t g = 0; g < 2; ++g) CHECK(by_group[g] == Approx(100.0).epsilon(0.001));
  }
  CHECK(sums["Mean age, years"][2] == Approx(100.0).epsilon(0.001));
  // Non-participants answered nothing.
  CHECK_FALSE(s.row("Widow, %").cells[2].available);
}

TEST_CASE("text and csv layouts") {
  const auto t = synth::generate_cohort(synth::scaled(synth::paper_config(), 0.1), 2);
  const auto s = summarize_cohort(t);
  const auto text = summary_text(s);
  CHECK(text.find("Participants") != std::string::npos);
  CHECK(text.find("Daily smokers, men %") != std::string::npos);
  CHECK(text.find("--") != std::string::npos);
  const auto csv = summary_csv(s);
  CHECK(csv.rfind("row,group,n,estimate,ci_low,ci_high\n", 0) == 0);
  CHECK(csv.find("\"Daily smokers, men % / Age group 25-34, %\",Participant,") != std::string::npos);
}
