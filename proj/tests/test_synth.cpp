#include <doctest.h>

#include <cmath>
#include <numeric>

#include "recontact/error.hpp"
#include "recontact/glm.hpp"
#include "recontact/synth.hpp"

using namespace recontact;
using namespace recontact::synth;

namespace {

Subgroup in_group(GroupLabel g) { return {std::nullopt, std::nullopt, g}; }

Subgroup sex_group(Sex s, GroupLabel g) { return {s, std::nullopt, g}; }

template <class F>
std::string config_error_field(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

double proportion(const CohortTable& t, GroupLabel g) {
  return static_cast<double>(t.group_counts()[static_cast<std::size_t>(g)]) /
         static_cast<double>(t.size());
}

}  // namespace

TEST_CASE("paper config reproduces the published group shares") {
  const auto t = generate_cohort(paper_config(), 1);
  REQUIRE(t.size() == 10000);
  CHECK(std::abs(proportion(t, GroupLabel::Participant) - 0.5827) < 0.02);
  CHECK(std::abs(proportion(t, GroupLabel::RecontactRespondent) - 0.0597) < 0.02);
  CHECK(std::abs(proportion(t, GroupLabel::NonParticipant) - 0.3576) < 0.02);
}

TEST_CASE("paper config reproduces the qualitative outcome pattern") {
  const auto c = paper_config();
  using enum Indicator;
  for (Sex s : {Sex::Male, Sex::Female}) {
    const double p = superpopulation_prevalence(c, DailySmoking, sex_group(s, GroupLabel::Participant), 100000);
    const double r =
        superpopulation_prevalence(c, DailySmoking, sex_group(s, GroupLabel::RecontactRespondent), 100000);
    CHECK(r > p);
  }
  // Participant smoking near 23% for men and 16.5% for women.
  CHECK(std::abs(superpopulation_prevalence(c, DailySmoking, sex_group(Sex::Male, GroupLabel::Participant)) -
                 0.232) < 0.015);
  CHECK(std::abs(superpopulation_prevalence(c, DailySmoking, sex_group(Sex::Female, GroupLabel::Participant)) -
                 0.165) < 0.015);
}

TEST_CASE("participation fixed at one leaves only participants") {
  auto c = scaled(paper_config(), 0.2);
  c.participation = LinearPredictor{{}, 1.0};
  const auto t = generate_cohort(c, 4);
  CHECK(t.group_counts()[0] == t.size());
  CHECK(t.group_counts()[1] == 0);
  CHECK(t.group_counts()[2] == 0);
}

TEST_CASE("MCAR participation leaves group prevalences equal") {
  auto c = scaled(paper_config(), 10.0);
  c.participation = LinearPredictor{{{"intercept", 0.33}}, std::nullopt};
  c.recontact = LinearPredictor{{{"intercept", -1.8}}, std::nullopt};
  const auto t = generate_cohort(c, 2024);
  const double p = truth_prevalence(t, Indicator::DailySmoking, in_group(GroupLabel::Participant));
  const double n = truth_prevalence(t, Indicator::DailySmoking, in_group(GroupLabel::NonParticipant));
  const double np = static_cast<double>(t.group_counts()[0]);
  const double nn = static_cast<double>(t.group_counts()[2]);
  const double se = std::sqrt(p * (1 - p) / np + n * (1 - n) / nn);
  CHECK(std::abs(p - n) < 4 * se);
}

TEST_CASE("selection on smoking separates the groups") {
  const auto t = generate_cohort(scaled(paper_config(), 5.0), 9);
  const double p = truth_prevalence(t, Indicator::DailySmoking, in_group(GroupLabel::Participant));
  const double n = truth_prevalence(t, Indicator::DailySmoking, in_group(GroupLabel::NonParticipant));
  CHECK(n > p);
}

TEST_CASE("horizons nest in every generated row") {
  for (const auto& name : preset_names()) {
    const auto t = generate_cohort(scaled(*preset(name), 0.5), 17);
    for (const auto& r : t.rows) {
      REQUIRE(r.hosp.one_year <= r.hosp.five_year);
      REQUIRE(r.hosp.five_year <= r.hosp.full_history);
    }
  }
}

TEST_CASE("generated cohorts pass the schema validator") {
  for (const auto& name : preset_names()) {
    const auto t = generate_cohort(scaled(*preset(name), 0.3), 5);
    CHECK_NOTHROW(validate_cohort(t));
    CHECK_NOTHROW(parse_cohort(cohort_to_csv(t), "generated"));
  }
}

TEST_CASE("masking follows the group") {
  auto c = paper_config();
  c.item_missing_rate = 0.1;
  c.outcome_item_missing_rate = 0.05;
  const auto t = generate_cohort(c, 3);
  std::size_t participants = 0, missing_education = 0, observed = 0, missing_smoking = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.rows[i];
    const auto& q = r.questionnaire;
    const auto& truth = t.truth(i);
    REQUIRE(truth.daily_smoker.has_value());
    REQUIRE(truth.education.has_value());
    REQUIRE(*truth.heavy_alcohol == classify_heavy_alcohol(r.background.sex, *truth.alcohol_portions));
    if (r.group == GroupLabel::NonParticipant) {
      CHECK_FALSE(q.any_present());
      continue;
    }
    ++observed;
    missing_smoking += !q.daily_smoker;
    if (q.daily_smoker) CHECK(*q.daily_smoker == *truth.daily_smoker);
    if (r.group == GroupLabel::RecontactRespondent) {
      CHECK(q.education.has_value());
    } else {
      ++participants;
      missing_education += !q.education;
    }
  }
  const double edu_rate = static_cast<double>(missing_education) / static_cast<double>(participants);
  const double smk_rate = static_cast<double>(missing_smoking) / static_cast<double>(observed);
  CHECK(std::abs(edu_rate - 0.1) < 0.015);
  CHECK(std::abs(smk_rate - 0.05) < 0.01);
}

TEST_CASE("a fixed seed fixes the cohort byte for byte") {
  const auto c = scaled(paper_config(), 0.3);
  const auto a = cohort_to_csv(generate_cohort(c, 77));
  const auto b = cohort_to_csv(generate_cohort(c, 77));
  const auto other = cohort_to_csv(generate_cohort(c, 78));
  CHECK(a == b);
  CHECK(a != other);
}

TEST_CASE("truth prevalence") {
  auto c = scaled(paper_config(), 0.2);
  c.smoking = LinearPredictor{{}, 1.0};
  const auto t = generate_cohort(c, 1);
  CHECK(truth_prevalence(t, Indicator::DailySmoking, Subgroup::both()) == 1.0);

  // Pinned at first generation with this toolchain's standard library.
  const auto paper = generate_cohort(paper_config(), 1);
  CHECK(truth_prevalence(paper, Indicator::DailySmoking, Subgroup::men()) ==
        doctest::Approx(0.26180344478216816).epsilon(1e-12));

  auto ingested = parse_cohort(cohort_to_csv(t), "x.csv");
  CHECK_THROWS_AS(truth_prevalence(ingested, Indicator::DailySmoking, Subgroup::both()), UnavailableTruth);

  auto only_men = c;
  for (auto& region : only_men.strata_targets) {
    region[0][0] += std::accumulate(region[1].begin(), region[1].end(), 0);
    region[1].fill(0);
  }
  const auto men = generate_cohort(only_men, 2);
  CHECK_THROWS_AS(truth_prevalence(men, Indicator::DailySmoking, Subgroup::women()), UnavailableTruth);
}

TEST_CASE("assumption-3 configs") {
  using enum Indicator;
  SUBCASE("zero effect gives identical group prevalences") {
    const auto c = make_assumption3_config({0.0, 0.0});
    for (Indicator ind : {DailySmoking, HeavyAlcohol}) {
      const double p = superpopulation_prevalence(c, ind, in_group(GroupLabel::Participant), 50000, 5);
      const double r = superpopulation_prevalence(c, ind, in_group(GroupLabel::RecontactRespondent), 50000, 5);
      const double n = superpopulation_prevalence(c, ind, in_group(GroupLabel::NonParticipant), 50000, 5);
      CHECK(p == doctest::Approx(n).epsilon(1e-12));
      CHECK(r == doctest::Approx(n).epsilon(1e-12));
    }
  }
  SUBCASE("positive shift raises non-participant smoking") {
    const auto t = generate_cohort(make_assumption3_config({0.5, 0.0}), 8);
    CHECK(truth_prevalence(t, DailySmoking, in_group(GroupLabel::NonParticipant)) >
          truth_prevalence(t, DailySmoking, in_group(GroupLabel::Participant)));
  }
  SUBCASE("default effects give re-contact smoking above participants for both sexes") {
    const auto c = make_assumption3_config();
    for (Sex s : {Sex::Male, Sex::Female}) {
      CHECK(superpopulation_prevalence(c, DailySmoking, sex_group(s, GroupLabel::RecontactRespondent), 100000) >
            superpopulation_prevalence(c, DailySmoking, sex_group(s, GroupLabel::Participant), 100000));
    }
    const double gap =
        superpopulation_prevalence(c, DailySmoking, in_group(GroupLabel::NonParticipant), 100000) -
        superpopulation_prevalence(c, DailySmoking, in_group(GroupLabel::Participant), 100000);
    CHECK(gap > 0.05);
  }
  SUBCASE("re-contact respondents and non-participants share outcome models") {
    const auto t = generate_cohort(scaled(make_assumption3_config(), 10.0), 31);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.rows[i].group != GroupLabel::Participant) rows.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    glm::DesignMatrix X(Eigen::MatrixXd::Ones(n, 4), {glm::kInterceptName, "female", "age", "nonparticipant"});
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& r = t.rows[rows[static_cast<std::size_t>(k)]];
      X.X(k, 1) = r.background.female();
      X.X(k, 2) = (r.background.age - 50) / 10.0;
      X.X(k, 3) = r.group == GroupLabel::NonParticipant;
      y(k) = *t.truth(rows[static_cast<std::size_t>(k)]).daily_smoker;
    }
    const auto fit = glm::fit_logistic(X, y);
    CHECK(std::abs(fit.coefficients(3)) < 3 * fit.standard_errors()(3));
  }
}

TEST_CASE("generated counts match the generator's expected means") {
  for (const auto& name : {"paper", "five-year"}) {
    const auto c = scaled(*preset(name), 5.0);
    const auto t = generate_cohort(c, 12);
    for (Horizon h : kHorizons) {
      double sum = 0, sum2 = 0, expected = 0;
      for (const auto& r : t.rows) {
        const double y = r.hosp.at(h);
        sum += y;
        sum2 += y * y;
        expected += expected_hospitalizations(c, r.background, r.group, h);
      }
      const double n = static_cast<double>(t.size());
      const double mean = sum / n;
      const double se = std::sqrt((sum2 / n - mean * mean) / n);
      CAPTURE(name);
      CAPTURE(horizon_flag(h));
      CHECK(std::abs(mean - expected / n) < 4 * se);
    }
  }
}

TEST_CASE("table3 preset tracks the published full-cohort rates") {
  const auto c = table3_config();
  const std::array<double, 3> target{4880, 813, 181};
  double n = 0;
  std::array<double, 3> sum{};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto t = generate_cohort(c, seed);
    for (const auto& r : t.rows) {
      for (Horizon h : kHorizons) {
        sum[static_cast<std::size_t>(h)] += expected_hospitalizations(c, r.background, r.group, h);
      }
    }
    n += static_cast<double>(t.size());
  }
  for (std::size_t h = 0; h < 3; ++h) CHECK(1000 * sum[h] / n == doctest::Approx(target[h]).epsilon(0.01));
}

TEST_CASE("config JSON round trip and hash") {
  for (const auto& name : preset_names()) {
    const auto c = *preset(name);
    const auto text = to_json(c);
    const auto back = config_from_json(text);
    CHECK(to_json(back) == text);
    CHECK(config_hash(back) == config_hash(c));
  }
  auto c = paper_config();
  const auto h = config_hash(c);
  c.seed = 99;
  CHECK(config_hash(c) == h);
  c.smoking.set("female", -0.4);
  CHECK(config_hash(c) != h);
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("config errors name the field") {
  CHECK(config_error_field([] { config_from_json("{not json"); }) == "<document>");

  auto c = paper_config();
  c.smoking.set("shoe_size", 1.0);
  CHECK(config_error_field([&] { validate(c); }) == "outcomes.daily_smoker");

  c = make_assumption3_config();
  c.participation.set("smoker", 0.5);
  CHECK(config_error_field([&] { validate(c); }) == "participation");

  c = paper_config();
  c.smoking.set("participant", 0.5);
  CHECK(config_error_field([&] { validate(c); }) == "outcomes.daily_smoker");

  c = paper_config();
  c.strata_targets[0][0][0] += 1;
  CHECK(config_error_field([&] { validate(c); }) == "strata_targets");

  c = paper_config();
  c.hypertension = LinearPredictor{{}, 1.5};
  CHECK(config_error_field([&] { validate(c); }) == "covariates.hypertension");

  c = paper_config();
  c.hosp.five_year.theta = 0.0;
  CHECK(config_error_field([&] { validate(c); }) == "hospitalization.5y.theta");

  // Realized probability of exactly one.
  c = scaled(paper_config(), 0.1);
  c.smoking.set("intercept", 50.0);
  CHECK(config_error_field([&] { generate_cohort(c, 1); }) == "outcomes.daily_smoker");

  auto j = to_json(paper_config());
  const auto pos = j.find("\"recontact\"");
  j.replace(pos, std::string("\"recontact\"").size(), "\"recontakt\"");
  CHECK(config_error_field([&] { config_from_json(j); }) == "recontakt");

  auto k = to_json(paper_config());
  k.replace(k.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  CHECK(config_error_field([&] { config_from_json(k); }) == "schema_version");
}

TEST_CASE("scaling keeps strata proportions") {
  const auto base = paper_config();
  const auto small = scaled(base, 0.1);
  CHECK(small.n_invitees == 1000);
  CHECK_NOTHROW(validate(small));
  for (int r = 0; r < kNumRegions; ++r) {
    for (int s = 0; s < 2; ++s) {
      for (int b = 0; b < kNumAgeGroups; ++b) {
        const auto ri = static_cast<std::size_t>(r), si = static_cast<std::size_t>(s),
                   bi = static_cast<std::size_t>(b);
        CHECK(std::abs(small.strata_targets[ri][si][bi] - base.strata_targets[ri][si][bi] * 0.1) < 1.0);
      }
    }
  }
  CHECK(generate_cohort(small, 1).size() == 1000);
  CHECK_THROWS_AS(scaled(base, 0.0), ConfigError);
}

TEST_CASE("make_strata apportions exactly") {
  const auto t = make_strata(997, {0.1, 0.2, 0.3, 0.2, 0.2}, 0.5, {0.2, 0.2, 0.2, 0.2, 0.2});
  int total = 0;
  for (const auto& r : t) {
    for (const auto& s : r) total += std::accumulate(s.begin(), s.end(), 0);
  }
  CHECK(total == 997);
}
