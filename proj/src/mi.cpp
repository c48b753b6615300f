#include "recontact/mi.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <map>
#include <memory>
#include <random>
#include <set>

#include "recontact/error.hpp"
#include "recontact/glm.hpp"

namespace recontact::mi {

namespace {

using glm::MatrixXd;
using glm::VectorXd;

constexpr std::array<std::string_view, kNumVariables> kVariableNames{
    "education", "civil_status", "hypertension", "high_chol",
    "bp_recent", "chol_recent",  "daily_smoker", "heavy_alcohol"};

constexpr std::int8_t kMissing = -1;

std::size_t vi(Variable v) { return static_cast<std::size_t>(v); }

std::int8_t encode(const Questionnaire& q, Variable v) {
  const auto flag = [](const std::optional<bool>& b) -> std::int8_t { return b ? *b : kMissing; };
  switch (v) {
    case Variable::Education:
      return q.education ? static_cast<std::int8_t>(*q.education) : kMissing;
    case Variable::CivilStatus:
      return q.civil_status ? static_cast<std::int8_t>(*q.civil_status) : kMissing;
    case Variable::Hypertension:
      return flag(q.hypertension);
    case Variable::HighChol:
      return flag(q.high_chol);
    case Variable::BpRecent:
      return flag(q.bp_recent);
    case Variable::CholRecent:
      return flag(q.chol_recent);
    case Variable::DailySmoker:
      return flag(q.daily_smoker);
    case Variable::HeavyAlcohol:
      return flag(q.heavy_alcohol);
  }
  return kMissing;
}

void decode(Questionnaire& q, Variable v, std::int8_t code) {
  const bool b = code != 0;
  switch (v) {
    case Variable::Education:
      q.education = static_cast<Education>(code);
      break;
    case Variable::CivilStatus:
      q.civil_status = static_cast<CivilStatus>(code);
      break;
    case Variable::Hypertension:
      q.hypertension = b;
      break;
    case Variable::HighChol:
      q.high_chol = b;
      break;
    case Variable::BpRecent:
      q.bp_recent = b;
      break;
    case Variable::CholRecent:
      q.chol_recent = b;
      break;
    case Variable::DailySmoker:
      q.daily_smoker = b;
      break;
    case Variable::HeavyAlcohol:
      q.heavy_alcohol = b;
      break;
  }
}

/// Row-major n x kNumVariables code matrix.
struct Codes {
  std::size_t n = 0;
  std::vector<std::int8_t> v;

  std::int8_t& at(std::size_t i, Variable var) { return v[i * kNumVariables + vi(var)]; }
  std::int8_t at(std::size_t i, Variable var) const { return v[i * kNumVariables + vi(var)]; }
};

// ---------------------------------------------------------------------------
// Fitting groups

struct FitGroup {
  std::string name;
  /// Rows whose observed values enter this group's fits.
  std::vector<std::size_t> members;
};

struct Plan {
  std::vector<FitGroup> groups;
  /// Fitting group whose model imputes row i.
  std::vector<int> imputer;
  /// Rows whose questionnaire is discarded before imputation.
  std::vector<bool> discarded;
};

Plan make_plan(const CohortTable& t, Strategy strategy) {
  Plan p;
  const std::size_t n = t.size();
  p.imputer.assign(n, 0);
  p.discarded.assign(n, false);
  switch (strategy) {
    case Strategy::MiMnar:
      p.groups = {{std::string(to_string(GroupLabel::Participant)), {}},
                  {std::string(to_string(GroupLabel::RecontactRespondent)), {}}};
      for (std::size_t i = 0; i < n; ++i) {
        const bool participant = t.rows[i].group == GroupLabel::Participant;
        p.imputer[i] = participant ? 0 : 1;
        if (t.rows[i].group != GroupLabel::NonParticipant) p.groups[participant ? 0 : 1].members.push_back(i);
      }
      break;
    case Strategy::MiMar:
      p.groups = {{"Participant+RecontactRespondent", {}}};
      for (std::size_t i = 0; i < n; ++i) {
        if (t.rows[i].group != GroupLabel::NonParticipant) p.groups[0].members.push_back(i);
      }
      break;
    case Strategy::MiMarNr:
      p.groups = {{std::string(to_string(GroupLabel::Participant)), {}}};
      for (std::size_t i = 0; i < n; ++i) {
        if (t.rows[i].group == GroupLabel::Participant) p.groups[0].members.push_back(i);
        p.discarded[i] = t.rows[i].group == GroupLabel::RecontactRespondent;
      }
      break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Design

constexpr int kBackgroundColumns = 7;

int covariate_width(Variable v) { return levels(v) - 1; }

struct Layout {
  std::vector<Variable> covariates;
  /// First design column of each covariate.
  std::vector<int> offsets;
  std::vector<std::string> names;
  int width = 0;
};

Layout make_layout(const TargetModel& model) {
  Layout l;
  l.covariates = model.covariates;
  l.names = {glm::kInterceptName, "female", "age"};
  for (int r = 1; r < kNumRegions; ++r) {
    l.names.push_back("region_" + std::string(to_string(static_cast<Region>(r))));
  }
  for (Variable v : model.covariates) {
    l.offsets.push_back(static_cast<int>(l.names.size()));
    const std::string base(to_string(v));
    if (v == Variable::Education) {
      l.names.push_back(base + "_Mid");
      l.names.push_back(base + "_High");
    } else if (v == Variable::CivilStatus) {
      for (int k = 1; k < kNumCivilStatus; ++k) {
        l.names.push_back(base + "_" + std::string(to_string(static_cast<CivilStatus>(k))));
      }
    } else {
      l.names.push_back(base);
    }
  }
  l.width = static_cast<int>(l.names.size());
  return l;
}

void fill_row(const Layout& l, const Background& bg, const Codes& codes, std::size_t i, double* out) {
  out[0] = 1.0;
  out[1] = bg.female();
  out[2] = (bg.age - 50) / 10.0;
  for (int r = 1; r < kNumRegions; ++r) out[2 + r] = static_cast<int>(bg.region) == r;
  int c = kBackgroundColumns;
  for (Variable v : l.covariates) {
    const int code = codes.at(i, v);
    const int w = covariate_width(v);
    for (int k = 1; k <= w; ++k) out[c++] = code == k;
  }
}

/// x'beta without materializing the design row.
double linear_predictor(const Layout& l, const Background& bg, const Codes& codes, std::size_t i,
                        const VectorXd& beta) {
  double eta = beta[0] + beta[2] * ((bg.age - 50) / 10.0);
  if (bg.female()) eta += beta[1];
  if (const int r = static_cast<int>(bg.region); r > 0) eta += beta[2 + r];
  for (std::size_t k = 0; k < l.covariates.size(); ++k) {
    const int code = codes.at(i, l.covariates[k]);
    if (code > 0) eta += beta[l.offsets[k] + code - 1];
  }
  return eta;
}

// ---------------------------------------------------------------------------
// Fitted conditional models

struct FittedModel {
  /// Drawn-coefficient sampler over the kept columns.
  std::optional<glm::CoefficientSampler> sampler;
  std::vector<int> kept;
  /// Set when every observed outcome in the subsample is equal.
  std::optional<int> constant;
  VectorXd last_coefficients;
};

struct FitContext {
  Variable variable;
  const std::string* group;
  int cycle;
  int dichotomy;
  double ridge;
};

std::string note_prefix(const FitContext& c) {
  std::string s = std::string(to_string(c.variable));
  if (levels(c.variable) > 2) s += " (split " + std::to_string(c.dichotomy + 1) + ")";
  return s + ", group " + *c.group + ": ";
}

FittedModel fit_model(const MatrixXd& X, const std::vector<std::string>& names, const VectorXd& y,
                      const FitContext& ctx, const VectorXd* warm, std::set<std::string>& notes) {
  const std::string var(to_string(ctx.variable));
  const auto n = static_cast<std::size_t>(X.rows());
  const auto needed = static_cast<std::size_t>(X.cols() - 1 + 10);
  if (n == 0 || (ctx.ridge == 0.0 && n < needed)) throw SmallStratumError(var, *ctx.group, n, needed);

  FittedModel out;
  const double ybar = y.mean();
  if (ybar == 0.0 || ybar == 1.0) {
    out.constant = ybar == 1.0;
    notes.insert(note_prefix(ctx) + "all observed values equal, imputed as that value");
    return out;
  }
  for (int j = 0; j < X.cols(); ++j) {
    if (j == 0 || X.col(j).maxCoeff() != X.col(j).minCoeff()) {
      out.kept.push_back(j);
    } else {
      notes.insert(note_prefix(ctx) + "dropped constant predictor " + names[static_cast<std::size_t>(j)]);
    }
  }
  glm::LogisticOptions options;
  options.ridge = ctx.ridge;
  while (true) {
    MatrixXd Xk(X.rows(), static_cast<Eigen::Index>(out.kept.size()));
    std::vector<std::string> kn;
    for (std::size_t k = 0; k < out.kept.size(); ++k) {
      Xk.col(static_cast<Eigen::Index>(k)) = X.col(out.kept[k]);
      kn.push_back(names[static_cast<std::size_t>(out.kept[k])]);
    }
    options.start.reset();
    if (warm && warm->size() == Xk.cols()) options.start = *warm;
    std::string drop;
    std::string reason;
    try {
      const auto fit = glm::fit_logistic(glm::DesignMatrix(std::move(Xk), kn), y, options);
      if (!fit.converged) throw ImputationError(var, *ctx.group, ctx.cycle, "logistic fit did not converge");
      try {
        out.sampler.emplace(fit.coefficients, fit.covariance);
      } catch (const NumericalError& e) {
        throw ImputationError(var, *ctx.group, ctx.cycle, e.what());
      }
      out.last_coefficients = fit.coefficients;
      return out;
    } catch (const CollinearityError& e) {
      drop = e.column();
      reason = "collinear";
    } catch (const SeparationError& e) {
      drop = e.column();
      reason = "separating";
    } catch (const ImputationError&) {
      throw;
    } catch (const Error& e) {
      throw ImputationError(var, *ctx.group, ctx.cycle, e.what());
    }
    const auto it = std::find(kn.begin(), kn.end(), drop);
    if (drop == glm::kInterceptName || it == kn.end()) {
      throw ImputationError(var, *ctx.group, ctx.cycle, "inner fit failed at '" + drop + "'");
    }
    notes.insert(note_prefix(ctx) + "dropped " + reason + " predictor " + drop);
    out.kept.erase(out.kept.begin() + (it - kn.begin()));
  }
}

// ---------------------------------------------------------------------------
// Problem set-up shared by all chains

struct CleanFit {
  std::shared_ptr<const FittedModel> model;
  std::exception_ptr error;
  std::set<std::string> notes;
};

struct Problem {
  const CohortTable* table;
  const ImputationModelSpec* spec;
  Plan plan;
  Codes observed;
  /// Cells to impute, per variable.
  std::array<std::vector<std::size_t>, kNumVariables> missing;
  /// Whether group g imputes any cell of a variable.
  std::array<std::array<bool, 2>, kNumVariables> imputes{};
  std::vector<Layout> layouts;
  /// Clean fits keyed by (target index, dichotomy, group).
  std::map<std::tuple<std::size_t, int, int>, CleanFit> clean;
};

/// Rows of group g with an observed target at or beyond dichotomy d.
std::vector<std::size_t> fit_rows(const Problem& p, Variable target, int d, int g) {
  std::vector<std::size_t> rows;
  for (std::size_t i : p.plan.groups[static_cast<std::size_t>(g)].members) {
    const int code = p.observed.at(i, target);
    if (code != kMissing && code >= d) rows.push_back(i);
  }
  return rows;
}

bool group_imputes(const Problem& p, Variable target, int g) {
  return p.imputes[vi(target)][static_cast<std::size_t>(g)];
}

FittedModel fit_on(const Problem& p, std::size_t t, int d, int g, const Codes& codes, int cycle,
                   const VectorXd* warm, std::set<std::string>& notes) {
  const auto& model = p.spec->targets[t];
  const auto& layout = p.layouts[t];
  const auto rows = fit_rows(p, model.target, d, g);
  MatrixXd X(static_cast<Eigen::Index>(rows.size()), layout.width);
  VectorXd y(static_cast<Eigen::Index>(rows.size()));
  std::vector<double> buf(static_cast<std::size_t>(layout.width));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    fill_row(layout, p.table->rows[i].background, codes, i, buf.data());
    for (int j = 0; j < layout.width; ++j) X(static_cast<Eigen::Index>(k), j) = buf[static_cast<std::size_t>(j)];
    y(static_cast<Eigen::Index>(k)) = p.observed.at(i, model.target) >= d + 1;
  }
  const FitContext ctx{model.target, &p.plan.groups[static_cast<std::size_t>(g)].name, cycle, d, p.spec->ridge};
  return fit_model(X, layout.names, y, ctx, warm, notes);
}

Problem set_up(const CohortTable& table, const ImputationModelSpec& spec, Strategy strategy) {
  Problem p;
  p.table = &table;
  p.spec = &spec;
  p.plan = make_plan(table, strategy);
  const std::size_t n = table.size();
  p.observed.n = n;
  p.observed.v.assign(n * kNumVariables, kMissing);
  for (std::size_t i = 0; i < n; ++i) {
    if (p.plan.discarded[i]) continue;
    for (Variable v : kVariables) p.observed.at(i, v) = encode(table.rows[i].questionnaire, v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (Variable v : kVariables) {
      if (p.observed.at(i, v) == kMissing) {
        p.missing[vi(v)].push_back(i);
        p.imputes[vi(v)][static_cast<std::size_t>(p.plan.imputer[i])] = true;
      }
    }
  }
  std::array<bool, kNumVariables> modeled{};
  for (const auto& t : spec.targets) modeled[vi(t.target)] = true;
  for (Variable v : kVariables) {
    if (!p.missing[vi(v)].empty() && !modeled[vi(v)]) {
      throw ImputationError(std::string(to_string(v)), "-", -1, "has missing values but no imputation model");
    }
  }
  for (const auto& t : spec.targets) p.layouts.push_back(make_layout(t));

  // Fits whose subsample touches no imputed cell are the same in every sweep
  // of every chain.
  for (std::size_t t = 0; t < spec.targets.size(); ++t) {
    const auto& model = spec.targets[t];
    for (int g = 0; g < static_cast<int>(p.plan.groups.size()); ++g) {
      if (!group_imputes(p, model.target, g)) continue;
      for (int d = 0; d < levels(model.target) - 1; ++d) {
        bool clean = true;
        for (std::size_t i : fit_rows(p, model.target, d, g)) {
          for (Variable c : model.covariates) clean = clean && p.observed.at(i, c) != kMissing;
          if (!clean) break;
        }
        if (clean) {
          // Failures surface only if a chain ends up needing this fit.
          CleanFit& entry = p.clean[{t, d, g}];
          try {
            entry.model = std::make_shared<const FittedModel>(fit_on(p, t, d, g, p.observed, 0, nullptr, entry.notes));
          } catch (const Error&) {
            entry.error = std::current_exception();
          }
        }
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// One chain

struct ChainResult {
  Codes codes;
  std::vector<std::vector<double>> traces;  // [variable][cycle]
  std::set<std::string> notes;
};

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

/// Uniform on [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return std::mt19937_64(seq);
}

void initialize(const Problem& p, Codes& codes, std::mt19937_64& rng) {
  for (Variable v : kVariables) {
    const auto& cells = p.missing[vi(v)];
    if (cells.empty()) continue;
    std::vector<std::vector<std::int8_t>> donors(p.plan.groups.size());
    for (std::size_t g = 0; g < p.plan.groups.size(); ++g) {
      for (std::size_t i : p.plan.groups[g].members) {
        if (p.observed.at(i, v) != kMissing) donors[g].push_back(p.observed.at(i, v));
      }
    }
    std::vector<std::int8_t> everyone;
    for (std::size_t i = 0; i < p.observed.n; ++i) {
      if (p.observed.at(i, v) != kMissing) everyone.push_back(p.observed.at(i, v));
    }
    for (std::size_t i : cells) {
      const auto& pool = donors[static_cast<std::size_t>(p.plan.imputer[i])];
      const auto& from = pool.empty() ? everyone : pool;
      if (from.empty()) {
        throw ImputationError(std::string(to_string(v)),
                              p.plan.groups[static_cast<std::size_t>(p.plan.imputer[i])].name, -1,
                              "no observed values to start from");
      }
      codes.at(i, v) = from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
    }
  }
}

ChainResult run_chain(const Problem& p, std::uint64_t seed, int chain) {
  auto rng = chain_rng(seed, chain);
  ChainResult out;
  out.codes = p.observed;
  out.traces.assign(kNumVariables, {});
  initialize(p, out.codes, rng);

  const auto& spec = *p.spec;
  std::map<std::tuple<std::size_t, int, int>, VectorXd> warm;
  for (int cycle = 0; cycle < spec.cycles; ++cycle) {
    for (std::size_t t = 0; t < spec.targets.size(); ++t) {
      const Variable target = spec.targets[t].target;
      const auto& cells = p.missing[vi(target)];
      if (cells.empty()) continue;
      const auto& layout = p.layouts[t];
      for (std::size_t i : cells) out.codes.at(i, target) = 0;
      for (int d = 0; d < levels(target) - 1; ++d) {
        for (int g = 0; g < static_cast<int>(p.plan.groups.size()); ++g) {
          if (!group_imputes(p, target, g)) continue;
          const bool pending = std::any_of(cells.begin(), cells.end(), [&](std::size_t i) {
            return p.plan.imputer[i] == g && out.codes.at(i, target) == d;
          });
          if (!pending) continue;
          const auto key = std::make_tuple(t, d, g);
          std::shared_ptr<const FittedModel> model;
          if (const auto it = p.clean.find(key); it != p.clean.end()) {
            if (it->second.error) std::rethrow_exception(it->second.error);
            model = it->second.model;
            out.notes.insert(it->second.notes.begin(), it->second.notes.end());
          } else {
            const auto w = warm.find(key);
            auto fitted = fit_on(p, t, d, g, out.codes, cycle, w == warm.end() ? nullptr : &w->second, out.notes);
            if (fitted.sampler) warm[key] = fitted.last_coefficients;
            model = std::make_shared<const FittedModel>(std::move(fitted));
          }
          // Coefficients drawn once per fit, expanded to the full layout.
          VectorXd beta = VectorXd::Zero(layout.width);
          if (model->sampler) {
            const VectorXd draw = model->sampler->draw(rng);
            for (std::size_t k = 0; k < model->kept.size(); ++k) beta(model->kept[k]) = draw(static_cast<Eigen::Index>(k));
          }
          for (std::size_t i : cells) {
            if (p.plan.imputer[i] != g || out.codes.at(i, target) != d) continue;
            bool up;
            if (model->constant) {
              up = *model->constant == 1;
            } else {
              const double eta = linear_predictor(layout, p.table->rows[i].background, out.codes, i, beta);
              up = uniform01(rng) < sigmoid(eta);
            }
            if (up) out.codes.at(i, target) = static_cast<std::int8_t>(d + 1);
          }
        }
      }
    }
    for (Variable v : kVariables) {
      const auto& cells = p.missing[vi(v)];
      if (cells.empty()) continue;
      double s = 0.0;
      for (std::size_t i : cells) s += out.codes.at(i, v) != 0;
      out.traces[vi(v)].push_back(s / static_cast<double>(cells.size()));
    }
  }
  return out;
}

CohortTable complete(const Problem& p, const Codes& codes) {
  CohortTable t = *p.table;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (p.plan.discarded[i]) t.rows[i].questionnaire = Questionnaire{};
  }
  for (Variable v : kVariables) {
    for (std::size_t i : p.missing[vi(v)]) decode(t.rows[i].questionnaire, v, codes.at(i, v));
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::MiMnar:
      return "mi-mnar";
    case Strategy::MiMar:
      return "mi-mar";
    case Strategy::MiMarNr:
      return "mi-mar-nr";
  }
  return "?";
}

std::string_view display_name(Strategy s) {
  switch (s) {
    case Strategy::MiMnar:
      return "MI-MNAR";
    case Strategy::MiMar:
      return "MI-MAR";
    case Strategy::MiMarNr:
      return "MI-MAR-NR";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy st : kStrategies) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

std::string_view to_string(Variable v) { return kVariableNames[vi(v)]; }

std::optional<Variable> parse_variable(std::string_view s) {
  for (Variable v : kVariables) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

int levels(Variable v) {
  if (v == Variable::Education) return kNumEducation;
  if (v == Variable::CivilStatus) return kNumCivilStatus;
  return 2;
}

ImputationModelSpec ImputationModelSpec::standard() {
  ImputationModelSpec spec;
  for (Variable v : kVariables) {
    TargetModel model{v, {}};
    for (Variable c : kVariables) {
      if (c != v) model.covariates.push_back(c);
    }
    spec.targets.push_back(std::move(model));
  }
  return spec;
}

void ImputationModelSpec::validate() const {
  if (m < 1) throw ConfigError("m", "must be at least 1");
  if (cycles < 1) throw ConfigError("cycles", "must be at least 1");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge", "must be a finite nonnegative number");
  std::array<bool, kNumVariables> seen{};
  for (const auto& t : targets) {
    const std::string field = "targets." + std::string(to_string(t.target));
    if (seen[vi(t.target)]) throw ConfigError(field, "listed twice");
    seen[vi(t.target)] = true;
    std::array<bool, kNumVariables> cov{};
    for (Variable c : t.covariates) {
      if (c == t.target) throw ConfigError(field, "a variable cannot predict itself");
      if (cov[vi(c)]) throw ConfigError(field, "covariate " + std::string(to_string(c)) + " listed twice");
      cov[vi(c)] = true;
    }
  }
}

MultipleImputations fcs_impute(const CohortTable& table, const ImputationModelSpec& spec, Strategy strategy,
                               std::uint64_t seed) {
  spec.validate();
  const Problem problem = set_up(table, spec, strategy);

  const int m = spec.m;
  std::vector<ChainResult> chains(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < m; ++k) {
    try {
      chains[static_cast<std::size_t>(k)] = run_chain(problem, seed, k);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MultipleImputations out;
  out.strategy = strategy;
  out.seed = seed;
  out.spec = spec;
  std::set<std::string> notes;
  for (auto& c : chains) {
    out.completed.push_back(complete(problem, c.codes));
    notes.insert(c.notes.begin(), c.notes.end());
  }
  for (Variable v : kVariables) {
    if (problem.missing[vi(v)].empty()) continue;
    Trace trace{v, {}};
    for (auto& c : chains) trace.chains.push_back(std::move(c.traces[vi(v)]));
    out.traces.push_back(std::move(trace));
  }
  out.notes.assign(notes.begin(), notes.end());
  return out;
}

std::string manifest_json(const MultipleImputations& mi) {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(mi.strategy));
  j["seed"] = mi.seed;
  j["m"] = mi.spec.m;
  j["cycles"] = mi.spec.cycles;
  j["ridge"] = mi.spec.ridge;
  auto models = nlohmann::ordered_json::array();
  for (const auto& t : mi.spec.targets) {
    auto covs = nlohmann::ordered_json::array();
    covs.push_back("sex");
    covs.push_back("age");
    covs.push_back("region");
    for (Variable c : t.covariates) covs.push_back(std::string(to_string(c)));
    models.push_back({{"target", std::string(to_string(t.target))},
                      {"family", levels(t.target) > 2 ? "nested-logistic" : "logistic"},
                      {"covariates", covs}});
  }
  j["models"] = models;
  auto traces = nlohmann::ordered_json::object();
  for (const auto& t : mi.traces) traces[std::string(to_string(t.variable))] = t.chains;
  j["traces"] = traces;
  j["notes"] = mi.notes;
  return j.dump(2) + "\n";
}

}  // namespace recontact::mi
