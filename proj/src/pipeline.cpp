#include "recontact/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <vector>

#include "recontact/assumption.hpp"
#include "recontact/cohort.hpp"
#include "recontact/mi.hpp"
#include "recontact/summary.hpp"
#include "recontact/synth.hpp"

namespace recontact::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::array<Subgroup, 3> kSexBlocks{Subgroup::men(), Subgroup::women(), Subgroup::both()};
constexpr std::array<Indicator, 2> kIndicators{Indicator::DailySmoking, Indicator::HeavyAlcohol};
constexpr const char* kParticipantsOnly = "participants-only";

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
  if (!out) throw UsageError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void make_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create " + dir + ": " + ec.message());
}

std::uint64_t require_seed(std::optional<std::uint64_t> seed) {
  if (!seed) throw UsageError("--seed is required; runs are never seeded implicitly");
  return *seed;
}

std::vector<Horizon> parse_horizons(const std::string& text) {
  if (text == "all") return {kHorizons.begin(), kHorizons.end()};
  if (const auto h = parse_horizon(text)) return {*h};
  throw UsageError("--horizon must be full, 5y, 1y or all, got '" + text + "'");
}

std::vector<mi::Strategy> parse_strategies(const std::string& text) {
  if (text == "all") return {mi::kStrategies.begin(), mi::kStrategies.end()};
  if (const auto s = mi::parse_strategy(text)) return {*s};
  throw UsageError("--strategy must be mi-mnar, mi-mar, mi-mar-nr or all, got '" + text + "'");
}

json horizons_json(const std::vector<Horizon>& hs) {
  json j = json::array();
  for (auto h : hs) j.push_back(std::string(horizon_flag(h)));
  return j;
}

std::vector<Horizon> horizons_from_json(const json& j) {
  std::vector<Horizon> hs;
  for (const auto& e : j) {
    const auto h = parse_horizon(e.get<std::string>());
    if (!h) throw UsageError("manifest lists unknown horizon " + e.get<std::string>());
    hs.push_back(*h);
  }
  return hs;
}

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const ImputationError& e) {
    log << "error: " << e.what() << "\n";
    return kImputationFailure;
  } catch (const FitError& e) {
    log << "error: model fit failed: " << e.what() << "\n";
    return kFitFailure;
  } catch (const NumericalError& e) {
    log << "error: model fit failed: " << e.what() << "\n";
    return kFitFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

std::string csv_cell(const std::optional<mi::PooledEstimate>& e) {
  if (!e) return ",,";
  return format_real(e->point) + "," + format_real(e->ci_low) + "," + format_real(e->ci_high);
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.config.empty()) throw UsageError("--config is required");
    if (!(args.scale > 0.0)) throw UsageError("--scale must be positive");
    auto config = synth::load_config(args.config);
    const auto seed = require_seed(args.seed ? args.seed : config.seed);
    if (args.scale != 1.0) config = synth::scaled(config, args.scale);
    make_dir(args.out);
    const auto table = synth::generate_cohort(config, seed);
    const fs::path out(args.out);
    write_cohort(table, (out / kCohortFile).string());
    write_truth(table, (out / kTruthFile).string());

    json m;
    m["command"] = "synth";
    m["config"] = args.config;
    m["config_hash"] = synth::config_hash(config);
    m["seed"] = seed;
    m["scale"] = args.scale;
    m["n_rows"] = table.size();
    json groups = json::object();
    const auto counts = table.group_counts();
    for (std::size_t g = 0; g < kNumGroups; ++g) groups[std::string(to_string(kGroups[g]))] = counts[g];
    m["group_counts"] = groups;
    m["files"] = {{"cohort", kCohortFile}, {"truth", kTruthFile}};
    write_file(out / kSynthManifest, m.dump(2) + "\n");
    log << "wrote " << table.size() << " rows to " << (out / kCohortFile).string() << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_impute(const ImputeArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const auto seed = require_seed(args.seed);
    if (args.in.empty()) throw UsageError("--in is required");
    const auto strategies = parse_strategies(args.strategy);
    const auto horizons = parse_horizons(args.horizon);
    auto spec = mi::ImputationModelSpec::standard();
    spec.m = args.m;
    spec.cycles = args.cycles;
    spec.ridge = args.ridge;
    spec.validate();
    const auto table = load_cohort(args.in);
    make_dir(args.out);
    const fs::path out(args.out);

    std::ostringstream est;
    est << "indicator,subgroup,method,estimate,ci_low,ci_high\n";
    for (auto ind : kIndicators) {
      for (const auto& sg : kSexBlocks) {
        std::optional<mi::PooledEstimate> e;
        try {
          e = mi::complete_case_prevalence(table, ind, sg);
        } catch (const DomainError&) {
        }
        est << to_string(ind) << ',' << sg.label() << ',' << kParticipantsOnly << ',' << csv_cell(e) << '\n';
      }
    }

    json manifest;
    manifest["command"] = "impute";
    manifest["input"] = absolute(args.in);
    manifest["seed"] = seed;
    manifest["m"] = spec.m;
    manifest["cycles"] = spec.cycles;
    manifest["ridge"] = spec.ridge;
    manifest["horizons"] = horizons_json(horizons);
    manifest["runs"] = json::array();

    std::vector<std::unique_ptr<mi::MultipleImputations>> runs;
    for (auto s : strategies) {
      log << "imputing with " << mi::to_string(s) << " (m=" << spec.m << ", cycles=" << spec.cycles << ")\n";
      runs.push_back(std::make_unique<mi::MultipleImputations>(mi::fcs_impute(table, spec, s, seed)));
      const auto& run = *runs.back();
      for (auto ind : kIndicators)
        for (const auto& sg : kSexBlocks)
          est << to_string(ind) << ',' << sg.label() << ',' << mi::to_string(s) << ','
              << csv_cell(mi::estimate_prevalence(run, ind, sg)) << '\n';
      if (args.write_completed) {
        const fs::path dir = out / "completed";
        make_dir(dir.string());
        for (int k = 0; k < run.m(); ++k) {
          char name[64];
          std::snprintf(name, sizeof name, "%s_%02d.csv", std::string(mi::to_string(s)).c_str(), k + 1);
          write_completed_cohort(run.completed[static_cast<std::size_t>(k)], (dir / name).string());
        }
      }
    }
    write_file(out / kEstimatesFile, est.str());

    // Method hospitalization predictions; a fit failure here keeps the
    // estimates already written.
    std::ostringstream hosp;
    hosp << "sex,source,horizon,estimate,ci_low,ci_high\n";
    int status = kOk;
    for (const auto& run : runs) {
      json entry = json::parse(mi::manifest_json(*run));
      try {
        const assumption::MethodPredictions pred(*run, horizons);
        for (const auto& sg : kSexBlocks)
          for (auto h : horizons)
            hosp << sg.label() << ',' << mi::display_name(run->strategy) << ',' << horizon_flag(h) << ','
                 << csv_cell(pred.per_1000(h, sg)) << '\n';
        entry["hospitalization_notes"] = pred.notes();
      } catch (const FitError& e) {
        entry["hospitalization_error"] = e.what();
        log << "error: hospitalization model for " << mi::to_string(run->strategy) << ": " << e.what() << "\n";
        status = kFitFailure;
      }
      manifest["runs"].push_back(std::move(entry));
    }
    write_file(out / kMethodHospFile, hosp.str());
    manifest["files"] = {{"estimates", kEstimatesFile}, {"hospitalization", kMethodHospFile}};
    write_file(out / kImputeManifest, manifest.dump(2) + "\n");
    log << "wrote " << (out / kEstimatesFile).string() << "\n";
    return status;
  });
}

int cmd_check(const CheckArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.in.empty()) throw UsageError("--in is required");
    const auto horizons = parse_horizons(args.horizon);
    const auto table = load_cohort(args.in);
    make_dir(args.out);
    const fs::path out(args.out);
    const auto report = assumption::evaluate_assumptions(table, horizons);

    json j;
    j["command"] = "check";
    j["input"] = absolute(args.in);
    j["horizons"] = horizons_json(horizons);
    j["report"] = json::parse(assumption::report_json(report));
    write_file(out / kCheckJson, j.dump(2) + "\n");
    write_file(out / kCheckText, assumption::report_text(report));
    for (const auto& h : report.horizons) {
      if (!h.ok()) log << "error: " << to_string(h.horizon) << " fit: " << h.error << "\n";
    }
    log << "wrote " << (out / kCheckText).string() << "\n";
    return static_cast<int>(report.complete() ? kOk : kFitFailure);
  });
}

// ---------------------------------------------------------------------------
// report

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t columns) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != columns) throw UsageError(path.string() + ": malformed line '" + line + "'");
    rows.push_back(std::move(f));
  }
  return rows;
}

assumption::Per1000 cell_from(const std::vector<std::string>& f, std::size_t at) {
  assumption::Per1000 c;
  if (f[at].empty()) return c;
  c.available = true;
  c.estimate = std::stod(f[at]);
  c.ci_low = std::stod(f[at + 1]);
  c.ci_high = std::stod(f[at + 2]);
  return c;
}

std::size_t sex_index(const std::string& label) {
  for (std::size_t s = 0; s < 3; ++s)
    if (kSexBlocks[s].label() == label) return s;
  throw UsageError("unknown subgroup '" + label + "'");
}

std::string pad(std::string s, std::size_t width) {
  s.append(s.size() < width ? width - s.size() : 1, ' ');
  return s;
}

std::string pct(const assumption::Per1000& c) {
  if (!c.available) return "--";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f (%.1f,%.1f)", 100.0 * c.estimate, 100.0 * c.ci_low, 100.0 * c.ci_high);
  return buf;
}

std::string point_pct(const assumption::Per1000& c) {
  if (!c.available) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * c.estimate);
  return buf;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string method_title(const std::string& method) {
  if (method == kParticipantsOnly) return "Participants only";
  if (method == "truth") return "Truth (synthetic)";
  if (const auto s = mi::parse_strategy(method)) return std::string(mi::display_name(*s));
  return method;
}

}  // namespace

int cmd_report(const ReportArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const fs::path dir(args.run_dir);
    const bool have_check = fs::exists(dir / kCheckJson) && fs::exists(dir / kCheckText);
    const bool have_impute =
        fs::exists(dir / kImputeManifest) && fs::exists(dir / kEstimatesFile) && fs::exists(dir / kMethodHospFile);
    if (!have_check && !have_impute) {
      std::string missing;
      for (const char* f : {kCheckJson, kCheckText, kImputeManifest, kEstimatesFile, kMethodHospFile})
        if (!fs::exists(dir / f)) missing += std::string(missing.empty() ? "" : ", ") + f;
      throw UsageError("run directory " + dir.string() + " lacks upstream artifacts: " + missing);
    }
    const json check = have_check ? read_json(dir / kCheckJson) : json();
    const json impute = have_impute ? read_json(dir / kImputeManifest) : json();
    const std::string input = have_impute ? impute.at("input").get<std::string>() : check.at("input").get<std::string>();
    auto table = load_cohort(input);

    // Truth rows for synthetic inputs.
    const fs::path truth_path = fs::path(input).replace_filename(kTruthFile);
    bool have_truth = false;
    if (fs::path(input).filename() == kCohortFile && fs::exists(truth_path)) {
      std::uint64_t seed = 0;
      std::string hash;
      const fs::path synth_manifest = fs::path(input).replace_filename(kSynthManifest);
      if (fs::exists(synth_manifest)) {
        const auto sm = read_json(synth_manifest);
        seed = sm.at("seed").get<std::uint64_t>();
        hash = sm.at("config_hash").get<std::string>();
      }
      attach_truth(table, truth_path.string(), seed, hash);
      have_truth = true;
    }

    std::ostringstream text;
    std::ostringstream csv;
    csv << "table,sex,row,column,estimate,ci_low,ci_high\n";
    text << "Re-contact adjustment report\n";
    text << "cohort: " << table.size() << " invitees\n\n";

    // 1. Background and health indicators by group.
    const auto summary = summarize_cohort(table);
    text << "1. Cohort by participation group (95% intervals)\n\n" << summary_text(summary) << "\n";
    {
      std::string parent;
      for (std::size_t g = 0; g < kNumGroups; ++g)
        csv << "summary,," << quoted("N") << ',' << to_string(kGroups[g]) << ',' << summary.group_sizes[g] << ",,\n";
      for (const auto& row : summary.rows) {
        if (row.indent == 0) parent = row.label;
        if (row.heading) continue;
        const std::string label = row.indent == 0 ? row.label : parent + " / " + row.label;
        for (std::size_t g = 0; g < kNumGroups; ++g) {
          const auto& c = row.cells[g];
          csv << "summary,," << quoted(label) << ',' << to_string(kGroups[g]) << ',';
          if (c.available)
            csv << format_real(c.estimate) << ',' << format_real(c.ci_low) << ',' << format_real(c.ci_high);
          else
            csv << ",,";
          csv << '\n';
        }
      }
    }

    // 2. Assumption checks.
    text << "2. Assumption checks\n\n";
    if (have_check) {
      std::string body = read_text(dir / kCheckText);
      const auto legend_at = body.find("\nAssumptions\n");
      if (legend_at != std::string::npos) body.resize(legend_at + 1);
      text << body << "\n";
    } else {
      text << "(absent: no check outputs in this run directory)\n\n";
    }

    // 3. Hospitalizations per 1000.
    const auto horizons = have_impute ? horizons_from_json(impute.at("horizons")) : horizons_from_json(check.at("horizons"));
    auto hosp = assumption::hospitalization_table(table, {}, horizons);
    if (have_impute) {
      std::map<std::string, std::size_t> line_of;
      for (const auto& f : read_csv(dir / kMethodHospFile, 6)) {
        auto it = line_of.find(f[1]);
        if (it == line_of.end()) {
          assumption::HospitalizationTable::Line line{f[1], {}};
          for (auto& block : line.cells) block.assign(horizons.size(), {});
          hosp.lines.push_back(std::move(line));
          it = line_of.emplace(f[1], hosp.lines.size() - 1).first;
        }
        const auto h = parse_horizon(f[2]);
        const auto pos = std::find(horizons.begin(), horizons.end(), h.value_or(Horizon::Full));
        if (!h || pos == horizons.end()) throw UsageError("hospitalization file lists horizon " + f[2]);
        hosp.lines[it->second].cells[sex_index(f[0])][static_cast<std::size_t>(pos - horizons.begin())] =
            cell_from(f, 3);
      }
    }
    text << "3. " << assumption::hospitalization_text(hosp);
    if (!have_impute) text << "(imputation methods absent: no impute outputs in this run directory)\n";
    text << "\n";
    {
      std::istringstream lines(assumption::hospitalization_csv(hosp));
      std::string line;
      std::getline(lines, line);
      while (std::getline(lines, line)) {
        const auto f = split(line);
        csv << "hospitalization," << f[0] << ',' << quoted(f[1]) << ',' << f[2] << ',' << f[3] << ',' << f[4] << ','
            << f[5] << '\n';
      }
    }

    // 4. Prevalence.
    text << "4. Prevalence estimates, % (95% interval)\n\n";
    if (have_impute) {
      // method -> indicator -> sex -> cell, in file order.
      std::vector<std::string> methods;
      std::map<std::string, std::map<std::string, std::array<assumption::Per1000, 3>>> cells;
      for (const auto& f : read_csv(dir / kEstimatesFile, 6)) {
        if (!cells.count(f[2])) methods.push_back(f[2]);
        cells[f[2]][f[0]][sex_index(f[1])] = cell_from(f, 3);
      }
      if (have_truth) {
        methods.emplace_back("truth");
        for (auto ind : kIndicators)
          for (std::size_t s = 0; s < 3; ++s) {
            assumption::Per1000 c;
            c.available = true;
            c.estimate = c.ci_low = c.ci_high = synth::truth_prevalence(table, ind, kSexBlocks[s]);
            cells["truth"][std::string(to_string(ind))][s] = c;
          }
      }
      constexpr std::size_t kLabel = 22;
      constexpr std::size_t kCell = 22;
      for (auto ind : kIndicators) {
        const std::string name(to_string(ind));
        text << pad(ind == Indicator::DailySmoking ? "Daily smoking" : "Heavy alcohol use", kLabel);
        for (const char* s : {"Men", "Women", "Both"}) text << pad(s, kCell);
        text << "\n";
        for (const auto& method : methods) {
          text << pad("  " + method_title(method), kLabel);
          for (std::size_t s = 0; s < 3; ++s) {
            const auto& c = cells[method][name][s];
            text << pad(method == "truth" ? point_pct(c) : pct(c), kCell);
            csv << "prevalence," << kSexBlocks[s].label() << ',' << quoted(method_title(method)) << ',' << name << ',';
            if (c.available)
              csv << format_real(c.estimate) << ',' << format_real(c.ci_low) << ',' << format_real(c.ci_high);
            else
              csv << ",,";
            csv << '\n';
          }
          text << "\n";
        }
        text << "\n";
      }
    } else {
      text << "(absent: no impute outputs in this run directory)\n\n";
    }

    text << "Assumptions\n";
    for (const auto& line : assumption::assumptions_legend()) text << "  " << line << "\n";
    write_file(dir / kReportText, text.str());
    write_file(dir / kReportCsv, csv.str());
    log << "wrote " << (dir / kReportText).string() << "\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace recontact::pipeline
