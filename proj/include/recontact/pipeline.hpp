#pragma once

// The four batch commands behind recontact-adjust. Each writes its artifacts
// into an output directory and returns a process exit code.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "recontact/error.hpp"

namespace recontact::pipeline {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kImputationFailure = 3,
  kFitFailure = 4,
};

/// Bad flag values or combinations.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Artifact names inside a run directory.
inline constexpr const char* kCohortFile = "cohort.csv";
inline constexpr const char* kTruthFile = "cohort.truth.csv";
inline constexpr const char* kSynthManifest = "synth_manifest.json";
inline constexpr const char* kImputeManifest = "impute_manifest.json";
inline constexpr const char* kEstimatesFile = "estimates.csv";
inline constexpr const char* kMethodHospFile = "hospitalization_methods.csv";
inline constexpr const char* kCheckJson = "check.json";
inline constexpr const char* kCheckText = "check.txt";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";

struct SynthArgs {
  std::string config;
  std::string out;
  /// Overrides the seed stored in the config; one of the two is required.
  std::optional<std::uint64_t> seed;
  double scale = 1.0;
};

struct ImputeArgs {
  std::string in;
  std::string out;
  /// mi-mnar, mi-mar, mi-mar-nr or all.
  std::string strategy = "all";
  int m = 20;
  int cycles = 20;
  std::optional<std::uint64_t> seed;
  double ridge = 0.0;
  /// full, 5y, 1y or all; horizons of the method hospitalization predictions.
  std::string horizon = "all";
  bool write_completed = false;
};

struct CheckArgs {
  std::string in;
  std::string out;
  std::string horizon = "all";
};

struct ReportArgs {
  std::string run_dir;
};

/// Messages go to `log`; errors are reported there and mapped to exit codes.
int cmd_synth(const SynthArgs& args, std::ostream& log);
int cmd_impute(const ImputeArgs& args, std::ostream& log);
int cmd_check(const CheckArgs& args, std::ostream& log);
int cmd_report(const ReportArgs& args, std::ostream& log);

}  // namespace recontact::pipeline
