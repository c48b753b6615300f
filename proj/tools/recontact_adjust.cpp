// recontact-adjust: synth | impute | check | report

#include <CLI11.hpp>
#include <omp.h>

#include <iostream>

#include "recontact/pipeline.hpp"

namespace pl = recontact::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Non-participation adjustment with re-contact data"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: available parallelism)")->check(CLI::NonNegativeNumber);

  pl::SynthArgs synth;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Generate a synthetic cohort from a config");
  s->add_option("--config", synth.config, "SynthConfig JSON")->required();
  s->add_option("--out", synth.out, "Output directory")->required();
  auto* s_seed = s->add_option("--seed", synth_seed, "RNG seed (overrides the config's seed)");
  s->add_option("--scale", synth.scale, "Multiply the cohort size");
  s->add_option("--threads", threads, "Worker threads");

  pl::ImputeArgs impute;
  std::uint64_t impute_seed = 0;
  auto* i = app.add_subcommand("impute", "Multiply impute under one or all strategies");
  i->add_option("--in", impute.in, "Cohort CSV")->required();
  i->add_option("--out", impute.out, "Output directory")->required();
  i->add_option("--strategy", impute.strategy, "mi-mnar, mi-mar, mi-mar-nr or all")
      ->check(CLI::IsMember({"mi-mnar", "mi-mar", "mi-mar-nr", "all"}));
  i->add_option("--m", impute.m, "Number of imputations");
  i->add_option("--cycles", impute.cycles, "FCS sweeps per chain");
  auto* i_seed = i->add_option("--seed", impute_seed, "RNG seed (required)");
  i->add_option("--ridge", impute.ridge, "Ridge penalty for the inner logistic fits");
  i->add_option("--horizon", impute.horizon, "full, 5y, 1y or all")
      ->check(CLI::IsMember({"full", "5y", "1y", "all"}));
  i->add_flag("--write-completed", impute.write_completed, "Also write every completed dataset");
  i->add_option("--threads", threads, "Worker threads");

  pl::CheckArgs check;
  auto* c = app.add_subcommand("check", "Fit the hospitalization model and judge the assumptions");
  c->add_option("--in", check.in, "Cohort CSV")->required();
  c->add_option("--out", check.out, "Output directory")->required();
  c->add_option("--horizon", check.horizon, "full, 5y, 1y or all")
      ->check(CLI::IsMember({"full", "5y", "1y", "all"}));
  c->add_option("--threads", threads, "Worker threads");

  pl::ReportArgs report;
  auto* r = app.add_subcommand("report", "Combine check and impute outputs of a run directory");
  r->add_option("--in", report.run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pl::kInputError;
  }
  if (threads > 0) omp_set_num_threads(threads);

  if (*s) {
    if (*s_seed) synth.seed = synth_seed;
    return pl::cmd_synth(synth, std::cerr);
  }
  if (*i) {
    if (*i_seed) impute.seed = impute_seed;
    return pl::cmd_impute(impute, std::cerr);
  }
  if (*c) return pl::cmd_check(check, std::cerr);
  return pl::cmd_report(report, std::cerr);
}
