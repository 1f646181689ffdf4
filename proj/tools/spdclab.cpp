#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spdclab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SPDC pair-source modelling and eTPA analysis"};
  app.require_subcommand(1);

  spdclab::cli::RunOptions opt;
  std::string config;
  std::string out = "out";
  std::uint64_t seed = spdclab::cli::default_seed;
  unsigned threads = 1;
  bool drop_flagged = false;

  const char* commands[][2] = {
      {"tuning-curve", "signal/idler wavelengths versus crystal temperature"},
      {"jsa", "joint spectral and temporal intensity, entanglement time"},
      {"simulate", "Monte Carlo click streams and coincidence estimates"},
      {"etpa-report", "entangled two-photon absorption estimate chain"},
      {"analyze", "rate-table fits, absorption rate and Gamma"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--seed", seed, "RNG seed")->capture_default_str();
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    if (std::string(name) == "analyze") {
      sub->add_flag("--drop-flagged", drop_flagged, "drop rows with large singles errors");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  opt.config = config;
  opt.out = out;
  opt.seed = seed;
  opt.threads = threads;
  opt.drop_flagged = drop_flagged;
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return spdclab::cli::run(command, opt);
  } catch (const std::exception& e) {
    std::cerr << "spdclab " << command << ": error: " << e.what() << '\n';
    return spdclab::cli::exit_code_for(e);
  }
}
