#pragma once

#include <cstdint>
#include <string>

namespace comcure::cli {

// Parsed command line. Empty strings mean "not given"; commands fill in
// their documented defaults.
struct Options {
  std::string command;        // fit | profile | km | predict | simulate | discriminate
  std::string data_path;      // --data
  std::string manifest_path;  // --manifest
  std::string out_path;       // --out
  std::string init_strategy;  // --init: perturb | grid | moment
  std::string nu_grid;        // --nu-grid: family tokens, comma separated
  std::uint64_t seed = 0;     // --seed
  bool seed_set = false;

  // predict only
  std::string report_path;     // --report: fit report to load
  std::string profile;         // --covariates: name=value pairs, comma separated
  long exposure_count = 0;     // --exposures: n unit-spaced exposures
  std::string exposure_times;  // --exposure-times: explicit, semicolon separated
  double y_max = 0.0;          // --ymax (0 = derive from the profile)
  long y_points = 201;         // --points
};

// Runs one command and maps failures onto the documented exit codes:
// 0 success, 1 usage/parse, 2 numeric domain, 3 non-convergence.
int run(const Options& options);

int cmd_fit(const Options& options);
int cmd_profile(const Options& options);
int cmd_km(const Options& options);
int cmd_predict(const Options& options);
int cmd_simulate(const Options& options);
int cmd_discriminate(const Options& options);

}  // namespace comcure::cli
