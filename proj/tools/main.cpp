#include <cstdint>

#include "CLI11.hpp"
#include "comcure/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"comcure: cure rate modeling for repeated-exposure survival data"};
  app.require_subcommand(1);

  comcure::cli::Options opt;
  const auto seed_cb = [&opt](std::uint64_t v) {
    opt.seed = v;
    opt.seed_set = true;
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit the cure model to a dataset");
  fit->add_option("--data", opt.data_path, "dataset file (csv/tsv)")->required();
  fit->add_option("--manifest", opt.manifest_path, "run manifest (ini)");
  fit->add_option("--out", opt.out_path, "report path (default fit_report.txt)");
  fit->add_option("--init", opt.init_strategy, "initializer: perturb, grid, or moment")
      ->check(CLI::IsMember({"perturb", "grid", "moment", "manual"}));
  fit->add_option_function<std::uint64_t>("--seed", seed_cb, "seed (overrides the manifest)");

  CLI::App* profile = app.add_subcommand("profile", "Profile the likelihood over a dispersion grid");
  profile->add_option("--data", opt.data_path, "dataset file (csv/tsv)")->required();
  profile->add_option("--manifest", opt.manifest_path, "run manifest (ini)");
  profile->add_option("--out", opt.out_path, "report path (default profile_report.txt)");
  profile->add_option("--init", opt.init_strategy, "initializer: perturb, grid, or moment")
      ->check(CLI::IsMember({"perturb", "grid", "moment", "manual"}));
  profile->add_option("--nu-grid", opt.nu_grid,
                      "dispersion grid, e.g. '0,0.5,1,2,bernoulli' (overrides the manifest)");
  profile->add_option_function<std::uint64_t>("--seed", seed_cb, "seed (overrides the manifest)");

  CLI::App* km = app.add_subcommand("km", "Kaplan-Meier survival curve for a dataset");
  km->add_option("--data", opt.data_path, "dataset file (csv/tsv)")->required();
  km->add_option("--out", opt.out_path, "curve path (default km.tsv)");
  km->add_option_function<std::uint64_t>("--seed", seed_cb, "seed recorded in the provenance line");

  CLI::App* predict = app.add_subcommand("predict", "Predicted survival and cure probability for a profile");
  predict->add_option("--report", opt.report_path, "fit report to predict from")->required();
  predict->add_option("--covariates", opt.profile, "profile, e.g. 'gender=1,age=3'");
  predict->add_option("--exposures", opt.exposure_count, "number of unit-spaced exposures");
  predict->add_option("--exposure-times", opt.exposure_times,
                      "explicit exposure times, e.g. '0;1;4'");
  predict->add_option("--ymax", opt.y_max, "curve endpoint (default: last exposure + 5 scales)");
  predict->add_option("--points", opt.y_points, "curve resolution (default 201)");
  predict->add_option("--out", opt.out_path, "curve path (default predict.tsv)");
  predict->add_option_function<std::uint64_t>("--seed", seed_cb, "seed recorded in the provenance line");

  CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic cohorts or run a fitting study");
  simulate->add_option("--manifest", opt.manifest_path, "run manifest with a [sim] section")
      ->required();
  simulate->add_option("--out", opt.out_path, "dataset/report path");
  simulate->add_option_function<std::uint64_t>("--seed", seed_cb, "seed (overrides the manifest)");

  CLI::App* discriminate = app.add_subcommand("discriminate", "LRT / AIC / BIC model discrimination study");
  discriminate->add_option("--manifest", opt.manifest_path,
                           "run manifest with [sim] and [discriminate] sections")
      ->required();
  discriminate->add_option("--out", opt.out_path, "report path");
  discriminate->add_option("--nu-grid", opt.nu_grid, "candidate families (overrides the manifest)");
  discriminate->add_option_function<std::uint64_t>("--seed", seed_cb, "seed (overrides the manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  opt.command = app.get_subcommands().front()->get_name();
  return comcure::cli::run(opt);
}
