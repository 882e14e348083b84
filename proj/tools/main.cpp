// dfnid: DFN cell simulation and Bayesian parameter-identification toolkit.
#include <CLI11.hpp>
#include <string>
#include <vector>

#include "dfnid/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "dfnid - DFN battery simulation, Bayesian identification, and "
      "degradation trajectory fitting"};
  app.require_subcommand(1);

  dfnid::RunConfig cfg;
  std::vector<std::string> soh_values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.config_path,
                    "Cell parameter document (JSON)");
    sub->add_option("--seed", cfg.seed, "Random seed recorded in artifacts");
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--c-rate", cfg.c_rate_filter,
                    "C-rate tag filter (C/5, 1C, 2C, or numeric)");
    sub->add_option("--iterations", cfg.iterations, "Chain length");
    sub->add_option("--burn-in", cfg.burn_in, "Burn-in iterations");
    sub->add_option("--alpha", cfg.alpha, "Significance level");
    sub->add_option("--jobs", cfg.jobs, "Worker pool size (0 = all cores)");
    sub->add_option("--sigma", cfg.sigma_v, "Measurement noise scale (V)");
  };

  auto* sim = app.add_subcommand("simulate", "Run a constant-current discharge");
  add_common(sim);
  sim->add_option("--rate", cfg.sim_c_rate, "Discharge C-rate");
  sim->add_option("--soc", cfg.initial_soc, "Initial state of charge");
  sim->add_option("--t-max", cfg.t_max_s, "Time limit (s)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic degradation ladder");
  add_common(synth);
  synth->add_option("--soh", soh_values, "SOH rungs (fractions)");
  synth->add_option("--noise", cfg.noise_v, "Voltage noise sigma (V)");

  auto* fit = app.add_subcommand("fit", "MAP estimation per discharge curve");
  add_common(fit);
  fit->add_option("data", cfg.data_paths, "Discharge CSV files")->required();
  fit->add_flag("--fix-kp", cfg.fix_k_p, "Fix k_p at the non-limiting constant");
  fit->add_flag("--dsp-prior", cfg.dsp_prior, "Weak Gaussian prior on log10 D_s_p");

  auto* mcmc = app.add_subcommand("mcmc", "Posterior sampling per discharge curve");
  add_common(mcmc);
  mcmc->add_option("data", cfg.data_paths, "Discharge CSV files")->required();
  mcmc->add_flag("--fix-kp", cfg.fix_k_p, "Fix k_p at the non-limiting constant");
  mcmc->add_flag("--dsp-prior", cfg.dsp_prior, "Weak Gaussian prior on log10 D_s_p");

  auto* classify = app.add_subcommand("classify", "Identifiability verdicts from chain files");
  add_common(classify);
  classify->add_option("chains", cfg.data_paths, "Chain CSV files")->required();

  auto* grid = app.add_subcommand("grid", "Gridded 2-parameter confidence region");
  add_common(grid);
  grid->add_option("data", cfg.data_paths, "Discharge CSV files")->required();
  grid->add_option("--pair", cfg.pair, "Parameter pair, e.g. D_s_p,k_p");
  grid->add_option("--nx", cfg.grid_nx, "Grid nodes along the first axis");
  grid->add_option("--ny", cfg.grid_ny, "Grid nodes along the second axis");

  auto* sohfit = app.add_subcommand("soh-fit", "Fit parameter trajectories against SOH");
  add_common(sohfit);
  sohfit->add_option("points", cfg.data_paths, "Trajectory CSV files")->required();

  auto* report = app.add_subcommand("report", "Full identifiability report over a dataset");
  add_common(report);
  report->add_option("data", cfg.data_paths, "Discharge CSV files")->required();
  report->add_flag("--fix-kp", cfg.fix_k_p, "Fix k_p at the non-limiting constant");
  report->add_flag("--dsp-prior", cfg.dsp_prior, "Weak Gaussian prior on log10 D_s_p");

  CLI11_PARSE(app, argc, argv);

  for (const std::string& s : soh_values) cfg.soh_grid.push_back(std::stod(s));
  cfg.command = app.get_subcommands().front()->get_name();
  return dfnid::run_command(cfg);
}
