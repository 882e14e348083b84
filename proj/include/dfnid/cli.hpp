// Batch command dispatch: simulate / fit / mcmc / grid / classify / soh-fit /
// synth / report. Every artifact embeds the effective configuration and the
// seed; reruns with identical inputs reproduce artifacts byte for byte.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfnid/identify.hpp"

namespace dfnid {

struct RunConfig {
  std::string command;
  std::string config_path;  // cell parameter document; empty = defaults
  std::vector<std::string> data_paths;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string c_rate_filter;  // canonical tag; empty = all
  int iterations = 5000;
  int burn_in = 500;
  double alpha = 0.05;
  int jobs = 0;  // 0 = hardware concurrency
  double sigma_v = 0.01;

  // simulate
  double sim_c_rate = 1.0;
  double initial_soc = 1.0;
  double t_max_s = 86400.0;

  // synth
  std::vector<double> soh_grid;  // empty = 12 rungs over [0.40, 0.95]
  double noise_v = 0.005;

  // parameter-space switches
  bool fix_k_p = false;
  bool dsp_prior = false;

  // grid
  std::string pair = "D_s_p,k_p";
  int grid_nx = 61;
  int grid_ny = 61;

  ClassifyThresholds thresholds;

  void validate() const;  // referenced paths must exist
};

// Executes one command; returns the process exit status. Failures write a
// machine-readable error document into the output directory.
int run_command(const RunConfig& config);

}  // namespace dfnid
