// Likelihood, priors, MAP objective and Metropolis-Hastings sampling over
// the log10-scaled transport/kinetic parameters, with the DFN solver as the
// forward model.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dfnid/materials.hpp"
#include "dfnid/protocol.hpp"

namespace dfnid {

inline constexpr std::array<const char*, 4> kThetaNames{"D_s_p", "D_s_n",
                                                        "k_p", "k_n"};

std::array<double, 4> theta_to_log10(const RegressedParams& theta);
RegressedParams theta_from_log10(const std::array<double, 4>& lg);

struct GaussianPrior {
  double mean_log10 = 0.0;
  double std_log10 = 1.0;
};

// Sampling box, fixed-value overrides and optional Gaussian priors, all in
// log10 space over the canonical order [D_s_p, D_s_n, k_p, k_n].
struct ParameterSpace {
  std::array<double, 4> lo{-16.0, -16.0, -14.0, -14.0};
  std::array<double, 4> hi{-11.0, -11.0, -6.0, -6.0};
  std::array<bool, 4> fixed{false, false, false, false};
  std::array<double, 4> fixed_log10{};
  std::array<std::optional<GaussianPrior>, 4> prior{};

  static ParameterSpace defaults();
  void validate() const;

  int n_free() const;
  std::vector<int> free_indices() const;
  std::vector<std::string> free_names() const;
  bool in_bounds(const std::vector<double>& free_log10) const;
  // Builds the full parameter vector from free coordinates plus overrides.
  RegressedParams assemble(const std::vector<double>& free_log10) const;
  std::vector<double> extract_free(const std::array<double, 4>& lg) const;
  // Sum of log prior densities over free parameters (flat components add 0).
  double log_prior(const std::vector<double>& free_log10) const;
  std::vector<double> midpoint() const;
};

// One measured (or synthetic) discharge series for fitting.
struct FitSeries {
  double c_rate = 1.0;
  double soh = 1.0;  // scales the anode window before simulation
  std::vector<double> t_s;
  std::vector<double> v_v;
};

struct ChiSquaredEval {
  double chi2 = 0.0;
  bool solver_failed = false;
  int padded_points = 0;  // measurement times past the simulated cutoff
};

// Weighted sum-of-squares data misfit. Owns the forward-model configuration;
// immutable and safe to share across concurrent chains.
class Likelihood {
 public:
  Likelihood(Materials base, std::vector<FitSeries> series,
             double sigma_v = 0.01, SimOptions sim = {});

  ChiSquaredEval chi_squared(const RegressedParams& theta) const;
  double sigma() const { return sigma_v_; }
  int n_points() const;
  const std::vector<FitSeries>& series() const { return series_; }
  const Materials& base() const { return base_; }
  const SimOptions& sim_options() const { return sim_; }

  // Penalty objective value used when the forward solve fails; finite so
  // samplers and optimizers can continue.
  static constexpr double kFailurePenalty = 1e12;

 private:
  Materials base_;
  std::vector<FitSeries> series_;
  std::vector<CellParameters> params_per_series_;  // soh window applied
  double sigma_v_;
  SimOptions sim_;
};

struct ObjectiveEval {
  double neg_log_post = 0.0;
  double chi2 = 0.0;
  bool solver_failed = false;
};

using ObjectiveFn = std::function<ObjectiveEval(const std::vector<double>&)>;

// -1/2 chi^2 + sum of log prior densities, as a maximization target;
// the returned functor exposes the negated value for minimizers.
ObjectiveFn make_posterior_objective(const Likelihood& lik,
                                     const ParameterSpace& space);

double log_posterior(const std::vector<double>& free_log10,
                     const Likelihood& lik, const ParameterSpace& space);

// Prior-only objective (the sigma -> infinity limit); used for sampler
// diagnostics.
ObjectiveFn make_prior_only_objective(const ParameterSpace& space);

struct MapOptions {
  double simplex_step = 0.25;  // initial simplex edge, log10 units
  double tol_x = 1e-4;
  double tol_f = 1e-9;
  int max_evals = 2000;
  int restarts = 2;
};

struct MapResult {
  std::vector<double> x;  // free coordinates, log10
  double value = 0.0;
  double chi2 = 0.0;
  int evals = 0;
  bool converged = false;
};

// Bounded simplex descent on the negative log posterior. `init` must lie in
// the sampling box; pass the best chain sample when one is available.
MapResult map_estimate(const ObjectiveFn& objective,
                       const ParameterSpace& space,
                       const std::vector<double>& init,
                       const MapOptions& opts = {});

// Diagonal of the inverse finite-difference Hessian of the objective at x;
// entries are clamped to [1e-8, (box width)^2]. Flat directions therefore
// report a variance on the order of the box itself.
std::vector<double> laplace_variance(const ObjectiveFn& objective,
                                     const ParameterSpace& space,
                                     const std::vector<double>& x,
                                     double step = 0.05);

struct McmcConfig {
  int iterations = 5000;  // stored post-burn-in samples
  int burn_in = 500;
  std::uint64_t seed = 0;
  double initial_step_frac = 0.05;  // of the box width, per dimension
  double target_acceptance = 0.234;
  int cov_refresh = 25;  // recholesky cadence during burn-in
  // Seed the proposal covariance with the inverse finite-difference Hessian
  // at the start point. Flat directions then get box-scale steps from the
  // first iteration, which short burn-ins cannot learn on their own.
  bool laplace_init = true;
  // Fraction of proposals that move a single randomly-chosen coordinate by
  // a wide Gaussian step (`wide_move_frac` of that box width). The mixture
  // stays symmetric, so the Metropolis ratio is unchanged; these jumps carry
  // the chain across multi-decade one-parameter plateaus that covariance
  // moves crawl along.
  double wide_move_prob = 0.2;
  double wide_move_frac = 0.25;
};

struct PosteriorChain {
  std::vector<std::string> param_names;
  std::vector<int> param_indices;
  std::vector<std::vector<double>> samples;  // post burn-in, log10 units
  std::vector<double> objective;             // negative log posterior
  std::vector<double> chi2;
  std::vector<std::uint8_t> accepted;
  int burn_in = 0;
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;
  bool warning = false;
  std::string warning_message;
  std::vector<double> init;
  std::vector<double> proposal_scale_final;       // lambda * chol diag
  std::vector<std::vector<double>> cov_history;   // flattened snapshots
  ParameterSpace space;

  std::vector<double> best_sample() const;
  std::vector<double> marginal(int free_index) const;
};

// Adaptive random-walk Metropolis-Hastings in log10 space. The proposal
// covariance and global scale adapt during burn-in only and are frozen
// afterwards, preserving detailed balance over the stored samples.
// Out-of-bounds proposals are rejected without running the forward model.
PosteriorChain mcmc_sample(const ObjectiveFn& objective,
                           const ParameterSpace& space,
                           const McmcConfig& config,
                           const std::vector<double>& init);

}  // namespace dfnid
