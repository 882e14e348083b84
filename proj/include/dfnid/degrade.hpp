// Lifetime-trajectory fitting: per-parameter MAP-vs-SOH fits with inverse
// variance weighting, smoothed uncertainty bands, fitted-vs-optimized RMSE
// comparison, and the synthetic degradation ladder used for round trips.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfnid/bayes.hpp"

namespace dfnid {

enum class SohForm { Atanh, Linear };
std::string to_string(SohForm f);

struct TrajectoryPoint {
  double soh = 1.0;  // fraction in (0, 1]
  int cycle = 0;
  std::string c_rate;  // tag: C/5, 1C, 2C
  std::string param;   // canonical parameter name
  double map_log10 = 0.0;
  double var_log10 = 1.0;  // posterior variance of the log10 marginal
};

struct SohFit {
  SohForm form = SohForm::Linear;
  // Atanh form: p0 + p1 * atanh(p2 * (soh - 0.5)); linear: p0 + p1 * soh.
  double p0 = 0.0, p1 = 0.0, p2 = 0.0;
  std::string c_rate;
  std::string param;
  double weighted_residual = 0.0;
  bool fell_back_linear = false;
  double soh_lo = 0.0, soh_hi = 1.0;  // data range the fit saw
};

// Weighted least squares with weights 1/var. Requires >= 5 points sharing
// one parameter and C-rate. The atanh form is solved by a scan plus
// golden-section refinement over p2 with closed-form inner regression; when
// no feasible p2 exists the fit falls back to the linear form with a flag.
SohFit fit_soh_trajectory(const std::vector<TrajectoryPoint>& pts,
                          SohForm form);

// Evaluates the stored form; throws std::domain_error when the atanh
// argument leaves (-1, 1).
double eval_soh_trajectory(const SohFit& fit, double soh);

// s1 = x1; s_t = alpha x_t + (1-alpha) s_{t-1}.
std::vector<double> ewma_smooth(const std::vector<double>& xs, double alpha);

struct BandPoint {
  double soh, mid, lo, hi;
};

// Posterior-std half-width band, EWMA-smoothed over SOH-sorted points.
std::vector<BandPoint> uncertainty_band(std::vector<TrajectoryPoint> pts,
                                        double alpha_smooth = 0.2);

// A bundle of per-parameter, per-C-rate trajectory fits.
struct TrajectorySet {
  std::vector<SohFit> fits;
  const SohFit* find(const std::string& param, const std::string& c_rate) const;
  // Builds the regressed theta at a given SOH and C-rate; parameters without
  // a fit keep their `base` value (k_p stays at its large fixed constant).
  RegressedParams theta_at(double soh, const std::string& c_rate,
                           const RegressedParams& base) const;
  // Reference degradation trajectories for the NCA cell (fraction-SOH form).
  static TrajectorySet nca_reference();
};

// The rate constant treated as non-limiting throughout the lifetime study.
inline constexpr double kFixedKp = 1e-7;  // m^2.5/(mol^0.5 s)

struct LadderRung {
  int cycle = 0;
  double soh = 1.0;
  std::string c_rate_tag;
  double c_rate = 1.0;
  RegressedParams theta_gen;
  FitSeries series;
};

struct LadderDataset {
  std::vector<LadderRung> rungs;
  double noise_v = 0.0;
  std::uint64_t seed = 0;
  int dropped_rungs = 0;  // solver failures at extreme SOH
};

inline const std::vector<std::pair<std::string, double>>& default_rpt_rates() {
  static const std::vector<std::pair<std::string, double>> rates{
      {"C/5", 0.2}, {"1C", 1.0}, {"2C", 2.0}};
  return rates;
}

// Simulates RPT discharges for every (soh rung, C-rate), with theta drawn
// from the trajectory set, capacity scaled through the anode window, and
// Gaussian voltage noise. Rung simulations run concurrently; noise streams
// are keyed by (seed, rung, rate) so results are independent of scheduling.
LadderDataset synth_ladder(
    const TrajectorySet& fits, const std::vector<double>& soh_grid,
    double noise_v, std::uint64_t seed, const Materials& base,
    const std::vector<std::pair<std::string, double>>& c_rates =
        default_rpt_rates(),
    const SimOptions& sim = {}, int jobs = 1);

struct RmseEntry {
  int cycle = 0;
  std::string c_rate;
  double soh = 1.0;
  double rmse_star = 0.0;  // per-cycle optimized parameters
  double rmse_fit = 0.0;   // trajectory-evaluated parameters
  bool excluded = false;
};

struct RmseComparison {
  std::vector<RmseEntry> entries;
  double mean_star = 0.0, mean_fit = 0.0;
  double std_star = 0.0, std_fit = 0.0;
  double ratio() const { return mean_fit / mean_star; }
};

// Simulates every rung under both parameter sets and aggregates the voltage
// RMSE against the rung data. `theta_star` is aligned with `data.rungs`.
RmseComparison compare_rmse(const LadderDataset& data,
                            const std::vector<RegressedParams>& theta_star,
                            const TrajectorySet& fits, const Materials& base,
                            const SimOptions& sim = {}, int jobs = 1);

}  // namespace dfnid
