// Identifiability analysis over posterior chains: marginal histograms,
// shape classification, credible bounds with the unbounded sentinel, gridded
// nonlinear confidence regions, and the total-resistance valley fit.
#pragma once

#include <string>
#include <vector>

#include "dfnid/bayes.hpp"

namespace dfnid {

struct MarginalHistogram {
  std::string param_name;
  double lo = 0.0, hi = 0.0;     // sampling box edges
  std::vector<double> density;   // normalized so sum(density * width) = 1
  double bin_width = 0.0;
  double peak_density = 0.0;
  double peak_location = 0.0;
  double edge_density_lo = 0.0;  // mean density over the outer bins
  double edge_density_hi = 0.0;
  double boundary_mass_lo = 0.0;
  double boundary_mass_hi = 0.0;

  static MarginalHistogram from_samples(std::string name, double lo, double hi,
                                        const std::vector<double>& samples,
                                        int bins = 60);
  static MarginalHistogram from_chain(const PosteriorChain& chain,
                                      int free_index, int bins = 60);
};

enum class IdentClass {
  Identifiable,
  LocallyIdentifiable,
  PracticallyUnidentifiable,
};

std::string to_string(IdentClass c);
IdentClass ident_class_from_string(const std::string& s);

struct ClassifyThresholds {
  double edge_to_peak = 0.01;     // below this at both edges: identifiable
  double peak_to_plateau = 10.0;  // at/above, with boundary mass: locally
  double boundary_mass = 0.05;
  int edge_bins = 3;              // bins averaged into the edge density
  double boundary_window = 0.15;  // fraction of the box counted as boundary
};

struct IdentifiabilityVerdict {
  std::string param_name;
  IdentClass cls = IdentClass::PracticallyUnidentifiable;
  double map_log10 = 0.0;
  double lower_log10 = 0.0;
  double upper_log10 = 0.0;
  bool upper_unbounded = false;  // serialized as "+inf"
  // Evidence metrics and the thresholds they were judged against.
  double boundary_to_peak = 0.0;
  double peak_to_plateau = 0.0;
  double boundary_mass = 0.0;
  ClassifyThresholds thresholds;
};

// Classifies one marginal. Histogram must be normalized and non-empty.
IdentifiabilityVerdict classify_identifiability(
    const MarginalHistogram& hist, const ClassifyThresholds& thresholds = {});

struct CredibleInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool upper_unbounded = false;
};

// Equal-tailed (alpha/2, 1-alpha/2) posterior interval; the upper bound
// becomes the unbounded sentinel when the marginal classifies as
// practically unidentifiable.
CredibleInterval credible_interval(const PosteriorChain& chain, int free_index,
                                   double alpha,
                                   const ClassifyThresholds& thresholds = {});

// Full per-parameter verdict: classification plus MAP and credible bounds.
IdentifiabilityVerdict verdict_for(const PosteriorChain& chain, int free_index,
                                   double alpha = 0.05,
                                   const ClassifyThresholds& thresholds = {});

struct ConfidenceRegion2D {
  std::string x_name, y_name;
  std::vector<double> xs, ys;      // node coordinates, log10
  std::vector<double> chi2;        // row-major: chi2[iy * xs.size() + ix]
  std::vector<std::uint8_t> member;
  std::vector<std::uint8_t> solver_failed;
  double alpha = 0.05;
  double chi2_star = 0.0;
  double threshold = 0.0;  // chi-squared quantile with 2 dof
  int star_ix = 0, star_iy = 0;

  double at(int ix, int iy) const { return chi2[iy * xs.size() + ix]; }
  bool is_member(int ix, int iy) const {
    return member[iy * xs.size() + ix] != 0;
  }
  // Membership of an off-node point via bilinear interpolation of the
  // chi-squared surface.
  bool contains(double x, double y) const;
  // Membership of a point whose chi-squared is already known.
  bool contains_chi2(double chi2_value) const {
    return chi2_value - chi2_star <= threshold;
  }
  // True when the region reaches the last node along the respective axis.
  bool touches_x_edge() const;
  bool touches_y_edge() const;
};

struct GridSpec {
  int nx = 61;
  int ny = 61;
};

// Evaluates the misfit on a grid over the two free parameters of `space`
// (the remaining parameters ride along at their fixed values) and applies
// the nonlinear confidence-region inequality with two degrees of freedom.
// Node evaluations run concurrently on `jobs` workers.
ConfidenceRegion2D grid_confidence_region(const Likelihood& lik,
                                          const ParameterSpace& space,
                                          const GridSpec& grid, double alpha,
                                          int jobs = 1);

struct ValleyPoint {
  double d;  // diffusivity-like coordinate, linear units
  double k;  // rate-like coordinate, linear units
};

struct TotalResistanceFit {
  double alpha = 0.0;  // coefficient on 1/d
  double beta = 0.0;   // coefficient on 1/k
  double residual = 0.0;
  bool degenerate = false;  // negative coefficient encountered
};

// Least-squares fit of alpha/d + beta/k = R_tot with R_tot normalized to 1
// along an equal-misfit valley.
TotalResistanceFit fit_total_resistance(const std::vector<ValleyPoint>& pts);

}  // namespace dfnid
