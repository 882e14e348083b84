#include "dfnid/identify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "dfnid/stats.hpp"
#include "dfnid/threadpool.hpp"

namespace dfnid {

MarginalHistogram MarginalHistogram::from_samples(
    std::string name, double lo, double hi,
    const std::vector<double>& samples, int bins) {
  if (samples.empty())
    throw std::invalid_argument("MarginalHistogram: empty sample set");
  if (!(hi > lo) || bins < 8)
    throw std::invalid_argument("MarginalHistogram: bad box or bin count");
  MarginalHistogram h;
  h.param_name = std::move(name);
  h.lo = lo;
  h.hi = hi;
  h.bin_width = (hi - lo) / bins;
  h.density.assign(bins, 0.0);
  const double norm = 1.0 / (samples.size() * h.bin_width);
  for (double v : samples) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    h.density[b] += norm;
  }
  int peak_bin = 0;
  for (int b = 0; b < bins; ++b)
    if (h.density[b] > h.density[peak_bin]) peak_bin = b;
  h.peak_density = h.density[peak_bin];
  h.peak_location = lo + (peak_bin + 0.5) * h.bin_width;

  const int edge_bins = std::min(3, bins);
  double elo = 0.0, ehi = 0.0;
  for (int b = 0; b < edge_bins; ++b) {
    elo += h.density[b];
    ehi += h.density[bins - 1 - b];
  }
  h.edge_density_lo = elo / edge_bins;
  h.edge_density_hi = ehi / edge_bins;

  const int window = std::max(1, static_cast<int>(std::floor(bins * 0.15)));
  for (int b = 0; b < window; ++b) {
    h.boundary_mass_lo += h.density[b] * h.bin_width;
    h.boundary_mass_hi += h.density[bins - 1 - b] * h.bin_width;
  }
  return h;
}

MarginalHistogram MarginalHistogram::from_chain(const PosteriorChain& chain,
                                                int free_index, int bins) {
  const int canon = chain.param_indices.at(free_index);
  return from_samples(chain.param_names.at(free_index),
                      chain.space.lo[canon], chain.space.hi[canon],
                      chain.marginal(free_index), bins);
}

std::string to_string(IdentClass c) {
  switch (c) {
    case IdentClass::Identifiable: return "identifiable";
    case IdentClass::LocallyIdentifiable: return "locally-identifiable";
    case IdentClass::PracticallyUnidentifiable:
      return "practically-unidentifiable";
  }
  return "unknown";
}

IdentClass ident_class_from_string(const std::string& s) {
  if (s == "identifiable") return IdentClass::Identifiable;
  if (s == "locally-identifiable") return IdentClass::LocallyIdentifiable;
  if (s == "practically-unidentifiable")
    return IdentClass::PracticallyUnidentifiable;
  throw std::invalid_argument("unknown identifiability class: " + s);
}

IdentifiabilityVerdict classify_identifiability(
    const MarginalHistogram& hist, const ClassifyThresholds& thresholds) {
  if (hist.density.empty())
    throw std::invalid_argument("classify_identifiability: empty histogram");
  if (!(hist.peak_density > 0.0))
    throw std::invalid_argument("classify_identifiability: zero histogram");

  IdentifiabilityVerdict v;
  v.param_name = hist.param_name;
  v.thresholds = thresholds;

  // Edge metrics under the configured windows.
  const int bins = static_cast<int>(hist.density.size());
  const int eb = std::clamp(thresholds.edge_bins, 1, bins);
  double elo = 0.0, ehi = 0.0;
  for (int b = 0; b < eb; ++b) {
    elo += hist.density[b];
    ehi += hist.density[bins - 1 - b];
  }
  elo /= eb;
  ehi /= eb;
  const int window = std::clamp(
      static_cast<int>(std::floor(bins * thresholds.boundary_window)), 1, bins);
  double mlo = 0.0, mhi = 0.0;
  for (int b = 0; b < window; ++b) {
    mlo += hist.density[b] * hist.bin_width;
    mhi += hist.density[bins - 1 - b] * hist.bin_width;
  }

  const double worst_edge = std::max(elo, ehi);
  v.boundary_to_peak = worst_edge / hist.peak_density;
  v.peak_to_plateau = worst_edge > 0.0
                          ? hist.peak_density / worst_edge
                          : std::numeric_limits<double>::infinity();
  v.boundary_mass = ehi >= elo ? mhi : mlo;

  if (v.boundary_to_peak < thresholds.edge_to_peak) {
    v.cls = IdentClass::Identifiable;
  } else if (v.peak_to_plateau >= thresholds.peak_to_plateau &&
             v.boundary_mass >= thresholds.boundary_mass) {
    v.cls = IdentClass::LocallyIdentifiable;
  } else {
    v.cls = IdentClass::PracticallyUnidentifiable;
  }
  v.upper_unbounded = v.cls == IdentClass::PracticallyUnidentifiable;
  return v;
}

CredibleInterval credible_interval(const PosteriorChain& chain, int free_index,
                                   double alpha,
                                   const ClassifyThresholds& thresholds) {
  if (chain.samples.size() < 100)
    throw std::runtime_error(
        "credible_interval: fewer than 100 post-burn-in samples");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("credible_interval: alpha outside (0,1)");
  std::vector<double> m = chain.marginal(free_index);
  std::sort(m.begin(), m.end());
  CredibleInterval ci;
  ci.lower = quantile_sorted(m, 0.5 * alpha);
  ci.upper = quantile_sorted(m, 1.0 - 0.5 * alpha);
  const auto verdict =
      classify_identifiability(MarginalHistogram::from_chain(chain, free_index),
                               thresholds);
  ci.upper_unbounded = verdict.cls == IdentClass::PracticallyUnidentifiable;
  return ci;
}

IdentifiabilityVerdict verdict_for(const PosteriorChain& chain, int free_index,
                                   double alpha,
                                   const ClassifyThresholds& thresholds) {
  IdentifiabilityVerdict v = classify_identifiability(
      MarginalHistogram::from_chain(chain, free_index), thresholds);
  const CredibleInterval ci =
      credible_interval(chain, free_index, alpha, thresholds);
  v.lower_log10 = ci.lower;
  v.upper_log10 = ci.upper;
  v.upper_unbounded = ci.upper_unbounded;
  v.map_log10 = chain.best_sample()[free_index];
  return v;
}

bool ConfidenceRegion2D::contains(double x, double y) const {
  const auto locate = [](const std::vector<double>& axis, double v) {
    if (v <= axis.front()) return std::size_t{0};
    if (v >= axis.back()) return axis.size() - 2;
    const auto it = std::upper_bound(axis.begin(), axis.end(), v);
    return static_cast<std::size_t>(it - axis.begin()) - 1;
  };
  const std::size_t ix = locate(xs, x);
  const std::size_t iy = locate(ys, y);
  const double tx =
      std::clamp((x - xs[ix]) / (xs[ix + 1] - xs[ix]), 0.0, 1.0);
  const double ty =
      std::clamp((y - ys[iy]) / (ys[iy + 1] - ys[iy]), 0.0, 1.0);
  const double c00 = at(static_cast<int>(ix), static_cast<int>(iy));
  const double c10 = at(static_cast<int>(ix) + 1, static_cast<int>(iy));
  const double c01 = at(static_cast<int>(ix), static_cast<int>(iy) + 1);
  const double c11 = at(static_cast<int>(ix) + 1, static_cast<int>(iy) + 1);
  const double interp = c00 * (1 - tx) * (1 - ty) + c10 * tx * (1 - ty) +
                        c01 * (1 - tx) * ty + c11 * tx * ty;
  return contains_chi2(interp);
}

bool ConfidenceRegion2D::touches_x_edge() const {
  const std::size_t nx = xs.size();
  for (std::size_t iy = 0; iy < ys.size(); ++iy)
    if (member[iy * nx + (nx - 1)]) return true;
  return false;
}

bool ConfidenceRegion2D::touches_y_edge() const {
  const std::size_t nx = xs.size();
  const std::size_t ny = ys.size();
  for (std::size_t ix = 0; ix < nx; ++ix)
    if (member[(ny - 1) * nx + ix]) return true;
  return false;
}

ConfidenceRegion2D grid_confidence_region(const Likelihood& lik,
                                          const ParameterSpace& space,
                                          const GridSpec& grid, double alpha,
                                          int jobs) {
  space.validate();
  if (space.n_free() != 2)
    throw std::invalid_argument(
        "grid_confidence_region: exactly two free parameters required");
  if (grid.nx < 2 || grid.ny < 2)
    throw std::invalid_argument("grid_confidence_region: grid too small");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("grid_confidence_region: alpha outside (0,1)");

  const auto idx = space.free_indices();
  ConfidenceRegion2D region;
  region.x_name = kThetaNames[idx[0]];
  region.y_name = kThetaNames[idx[1]];
  region.alpha = alpha;
  region.xs.resize(grid.nx);
  region.ys.resize(grid.ny);
  for (int i = 0; i < grid.nx; ++i)
    region.xs[i] = space.lo[idx[0]] +
                   (space.hi[idx[0]] - space.lo[idx[0]]) * i / (grid.nx - 1);
  for (int j = 0; j < grid.ny; ++j)
    region.ys[j] = space.lo[idx[1]] +
                   (space.hi[idx[1]] - space.lo[idx[1]]) * j / (grid.ny - 1);

  const std::size_t total = static_cast<std::size_t>(grid.nx) * grid.ny;
  region.chi2.assign(total, 0.0);
  region.solver_failed.assign(total, 0);
  region.member.assign(total, 0);

  parallel_for(total, jobs, [&](std::size_t node) {
    const int ix = static_cast<int>(node % grid.nx);
    const int iy = static_cast<int>(node / grid.nx);
    const auto ev =
        lik.chi_squared(space.assemble({region.xs[ix], region.ys[iy]}));
    region.chi2[node] = ev.chi2;
    region.solver_failed[node] = ev.solver_failed ? 1 : 0;
  });

  bool any_ok = false;
  double best = 0.0;
  for (std::size_t node = 0; node < total; ++node) {
    if (region.solver_failed[node]) continue;
    if (!any_ok || region.chi2[node] < best) {
      best = region.chi2[node];
      any_ok = true;
      region.star_ix = static_cast<int>(node % grid.nx);
      region.star_iy = static_cast<int>(node / grid.nx);
    }
  }
  if (!any_ok)
    throw std::runtime_error(
        "grid_confidence_region: forward model failed at every node");

  region.chi2_star = best;
  region.threshold = chi2_quantile(2, 1.0 - alpha);
  for (std::size_t node = 0; node < total; ++node)
    region.member[node] =
        !region.solver_failed[node] &&
        region.chi2[node] - region.chi2_star <= region.threshold;
  return region;
}

TotalResistanceFit fit_total_resistance(const std::vector<ValleyPoint>& pts) {
  if (pts.size() < 10)
    throw std::invalid_argument(
        "fit_total_resistance: need at least 10 valley points");
  // Normal equations for alpha*u + beta*v = 1 with u = 1/d, v = 1/k.
  double suu = 0.0, svv = 0.0, suv = 0.0, su = 0.0, sv = 0.0;
  for (const auto& p : pts) {
    if (!(p.d > 0.0) || !(p.k > 0.0))
      throw std::invalid_argument(
          "fit_total_resistance: coordinates must be positive");
    const double u = 1.0 / p.d, v = 1.0 / p.k;
    suu += u * u;
    svv += v * v;
    suv += u * v;
    su += u;
    sv += v;
  }
  const double det = suu * svv - suv * suv;
  TotalResistanceFit fit;
  if (std::fabs(det) < 1e-300) {
    fit.degenerate = true;
    return fit;
  }
  fit.alpha = (su * svv - sv * suv) / det;
  fit.beta = (sv * suu - su * suv) / det;
  double ss = 0.0;
  for (const auto& p : pts) {
    const double r = fit.alpha / p.d + fit.beta / p.k - 1.0;
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / pts.size());
  fit.degenerate = fit.alpha <= 0.0 || fit.beta <= 0.0;
  return fit;
}

}  // namespace dfnid
