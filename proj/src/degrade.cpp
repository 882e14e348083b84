#include "dfnid/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dfnid/log.hpp"
#include "dfnid/rng.hpp"
#include "dfnid/threadpool.hpp"

namespace dfnid {

std::string to_string(SohForm f) {
  return f == SohForm::Atanh ? "atanh" : "linear";
}

namespace {

struct WeightedFit {
  double p0, p1, ss;
};

// Closed-form weighted regression of y on [1, basis(soh)].
WeightedFit weighted_linear(const std::vector<TrajectoryPoint>& pts,
                            const std::vector<double>& basis) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double w = 1.0 / pts[i].var_log10;
    const double x = basis[i], y = pts[i].map_log10;
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
  }
  const double det = sw * sxx - sx * sx;
  WeightedFit f{0.0, 0.0, 0.0};
  if (std::fabs(det) < 1e-300) {
    f.p0 = sy / sw;
    f.p1 = 0.0;
  } else {
    f.p0 = (sy * sxx - sx * sxy) / det;
    f.p1 = (sw * sxy - sx * sy) / det;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = pts[i].map_log10 - (f.p0 + f.p1 * basis[i]);
    f.ss += r * r / pts[i].var_log10;
  }
  return f;
}

void validate_points(const std::vector<TrajectoryPoint>& pts) {
  if (pts.size() < 5)
    throw std::invalid_argument("fit_soh_trajectory: need at least 5 points");
  for (const auto& p : pts) {
    if (!(p.soh > 0.0 && p.soh <= 1.0))
      throw std::invalid_argument("fit_soh_trajectory: soh outside (0,1]");
    if (!(p.var_log10 > 0.0))
      throw std::invalid_argument("fit_soh_trajectory: variance must be positive");
    if (p.param != pts.front().param || p.c_rate != pts.front().c_rate)
      throw std::invalid_argument(
          "fit_soh_trajectory: points mix parameters or C-rates");
  }
}

}  // namespace

SohFit fit_soh_trajectory(const std::vector<TrajectoryPoint>& pts,
                          SohForm form) {
  validate_points(pts);
  SohFit fit;
  fit.param = pts.front().param;
  fit.c_rate = pts.front().c_rate;
  fit.soh_lo = fit.soh_hi = pts.front().soh;
  for (const auto& p : pts) {
    fit.soh_lo = std::min(fit.soh_lo, p.soh);
    fit.soh_hi = std::max(fit.soh_hi, p.soh);
  }

  std::vector<double> basis(pts.size());
  if (form == SohForm::Linear) {
    for (std::size_t i = 0; i < pts.size(); ++i) basis[i] = pts[i].soh;
    const WeightedFit f = weighted_linear(pts, basis);
    fit.form = SohForm::Linear;
    fit.p0 = f.p0;
    fit.p1 = f.p1;
    fit.weighted_residual = f.ss;
    return fit;
  }

  double max_abs = 0.0;
  for (const auto& p : pts) max_abs = std::max(max_abs, std::fabs(p.soh - 0.5));
  if (max_abs <= 0.0) {
    log::warn("fit_soh_trajectory: degenerate SOH spread, using linear form");
    SohFit lin = fit_soh_trajectory(pts, SohForm::Linear);
    lin.fell_back_linear = true;
    return lin;
  }
  const double p2_max = 0.995 / max_abs;

  auto score = [&](double p2) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      basis[i] = std::atanh(p2 * (pts[i].soh - 0.5));
    return weighted_linear(pts, basis);
  };

  // Coarse scan then golden-section refinement; the inner problem is exact.
  double best_p2 = 0.0;
  double best_ss = std::numeric_limits<double>::infinity();
  const int scan = 96;
  for (int i = 1; i <= scan; ++i) {
    const double p2 = p2_max * i / (scan + 1.0);
    const double ss = score(p2).ss;
    if (ss < best_ss) {
      best_ss = ss;
      best_p2 = p2;
    }
  }
  double a = std::max(1e-9, best_p2 - p2_max / scan);
  double b = std::min(p2_max, best_p2 + p2_max / scan);
  const double gr = 0.618033988749895;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = score(x1).ss, f2 = score(x2).ss;
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = score(x1).ss;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = score(x2).ss;
    }
  }
  const double p2 = 0.5 * (a + b);
  const WeightedFit f = score(p2);
  fit.form = SohForm::Atanh;
  fit.p0 = f.p0;
  fit.p1 = f.p1;
  fit.p2 = p2;
  fit.weighted_residual = f.ss;
  return fit;
}

double eval_soh_trajectory(const SohFit& fit, double soh) {
  if (fit.form == SohForm::Linear) return fit.p0 + fit.p1 * soh;
  const double arg = fit.p2 * (soh - 0.5);
  if (!(arg > -1.0 && arg < 1.0))
    throw std::domain_error(
        "eval_soh_trajectory: atanh argument outside (-1,1) at soh=" +
        std::to_string(soh));
  return fit.p0 + fit.p1 * std::atanh(arg);
}

std::vector<double> ewma_smooth(const std::vector<double>& xs, double alpha) {
  if (xs.empty()) throw std::invalid_argument("ewma_smooth: empty series");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ewma_smooth: alpha outside (0,1]");
  std::vector<double> out(xs.size());
  out[0] = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i)
    out[i] = alpha * xs[i] + (1.0 - alpha) * out[i - 1];
  return out;
}

std::vector<BandPoint> uncertainty_band(std::vector<TrajectoryPoint> pts,
                                        double alpha_smooth) {
  if (pts.empty()) throw std::invalid_argument("uncertainty_band: no points");
  std::sort(pts.begin(), pts.end(),
            [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
              return a.soh < b.soh;
            });
  std::vector<double> stds(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    stds[i] = std::sqrt(pts[i].var_log10);
  const auto smooth = ewma_smooth(stds, alpha_smooth);
  std::vector<BandPoint> band(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    band[i] = BandPoint{pts[i].soh, pts[i].map_log10,
                        pts[i].map_log10 - smooth[i],
                        pts[i].map_log10 + smooth[i]};
  return band;
}

const SohFit* TrajectorySet::find(const std::string& param,
                                  const std::string& c_rate) const {
  for (const auto& f : fits)
    if (f.param == param && f.c_rate == c_rate) return &f;
  return nullptr;
}

RegressedParams TrajectorySet::theta_at(double soh, const std::string& c_rate,
                                        const RegressedParams& base) const {
  RegressedParams theta = base;
  if (const SohFit* f = find("D_s_n", c_rate))
    theta.d_s_n = std::pow(10.0, eval_soh_trajectory(*f, soh));
  if (const SohFit* f = find("D_s_p", c_rate))
    theta.d_s_p = std::pow(10.0, eval_soh_trajectory(*f, soh));
  if (const SohFit* f = find("k_n", c_rate))
    theta.k_n = std::pow(10.0, eval_soh_trajectory(*f, soh));
  if (const SohFit* f = find("k_p", c_rate))
    theta.k_p = std::pow(10.0, eval_soh_trajectory(*f, soh));
  return theta;
}

TrajectorySet TrajectorySet::nca_reference() {
  auto atanh_fit = [](const char* param, const char* rate, double p0,
                      double p1, double p2) {
    SohFit f;
    f.form = SohForm::Atanh;
    f.param = param;
    f.c_rate = rate;
    f.p0 = p0;
    f.p1 = p1;
    f.p2 = p2;
    f.soh_lo = 0.2;
    f.soh_hi = 0.97;
    return f;
  };
  auto linear_fit = [](const char* param, const char* rate, double p0,
                       double p1) {
    SohFit f;
    f.form = SohForm::Linear;
    f.param = param;
    f.c_rate = rate;
    f.p0 = p0;
    f.p1 = p1;
    f.soh_lo = 0.2;
    f.soh_hi = 0.97;
    return f;
  };
  TrajectorySet set;
  set.fits = {
      atanh_fit("D_s_n", "C/5", -14.75, 0.6757, 2.067),
      atanh_fit("D_s_n", "1C", -14.04, 0.6581, 2.119),
      atanh_fit("D_s_n", "2C", -13.71, 0.6368, 2.190),
      linear_fit("D_s_p", "C/5", -16.11, 2.684),
      linear_fit("D_s_p", "1C", -15.33, 2.504),
      linear_fit("D_s_p", "2C", -15.03, 2.561),
      linear_fit("k_n", "C/5", -12.18, 1.135),
      linear_fit("k_n", "1C", -14.36, 3.409),
      linear_fit("k_n", "2C", -15.68, 4.502),
  };
  return set;
}

LadderDataset synth_ladder(
    const TrajectorySet& fits, const std::vector<double>& soh_grid,
    double noise_v, std::uint64_t seed, const Materials& base,
    const std::vector<std::pair<std::string, double>>& c_rates,
    const SimOptions& sim, int jobs) {
  if (soh_grid.empty() || c_rates.empty())
    throw std::invalid_argument("synth_ladder: empty grid");

  std::vector<double> sohs = soh_grid;
  std::sort(sohs.rbegin(), sohs.rend());  // pristine first

  LadderDataset data;
  data.noise_v = noise_v;
  data.seed = seed;

  RegressedParams base_theta = base.params.theta;
  base_theta.k_p = kFixedKp;

  const std::size_t total = sohs.size() * c_rates.size();
  std::vector<LadderRung> rungs(total);
  std::vector<std::uint8_t> ok(total, 0);

  parallel_for(total, jobs, [&](std::size_t item) {
    const std::size_t si = item / c_rates.size();
    const std::size_t ri = item % c_rates.size();
    const double soh = sohs[si];
    const auto& [tag, rate] = c_rates[ri];

    LadderRung rung;
    rung.cycle = static_cast<int>(si) * 100;
    rung.soh = soh;
    rung.c_rate_tag = tag;
    rung.c_rate = rate;
    rung.theta_gen = fits.theta_at(soh, tag, base_theta);

    Materials mat = base;
    mat.params = apply_soh_window(base.params, soh);
    mat.params.theta = rung.theta_gen;
    const SimulationResult res = simulate_protocol(
        mat, Protocol::cc_discharge(rate, mat.params.v_cut_discharge), sim);
    if (res.failed || res.t_s.size() < 10) {
      log::warn("synth_ladder: dropped rung soh=" + std::to_string(soh) +
                " rate=" + tag +
                (res.failed ? " (" + res.failure_message + ")" : ""));
      return;
    }
    rung.series.c_rate = rate;
    rung.series.soh = soh;
    rung.series.t_s = res.t_s;
    rung.series.v_v = res.voltage_v;
    if (noise_v > 0.0) {
      Rng rng(Rng::mix(seed, item));
      for (auto& v : rung.series.v_v) v += noise_v * rng.normal();
    }
    rungs[item] = std::move(rung);
    ok[item] = 1;
  });

  for (std::size_t i = 0; i < total; ++i) {
    if (ok[i])
      data.rungs.push_back(std::move(rungs[i]));
    else
      ++data.dropped_rungs;
  }
  return data;
}

RmseComparison compare_rmse(const LadderDataset& data,
                            const std::vector<RegressedParams>& theta_star,
                            const TrajectorySet& fits, const Materials& base,
                            const SimOptions& sim, int jobs) {
  if (theta_star.size() != data.rungs.size())
    throw std::invalid_argument(
        "compare_rmse: theta_star not aligned with dataset");

  RmseComparison out;
  out.entries.resize(data.rungs.size());

  auto rmse_for = [&](const LadderRung& rung,
                      const RegressedParams& theta) -> double {
    Materials mat = base;
    mat.params = apply_soh_window(base.params, rung.soh);
    mat.params.theta = theta;
    const Protocol proto = Protocol::cc_discharge(
        rung.c_rate, mat.params.v_cut_discharge, rung.series.t_s.back());
    const SimulationResult res = simulate_protocol(mat, proto, sim);
    if (res.failed) return -1.0;
    double acc = 0.0;
    const double t_end = res.end_time();
    for (std::size_t j = 0; j < rung.series.t_s.size(); ++j) {
      double r;
      if (rung.series.t_s[j] <= t_end + 1e-9)
        r = rung.series.v_v[j] - res.voltage_at(rung.series.t_s[j]);
      else
        r = std::max(rung.series.v_v[j] - mat.params.v_cut_discharge, 0.0) +
            0.1;
      acc += r * r;
    }
    return std::sqrt(acc / rung.series.t_s.size());
  };

  parallel_for(data.rungs.size(), jobs, [&](std::size_t i) {
    const LadderRung& rung = data.rungs[i];
    RmseEntry e;
    e.cycle = rung.cycle;
    e.c_rate = rung.c_rate_tag;
    e.soh = rung.soh;
    const RegressedParams theta_hat =
        fits.theta_at(rung.soh, rung.c_rate_tag, rung.theta_gen);
    e.rmse_star = rmse_for(rung, theta_star[i]);
    e.rmse_fit = rmse_for(rung, theta_hat);
    e.excluded = e.rmse_star < 0.0 || e.rmse_fit < 0.0;
    out.entries[i] = std::move(e);
  });

  double n = 0;
  for (const auto& e : out.entries) {
    if (e.excluded) continue;
    out.mean_star += e.rmse_star;
    out.mean_fit += e.rmse_fit;
    n += 1;
  }
  if (n > 0) {
    out.mean_star /= n;
    out.mean_fit /= n;
    for (const auto& e : out.entries) {
      if (e.excluded) continue;
      out.std_star += (e.rmse_star - out.mean_star) * (e.rmse_star - out.mean_star);
      out.std_fit += (e.rmse_fit - out.mean_fit) * (e.rmse_fit - out.mean_fit);
    }
    out.std_star = n > 1 ? std::sqrt(out.std_star / (n - 1)) : 0.0;
    out.std_fit = n > 1 ? std::sqrt(out.std_fit / (n - 1)) : 0.0;
  }
  return out;
}

}  // namespace dfnid
