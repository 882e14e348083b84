#include "dfnid/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dfnid/rng.hpp"
#include "dfnid/stats.hpp"

namespace dfnid {

std::array<double, 4> theta_to_log10(const RegressedParams& theta) {
  return {std::log10(theta.d_s_p), std::log10(theta.d_s_n),
          std::log10(theta.k_p), std::log10(theta.k_n)};
}

RegressedParams theta_from_log10(const std::array<double, 4>& lg) {
  RegressedParams t;
  t.d_s_p = std::pow(10.0, lg[0]);
  t.d_s_n = std::pow(10.0, lg[1]);
  t.k_p = std::pow(10.0, lg[2]);
  t.k_n = std::pow(10.0, lg[3]);
  return t;
}

ParameterSpace ParameterSpace::defaults() {
  ParameterSpace s;
  s.fixed_log10 = theta_to_log10(RegressedParams{});
  return s;
}

void ParameterSpace::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (!fixed[i] && !(lo[i] < hi[i]))
      throw std::invalid_argument(std::string("ParameterSpace: bounds for ") +
                                  kThetaNames[i] + " must satisfy lo < hi");
    if (prior[i] && !(prior[i]->std_log10 > 0.0))
      throw std::invalid_argument("ParameterSpace: prior std must be positive");
  }
  if (n_free() == 0)
    throw std::invalid_argument("ParameterSpace: no free parameters");
}

int ParameterSpace::n_free() const {
  int n = 0;
  for (bool f : fixed) n += f ? 0 : 1;
  return n;
}

std::vector<int> ParameterSpace::free_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < 4; ++i)
    if (!fixed[i]) idx.push_back(i);
  return idx;
}

std::vector<std::string> ParameterSpace::free_names() const {
  std::vector<std::string> names;
  for (int i : free_indices()) names.emplace_back(kThetaNames[i]);
  return names;
}

bool ParameterSpace::in_bounds(const std::vector<double>& x) const {
  const auto idx = free_indices();
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (x[k] < lo[idx[k]] || x[k] > hi[idx[k]]) return false;
  return true;
}

RegressedParams ParameterSpace::assemble(const std::vector<double>& x) const {
  std::array<double, 4> lg = fixed_log10;
  const auto idx = free_indices();
  if (x.size() != idx.size())
    throw std::invalid_argument("ParameterSpace: wrong free-vector length");
  for (std::size_t k = 0; k < idx.size(); ++k) lg[idx[k]] = x[k];
  return theta_from_log10(lg);
}

std::vector<double> ParameterSpace::extract_free(
    const std::array<double, 4>& lg) const {
  std::vector<double> x;
  for (int i : free_indices()) x.push_back(lg[i]);
  return x;
}

double ParameterSpace::log_prior(const std::vector<double>& x) const {
  const auto idx = free_indices();
  double lp = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (prior[idx[k]])
      lp += normal_logpdf(x[k], prior[idx[k]]->mean_log10,
                          prior[idx[k]]->std_log10);
  return lp;
}

std::vector<double> ParameterSpace::midpoint() const {
  std::vector<double> x;
  for (int i : free_indices()) x.push_back(0.5 * (lo[i] + hi[i]));
  return x;
}

Likelihood::Likelihood(Materials base, std::vector<FitSeries> series,
                       double sigma_v, SimOptions sim)
    : base_(std::move(base)), series_(std::move(series)), sigma_v_(sigma_v),
      sim_(sim) {
  if (series_.empty())
    throw std::invalid_argument("Likelihood: no fitting series");
  if (!(sigma_v_ > 0.0))
    throw std::invalid_argument("Likelihood: sigma must be positive");
  for (const auto& s : series_) {
    if (s.t_s.size() != s.v_v.size() || s.t_s.size() < 10)
      throw std::invalid_argument(
          "Likelihood: series needs at least 10 aligned samples");
    params_per_series_.push_back(apply_soh_window(base_.params, s.soh));
  }
}

int Likelihood::n_points() const {
  int n = 0;
  for (const auto& s : series_) n += static_cast<int>(s.t_s.size());
  return n;
}

ChiSquaredEval Likelihood::chi_squared(const RegressedParams& theta) const {
  ChiSquaredEval out;
  for (std::size_t i = 0; i < series_.size(); ++i) {
    const FitSeries& s = series_[i];
    Materials m = base_;
    m.params = params_per_series_[i];
    m.params.theta = theta;
    const Protocol proto = Protocol::cc_discharge(
        s.c_rate, m.params.v_cut_discharge, s.t_s.back());
    const SimulationResult sim = simulate_protocol(m, proto, sim_);
    if (sim.failed) {
      out.chi2 = kFailurePenalty;
      out.solver_failed = true;
      return out;
    }
    const double t_end = sim.end_time();
    const double v_cut = m.params.v_cut_discharge;
    for (std::size_t j = 0; j < s.t_s.size(); ++j) {
      double r;
      if (s.t_s[j] <= t_end + 1e-9) {
        r = (s.v_v[j] - sim.voltage_at(s.t_s[j])) / sigma_v_;
      } else {
        // The simulation hit its cutoff before this measurement; penalize
        // the capacity deficit so under-capacity parameter sets rank
        // monotonically worse.
        r = (std::max(s.v_v[j] - v_cut, 0.0) + 0.1) / sigma_v_;
        ++out.padded_points;
      }
      out.chi2 += r * r;
    }
  }
  return out;
}

ObjectiveFn make_posterior_objective(const Likelihood& lik,
                                     const ParameterSpace& space) {
  return [&lik, &space](const std::vector<double>& x) {
    ObjectiveEval ev;
    const ChiSquaredEval c = lik.chi_squared(space.assemble(x));
    ev.chi2 = c.chi2;
    ev.solver_failed = c.solver_failed;
    ev.neg_log_post = 0.5 * c.chi2 - space.log_prior(x);
    return ev;
  };
}

double log_posterior(const std::vector<double>& free_log10,
                     const Likelihood& lik, const ParameterSpace& space) {
  if (!space.in_bounds(free_log10))
    return -std::numeric_limits<double>::infinity();
  const ChiSquaredEval c = lik.chi_squared(space.assemble(free_log10));
  return -0.5 * c.chi2 + space.log_prior(free_log10);
}

ObjectiveFn make_prior_only_objective(const ParameterSpace& space) {
  return [&space](const std::vector<double>& x) {
    ObjectiveEval ev;
    ev.chi2 = 0.0;
    ev.neg_log_post = -space.log_prior(x);
    return ev;
  };
}

namespace {

std::vector<double> clamp_to_box(std::vector<double> x,
                                 const ParameterSpace& space) {
  const auto idx = space.free_indices();
  for (std::size_t k = 0; k < idx.size(); ++k)
    x[k] = std::clamp(x[k], space.lo[idx[k]], space.hi[idx[k]]);
  return x;
}

}  // namespace

MapResult map_estimate(const ObjectiveFn& objective,
                       const ParameterSpace& space,
                       const std::vector<double>& init,
                       const MapOptions& opts) {
  const int n = space.n_free();
  if (static_cast<int>(init.size()) != n)
    throw std::invalid_argument("map_estimate: init has wrong dimension");

  MapResult result;
  result.x = clamp_to_box(init, space);

  struct Vertex {
    std::vector<double> x;
    double f;
    double chi2;
  };
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const ObjectiveEval ev = objective(x);
    return Vertex{x, ev.neg_log_post, ev.chi2};
  };

  Vertex best = eval(result.x);
  double step = opts.simplex_step;
  const auto idx = space.free_indices();

  for (int round = 0; round <= opts.restarts; ++round) {
    std::vector<Vertex> simplex;
    simplex.push_back(best);
    for (int k = 0; k < n; ++k) {
      std::vector<double> x = best.x;
      const double width = space.hi[idx[k]] - space.lo[idx[k]];
      double d = step * std::min(1.0, width);
      if (x[k] + d > space.hi[idx[k]]) d = -d;
      x[k] += d;
      simplex.push_back(eval(clamp_to_box(std::move(x), space)));
    }

    auto order = [&] {
      std::sort(simplex.begin(), simplex.end(),
                [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    };
    order();

    while (evals < opts.max_evals) {
      const double spread_f = simplex.back().f - simplex.front().f;
      double spread_x = 0.0;
      for (int k = 0; k < n; ++k)
        spread_x = std::max(spread_x, std::fabs(simplex.back().x[k] -
                                                simplex.front().x[k]));
      if (spread_x < opts.tol_x &&
          spread_f < opts.tol_f * (1.0 + std::fabs(simplex.front().f))) {
        result.converged = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (int v = 0; v < n; ++v)
        for (int k = 0; k < n; ++k) centroid[k] += simplex[v].x[k] / n;

      auto combine = [&](double coef) {
        std::vector<double> x(n);
        for (int k = 0; k < n; ++k)
          x[k] = centroid[k] + coef * (centroid[k] - simplex.back().x[k]);
        return clamp_to_box(std::move(x), space);
      };

      const Vertex refl = eval(combine(1.0));
      if (refl.f < simplex.front().f) {
        const Vertex expa = eval(combine(2.0));
        simplex.back() = expa.f < refl.f ? expa : refl;
      } else if (refl.f < simplex[n - 1].f) {
        simplex.back() = refl;
      } else if (refl.f < simplex.back().f) {
        const Vertex out = eval(combine(0.5));
        if (out.f <= refl.f) {
          simplex.back() = out;
        } else {
          simplex.back() = refl;
        }
      } else {
        const Vertex in = eval(combine(-0.5));
        if (in.f < simplex.back().f) {
          simplex.back() = in;
        } else {
          for (int v = 1; v <= n; ++v) {
            for (int k = 0; k < n; ++k)
              simplex[v].x[k] =
                  simplex[0].x[k] + 0.5 * (simplex[v].x[k] - simplex[0].x[k]);
            simplex[v] = eval(simplex[v].x);
          }
        }
      }
      order();
    }
    best = simplex.front();
    step *= 0.3;
    if (evals >= opts.max_evals) break;
  }

  result.x = best.x;
  result.value = best.f;
  result.chi2 = best.chi2;
  result.evals = evals;
  return result;
}

namespace {

// Dense finite-difference Hessian of the objective at x, inverted in place.
// Returns false when the Hessian is numerically singular.
bool inverse_hessian(const ObjectiveFn& objective, const ParameterSpace& space,
                     const std::vector<double>& x, double step,
                     std::vector<std::vector<double>>& inv) {
  const int n = static_cast<int>(x.size());
  auto f = [&](const std::vector<double>& p) {
    return objective(clamp_to_box(p, space)).neg_log_post;
  };

  std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
  const double f0 = f(x);
  for (int i = 0; i < n; ++i) {
    auto xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    h[i][i] = (f(xp) - 2.0 * f0 + f(xm)) / (step * step);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto a = x, b = x, c = x, d = x;
      a[i] += step; a[j] += step;
      b[i] += step; b[j] -= step;
      c[i] -= step; c[j] += step;
      d[i] -= step; d[j] -= step;
      h[i][j] = h[j][i] = (f(a) - f(b) - f(c) + f(d)) / (4.0 * step * step);
    }

  inv.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(h[r][col]) > std::fabs(h[piv][col])) piv = r;
    if (std::fabs(h[piv][col]) < 1e-12) return false;
    std::swap(h[col], h[piv]);
    std::swap(inv[col], inv[piv]);
    const double d = h[col][col];
    for (int k = 0; k < n; ++k) {
      h[col][k] /= d;
      inv[col][k] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double m = h[r][col];
      for (int k = 0; k < n; ++k) {
        h[r][k] -= m * h[col][k];
        inv[r][k] -= m * inv[col][k];
      }
    }
  }
  return true;
}

}  // namespace

std::vector<double> laplace_variance(const ObjectiveFn& objective,
                                     const ParameterSpace& space,
                                     const std::vector<double>& x,
                                     double step) {
  const int n = static_cast<int>(x.size());
  const auto idx = space.free_indices();
  std::vector<std::vector<double>> inv;
  const bool ok = inverse_hessian(objective, space, x, step, inv);

  std::vector<double> var(n);
  for (int k = 0; k < n; ++k) {
    const double width = space.hi[idx[k]] - space.lo[idx[k]];
    double v = ok ? inv[k][k] : width * width;
    if (!std::isfinite(v) || v <= 0.0) v = width * width;
    var[k] = std::clamp(v, 1e-8, width * width);
  }
  return var;
}

std::vector<double> PosteriorChain::best_sample() const {
  if (samples.empty()) return init;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (objective[i] < objective[arg]) arg = i;
  return samples[arg];
}

std::vector<double> PosteriorChain::marginal(int free_index) const {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s[free_index]);
  return v;
}

namespace {

// Lower Cholesky for small SPD matrices; jitters the diagonal as needed.
bool small_cholesky(const std::vector<std::vector<double>>& a,
                    std::vector<std::vector<double>>& l) {
  const int n = static_cast<int>(a.size());
  l.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (s <= 0.0) return false;
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return true;
}

}  // namespace

PosteriorChain mcmc_sample(const ObjectiveFn& objective,
                           const ParameterSpace& space,
                           const McmcConfig& config,
                           const std::vector<double>& init) {
  space.validate();
  const int n = space.n_free();
  if (static_cast<int>(init.size()) != n)
    throw std::invalid_argument("mcmc_sample: init has wrong dimension");
  if (!space.in_bounds(init))
    throw std::invalid_argument("mcmc_sample: init outside sampling bounds");
  if (config.iterations <= 0 || config.burn_in < 0)
    throw std::invalid_argument("mcmc_sample: iterations > burn_in >= 0 required");

  PosteriorChain chain;
  chain.param_names = space.free_names();
  chain.param_indices = space.free_indices();
  chain.burn_in = config.burn_in;
  chain.seed = config.seed;
  chain.init = init;
  chain.space = space;
  chain.samples.reserve(config.iterations);

  Rng rng(config.seed);
  const auto idx = space.free_indices();

  // Proposal state.
  const bool null_proposal = config.initial_step_frac <= 0.0;
  const double sd = 2.38 * 2.38 / n;
  std::vector<std::vector<double>> cov(n, std::vector<double>(n, 0.0));
  for (int k = 0; k < n; ++k) {
    const double w = (space.hi[idx[k]] - space.lo[idx[k]]);
    cov[k][k] = std::pow(config.initial_step_frac * w, 2);
  }
  if (config.laplace_init && !null_proposal) {
    bool used_full = false;
    std::vector<std::vector<double>> inv;
    if (inverse_hessian(objective, space, init, 0.05, inv)) {
      // Rescale so each diagonal lands in [1e-6, width^2]; this keeps the
      // correlation structure while flat directions saturate at box scale.
      bool ok = true;
      std::vector<double> s(n, 1.0);
      for (int k = 0; k < n; ++k) {
        const double w = space.hi[idx[k]] - space.lo[idx[k]];
        const double v = inv[k][k];
        if (!std::isfinite(v) || v <= 0.0) {
          ok = false;
          break;
        }
        s[k] = std::sqrt(std::clamp(v, 1e-6, w * w) / v);
      }
      if (ok) {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) inv[i][j] *= sd * s[i] * s[j];
        std::vector<std::vector<double>> l;
        if (small_cholesky(inv, l)) {
          cov = std::move(inv);
          used_full = true;
        }
      }
    }
    if (!used_full) {
      // Fall back to clamped per-direction variances.
      const auto var = laplace_variance(objective, space, init, 0.05);
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) cov[k][j] = 0.0;
        cov[k][k] = sd * var[k];
      }
    }
  }
  std::vector<std::vector<double>> chol;
  small_cholesky(cov, chol);
  if (null_proposal) chol.assign(n, std::vector<double>(n, 0.0));
  double log_lambda = 0.0;

  // Running moments over the burn-in history.
  std::vector<double> mean(n, 0.0);
  std::vector<std::vector<double>> ssum(n, std::vector<double>(n, 0.0));
  long hist = 0;

  std::vector<double> x = init;
  ObjectiveEval cur = objective(x);

  const long total = static_cast<long>(config.burn_in) + config.iterations;
  std::vector<double> z(n), xp(n);
  long accepted_post = 0;

  for (long t = 0; t < total; ++t) {
    bool accept = false;
    bool wide_move = false;
    if (null_proposal) {
      accept = true;
    } else {
      wide_move = config.wide_move_prob > 0.0 &&
                  rng.uniform() < config.wide_move_prob;
      for (int k = 0; k < n; ++k) z[k] = rng.normal();
      if (wide_move) {
        const int i = static_cast<int>(rng.uniform() * n) % n;
        const double w = space.hi[idx[i]] - space.lo[idx[i]];
        xp = x;
        xp[i] = x[i] + config.wide_move_frac * w * z[i];
      } else {
        const double lam = std::exp(log_lambda);
        for (int i = 0; i < n; ++i) {
          double dx = 0.0;
          for (int k = 0; k <= i; ++k) dx += chol[i][k] * z[k];
          xp[i] = x[i] + lam * dx;
        }
      }
      if (space.in_bounds(xp)) {
        const ObjectiveEval prop = objective(xp);
        const double loga = cur.neg_log_post - prop.neg_log_post;
        if (loga >= 0.0 || rng.uniform() < std::exp(loga)) {
          x = xp;
          cur = prop;
          accept = true;
        }
      }
    }

    if (t < config.burn_in) {
      // Haario-style covariance adaptation with Robbins-Monro scaling,
      // active during burn-in only.
      ++hist;
      for (int i = 0; i < n; ++i) {
        const double d = x[i] - mean[i];
        mean[i] += d / hist;
        for (int j = 0; j <= i; ++j)
          ssum[i][j] += d * (x[j] - mean[j]);
      }
      if (!null_proposal) {
        if (!wide_move) {
          const double gamma = std::pow(static_cast<double>(t + 1), -0.6);
          log_lambda +=
              gamma * ((accept ? 1.0 : 0.0) - config.target_acceptance);
        }
        if (hist > std::max(20L, 5L * n) &&
            (t % config.cov_refresh) == config.cov_refresh - 1) {
          std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
          for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j)
              c[i][j] = c[j][i] = sd * ssum[std::max(i, j)][std::min(i, j)] /
                                  (hist - 1);
          for (int i = 0; i < n; ++i)
            c[i][i] += 1e-10 + 1e-6 * cov[i][i];
          std::vector<std::vector<double>> l;
          if (small_cholesky(c, l)) chol = std::move(l);
          std::vector<double> snap;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) snap.push_back(c[i][j]);
          if (chain.cov_history.size() < 64) chain.cov_history.push_back(snap);
        }
      }
    } else {
      chain.samples.push_back(x);
      chain.objective.push_back(cur.neg_log_post);
      chain.chi2.push_back(cur.chi2);
      chain.accepted.push_back(accept ? 1 : 0);
      if (accept) ++accepted_post;
    }
  }

  chain.acceptance_rate =
      static_cast<double>(accepted_post) / config.iterations;
  chain.proposal_scale_final.resize(n);
  for (int k = 0; k < n; ++k)
    chain.proposal_scale_final[k] = std::exp(log_lambda) * chol[k][k];
  if (!null_proposal &&
      (chain.acceptance_rate < 0.01 || chain.acceptance_rate > 0.90)) {
    chain.warning = true;
    chain.warning_message =
        "post-burn-in acceptance rate " +
        std::to_string(chain.acceptance_rate) + " outside [0.01, 0.90]";
  }
  return chain;
}

}  // namespace dfnid
