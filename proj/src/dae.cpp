#include "dfnid/dae.hpp"

#include <algorithm>
#include <cmath>

namespace dfnid {

namespace {
bool all_finite(const std::vector<double>& v, int* bad = nullptr) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      if (bad) *bad = static_cast<int>(i);
      return false;
    }
  }
  return true;
}
}  // namespace

BdfIntegrator::BdfIntegrator(const DaeSystem& sys, DaeOptions opts)
    : sys_(sys), opts_(opts), n_(sys.size()),
      lu_(sys.size(), sys.lower_bandwidth(), sys.upper_bandwidth()) {
  y_.resize(n_);
  y_prev_.resize(n_);
  ydot_.assign(n_, 0.0);
  g0_.resize(n_);
  g1_.resize(n_);
  yp_.resize(n_);
  ydp_.resize(n_);
  delta_.resize(n_);
  ynew_.resize(n_);
  ydnew_.resize(n_);
  pred_.resize(n_);
}

void BdfIntegrator::restart(double t0, const std::vector<double>& y0) {
  t_ = t0;
  y_ = y0;
  std::fill(ydot_.begin(), ydot_.end(), 0.0);
  have_prev_ = false;
  h_next_ = opts_.h_init;
  h_last_ = 0.0;
  order_ = 1;
  steps_at_order_ = 0;
  have_jac_ = false;
  failure_message_.clear();
}

double BdfIntegrator::wrms(const std::vector<double>& v,
                           bool differential_only) const {
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < n_; ++i) {
    if (differential_only && !sys_.differential(i)) continue;
    const double w = 1.0 / (opts_.abs_tol + opts_.rel_tol * std::fabs(y_[i]));
    const double z = v[i] * w;
    acc += z * z;
    ++count;
  }
  return count > 0 ? std::sqrt(acc / count) : 0.0;
}

bool BdfIntegrator::build_jacobian(double t, const std::vector<double>& y,
                                   const std::vector<double>& ydot,
                                   double cj) {
  const int kl = sys_.lower_bandwidth();
  const int ku = sys_.upper_bandwidth();
  const int stride = kl + ku + 1;

  sys_.residual(t, y.data(), ydot.data(), g0_.data());
  ++stats_.residual_evals;
  if (!all_finite(g0_)) return false;

  lu_.zero();
  yp_ = y;
  ydp_ = ydot;
  std::vector<double> dels(n_, 0.0);
  for (int s = 0; s < stride; ++s) {
    for (int c = s; c < n_; c += stride) {
      const double del = 1e-7 * (1.0 + std::fabs(y[c]));
      dels[c] = del;
      yp_[c] += del;
      ydp_[c] += cj * del;
    }
    sys_.residual(t, yp_.data(), ydp_.data(), g1_.data());
    ++stats_.residual_evals;
    for (int c = s; c < n_; c += stride) {
      const int r_lo = std::max(0, c - ku);
      const int r_hi = std::min(n_ - 1, c + kl);
      const double inv = 1.0 / dels[c];
      for (int r = r_lo; r <= r_hi; ++r)
        lu_.entry(r, c) = (g1_[r] - g0_[r]) * inv;
      yp_[c] = y[c];
      ydp_[c] = ydot[c];
    }
  }
  ++stats_.jacobians;
  if (!lu_.factor()) return false;
  cj_jac_ = cj;
  have_jac_ = true;
  return true;
}

bool BdfIntegrator::newton_solve(double t_new, double h, double alpha0,
                                 const std::vector<double>& ydot_const,
                                 std::vector<double>& y_new) {
  const double cj = alpha0 / h;
  double prev_norm = -1.0;
  for (int it = 0; it < opts_.max_newton; ++it) {
    for (int i = 0; i < n_; ++i) ydnew_[i] = cj * y_new[i] + ydot_const[i];
    sys_.residual(t_new, y_new.data(), ydnew_.data(), g0_.data());
    ++stats_.residual_evals;
    ++stats_.newton_iters;
    int bad = -1;
    if (!all_finite(g0_, &bad)) {
      failure_message_ = "non-finite residual at " + sys_.describe_row(bad);
      return false;
    }
    for (int i = 0; i < n_; ++i) delta_[i] = -g0_[i];
    lu_.solve(delta_.data());
    if (!all_finite(delta_)) return false;
    for (int i = 0; i < n_; ++i) y_new[i] += delta_[i];
    const double norm = wrms(delta_, false);
    if (norm < opts_.newton_tol) return true;
    if (prev_norm >= 0.0 && norm > 2.0 * prev_norm) return false;
    prev_norm = norm;
  }
  return false;
}

StepStatus BdfIntegrator::advance(double t_limit) {
  const double remaining = t_limit - t_;
  if (remaining <= 1e-12 * std::max(1.0, std::fabs(t_limit)))
    return StepStatus::ReachedLimit;

  double h = std::min({h_next_, opts_.h_max, remaining});
  h = std::max(h, std::min(opts_.h_min, remaining));
  if (h > 0.75 * remaining && h < remaining) h = remaining;  // avoid slivers

  std::vector<double> ydot_const(n_);
  int consecutive_rejects = 0;

  for (int attempt = 0; attempt < 60; ++attempt) {
    if (stats_.steps >= opts_.max_steps) {
      failure_message_ = "max step count exceeded";
      return StepStatus::Failed;
    }
    const int q = (order_ == 2 && have_prev_) ? 2 : 1;
    double alpha0;
    if (q == 1) {
      alpha0 = 1.0;
      for (int i = 0; i < n_; ++i) ydot_const[i] = -y_[i] / h;
      for (int i = 0; i < n_; ++i) pred_[i] = y_[i] + h * ydot_[i];
    } else {
      const double rho = h / h_last_;
      alpha0 = (1.0 + 2.0 * rho) / (1.0 + rho);
      const double a1 = -(1.0 + rho);
      const double a2 = rho * rho / (1.0 + rho);
      for (int i = 0; i < n_; ++i)
        ydot_const[i] = (a1 * y_[i] + a2 * y_prev_[i]) / h;
      // Quadratic predictor through y_prev, y with slope ydot at t.
      const double hl = h_last_;
      for (int i = 0; i < n_; ++i) {
        const double curv = (y_prev_[i] - y_[i] + ydot_[i] * hl) / (hl * hl);
        pred_[i] = y_[i] + ydot_[i] * h + curv * h * h;
      }
    }

    const double t_new = t_ + h;
    const double cj = alpha0 / h;
    bool fresh_jac = false;
    if (!have_jac_ || cj / cj_jac_ > 2.5 || cj / cj_jac_ < 0.4) {
      for (int i = 0; i < n_; ++i) ydnew_[i] = cj * pred_[i] + ydot_const[i];
      if (!build_jacobian(t_new, pred_, ydnew_, cj)) {
        have_jac_ = false;
        h *= 0.25;
        order_ = 1;
        if (h < opts_.h_min) {
          if (failure_message_.empty())
            failure_message_ = "Jacobian build failed at step-size floor";
          return StepStatus::Failed;
        }
        continue;
      }
      fresh_jac = true;
    }

    ynew_ = pred_;
    bool ok = newton_solve(t_new, h, alpha0, ydot_const, ynew_);
    if (!ok && !fresh_jac) {
      // Retry once with a current-point iteration matrix.
      for (int i = 0; i < n_; ++i) ydnew_[i] = cj * pred_[i] + ydot_const[i];
      if (build_jacobian(t_new, pred_, ydnew_, cj)) {
        ynew_ = pred_;
        ok = newton_solve(t_new, h, alpha0, ydot_const, ynew_);
      }
    }
    if (!ok) {
      ++stats_.newton_failures;
      have_jac_ = false;
      h *= 0.25;
      order_ = 1;
      if (h < opts_.h_min) {
        if (failure_message_.empty())
          failure_message_ = "Newton failed to converge at step-size floor";
        return StepStatus::Failed;
      }
      continue;
    }

    for (int i = 0; i < n_; ++i) delta_[i] = ynew_[i] - pred_[i];
    const double err_const = q == 1 ? 0.5 : 0.3;
    const double est = err_const * wrms(delta_, true);
    if (est > 1.0) {
      ++stats_.rejected_steps;
      ++consecutive_rejects;
      double fac = 0.9 * std::pow(est, -1.0 / (q + 1));
      fac = std::clamp(fac, 0.1, 0.5);
      h *= fac;
      if (consecutive_rejects >= 3) order_ = 1;
      if (h < opts_.h_min) {
        failure_message_ = "local error test failed at step-size floor";
        return StepStatus::Failed;
      }
      continue;
    }

    // Accept.
    for (int i = 0; i < n_; ++i)
      ydnew_[i] = cj * ynew_[i] + ydot_const[i];
    y_prev_ = y_;
    y_ = ynew_;
    ydot_ = ydnew_;
    have_prev_ = true;
    h_last_ = h;
    t_ = t_new;
    ++stats_.steps;
    ++steps_at_order_;
    if (order_ == 1 && steps_at_order_ >= 2) {
      order_ = 2;
      steps_at_order_ = 0;
    }
    double fac = est > 1e-12 ? 0.9 * std::pow(est, -1.0 / (q + 1)) : 2.0;
    fac = std::clamp(fac, 0.3, 2.0);
    h_next_ = std::max(h * fac, opts_.h_min);
    return StepStatus::Ok;
  }
  failure_message_ = "step attempts exhausted";
  return StepStatus::Failed;
}

BdfIntegrator::Checkpoint BdfIntegrator::save() const {
  return Checkpoint{t_,    h_next_, h_last_, order_, steps_at_order_,
                    y_,    y_prev_, ydot_,   have_prev_};
}

void BdfIntegrator::load(const Checkpoint& c) {
  t_ = c.t;
  h_next_ = c.h_next;
  h_last_ = c.h_last;
  order_ = c.order;
  steps_at_order_ = c.steps_at_order;
  y_ = c.y;
  y_prev_ = c.y_prev;
  ydot_ = c.ydot;
  have_prev_ = c.have_prev;
  failure_message_.clear();
}

}  // namespace dfnid
