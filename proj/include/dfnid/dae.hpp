// Variable-step implicit integrator for index-1 DAEs F(t, y, y') = 0:
// backward differentiation at orders 1-2, modified Newton with a banded
// finite-difference iteration matrix, and a weighted-RMS local error test on
// the differential variables.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfnid/band.hpp"

namespace dfnid {

class DaeSystem {
 public:
  virtual ~DaeSystem() = default;
  virtual int size() const = 0;
  virtual int lower_bandwidth() const = 0;
  virtual int upper_bandwidth() const = 0;
  virtual bool differential(int i) const = 0;
  virtual void residual(double t, const double* y, const double* ydot,
                        double* f) const = 0;
  virtual std::string describe_row(int row) const {
    return "row " + std::to_string(row);
  }
};

struct DaeOptions {
  double abs_tol = 1e-6;
  double rel_tol = 1e-3;
  double h_init = 1e-3;
  double h_min = 1e-9;
  double h_max = 30.0;
  double newton_tol = 0.01;  // WRMS of the Newton update
  int max_newton = 10;
  std::int64_t max_steps = 2000000;
};

struct DaeStats {
  std::int64_t steps = 0;
  std::int64_t newton_iters = 0;
  std::int64_t rejected_steps = 0;
  std::int64_t newton_failures = 0;
  std::int64_t jacobians = 0;
  std::int64_t residual_evals = 0;
};

enum class StepStatus { Ok, ReachedLimit, Failed };

class BdfIntegrator {
 public:
  BdfIntegrator(const DaeSystem& sys, DaeOptions opts);

  // (Re)starts the integrator at (t0, y0) with zero initial slope estimate;
  // call after any discontinuity in the forcing.
  void restart(double t0, const std::vector<double>& y0);

  // Takes one accepted step with t_new <= t_limit. Returns ReachedLimit when
  // already at the limit, Failed when the step-size floor is hit without
  // Newton convergence (a diagnostic is stored in failure_message()).
  StepStatus advance(double t_limit);

  double t() const { return t_; }
  const std::vector<double>& y() const { return y_; }
  const DaeStats& stats() const { return stats_; }
  const std::string& failure_message() const { return failure_message_; }

  // Snapshot/rollback support for event localization.
  struct Checkpoint {
    double t, h_next, h_last;
    int order, steps_at_order;
    std::vector<double> y, y_prev, ydot;
    bool have_prev;
  };
  Checkpoint save() const;
  void load(const Checkpoint& c);

 private:
  double wrms(const std::vector<double>& v, bool differential_only) const;
  bool build_jacobian(double t, const std::vector<double>& y,
                      const std::vector<double>& ydot, double cj);
  // Newton solve of the BDF equations; returns true on convergence.
  bool newton_solve(double t_new, double h, double alpha0,
                    const std::vector<double>& ydot_const,
                    std::vector<double>& y_new);

  const DaeSystem& sys_;
  DaeOptions opts_;
  int n_;
  BandedLu lu_;
  double cj_jac_ = 0.0;  // alpha0/h at the time the iteration matrix was built
  bool have_jac_ = false;

  double t_ = 0.0;
  std::vector<double> y_, y_prev_, ydot_;
  bool have_prev_ = false;
  double h_next_ = 0.0, h_last_ = 0.0;
  int order_ = 1;
  int steps_at_order_ = 0;
  DaeStats stats_;
  std::string failure_message_;

  // scratch
  std::vector<double> g0_, g1_, yp_, ydp_, delta_, ynew_, ydnew_, pred_;
};

}  // namespace dfnid
