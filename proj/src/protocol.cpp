#include "dfnid/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfnid/log.hpp"

namespace dfnid {

Protocol Protocol::cc_discharge(double c_rate, double v_cut, double t_max) {
  ProtocolSegment seg;
  seg.c_rate = c_rate;
  seg.stop.v_min = v_cut;
  seg.stop.t_max = t_max;
  return Protocol{{seg}, 1.0};
}

Protocol Protocol::rest(double duration_s) {
  ProtocolSegment seg;
  seg.current_a = 0.0;
  seg.stop.t_max = duration_s;
  return Protocol{{seg}, 1.0};
}

void Protocol::validate() const {
  if (segments.empty())
    throw std::invalid_argument("Protocol: no segments");
  if (!(initial_soc >= 0.0 && initial_soc <= 1.0))
    throw std::invalid_argument("Protocol: initial_soc outside [0,1]");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& st = segments[i].stop;
    if (!st.v_min && !st.v_max && !st.t_max && !st.capacity_ah)
      throw std::invalid_argument("Protocol: segment " + std::to_string(i) +
                                  " has no stop condition");
  }
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::VoltageMin: return "voltage_min";
    case Termination::VoltageMax: return "voltage_max";
    case Termination::TimeLimit: return "time_limit";
    case Termination::CapacityLimit: return "capacity_limit";
    case Termination::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

double interp_series(const std::vector<double>& ts,
                     const std::vector<double>& vs, double t) {
  if (ts.empty()) throw std::invalid_argument("interp_series: empty series");
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return vs[lo] * (1.0 - w) + vs[hi] * w;
}

double SimulationResult::voltage_at(double t) const {
  return interp_series(t_s, voltage_v, t);
}

namespace {

// DAE view with differential variables pinned; solving it yields fluxes and
// potentials consistent with the frozen concentrations.
class AlgebraicView final : public DaeSystem {
 public:
  AlgebraicView(const DfnSystem& inner, const std::vector<double>& frozen)
      : inner_(inner), frozen_(frozen), zeros_(inner.size(), 0.0) {}
  int size() const override { return inner_.size(); }
  int lower_bandwidth() const override { return inner_.lower_bandwidth(); }
  int upper_bandwidth() const override { return inner_.upper_bandwidth(); }
  bool differential(int) const override { return false; }
  void residual(double t, const double* y, const double* /*ydot*/,
                double* f) const override {
    inner_.residual(t, y, zeros_.data(), f);
    for (int i = 0; i < inner_.size(); ++i)
      if (inner_.differential(i)) f[i] = y[i] - frozen_[i];
  }
  std::string describe_row(int row) const override {
    return inner_.describe_row(row);
  }

 private:
  const DfnSystem& inner_;
  const std::vector<double>& frozen_;
  std::vector<double> zeros_;
};

}  // namespace

namespace {

bool algebraic_newton(const DfnSystem& sys, CellState& state) {
  const AlgebraicView view(sys, state.y);
  const int n = sys.size();
  const int kl = sys.lower_bandwidth(), ku = sys.upper_bandwidth();
  const int stride = kl + ku + 1;
  BandedLu lu(n, kl, ku);
  std::vector<double> y = state.y, g0(n), g1(n), yp(n), ytry(n), dels(n, 0.0);

  auto residual_norm = [&](const std::vector<double>& yy, std::vector<double>& out) {
    view.residual(0.0, yy.data(), nullptr, out.data());
    double rmax = 0.0;
    for (double v : out) rmax = std::max(rmax, std::fabs(v));
    return rmax;
  };

  double rmax = residual_norm(y, g0);
  for (int newton = 0; newton < 40; ++newton) {
    if (!std::isfinite(rmax)) return false;
    // Scaled rows are O(1..40); the finite-difference Jacobian noise floor
    // sits near 1e-8, so 1e-7 is converged for every consumer downstream.
    if (rmax < 1e-7) {
      state.y = y;
      return true;
    }
    lu.zero();
    yp = y;
    for (int s = 0; s < stride; ++s) {
      for (int c = s; c < n; c += stride) {
        dels[c] = 1e-7 * (1.0 + std::fabs(y[c]));
        yp[c] += dels[c];
      }
      view.residual(0.0, yp.data(), nullptr, g1.data());
      for (int c = s; c < n; c += stride) {
        const int r_lo = std::max(0, c - ku);
        const int r_hi = std::min(n - 1, c + kl);
        for (int r = r_lo; r <= r_hi; ++r)
          lu.entry(r, c) = (g1[r] - g0[r]) / dels[c];
        yp[c] = y[c];
      }
    }
    if (!lu.factor()) return false;
    for (int i = 0; i < n; ++i) g0[i] = -g0[i];
    lu.solve(g0.data());

    // Backtracking keeps the hyperbolic-sine kinetics from overshooting at
    // high current.
    double lambda = 1.0;
    double rmax_new = 0.0;
    for (int bt = 0; bt < 7; ++bt) {
      for (int i = 0; i < n; ++i) ytry[i] = y[i] + lambda * g0[i];
      rmax_new = residual_norm(ytry, g1);
      if (std::isfinite(rmax_new) && rmax_new < std::max(1.5 * rmax, 1e-7))
        break;
      lambda *= 0.5;
    }
    double dmax = 0.0;
    for (int i = 0; i < n; ++i)
      dmax = std::max(dmax, std::fabs(lambda * g0[i]) / (1.0 + std::fabs(ytry[i])));
    y.swap(ytry);
    g0.swap(g1);
    rmax = rmax_new;
    if (dmax < 1e-11 && std::isfinite(rmax) && rmax < 1e-6) {
      state.y = y;
      return true;
    }
  }
  return false;
}

}  // namespace

bool solve_consistent_algebraic(DfnSystem& sys, CellState& state) {
  CellState work = state;
  if (algebraic_newton(sys, work)) {
    state = work;
    return true;
  }
  // Continuation in the applied current for hard cold starts.
  const double target = sys.current_area() * sys.materials().params.plate_area;
  work = state;
  bool ok = true;
  for (double frac : {0.25, 0.5, 0.75, 1.0}) {
    sys.set_current(target * frac);
    if (!algebraic_newton(sys, work)) {
      ok = false;
      break;
    }
  }
  sys.set_current(target);
  if (ok) state = work;
  return ok;
}

SimulationResult simulate_protocol(const Materials& mat, const Protocol& proto,
                                   const SimOptions& opts) {
  proto.validate();
  DfnSystem sys(mat, Grid::make(mat.params, opts.n_x, opts.n_r));
  const double cap_ah = mat.params.capacity_ah();

  SimulationResult res;
  CellState state = sys.initialize(proto.initial_soc);
  BdfIntegrator integ(sys, opts.dae);
  double t_global = 0.0;

  for (const auto& seg : proto.segments) {
    const double amps = seg.c_rate ? *seg.c_rate * cap_ah : seg.current_a;
    sys.set_current(amps);
    state.time = t_global;
    if (!solve_consistent_algebraic(sys, state)) {
      res.failed = true;
      res.termination = Termination::SolverFailure;
      res.failure_message = "consistent initialization failed";
      return res;
    }

    const double rate_equiv = cap_ah > 0 ? std::fabs(amps) / cap_ah : 0.0;
    double cadence = opts.output_dt;
    if (cadence <= 0.0) cadence = rate_equiv >= 0.999 ? 1.0 : 5.0;

    DaeOptions dae = opts.dae;
    // Slow discharges tolerate proportionally longer steps; rests longer
    // still. Local error control still shrinks steps near knees.
    const double h_scale =
        amps == 0.0 ? 20.0
                    : std::min(5.0, std::max(1.0, 1.0 / std::max(rate_equiv, 1e-6)));
    dae.h_max = opts.dae.h_max * h_scale;
    BdfIntegrator bdf(sys, dae);
    bdf.restart(t_global, state.y);

    // Raw accepted-step series for this segment.
    std::vector<double> rt, rv, rsoc;
    auto record = [&](double t, const std::vector<double>& y) {
      CellState st{y, t, sys.temperature()};
      rt.push_back(t);
      rv.push_back(sys.terminal_voltage(st));
      rsoc.push_back(sys.mean_anode_soc(st));
    };
    record(t_global, state.y);

    Termination term = Termination::TimeLimit;
    double t_end = t_global + (seg.stop.t_max ? *seg.stop.t_max : 4e7);
    bool capacity_binding = false;
    if (seg.stop.capacity_ah && std::fabs(amps) > 0) {
      const double t_cap = t_global + *seg.stop.capacity_ah / (std::fabs(amps) / 3600.0);
      if (t_cap < t_end) {
        t_end = t_cap;
        capacity_binding = true;
      }
    }

    const double v_lo = seg.stop.v_min ? *seg.stop.v_min : -1e30;
    const double v_hi = seg.stop.v_max ? *seg.stop.v_max : 1e30;
    if (rv.back() <= v_lo) term = Termination::VoltageMin;
    if (rv.back() >= v_hi) term = Termination::VoltageMax;

    bool done = term != Termination::TimeLimit;
    bool solver_failed = false;
    while (!done) {
      const auto chk = bdf.save();
      const double v_before = rv.back();
      const StepStatus st = bdf.advance(t_end);
      if (st == StepStatus::ReachedLimit) {
        term = capacity_binding ? Termination::CapacityLimit
                                : Termination::TimeLimit;
        break;
      }
      if (st == StepStatus::Failed) {
        solver_failed = true;
        res.failure_message = bdf.failure_message();
        break;
      }
      record(bdf.t(), bdf.y());
      const double v_now = rv.back();
      const bool cross_lo = v_now < v_lo && v_before >= v_lo;
      const bool cross_hi = v_now > v_hi && v_before <= v_hi;
      if (cross_lo || cross_hi) {
        const double v_cut = cross_lo ? v_lo : v_hi;
        // Secant localization of the crossing time within the last step.
        double t_lo_b = chk.t, v_lo_b = v_before;
        double t_hi_b = bdf.t(), v_hi_b = v_now;
        double t_ev = bdf.t(), v_ev = v_now;
        for (int it = 0; it < 30 && std::fabs(v_ev - v_cut) > 2e-4; ++it) {
          double cand = t_lo_b + (v_cut - v_lo_b) * (t_hi_b - t_lo_b) /
                                     (v_hi_b - v_lo_b);
          const double margin = 0.02 * (t_hi_b - t_lo_b);
          cand = std::clamp(cand, t_lo_b + margin, t_hi_b - margin);
          if (!(t_hi_b - t_lo_b > 1e-6)) break;
          bdf.load(chk);
          bool fail = false;
          while (bdf.t() < cand) {
            const StepStatus s2 = bdf.advance(cand);
            if (s2 == StepStatus::ReachedLimit) break;
            if (s2 == StepStatus::Failed) {
              fail = true;
              break;
            }
          }
          if (fail) break;
          CellState tmp{bdf.y(), bdf.t(), sys.temperature()};
          t_ev = bdf.t();
          v_ev = sys.terminal_voltage(tmp);
          if ((v_ev > v_cut) == (v_lo_b > v_cut)) {
            t_lo_b = t_ev;
            v_lo_b = v_ev;
          } else {
            t_hi_b = t_ev;
            v_hi_b = v_ev;
          }
        }
        while (!rt.empty() && rt.back() > t_ev) {
          rt.pop_back();
          rv.pop_back();
          rsoc.pop_back();
        }
        record(bdf.t(), bdf.y());
        term = cross_lo ? Termination::VoltageMin : Termination::VoltageMax;
        done = true;
      }
    }

    if (opts.record_states)
      res.snapshots.push_back(CellState{bdf.y(), bdf.t(), sys.temperature()});

    // Resample onto the output cadence, keeping the exact final point.
    const double t0 = t_global, t1 = bdf.t();
    for (double tq = t0 + (res.t_s.empty() ? 0.0 : cadence); tq < t1 + 1e-9;
         tq += cadence) {
      if (tq > t1) break;
      res.t_s.push_back(tq);
      res.current_a.push_back(amps);
      res.voltage_v.push_back(interp_series(rt, rv, tq));
      res.soc.push_back(interp_series(rt, rsoc, tq));
    }
    if (res.t_s.empty() || t1 - res.t_s.back() > 1e-9) {
      res.t_s.push_back(t1);
      res.current_a.push_back(amps);
      res.voltage_v.push_back(rv.back());
      res.soc.push_back(rsoc.back());
    }

    if (amps > 0.0)
      res.discharged_capacity_ah += amps * (t1 - t0) / 3600.0;

    const auto& st = bdf.stats();
    res.stats.steps += st.steps;
    res.stats.newton_iters += st.newton_iters;
    res.stats.rejected_steps += st.rejected_steps;
    res.stats.newton_failures += st.newton_failures;
    res.stats.jacobians += st.jacobians;
    res.stats.residual_evals += st.residual_evals;

    state.y = bdf.y();
    t_global = bdf.t();
    res.termination = term;
    if (solver_failed) {
      res.failed = true;
      res.termination = Termination::SolverFailure;
      break;
    }
  }
  res.bv_clamp_events = sys.clamp_events();
  return res;
}

}  // namespace dfnid
