// Discharge-protocol execution: constant-current segments with voltage,
// time, and capacity stops, producing cadence-sampled voltage series.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfnid/dae.hpp"
#include "dfnid/model.hpp"

namespace dfnid {

struct StopConditions {
  std::optional<double> v_min;        // V
  std::optional<double> v_max;        // V
  std::optional<double> t_max;        // s, relative to segment start
  std::optional<double> capacity_ah;  // Ah transferred within the segment
};

struct ProtocolSegment {
  // Applied current, discharge positive. If c_rate is set it wins and the
  // current is c_rate * nominal capacity.
  double current_a = 0.0;
  std::optional<double> c_rate;
  StopConditions stop;
};

struct Protocol {
  std::vector<ProtocolSegment> segments;
  double initial_soc = 1.0;

  static Protocol cc_discharge(double c_rate, double v_cut,
                               double t_max = 86400.0);
  static Protocol rest(double duration_s);
  void validate() const;  // every segment needs at least one stop
};

enum class Termination {
  VoltageMin,
  VoltageMax,
  TimeLimit,
  CapacityLimit,
  SolverFailure,
};

std::string to_string(Termination t);

struct SimOptions {
  int n_x = 10;
  int n_r = 10;
  DaeOptions dae;
  double output_dt = 0.0;  // 0 => 1 s at >= 1C, 5 s below
  bool record_states = false;
};

struct SimulationResult {
  std::vector<double> t_s, current_a, voltage_v, soc;
  Termination termination = Termination::TimeLimit;
  bool failed = false;
  std::string failure_message;
  double discharged_capacity_ah = 0.0;
  DaeStats stats;
  std::uint64_t bv_clamp_events = 0;
  std::vector<CellState> snapshots;

  // Linear interpolation of the voltage series; clamps outside the range.
  double voltage_at(double t) const;
  double end_time() const { return t_s.empty() ? 0.0 : t_s.back(); }
};

// Solves the algebraic subsystem (fluxes and potentials) with concentrations
// frozen; used at segment starts where the forcing is discontinuous. May
// temporarily ramp the applied current for hard cold starts (restored on
// return).
bool solve_consistent_algebraic(DfnSystem& sys, CellState& state);

SimulationResult simulate_protocol(const Materials& mat, const Protocol& proto,
                                   const SimOptions& opts = {});

double interp_series(const std::vector<double>& ts,
                     const std::vector<double>& vs, double t);

}  // namespace dfnid
