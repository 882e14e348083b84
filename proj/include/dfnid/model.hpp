// DFN cell model: state layout, implicit-DAE residual assembly on the FVM
// grid, and the physical observables (terminal voltage, lithium inventory,
// per-electrode interfacial current).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfnid/dae.hpp"
#include "dfnid/grid.hpp"
#include "dfnid/materials.hpp"

namespace dfnid {

// Discretized cell state. `y` is the solver-scaled vector (concentrations
// normalized by their maxima, potentials in volts); DfnSystem's accessors
// translate to physical units.
struct CellState {
  std::vector<double> y;
  double time = 0.0;
  double temp = 298.15;
};

// Interfacial flux from Butler-Volmer kinetics, mol/(m^2 s). Throws
// std::domain_error when the surface concentration is at or beyond its
// bounds; the solver clamps before calling.
double butler_volmer_flux(double c_e, double c_s_surf, double c_s_max,
                          double k_eff, double eta, double temp,
                          double faraday = 96485.0,
                          double gas_const = 8.314472);

class DfnSystem final : public DaeSystem {
 public:
  DfnSystem(const Materials& mat, Grid grid);

  // DaeSystem interface (scaled units).
  int size() const override { return n_states_; }
  int lower_bandwidth() const override { return kl_; }
  int upper_bandwidth() const override { return ku_; }
  bool differential(int i) const override { return differential_[i]; }
  void residual(double t, const double* y, const double* ydot,
                double* f) const override;

  // Applied current, amps; discharge positive. Applied per area through the
  // solid-potential boundary faces.
  void set_current(double amps) { i_area_ = amps / mat_.params.plate_area; }
  double current_area() const { return i_area_; }

  // Uniform-concentration equilibrium at the given SOC, consistent with zero
  // current: j = 0, phi_e = 0, phi_s = U(theta).
  CellState initialize(double soc) const;

  // Observables.
  double terminal_voltage(const CellState& s) const;
  double solid_moles(const CellState& s) const;
  double electrolyte_moles(const CellState& s) const;
  // Sum of a F j dV over one electrode (amps); 0 = anode, 1 = cathode.
  double interfacial_current(const CellState& s, int electrode) const;
  double mean_anode_soc(const CellState& s) const;

  // Physical-unit state access.
  double c_s(const CellState& s, int electrode, int cv, int shell) const;
  double c_s_surface(const CellState& s, int electrode, int cv) const;
  double c_e(const CellState& s, int cv) const;       // cv in [0, 3*n_x)
  double phi_s(const CellState& s, int electrode, int cv) const;
  double phi_e(const CellState& s, int cv) const;
  double flux_j(const CellState& s, int electrode, int cv) const;

  // Index layout (also used by tests).
  int idx_cs(int electrode, int cv, int shell) const;
  int idx_j(int electrode, int cv) const;
  int idx_ce(int cv) const;                            // global CV index
  int idx_phis(int electrode, int cv) const;
  int idx_phie(int cv) const;

  const Grid& grid() const { return grid_; }
  const Materials& materials() const { return mat_; }
  double temperature() const { return temp_; }
  std::uint64_t clamp_events() const { return clamp_events_; }

  // Names the equation block and control volume for a residual row;
  // used in non-finite diagnostics.
  std::string describe_row(int row) const;

  static constexpr double kJScale = 1e-5;  // mol/(m^2 s)

 private:
  Materials mat_;
  Grid grid_;
  double temp_;
  double i_area_ = 0.0;

  int n_states_ = 0;
  int kl_ = 0, ku_ = 0;
  std::vector<bool> differential_;
  std::vector<int> block_base_;  // per x CV

  // Cached per-electrode effective constants at the (isothermal) cell
  // temperature.
  double d_s_eff_[2], k_eff_[2], a_surf_[2], sigma_eff_[2], c_max_[2];
  double eps_[3], brugg_porosity_[3];
  double phis_scale_[2], phie_scale_;
  mutable std::uint64_t clamp_events_ = 0;
};

}  // namespace dfnid
