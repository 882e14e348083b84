// Empirical material properties and the static cell parameter set for the
// NCA / silicon-doped-graphite cell: electrolyte transport surfaces,
// electrode open-circuit voltages, Arrhenius corrections and derived
// effective quantities.
#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace dfnid {

// Regressed transport/kinetic vector theta. Diffusivities in m^2/s, rate
// constants in m^2.5/(mol^0.5 s).
struct RegressedParams {
  double d_s_p = 8.716e-14;
  double d_s_n = 1.018e-13;
  double k_p = 4.438e-10;
  double k_n = 6.837e-12;
};

struct ElectrodeParams {
  double thickness = 0.0;        // m
  double porosity = 0.0;         // electrolyte volume fraction
  double active_frac = 0.0;      // solid active-material volume fraction
  double particle_radius = 0.0;  // m
  double c_s_max = 0.0;          // mol/m^3
  double sigma = 0.0;            // S/m, effective scale as tabulated
  double ea_ds = 0.0;            // J/mol
  double ea_k = 0.0;             // J/mol
  double theta_full = 0.0;       // stoichiometry at 100% SOC
  double theta_empty = 0.0;      // stoichiometry at 0% SOC
};

struct SeparatorParams {
  double thickness = 0.0;
  double porosity = 0.0;
};

struct CellParameters {
  ElectrodeParams anode;
  ElectrodeParams cathode;
  SeparatorParams separator;
  double c_e_init = 1200.0;  // mol/m^3
  double brugg = 1.5;
  double t_plus = 0.455;
  double t_amb = 298.15;       // K
  double faraday = 96485.0;    // C/mol
  double gas_const = 8.314472; // J/(mol K)
  RegressedParams theta;

  // Cell-level configuration. The paper's source does not state plate area
  // or cutoffs; defaults give a ~4.85 Ah cell over 2.5-4.2 V.
  double plate_area = 0.1;        // m^2
  double v_cut_discharge = 2.5;   // V
  double v_cut_charge = 4.2;      // V
  double nominal_capacity_ah = 0.0;  // 0 => anode-window theoretical capacity

  static CellParameters nca_defaults();

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // F * eps_s * l * c_s_max * dTheta per plate area, in coulombs.
  double anode_window_capacity_c() const;
  double cathode_window_capacity_c() const;
  double capacity_ah() const;  // nominal_capacity_ah or anode window
};

// Bivariate polynomial sum_ij a_ij ce^i T^j. Inputs outside the declared
// domain are clamped to the boundary; clamp events feed a shared counter so
// the DAE solver never extrapolates a high-order fit.
class PolynomialSurface {
 public:
  PolynomialSurface(std::vector<std::vector<double>> coeffs, double ce_lo,
                    double ce_hi, double t_lo, double t_hi, std::string name);

  double operator()(double c_e, double temp) const;  // clamping evaluation
  // Contract evaluation: throws std::out_of_range identifying the input.
  double eval_checked(double c_e, double temp) const;

  std::uint64_t clamp_count() const { return clamp_events_.load(); }
  const std::string& name() const { return name_; }
  double ce_lo() const { return ce_lo_; }
  double ce_hi() const { return ce_hi_; }
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }

 private:
  std::vector<std::vector<double>> a_;  // a_[i][j]
  double ce_lo_, ce_hi_, t_lo_, t_hi_;
  std::string name_;
  mutable std::atomic<std::uint64_t> clamp_events_{0};
};

enum class ElectrodeTag { Anode, Cathode };

// Empirical OCV fit. Anode: a0 + a1 exp((x-b1)/c1) + sum a_i tanh((x-b_i)/c_i);
// cathode: sum of Gaussians a_i exp(-((x-b_i)/c_i)^2).
class OcvCurve {
 public:
  static OcvCurve anode_nca(bool include_fifth_tanh = true);
  static OcvCurve cathode_nca();

  double operator()(double theta) const;     // theta in (0,1), throws outside
  ElectrodeTag tag() const { return tag_; }

  // Numerically verifies the anode fit is non-increasing on
  // [theta_lo, theta_hi] within tol_v of local violation.
  bool monotone_non_increasing(double theta_lo, double theta_hi,
                               double tol_v = 1e-3, int samples = 4096) const;

 private:
  OcvCurve(ElectrodeTag tag, std::vector<std::array<double, 3>> abc,
           double a0, bool anode_form);
  ElectrodeTag tag_;
  std::vector<std::array<double, 3>> abc_;  // (a_i, b_i, c_i)
  double a0_ = 0.0;
  bool anode_form_ = false;
};

// Default property tables for the NCA cell.
const PolynomialSurface& electrolyte_conductivity_surface();
const PolynomialSurface& electrolyte_diffusivity_surface();

// Eq.-level operations (strict domain contracts).
double electrolyte_conductivity(double c_e, double temp);  // S/m
double electrolyte_diffusivity(double c_e, double temp);   // m^2/s
double ocv_anode(double theta_n);                          // V
double ocv_cathode(double theta_p);                        // V

// value_ref * exp(-(Ea/R)(1/T - 1/T_ref)); identity at T == T_ref.
double arrhenius_scale(double value_ref, double ea, double temp, double t_ref,
                       double gas_const = 8.314472);

struct EffectiveQuantities {
  double d_e_n, d_e_s, d_e_p;        // electrolyte diffusivity * eps^brugg
  double kappa_n, kappa_s, kappa_p;  // electrolyte conductivity * eps^brugg
  double a_n, a_p;                   // 3 eps_s / R_p, 1/m
  double d_s_n, d_s_p;               // Arrhenius-scaled solid diffusivities
  double k_n, k_p;                   // Arrhenius-scaled rate constants
};

EffectiveQuantities effective_quantities(const CellParameters& p, double c_e,
                                         double temp);

struct Stoichiometry {
  double theta_n;
  double theta_p;
};

// Affine map between SOC in [0,1] and the Table-1 stoichiometry windows.
// Anode theta rises with SOC, cathode theta falls.
Stoichiometry soc_to_stoichiometry(double soc, const CellParameters& p);

// Capacity fade at a given state of health: shrinks the anode stoichiometry
// window symmetrically about its center so the theoretical capacity scales
// by `soh`. The nominal capacity used for C-rate conversion is pinned to the
// pristine value first, so rate tags keep their meaning across life.
CellParameters apply_soh_window(const CellParameters& p, double soh);

// Bundle handed to the solver; immutable after construction and safe to
// share across concurrent workers.
struct Materials {
  CellParameters params;
  OcvCurve ocv_n;
  OcvCurve ocv_p;

  static Materials nca_defaults(bool anode_fifth_tanh = true);
};

}  // namespace dfnid
