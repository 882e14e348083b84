#include "dfnid/materials.hpp"

#include <cmath>
#include <stdexcept>

namespace dfnid {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("CellParameters: ") + what);
}

// Electrolyte conductivity response-surface coefficients, S/m with c_e in
// mol/m^3 and T in K. The (0,1) entry is 1.696e-3; the tabulated magnitude
// otherwise yields ~5e5 S/m, five orders beyond any carbonate electrolyte.
const std::vector<std::vector<double>> kKappaCoeffs = {
    {-5.182e-1, 1.696e-3},
    {-6.518e-3, 3.034e-5},
    {1.446e-6, -1.049e-8},
    {3.047e-10, 0.0},
};

// Electrolyte diffusivity surface, m^2/s.
const std::vector<std::vector<double>> kDiffCoeffs = {
    {1.864e-8, -1.392e-10, 2.633e-13},
    {0.0, 3.133e-14, -1.126e-16},
    {0.0, -7.301e-17, 2.615e-19},
    {0.0, 5.120e-20, -1.832e-22},
    {0.0, -1.151e-23, 4.111e-26},
};

constexpr double kSurfCeLo = 50.0, kSurfCeHi = 3500.0;
constexpr double kSurfTLo = 273.0, kSurfTHi = 333.0;

}  // namespace

CellParameters CellParameters::nca_defaults() {
  CellParameters p;
  p.anode.thickness = 8.3e-5;
  p.anode.porosity = 0.147;
  p.anode.active_frac = 0.828;
  p.anode.particle_radius = 1.6e-5;
  p.anode.c_s_max = 28967.0;
  p.anode.sigma = 100.0;
  p.anode.ea_ds = 5000.0;
  p.anode.ea_k = 5000.0;
  p.anode.theta_full = 0.923;
  p.anode.theta_empty = 0.014;

  p.cathode.thickness = 6.4e-5;
  p.cathode.porosity = 0.230;
  p.cathode.active_frac = 0.745;
  p.cathode.particle_radius = 1.1e-5;
  p.cathode.c_s_max = 54422.0;
  p.cathode.sigma = 100.0;
  p.cathode.ea_ds = 5000.0;
  p.cathode.ea_k = 5000.0;
  p.cathode.theta_full = 0.160;
  p.cathode.theta_empty = 0.859;

  p.separator.thickness = 1.0e-5;
  p.separator.porosity = 0.359;
  return p;
}

void CellParameters::validate() const {
  require(anode.thickness > 0 && cathode.thickness > 0 && separator.thickness > 0,
          "thicknesses must be positive");
  require(anode.particle_radius > 0 && cathode.particle_radius > 0,
          "particle radii must be positive");
  require(anode.c_s_max > 0 && cathode.c_s_max > 0 && c_e_init > 0,
          "concentrations must be positive");
  require(anode.sigma > 0 && cathode.sigma > 0, "conductivities must be positive");
  for (const ElectrodeParams* e : {&anode, &cathode}) {
    require(e->porosity > 0 && e->porosity < 1, "porosity must be in (0,1)");
    require(e->active_frac > 0 && e->active_frac < 1,
            "active fraction must be in (0,1)");
    require(e->porosity + e->active_frac <= 1.0,
            "porosity + active fraction must not exceed 1");
  }
  require(separator.porosity > 0 && separator.porosity < 1,
          "separator porosity must be in (0,1)");
  require(t_plus > 0 && t_plus < 1, "transference number must be in (0,1)");
  require(anode.theta_empty >= 0 && anode.theta_empty < anode.theta_full &&
              anode.theta_full <= 1,
          "anode stoichiometry window must satisfy 0 <= empty < full <= 1");
  require(cathode.theta_full >= 0 && cathode.theta_full < cathode.theta_empty &&
              cathode.theta_empty <= 1,
          "cathode stoichiometry window must satisfy 0 <= full < empty <= 1");
  require(theta.d_s_p > 0 && theta.d_s_n > 0 && theta.k_p > 0 && theta.k_n > 0,
          "regressed parameters must be positive");
  require(plate_area > 0, "plate area must be positive");
  require(t_amb > 0, "ambient temperature must be positive");
}

double CellParameters::anode_window_capacity_c() const {
  return faraday * anode.active_frac * anode.thickness * anode.c_s_max *
         (anode.theta_full - anode.theta_empty) * plate_area;
}

double CellParameters::cathode_window_capacity_c() const {
  return faraday * cathode.active_frac * cathode.thickness * cathode.c_s_max *
         (cathode.theta_empty - cathode.theta_full) * plate_area;
}

double CellParameters::capacity_ah() const {
  if (nominal_capacity_ah > 0.0) return nominal_capacity_ah;
  return anode_window_capacity_c() / 3600.0;
}

PolynomialSurface::PolynomialSurface(std::vector<std::vector<double>> coeffs,
                                     double ce_lo, double ce_hi, double t_lo,
                                     double t_hi, std::string name)
    : a_(std::move(coeffs)), ce_lo_(ce_lo), ce_hi_(ce_hi), t_lo_(t_lo),
      t_hi_(t_hi), name_(std::move(name)) {}

double PolynomialSurface::operator()(double c_e, double temp) const {
  if (c_e < ce_lo_ || c_e > ce_hi_ || temp < t_lo_ || temp > t_hi_) {
    clamp_events_.fetch_add(1, std::memory_order_relaxed);
    c_e = std::min(std::max(c_e, ce_lo_), ce_hi_);
    temp = std::min(std::max(temp, t_lo_), t_hi_);
  }
  // Horner in c_e for each power of T.
  double out = 0.0;
  double tj = 1.0;
  const std::size_t jmax = a_.empty() ? 0 : a_[0].size();
  for (std::size_t j = 0; j < jmax; ++j) {
    double acc = 0.0;
    for (std::size_t i = a_.size(); i-- > 0;) acc = acc * c_e + a_[i][j];
    out += acc * tj;
    tj *= temp;
  }
  return out;
}

double PolynomialSurface::eval_checked(double c_e, double temp) const {
  if (c_e < ce_lo_ || c_e > ce_hi_)
    throw std::out_of_range(name_ + ": c_e=" + std::to_string(c_e) +
                            " outside [" + std::to_string(ce_lo_) + ", " +
                            std::to_string(ce_hi_) + "] mol/m^3");
  if (temp < t_lo_ || temp > t_hi_)
    throw std::out_of_range(name_ + ": T=" + std::to_string(temp) +
                            " outside [" + std::to_string(t_lo_) + ", " +
                            std::to_string(t_hi_) + "] K");
  return (*this)(c_e, temp);
}

const PolynomialSurface& electrolyte_conductivity_surface() {
  static const PolynomialSurface surf(kKappaCoeffs, kSurfCeLo, kSurfCeHi,
                                      kSurfTLo, kSurfTHi,
                                      "electrolyte_conductivity");
  return surf;
}

const PolynomialSurface& electrolyte_diffusivity_surface() {
  static const PolynomialSurface surf(kDiffCoeffs, kSurfCeLo, kSurfCeHi,
                                      kSurfTLo, kSurfTHi,
                                      "electrolyte_diffusivity");
  return surf;
}

double electrolyte_conductivity(double c_e, double temp) {
  return electrolyte_conductivity_surface().eval_checked(c_e, temp);
}

double electrolyte_diffusivity(double c_e, double temp) {
  return electrolyte_diffusivity_surface().eval_checked(c_e, temp);
}

OcvCurve::OcvCurve(ElectrodeTag tag, std::vector<std::array<double, 3>> abc,
                   double a0, bool anode_form)
    : tag_(tag), abc_(std::move(abc)), a0_(a0), anode_form_(anode_form) {}

OcvCurve OcvCurve::anode_nca(bool include_fifth_tanh) {
  // (a_i, b_i, c_i); row 0 is the exponential term, rows 1.. are tanh terms.
  std::vector<std::array<double, 3>> abc = {
      {29.98, 5.700e-3, -5.093e-2},
      {161.9, -1.057e-1, 9.687e-2},
      {-2.833e-1, 4.447e-2, 4.235e-2},
      {-47.77, -18.95, 7.041},
  };
  // The printed sum stops at the fourth tanh row, but the curve is then
  // offset by ~65 V; the fifth tabulated row restores the physical
  // 0.09-0.94 V graphite range and is included by default.
  if (include_fifth_tanh) abc.push_back({-65.06, 2.268e-3, 1.160e-3});
  return OcvCurve(ElectrodeTag::Anode, std::move(abc), -48.99, true);
}

OcvCurve OcvCurve::cathode_nca() {
  std::vector<std::array<double, 3>> abc = {
      {1.456e-1, 7.961e-1, 6.035e-2}, {4.205e-1, 9.489e-1, 4.229e-2},
      {1.008, 6.463e-1, 1.034e-1},    {1.350, 7.378e-1, 9.513e-2},
      {2.526, 2.953e-1, 2.019e-1},    {2.636, 5.372e-1, 1.758e-1},
      {3.285, 8.922, 1.414e-1},       {172.1, -1.344, 7.371e-1},
  };
  return OcvCurve(ElectrodeTag::Cathode, std::move(abc), 0.0, false);
}

double OcvCurve::operator()(double theta) const {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::out_of_range("OcvCurve: stoichiometry " + std::to_string(theta) +
                            " outside (0,1)");
  double u = a0_;
  if (anode_form_) {
    u += abc_[0][0] * std::exp((theta - abc_[0][1]) / abc_[0][2]);
    for (std::size_t i = 1; i < abc_.size(); ++i)
      u += abc_[i][0] * std::tanh((theta - abc_[i][1]) / abc_[i][2]);
  } else {
    for (const auto& t : abc_) {
      const double z = (theta - t[1]) / t[2];
      u += t[0] * std::exp(-z * z);
    }
  }
  return u;
}

bool OcvCurve::monotone_non_increasing(double theta_lo, double theta_hi,
                                       double tol_v, int samples) const {
  double prev = (*this)(theta_lo);
  for (int i = 1; i <= samples; ++i) {
    const double th = theta_lo + (theta_hi - theta_lo) * i / samples;
    const double u = (*this)(th);
    if (u > prev + tol_v) return false;
    prev = u;
  }
  return true;
}

double ocv_anode(double theta_n) {
  static const OcvCurve curve = OcvCurve::anode_nca(true);
  return curve(theta_n);
}

double ocv_cathode(double theta_p) {
  static const OcvCurve curve = OcvCurve::cathode_nca();
  return curve(theta_p);
}

double arrhenius_scale(double value_ref, double ea, double temp, double t_ref,
                       double gas_const) {
  if (!(temp > 0.0) || !(t_ref > 0.0))
    throw std::invalid_argument("arrhenius_scale: temperatures must be positive");
  return value_ref * std::exp(-(ea / gas_const) * (1.0 / temp - 1.0 / t_ref));
}

EffectiveQuantities effective_quantities(const CellParameters& p, double c_e,
                                         double temp) {
  const auto& kappa = electrolyte_conductivity_surface();
  const auto& diff = electrolyte_diffusivity_surface();
  const double d = diff(c_e, temp);
  const double k = kappa(c_e, temp);
  EffectiveQuantities q{};
  q.d_e_n = d * std::pow(p.anode.porosity, p.brugg);
  q.d_e_s = d * std::pow(p.separator.porosity, p.brugg);
  q.d_e_p = d * std::pow(p.cathode.porosity, p.brugg);
  q.kappa_n = k * std::pow(p.anode.porosity, p.brugg);
  q.kappa_s = k * std::pow(p.separator.porosity, p.brugg);
  q.kappa_p = k * std::pow(p.cathode.porosity, p.brugg);
  q.a_n = 3.0 * p.anode.active_frac / p.anode.particle_radius;
  q.a_p = 3.0 * p.cathode.active_frac / p.cathode.particle_radius;
  q.d_s_n = arrhenius_scale(p.theta.d_s_n, p.anode.ea_ds, temp, p.t_amb, p.gas_const);
  q.d_s_p = arrhenius_scale(p.theta.d_s_p, p.cathode.ea_ds, temp, p.t_amb, p.gas_const);
  q.k_n = arrhenius_scale(p.theta.k_n, p.anode.ea_k, temp, p.t_amb, p.gas_const);
  q.k_p = arrhenius_scale(p.theta.k_p, p.cathode.ea_k, temp, p.t_amb, p.gas_const);
  return q;
}

Stoichiometry soc_to_stoichiometry(double soc, const CellParameters& p) {
  if (!(soc >= 0.0 && soc <= 1.0))
    throw std::out_of_range("soc_to_stoichiometry: soc=" + std::to_string(soc) +
                            " outside [0,1]");
  Stoichiometry s{};
  s.theta_n = p.anode.theta_empty + soc * (p.anode.theta_full - p.anode.theta_empty);
  s.theta_p = p.cathode.theta_empty + soc * (p.cathode.theta_full - p.cathode.theta_empty);
  return s;
}

CellParameters apply_soh_window(const CellParameters& p, double soh) {
  if (!(soh > 0.0 && soh <= 1.0))
    throw std::invalid_argument("apply_soh_window: soh must be in (0,1]");
  CellParameters out = p;
  if (out.nominal_capacity_ah <= 0.0)
    out.nominal_capacity_ah = p.capacity_ah();
  const double center = 0.5 * (p.anode.theta_full + p.anode.theta_empty);
  const double half = 0.5 * (p.anode.theta_full - p.anode.theta_empty) * soh;
  out.anode.theta_full = center + half;
  out.anode.theta_empty = center - half;
  return out;
}

Materials Materials::nca_defaults(bool anode_fifth_tanh) {
  return Materials{CellParameters::nca_defaults(),
                   OcvCurve::anode_nca(anode_fifth_tanh),
                   OcvCurve::cathode_nca()};
}

}  // namespace dfnid
