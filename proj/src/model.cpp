#include "dfnid/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dfnid {

double butler_volmer_flux(double c_e, double c_s_surf, double c_s_max,
                          double k_eff, double eta, double temp,
                          double faraday, double gas_const) {
  if (!(c_s_surf > 0.0 && c_s_surf < c_s_max))
    throw std::domain_error(
        "butler_volmer_flux: surface concentration saturated (c_s*=" +
        std::to_string(c_s_surf) + ", c_s_max=" + std::to_string(c_s_max) + ")");
  if (!(c_e > 0.0))
    throw std::domain_error("butler_volmer_flux: c_e must be positive");
  const double arg = 0.5 * faraday * eta / (gas_const * temp);
  return 2.0 * k_eff * std::sqrt(c_e * (c_s_max - c_s_surf) * c_s_surf) *
         std::sinh(arg);
}

DfnSystem::DfnSystem(const Materials& mat, Grid grid)
    : mat_(mat), grid_(std::move(grid)), temp_(mat.params.t_amb) {
  const auto& p = mat_.params;
  p.validate();

  const int N = grid_.n_x, NR = grid_.n_r;
  if (3 * N > 128)
    throw std::invalid_argument("DfnSystem: more than 128 control volumes");
  const int B = NR + 4;  // electrode block: c_s shells, j, c_e, phi_s, phi_e
  n_states_ = 2 * N * B + 2 * N;
  kl_ = NR + 6;
  ku_ = NR + 4;

  block_base_.resize(3 * N);
  for (int k = 0; k < N; ++k) block_base_[k] = k * B;
  for (int k = 0; k < N; ++k) block_base_[N + k] = N * B + 2 * k;
  for (int k = 0; k < N; ++k) block_base_[2 * N + k] = N * B + 2 * N + k * B;

  differential_.assign(n_states_, false);
  for (int i = 0; i < 3 * N; ++i) {
    if (grid_.is_electrode(i)) {
      for (int m = 0; m < NR; ++m) differential_[block_base_[i] + m] = true;
      differential_[block_base_[i] + NR + 1] = true;  // c_e
    } else {
      differential_[block_base_[i]] = true;  // c_e
    }
  }

  const EffectiveQuantities q = effective_quantities(p, p.c_e_init, temp_);
  d_s_eff_[0] = q.d_s_n;
  d_s_eff_[1] = q.d_s_p;
  k_eff_[0] = q.k_n;
  k_eff_[1] = q.k_p;
  a_surf_[0] = q.a_n;
  a_surf_[1] = q.a_p;
  sigma_eff_[0] = p.anode.sigma;
  sigma_eff_[1] = p.cathode.sigma;
  c_max_[0] = p.anode.c_s_max;
  c_max_[1] = p.cathode.c_s_max;
  eps_[0] = p.anode.porosity;
  eps_[1] = p.separator.porosity;
  eps_[2] = p.cathode.porosity;
  for (int s = 0; s < 3; ++s) brugg_porosity_[s] = std::pow(eps_[s], p.brugg);

  phis_scale_[0] = 1.0 / (a_surf_[0] * p.faraday * kJScale);
  phis_scale_[1] = 1.0 / (a_surf_[1] * p.faraday * kJScale);
  phie_scale_ = phis_scale_[0];
}

int DfnSystem::idx_cs(int electrode, int cv, int shell) const {
  const int i = electrode == 0 ? cv : 2 * grid_.n_x + cv;
  return block_base_[i] + shell;
}
int DfnSystem::idx_j(int electrode, int cv) const {
  const int i = electrode == 0 ? cv : 2 * grid_.n_x + cv;
  return block_base_[i] + grid_.n_r;
}
int DfnSystem::idx_ce(int cv) const {
  return grid_.is_electrode(cv) ? block_base_[cv] + grid_.n_r + 1
                                : block_base_[cv];
}
int DfnSystem::idx_phis(int electrode, int cv) const {
  const int i = electrode == 0 ? cv : 2 * grid_.n_x + cv;
  return block_base_[i] + grid_.n_r + 2;
}
int DfnSystem::idx_phie(int cv) const {
  return grid_.is_electrode(cv) ? block_base_[cv] + grid_.n_r + 3
                                : block_base_[cv] + 1;
}

void DfnSystem::residual(double /*t*/, const double* y, const double* ydot,
                         double* f) const {
  const auto& p = mat_.params;
  const int N = grid_.n_x, NR = grid_.n_r, NC = 3 * N;
  const double F = p.faraday, Rg = p.gas_const, T = temp_;
  const double ce0 = p.c_e_init;
  const double one_minus_tp = 1.0 - p.t_plus;
  const double ce_floor = 1e-6 * ce0;

  const auto& ksurf = electrolyte_conductivity_surface();
  const auto& dsurf = electrolyte_diffusivity_surface();

  // Per-CV electrolyte state and transport coefficients.
  double ce[128], dloc[128], kloc[128], lnce[128], jflux[128];
  for (int i = 0; i < NC; ++i) {
    const double raw = y[idx_ce(i)] * ce0;
    const double safe = raw > ce_floor ? raw : ce_floor;
    ce[i] = raw;
    lnce[i] = std::log(safe);
    const int s = i / N;
    dloc[i] = dsurf(safe, T) * brugg_porosity_[s];
    kloc[i] = ksurf(safe, T) * brugg_porosity_[s];
    jflux[i] = grid_.is_electrode(i)
                   ? y[idx_j(grid_.electrode_of(i), i % N)] * kJScale
                   : 0.0;
  }

  // Face fluxes between CV i and i+1 (positive toward +x).
  double g_ce[128], g_phi[128], g_lnc[128];
  for (int i = 0; i + 1 < NC; ++i) {
    const double dxl = grid_.dx[i], dxr = grid_.dx[i + 1];
    const double dist = 0.5 * (dxl + dxr);
    const double dface = dist / (0.5 * dxl / dloc[i] + 0.5 * dxr / dloc[i + 1]);
    const double kface = dist / (0.5 * dxl / kloc[i] + 0.5 * dxr / kloc[i + 1]);
    g_ce[i] = dface * (ce[i + 1] - ce[i]) / dist;
    const double phie_l = y[idx_phie(i)], phie_r = y[idx_phie(i + 1)];
    g_phi[i] = kface * (phie_r - phie_l) / dist;
    g_lnc[i] = (2.0 * kface * Rg * T * one_minus_tp / F) *
               (lnce[i + 1] - lnce[i]) / dist;
  }

  for (int i = 0; i < NC; ++i) {
    const double dx = grid_.dx[i];
    const bool elec = grid_.is_electrode(i);
    const int e = elec ? grid_.electrode_of(i) : -1;
    const int k = i % N;

    // Electrolyte mass balance.
    {
      const double gl = i > 0 ? g_ce[i - 1] : 0.0;
      const double gr = i + 1 < NC ? g_ce[i] : 0.0;
      const double src = elec ? a_surf_[e] * one_minus_tp * jflux[i] : 0.0;
      f[idx_ce(i)] =
          eps_[i / N] * ydot[idx_ce(i)] - ((gr - gl) / dx + src) / ce0;
    }

    // Electrolyte charge balance; the first CV carries the ground condition
    // (its flux balance is implied by the remaining rows).
    if (i == 0) {
      f[idx_phie(0)] = y[idx_phie(0)];
    } else {
      const double gl = g_phi[i - 1] - g_lnc[i - 1];
      const double gr = i + 1 < NC ? g_phi[i] - g_lnc[i] : 0.0;
      const double src = elec ? a_surf_[e] * F * jflux[i] : 0.0;
      f[idx_phie(i)] = ((gr - gl) / dx + src) * phie_scale_;
    }

    if (!elec) continue;

    const double cmax = c_max_[e];
    const double ds = d_s_eff_[e];
    const double dr = grid_.dr[e];
    const double* vol = grid_.shell_vol[e].data();
    const double* area = grid_.face_area[e].data();
    const int cs0 = idx_cs(e, k, 0);

    // Solid diffusion shells. q_m is the radial flux at inner face m.
    {
      double q_in = 0.0;  // face area is zero at the center anyway
      for (int m = 0; m < NR; ++m) {
        const double q_out =
            m + 1 < NR
                ? -ds * (y[cs0 + m + 1] - y[cs0 + m]) * cmax / dr
                : jflux[i];
        f[cs0 + m] = ydot[cs0 + m] -
                     (area[m] * q_in - area[m + 1] * q_out) / (vol[m] * cmax);
        q_in = q_out;
      }
    }

    // Butler-Volmer interfacial flux.
    {
      const double c_last = y[cs0 + NR - 1] * cmax;
      double c_surf = c_last - jflux[i] * dr / (2.0 * ds);
      const double delta = 1e-6 * cmax;
      if (c_surf < delta || c_surf > cmax - delta) {
        c_surf = c_surf < delta ? delta : cmax - delta;
        ++clamp_events_;
      }
      const double theta = c_surf / cmax;
      const double u = e == 0 ? mat_.ocv_n(theta) : mat_.ocv_p(theta);
      const double eta = y[idx_phis(e, k)] - y[idx_phie(i)] - u;
      double arg = 0.5 * F * eta / (Rg * T);
      if (arg > 60.0) arg = 60.0;
      if (arg < -60.0) arg = -60.0;
      const double ce_bv = ce[i] > ce_floor ? ce[i] : ce_floor;
      const double jbv = 2.0 * k_eff_[e] *
                         std::sqrt(ce_bv * (cmax - c_surf) * c_surf) *
                         std::sinh(arg);
      f[idx_j(e, k)] = (jflux[i] - jbv) / kJScale;
    }

    // Solid charge balance with the applied-current boundary faces.
    {
      const double sig = sigma_eff_[e];
      double s_l, s_r;
      if (e == 0) {
        s_l = k > 0 ? sig * (y[idx_phis(e, k)] - y[idx_phis(e, k - 1)]) / dx
                    : -i_area_;
        s_r = k + 1 < N
                  ? sig * (y[idx_phis(e, k + 1)] - y[idx_phis(e, k)]) / dx
                  : 0.0;
      } else {
        s_l = k > 0 ? sig * (y[idx_phis(e, k)] - y[idx_phis(e, k - 1)]) / dx
                    : 0.0;
        s_r = k + 1 < N
                  ? sig * (y[idx_phis(e, k + 1)] - y[idx_phis(e, k)]) / dx
                  : -i_area_;
      }
      f[idx_phis(e, k)] =
          ((s_r - s_l) / dx - a_surf_[e] * F * jflux[i]) * phis_scale_[e];
    }
  }
}

CellState DfnSystem::initialize(double soc) const {
  const auto s = soc_to_stoichiometry(soc, mat_.params);
  CellState st;
  st.temp = temp_;
  st.y.assign(n_states_, 0.0);
  const int N = grid_.n_x, NR = grid_.n_r;
  const double u_n = mat_.ocv_n(s.theta_n);
  const double u_p = mat_.ocv_p(s.theta_p);
  for (int e = 0; e < 2; ++e) {
    const double theta = e == 0 ? s.theta_n : s.theta_p;
    const double phis = e == 0 ? u_n : u_p;
    for (int k = 0; k < N; ++k) {
      for (int m = 0; m < NR; ++m) st.y[idx_cs(e, k, m)] = theta;
      st.y[idx_j(e, k)] = 0.0;
      st.y[idx_phis(e, k)] = phis;
    }
  }
  for (int i = 0; i < 3 * N; ++i) {
    st.y[idx_ce(i)] = 1.0;
    st.y[idx_phie(i)] = 0.0;
  }
  return st;
}

double DfnSystem::terminal_voltage(const CellState& s) const {
  const int N = grid_.n_x;
  const double dxn = grid_.dx[0], dxp = grid_.dx[3 * N - 1];
  const double phi_n = s.y[idx_phis(0, 0)] + 0.5 * dxn * i_area_ / sigma_eff_[0];
  const double phi_p =
      s.y[idx_phis(1, N - 1)] - 0.5 * dxp * i_area_ / sigma_eff_[1];
  return phi_p - phi_n;
}

double DfnSystem::solid_moles(const CellState& s) const {
  const auto& p = mat_.params;
  const int N = grid_.n_x, NR = grid_.n_r;
  double total = 0.0;
  for (int e = 0; e < 2; ++e) {
    const double rp = e == 0 ? p.anode.particle_radius : p.cathode.particle_radius;
    const double act = e == 0 ? p.anode.active_frac : p.cathode.active_frac;
    const double vol_particle = 4.0 / 3.0 * M_PI * rp * rp * rp;
    const double nu = act / vol_particle;  // particles per unit volume
    for (int k = 0; k < N; ++k) {
      double per_particle = 0.0;
      for (int m = 0; m < NR; ++m)
        per_particle += s.y[idx_cs(e, k, m)] * c_max_[e] * grid_.shell_vol[e][m];
      const int i = e == 0 ? k : 2 * N + k;
      total += nu * per_particle * grid_.dx[i] * p.plate_area;
    }
  }
  return total;
}

double DfnSystem::electrolyte_moles(const CellState& s) const {
  const auto& p = mat_.params;
  double total = 0.0;
  for (int i = 0; i < 3 * grid_.n_x; ++i)
    total += eps_[i / grid_.n_x] * s.y[idx_ce(i)] * p.c_e_init * grid_.dx[i] *
             p.plate_area;
  return total;
}

double DfnSystem::interfacial_current(const CellState& s, int electrode) const {
  const auto& p = mat_.params;
  const int N = grid_.n_x;
  double total = 0.0;
  for (int k = 0; k < N; ++k) {
    const int i = electrode == 0 ? k : 2 * N + k;
    total += a_surf_[electrode] * p.faraday * s.y[idx_j(electrode, k)] *
             kJScale * grid_.dx[i] * p.plate_area;
  }
  return total;
}

double DfnSystem::mean_anode_soc(const CellState& s) const {
  const auto& p = mat_.params;
  const int N = grid_.n_x, NR = grid_.n_r;
  double acc = 0.0, volacc = 0.0;
  for (int k = 0; k < N; ++k)
    for (int m = 0; m < NR; ++m) {
      acc += s.y[idx_cs(0, k, m)] * grid_.shell_vol[0][m];
      volacc += grid_.shell_vol[0][m];
    }
  const double theta = acc / volacc;
  return (theta - p.anode.theta_empty) /
         (p.anode.theta_full - p.anode.theta_empty);
}

double DfnSystem::c_s(const CellState& s, int e, int cv, int m) const {
  return s.y[idx_cs(e, cv, m)] * c_max_[e];
}

double DfnSystem::c_s_surface(const CellState& s, int e, int cv) const {
  const double j = s.y[idx_j(e, cv)] * kJScale;
  return s.y[idx_cs(e, cv, grid_.n_r - 1)] * c_max_[e] -
         j * grid_.dr[e] / (2.0 * d_s_eff_[e]);
}

double DfnSystem::c_e(const CellState& s, int cv) const {
  return s.y[idx_ce(cv)] * mat_.params.c_e_init;
}
double DfnSystem::phi_s(const CellState& s, int e, int cv) const {
  return s.y[idx_phis(e, cv)];
}
double DfnSystem::phi_e(const CellState& s, int cv) const {
  return s.y[idx_phie(cv)];
}
double DfnSystem::flux_j(const CellState& s, int e, int cv) const {
  return s.y[idx_j(e, cv)] * kJScale;
}

std::string DfnSystem::describe_row(int row) const {
  const int N = grid_.n_x, NR = grid_.n_r;
  for (int i = 0; i < 3 * N; ++i) {
    const int base = block_base_[i];
    const int width = grid_.is_electrode(i) ? NR + 4 : 2;
    if (row < base || row >= base + width) continue;
    const int off = row - base;
    const char* sec = i / N == 0 ? "anode" : (i / N == 1 ? "separator" : "cathode");
    const int k = i % N;
    std::string what;
    if (!grid_.is_electrode(i)) {
      what = off == 0 ? "electrolyte mass balance" : "electrolyte charge balance";
    } else if (off < NR) {
      what = "solid diffusion shell " + std::to_string(off);
    } else if (off == NR) {
      what = "Butler-Volmer flux";
    } else if (off == NR + 1) {
      what = "electrolyte mass balance";
    } else if (off == NR + 2) {
      what = "solid charge balance";
    } else {
      what = "electrolyte charge balance";
    }
    return what + " at " + sec + " control volume " + std::to_string(k);
  }
  return "row " + std::to_string(row);
}

}  // namespace dfnid
