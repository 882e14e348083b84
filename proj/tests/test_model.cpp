#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dfnid/grid.hpp"
#include "dfnid/materials.hpp"
#include "dfnid/model.hpp"

using namespace dfnid;

TEST_CASE("grid volumes tile the sections and particles exactly") {
  const CellParameters p = CellParameters::nca_defaults();
  for (int nx : {2, 10, 20}) {
    for (int nr : {2, 10, 16}) {
      const Grid g = Grid::make(p, nx, nr);
      double sums[3] = {0, 0, 0};
      for (int i = 0; i < g.n_cv(); ++i) sums[i / nx] += g.dx[i];
      CHECK(sums[0] == doctest::Approx(p.anode.thickness).epsilon(1e-14));
      CHECK(sums[1] == doctest::Approx(p.separator.thickness).epsilon(1e-14));
      CHECK(sums[2] == doctest::Approx(p.cathode.thickness).epsilon(1e-14));
      for (int e = 0; e < 2; ++e) {
        const double rp =
            e == 0 ? p.anode.particle_radius : p.cathode.particle_radius;
        double v = 0.0;
        for (double s : g.shell_vol[e]) v += s;
        CHECK(v == doctest::Approx(4.0 / 3.0 * M_PI * rp * rp * rp)
                       .epsilon(1e-14));
      }
    }
  }
  CHECK_THROWS_AS(Grid::make(p, 1, 10), std::invalid_argument);
}

TEST_CASE("butler-volmer flux") {
  // eta = 0 gives zero flux.
  CHECK(butler_volmer_flux(1200.0, 14483.5, 28967.0, 6.837e-12, 0.0, 298.15) ==
        0.0);
  // Golden value from scalar evaluation.
  CHECK(butler_volmer_flux(1200.0, 14483.5, 28967.0, 6.837e-12, 0.01,
                           298.15) ==
        doctest::Approx(1.3435624837317688e-06).epsilon(1e-12));
  // Odd symmetry in the overpotential.
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double cs = 28967.0 * (0.05 + 0.9 * u(gen));
    const double eta = -0.3 + 0.6 * u(gen);
    const double ce = 300.0 + 2500.0 * u(gen);
    const double jp = butler_volmer_flux(ce, cs, 28967.0, 6.837e-12, eta, 298.15);
    const double jm =
        butler_volmer_flux(ce, cs, 28967.0, 6.837e-12, -eta, 298.15);
    CHECK(jp == doctest::Approx(-jm).epsilon(1e-14));
  }
  // Saturated surface concentration is a domain error.
  CHECK_THROWS_AS(
      butler_volmer_flux(1200.0, 0.0, 28967.0, 6.837e-12, 0.1, 298.15),
      std::domain_error);
  CHECK_THROWS_AS(
      butler_volmer_flux(1200.0, 28967.0, 28967.0, 6.837e-12, 0.1, 298.15),
      std::domain_error);
  CHECK_THROWS_AS(
      butler_volmer_flux(-1.0, 14000.0, 28967.0, 6.837e-12, 0.1, 298.15),
      std::domain_error);
}

TEST_CASE("uniform equilibrium is a residual root") {
  const Materials mat = Materials::nca_defaults();
  DfnSystem sys(mat, Grid::make(mat.params, 10, 10));
  sys.set_current(0.0);
  for (double soc : {0.05, 0.5, 1.0}) {
    const CellState st = sys.initialize(soc);
    std::vector<double> ydot(sys.size(), 0.0), f(sys.size());
    sys.residual(0.0, st.y.data(), ydot.data(), f.data());
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::fabs(v));
    CHECK(fmax < 1e-10);
  }
}

TEST_CASE("initial state values at full charge") {
  const Materials mat = Materials::nca_defaults();
  DfnSystem sys(mat, Grid::make(mat.params, 10, 10));
  sys.set_current(0.0);
  const CellState st = sys.initialize(1.0);
  CHECK(sys.c_s(st, 0, 0, 0) == doctest::Approx(26736.541).epsilon(1e-12));
  CHECK(sys.c_s(st, 0, 9, 9) == doctest::Approx(26736.541).epsilon(1e-12));
  CHECK(sys.c_e(st, 15) == doctest::Approx(1200.0).epsilon(1e-15));
  CHECK(sys.phi_e(st, 0) == 0.0);
  const double v0 = ocv_cathode(0.160) - ocv_anode(0.923);
  CHECK(sys.terminal_voltage(st) == doctest::Approx(v0).epsilon(1e-12));
  CHECK(v0 == doctest::Approx(4.182331196678614).epsilon(1e-12));
}

TEST_CASE("residual sparsity stays inside the declared band") {
  const Materials mat = Materials::nca_defaults();
  for (auto [nx, nr] : {std::pair{2, 2}, std::pair{3, 4}}) {
    DfnSystem sys(mat, Grid::make(mat.params, nx, nr));
    sys.set_current(2.0);
    CellState st = sys.initialize(0.7);
    // Perturb so that no coupling hides behind symmetry.
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> u(-0.03, 0.03);
    for (auto& v : st.y) v += u(gen);

    const int n = sys.size();
    std::vector<double> ydot(n, 0.0), f0(n), f1(n), y(st.y);
    sys.residual(0.0, y.data(), ydot.data(), f0.data());
    for (int c = 0; c < n; ++c) {
      const double del = 1e-6 * (1.0 + std::fabs(y[c]));
      y[c] += del;
      sys.residual(0.0, y.data(), ydot.data(), f1.data());
      y[c] -= del;
      for (int r = 0; r < n; ++r) {
        const double j = (f1[r] - f0[r]) / del;
        if (std::fabs(j) > 1e-7) {
          CHECK(c - r >= -sys.lower_bandwidth());
          CHECK(c - r <= sys.upper_bandwidth());
        }
      }
    }
  }
}

TEST_CASE("electrolyte stencil matches a hand-written balance on a toy grid") {
  const Materials mat = Materials::nca_defaults();
  const int nx = 2, nr = 2;
  const Grid g = Grid::make(mat.params, nx, nr);
  DfnSystem sys(mat, g);
  sys.set_current(0.0);
  CellState st = sys.initialize(0.6);
  // Impose a non-uniform electrolyte profile.
  const double ce_scaled[6] = {1.08, 1.03, 0.99, 0.97, 0.94, 0.9};
  for (int i = 0; i < 6; ++i) st.y[sys.idx_ce(i)] = ce_scaled[i];

  std::vector<double> ydot(sys.size(), 0.0), f(sys.size());
  const double ydot_ce = 3.3e-4;
  ydot[sys.idx_ce(2)] = ydot_ce;  // first separator volume
  sys.residual(0.0, st.y.data(), ydot.data(), f.data());

  // Independent discrete balance for that volume: harmonic-mean face
  // diffusivities, zero reaction source in the separator.
  const auto& p = mat.params;
  const double t_amb = p.t_amb;
  auto deff = [&](int i) {
    const double eps = i < nx ? p.anode.porosity
                              : (i < 2 * nx ? p.separator.porosity
                                            : p.cathode.porosity);
    return electrolyte_diffusivity(ce_scaled[i] * p.c_e_init, t_amb) *
           std::pow(eps, p.brugg);
  };
  auto face_flux = [&](int i) {  // between CV i and i+1
    const double dxl = g.dx[i], dxr = g.dx[i + 1];
    const double dist = 0.5 * (dxl + dxr);
    const double dface =
        dist / (0.5 * dxl / deff(i) + 0.5 * dxr / deff(i + 1));
    return dface * (ce_scaled[i + 1] - ce_scaled[i]) * p.c_e_init / dist;
  };
  const double expected =
      p.separator.porosity * ydot_ce -
      (face_flux(2) - face_flux(1)) / (g.dx[2] * p.c_e_init);
  CHECK(f[sys.idx_ce(2)] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("solid charge boundary residual is linear in the applied current") {
  const Materials mat = Materials::nca_defaults();
  DfnSystem sys(mat, Grid::make(mat.params, 10, 10));
  const CellState st = sys.initialize(0.8);
  std::vector<double> ydot(sys.size(), 0.0), f1(sys.size()), f2(sys.size());
  sys.set_current(1.5);
  sys.residual(0.0, st.y.data(), ydot.data(), f1.data());
  sys.set_current(3.0);
  sys.residual(0.0, st.y.data(), ydot.data(), f2.data());
  const int row_first = sys.idx_phis(0, 0);
  const int row_last = sys.idx_phis(1, 9);
  CHECK(f2[row_first] == doctest::Approx(2.0 * f1[row_first]).epsilon(1e-12));
  CHECK(f2[row_last] == doctest::Approx(2.0 * f1[row_last]).epsilon(1e-12));
  // Every other row is independent of the applied current.
  for (int i = 0; i < sys.size(); ++i) {
    if (i == row_first || i == row_last) continue;
    CHECK(f1[i] == f2[i]);
  }
}

TEST_CASE("terminal voltage ignores the electrolyte gauge") {
  const Materials mat = Materials::nca_defaults();
  DfnSystem sys(mat, Grid::make(mat.params, 10, 10));
  sys.set_current(2.0);
  CellState st = sys.initialize(0.9);
  const double v = sys.terminal_voltage(st);
  for (int i = 0; i < 30; ++i) st.y[sys.idx_phie(i)] += 0.37;
  CHECK(sys.terminal_voltage(st) == v);
}

TEST_CASE("row descriptions name block and volume") {
  const Materials mat = Materials::nca_defaults();
  DfnSystem sys(mat, Grid::make(mat.params, 10, 10));
  CHECK(sys.describe_row(sys.idx_j(0, 3)) ==
        "Butler-Volmer flux at anode control volume 3");
  CHECK(sys.describe_row(sys.idx_ce(15)) ==
        "electrolyte mass balance at separator control volume 5");
  CHECK(sys.describe_row(sys.idx_phis(1, 9)) ==
        "solid charge balance at cathode control volume 9");
}
