#include "dfnid/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace dfnid {

Grid Grid::make(const CellParameters& p, int n_x, int n_r) {
  if (n_x < 2 || n_r < 2)
    throw std::invalid_argument("Grid: need at least 2 volumes per direction");
  Grid g;
  g.n_x = n_x;
  g.n_r = n_r;
  g.l_n = p.anode.thickness;
  g.l_s = p.separator.thickness;
  g.l_p = p.cathode.thickness;

  g.dx.resize(3 * n_x);
  g.x_center.resize(3 * n_x);
  const double widths[3] = {g.l_n, g.l_s, g.l_p};
  const double starts[3] = {0.0, g.l_n, g.l_n + g.l_s};
  for (int s = 0; s < 3; ++s) {
    const double d = widths[s] / n_x;
    for (int k = 0; k < n_x; ++k) {
      g.dx[s * n_x + k] = d;
      g.x_center[s * n_x + k] = starts[s] + (k + 0.5) * d;
    }
  }

  const double radii[2] = {p.anode.particle_radius, p.cathode.particle_radius};
  for (int e = 0; e < 2; ++e) {
    const double rp = radii[e];
    g.dr[e] = rp / n_r;
    g.shell_vol[e].resize(n_r);
    g.face_area[e].resize(n_r + 1);
    const double c = 4.0 / 3.0 * M_PI;
    for (int m = 0; m <= n_r; ++m) {
      const double r = rp * m / n_r;
      g.face_area[e][m] = 4.0 * M_PI * r * r;
    }
    for (int m = 0; m < n_r; ++m) {
      const double r0 = rp * m / n_r;
      const double r1 = rp * (m + 1) / n_r;
      g.shell_vol[e][m] = c * (r1 * r1 * r1 - r0 * r0 * r0);
    }
  }
  return g;
}

}  // namespace dfnid
