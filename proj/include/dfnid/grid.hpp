#pragma once

#include <vector>

#include "dfnid/materials.hpp"

namespace dfnid {

enum class SectionId : int { Anode = 0, Separator = 1, Cathode = 2 };

// Finite-volume mesh: uniform control volumes per section in x, uniform
// spherical shells per particle in r.
struct Grid {
  int n_x = 10;  // control volumes per section
  int n_r = 10;  // shells per particle

  double l_n = 0, l_s = 0, l_p = 0;  // section thicknesses
  std::vector<double> dx;            // per CV, size 3*n_x
  std::vector<double> x_center;      // cell centers, size 3*n_x

  // Radial geometry, [0]=anode, [1]=cathode.
  double dr[2] = {0, 0};
  std::vector<double> shell_vol[2];   // n_r entries
  std::vector<double> face_area[2];   // n_r+1 entries, face_area[e][0]=0

  static Grid make(const CellParameters& p, int n_x = 10, int n_r = 10);

  int n_cv() const { return 3 * n_x; }
  SectionId section_of(int i) const {
    return static_cast<SectionId>(i / n_x);
  }
  bool is_electrode(int i) const {
    return section_of(i) != SectionId::Separator;
  }
  // 0 = anode, 1 = cathode; only valid for electrode CVs.
  int electrode_of(int i) const {
    return section_of(i) == SectionId::Anode ? 0 : 1;
  }
};

}  // namespace dfnid
