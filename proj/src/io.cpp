#include "dfnid/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dfnid/csv.hpp"
#include "dfnid/log.hpp"

namespace dfnid {

FitSeries DischargeCurve::to_fit_series() const {
  FitSeries s;
  s.c_rate = c_rate;
  s.soh = soh;
  s.t_s = t_s;
  s.v_v = voltage_v;
  return s;
}

std::string canonical_c_rate_tag(const std::string& raw, double* value) {
  std::string s = raw;
  s.erase(std::remove_if(s.begin(), s.end(), ::isspace), s.end());
  double v = 0.0;
  if (s == "C/5" || s == "c/5") {
    v = 0.2;
  } else if (s == "1C" || s == "1c") {
    v = 1.0;
  } else if (s == "2C" || s == "2c") {
    v = 2.0;
  } else if (!s.empty() && (s.back() == 'C' || s.back() == 'c')) {
    v = std::stod(s.substr(0, s.size() - 1));
  } else if (!s.empty() && (s.front() == 'C' || s.front() == 'c') &&
             s.size() > 2 && s[1] == '/') {
    v = 1.0 / std::stod(s.substr(2));
  } else {
    v = std::stod(s);  // numeric override
  }
  if (!(v > 0.0)) throw std::invalid_argument("c_rate must be positive: " + raw);
  if (value) *value = v;
  if (std::fabs(v - 0.2) < 1e-12) return "C/5";
  if (std::fabs(v - 1.0) < 1e-12) return "1C";
  if (std::fabs(v - 2.0) < 1e-12) return "2C";
  return fmt_g(v);
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

int column_of(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

DischargeParse parse_discharge_csv(const std::string& path) {
  const auto lines = read_lines(path);
  std::size_t first = 0;
  while (first < lines.size() &&
         (lines[first].empty() || lines[first][0] == '#'))
    ++first;
  if (first >= lines.size())
    throw std::runtime_error(path + ": empty discharge file");

  const auto header = csv_split(lines[first]);
  const int c_cell = column_of(header, "cell_id");
  const int c_cycle = column_of(header, "cycle");
  const int c_rate = column_of(header, "c_rate");
  const int c_soh = column_of(header, "soh");
  const int c_t = column_of(header, "t_s");
  const int c_i = column_of(header, "current_A");
  const int c_v = column_of(header, "voltage_V");
  if (c_cell < 0 || c_cycle < 0 || c_rate < 0 || c_soh < 0 || c_t < 0 ||
      c_i < 0 || c_v < 0)
    throw std::runtime_error(
        path +
        ": header must contain cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V");

  struct Row {
    int line;
    double t, i, v;
  };
  struct Key {
    std::string cell;
    int cycle;
    std::string rate_tag;
    bool operator<(const Key& o) const {
      return std::tie(cell, cycle, rate_tag) <
             std::tie(o.cell, o.cycle, o.rate_tag);
    }
  };
  std::map<Key, std::pair<DischargeCurve, std::vector<Row>>> groups;

  DischargeParse out;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty() || line[0] == '#') continue;
    const int line_no = static_cast<int>(li) + 1;
    const auto f = csv_split(line);
    if (f.size() != header.size()) {
      out.rejected.push_back({line_no, "wrong column count"});
      continue;
    }
    try {
      Row row;
      row.line = line_no;
      row.t = std::stod(f[c_t]);
      row.i = std::stod(f[c_i]);
      row.v = std::stod(f[c_v]);
      const double soh = std::stod(f[c_soh]);
      const int cycle = std::stoi(f[c_cycle]);
      if (row.v < 1.5 || row.v > 5.0) {
        out.rejected.push_back(
            {line_no, "voltage " + f[c_v] + " outside the [1.5, 5.0] V sanity window"});
        continue;
      }
      if (row.i < 0.0) {
        out.rejected.push_back(
            {line_no, "negative current violates the discharge convention"});
        continue;
      }
      if (!(soh > 0.0 && soh <= 1.0)) {
        out.rejected.push_back({line_no, "soh outside (0, 1]"});
        continue;
      }
      double rate_value = 0.0;
      const std::string tag = canonical_c_rate_tag(f[c_rate], &rate_value);
      const Key key{f[c_cell], cycle, tag};
      auto& slot = groups[key];
      if (slot.second.empty()) {
        slot.first.cell_id = f[c_cell];
        slot.first.cycle = cycle;
        slot.first.c_rate_tag = tag;
        slot.first.c_rate = rate_value;
        slot.first.soh = soh;
      }
      slot.second.push_back(row);
    } catch (const std::exception& e) {
      out.rejected.push_back({line_no, std::string("unparseable row: ") + e.what()});
    }
  }

  for (auto& [key, slot] : groups) {
    auto& rows = slot.second;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.t < b.t; });
    DischargeCurve curve = slot.first;
    for (const auto& r : rows) {
      if (!curve.t_s.empty() && r.t <= curve.t_s.back()) {
        out.rejected.push_back(
            {r.line, "non-monotone time within a curve (t=" + fmt_g(r.t) + ")"});
        continue;
      }
      curve.t_s.push_back(r.t);
      curve.current_a.push_back(r.i);
      curve.voltage_v.push_back(r.v);
    }
    if (!curve.t_s.empty()) out.curves.push_back(std::move(curve));
  }
  if (out.curves.empty())
    throw std::runtime_error(path + ": no valid discharge rows");
  return out;
}

void write_discharge_csv(const std::string& path,
                         const std::vector<DischargeCurve>& curves,
                         const json& config) {
  std::ostringstream os;
  os << "# dfnid-discharge v1\n";
  os << "# config " << config.dump() << "\n";
  os << "cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V\n";
  for (const auto& c : curves) {
    for (std::size_t j = 0; j < c.t_s.size(); ++j) {
      os << csv_escape(c.cell_id) << ',' << c.cycle << ','
         << csv_escape(c.c_rate_tag) << ',' << fmt_g(c.soh) << ','
         << fmt_g(c.t_s[j]) << ',' << fmt_g(c.current_a[j]) << ','
         << fmt_g(c.voltage_v[j]) << '\n';
    }
  }
  write_text_file(path, os.str());
}

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback, bool* missing) {
  if (doc.contains(key)) return doc.at(key).get<T>();
  if (missing) *missing = true;
  log::info(std::string("cell parameters: key '") + key +
            "' missing, using default");
  return fallback;
}

void electrode_from_json(const json& doc, const char* section,
                         ElectrodeParams& e) {
  if (!doc.contains(section)) {
    log::info(std::string("cell parameters: section '") + section +
              "' missing, using defaults");
    return;
  }
  const json& s = doc.at(section);
  e.thickness = get_or(s, "thickness_m", e.thickness, nullptr);
  e.porosity = get_or(s, "porosity", e.porosity, nullptr);
  e.active_frac = get_or(s, "active_material_fraction", e.active_frac, nullptr);
  e.particle_radius = get_or(s, "particle_radius_m", e.particle_radius, nullptr);
  e.c_s_max = get_or(s, "c_s_max_mol_per_m3", e.c_s_max, nullptr);
  e.sigma = get_or(s, "sigma_S_per_m", e.sigma, nullptr);
  e.ea_ds = get_or(s, "ea_diffusion_J_per_mol", e.ea_ds, nullptr);
  e.ea_k = get_or(s, "ea_reaction_J_per_mol", e.ea_k, nullptr);
  e.theta_full = get_or(s, "stoichiometry_at_full", e.theta_full, nullptr);
  e.theta_empty = get_or(s, "stoichiometry_at_empty", e.theta_empty, nullptr);
}

}  // namespace

Materials materials_from_json(const json& doc) {
  const bool fifth =
      doc.contains("anode_ocv_fifth_tanh") ? doc.at("anode_ocv_fifth_tanh").get<bool>() : true;
  Materials mat = Materials::nca_defaults(fifth);
  CellParameters& p = mat.params;
  electrode_from_json(doc, "anode", p.anode);
  electrode_from_json(doc, "cathode", p.cathode);
  if (doc.contains("separator")) {
    const json& s = doc.at("separator");
    p.separator.thickness =
        get_or(s, "thickness_m", p.separator.thickness, nullptr);
    p.separator.porosity = get_or(s, "porosity", p.separator.porosity, nullptr);
  }
  p.c_e_init = get_or(doc, "c_e_init_mol_per_m3", p.c_e_init, nullptr);
  p.brugg = get_or(doc, "bruggeman", p.brugg, nullptr);
  p.t_plus = get_or(doc, "transference_number", p.t_plus, nullptr);
  p.t_amb = get_or(doc, "t_amb_K", p.t_amb, nullptr);
  p.plate_area = get_or(doc, "plate_area_m2", p.plate_area, nullptr);
  p.v_cut_discharge = get_or(doc, "v_cut_discharge_V", p.v_cut_discharge, nullptr);
  p.v_cut_charge = get_or(doc, "v_cut_charge_V", p.v_cut_charge, nullptr);
  p.nominal_capacity_ah =
      get_or(doc, "nominal_capacity_Ah", p.nominal_capacity_ah, nullptr);
  if (doc.contains("theta")) {
    const json& t = doc.at("theta");
    p.theta.d_s_p = get_or(t, "D_s_p_m2_per_s", p.theta.d_s_p, nullptr);
    p.theta.d_s_n = get_or(t, "D_s_n_m2_per_s", p.theta.d_s_n, nullptr);
    p.theta.k_p = get_or(t, "k_p_m2p5_per_mol0p5_s", p.theta.k_p, nullptr);
    p.theta.k_n = get_or(t, "k_n_m2p5_per_mol0p5_s", p.theta.k_n, nullptr);
  }
  p.validate();
  // The anode fit must stay non-increasing over its own window; tolerate
  // millivolt-level wiggle from the empirical coefficients.
  if (!mat.ocv_n.monotone_non_increasing(p.anode.theta_empty + 1e-6,
                                         p.anode.theta_full - 1e-6))
    throw std::invalid_argument(
        "anode OCV is not monotone over the stoichiometry window");
  return mat;
}

Materials load_materials(const std::string& path) {
  if (path.empty()) return Materials::nca_defaults();
  return materials_from_json(read_json_doc(path));
}

json materials_to_json(const Materials& mat) {
  const CellParameters& p = mat.params;
  auto electrode = [](const ElectrodeParams& e) {
    return json{{"thickness_m", e.thickness},
                {"porosity", e.porosity},
                {"active_material_fraction", e.active_frac},
                {"particle_radius_m", e.particle_radius},
                {"c_s_max_mol_per_m3", e.c_s_max},
                {"sigma_S_per_m", e.sigma},
                {"ea_diffusion_J_per_mol", e.ea_ds},
                {"ea_reaction_J_per_mol", e.ea_k},
                {"stoichiometry_at_full", e.theta_full},
                {"stoichiometry_at_empty", e.theta_empty}};
  };
  return json{
      {"anode", electrode(p.anode)},
      {"cathode", electrode(p.cathode)},
      {"separator",
       {{"thickness_m", p.separator.thickness},
        {"porosity", p.separator.porosity}}},
      {"c_e_init_mol_per_m3", p.c_e_init},
      {"bruggeman", p.brugg},
      {"transference_number", p.t_plus},
      {"t_amb_K", p.t_amb},
      {"plate_area_m2", p.plate_area},
      {"v_cut_discharge_V", p.v_cut_discharge},
      {"v_cut_charge_V", p.v_cut_charge},
      {"nominal_capacity_Ah", p.nominal_capacity_ah},
      {"theta",
       {{"D_s_p_m2_per_s", p.theta.d_s_p},
        {"D_s_n_m2_per_s", p.theta.d_s_n},
        {"k_p_m2p5_per_mol0p5_s", p.theta.k_p},
        {"k_n_m2p5_per_mol0p5_s", p.theta.k_n}}},
  };
}

void write_chain_csv(const std::string& path, const PosteriorChain& chain,
                     const ChainMeta& meta, const json& config) {
  json m;
  m["seed"] = chain.seed;
  m["burn_in"] = chain.burn_in;
  m["acceptance_rate"] = chain.acceptance_rate;
  m["warning"] = chain.warning;
  m["warning_message"] = chain.warning_message;
  m["param_names"] = chain.param_names;
  m["param_indices"] = chain.param_indices;
  m["init"] = chain.init;
  m["cell_id"] = meta.cell_id;
  m["cycle"] = meta.cycle;
  m["c_rate"] = meta.c_rate_tag;
  m["c_rate_value"] = meta.c_rate;
  m["soh"] = meta.soh;
  m["sigma_v"] = meta.sigma_v;
  json space;
  space["lo"] = chain.space.lo;
  space["hi"] = chain.space.hi;
  space["fixed"] = chain.space.fixed;
  space["fixed_log10"] = chain.space.fixed_log10;
  json priors = json::array();
  for (int i = 0; i < 4; ++i) {
    if (chain.space.prior[i])
      priors.push_back({{"param", kThetaNames[i]},
                        {"mean_log10", chain.space.prior[i]->mean_log10},
                        {"std_log10", chain.space.prior[i]->std_log10}});
  }
  space["priors"] = priors;
  m["space"] = space;
  m["config"] = config;

  std::ostringstream os;
  os << "# dfnid-chain v1\n";
  os << "# meta " << m.dump() << "\n";
  for (std::size_t k = 0; k < chain.param_names.size(); ++k)
    os << "log10_" << chain.param_names[k] << ',';
  os << "objective,chi2,accepted\n";
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    for (double v : chain.samples[i]) os << fmt_g(v) << ',';
    os << fmt_g(chain.objective[i]) << ',' << fmt_g(chain.chi2[i]) << ','
       << int(chain.accepted[i]) << '\n';
  }
  write_text_file(path, os.str());
}

std::pair<PosteriorChain, ChainMeta> read_chain_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 3 || lines[0].rfind("# dfnid-chain", 0) != 0)
    throw std::runtime_error(path + ": not a chain file");
  const std::string meta_prefix = "# meta ";
  if (lines[1].rfind(meta_prefix, 0) != 0)
    throw std::runtime_error(path + ": missing meta header");
  const json m = json::parse(lines[1].substr(meta_prefix.size()));

  PosteriorChain chain;
  ChainMeta meta;
  chain.seed = m.at("seed").get<std::uint64_t>();
  chain.burn_in = m.at("burn_in").get<int>();
  chain.acceptance_rate = m.at("acceptance_rate").get<double>();
  chain.warning = m.at("warning").get<bool>();
  chain.warning_message = m.at("warning_message").get<std::string>();
  chain.param_names = m.at("param_names").get<std::vector<std::string>>();
  chain.param_indices = m.at("param_indices").get<std::vector<int>>();
  chain.init = m.at("init").get<std::vector<double>>();
  meta.cell_id = m.at("cell_id").get<std::string>();
  meta.cycle = m.at("cycle").get<int>();
  meta.c_rate_tag = m.at("c_rate").get<std::string>();
  meta.c_rate = m.at("c_rate_value").get<double>();
  meta.soh = m.at("soh").get<double>();
  meta.sigma_v = m.at("sigma_v").get<double>();
  const json& space = m.at("space");
  chain.space = ParameterSpace::defaults();
  for (int i = 0; i < 4; ++i) {
    chain.space.lo[i] = space.at("lo")[i].get<double>();
    chain.space.hi[i] = space.at("hi")[i].get<double>();
    chain.space.fixed[i] = space.at("fixed")[i].get<bool>();
    chain.space.fixed_log10[i] = space.at("fixed_log10")[i].get<double>();
  }
  for (const auto& pr : space.at("priors")) {
    const std::string name = pr.at("param").get<std::string>();
    for (int i = 0; i < 4; ++i)
      if (name == kThetaNames[i])
        chain.space.prior[i] = GaussianPrior{pr.at("mean_log10").get<double>(),
                                             pr.at("std_log10").get<double>()};
  }

  const std::size_t ncol = chain.param_names.size();
  for (std::size_t li = 3; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = csv_split(lines[li]);
    if (f.size() != ncol + 3)
      throw std::runtime_error(path + ": bad chain row at line " +
                               std::to_string(li + 1));
    std::vector<double> smp(ncol);
    for (std::size_t k = 0; k < ncol; ++k) smp[k] = std::stod(f[k]);
    chain.samples.push_back(std::move(smp));
    chain.objective.push_back(std::stod(f[ncol]));
    chain.chi2.push_back(std::stod(f[ncol + 1]));
    chain.accepted.push_back(static_cast<std::uint8_t>(std::stoi(f[ncol + 2])));
  }
  return {std::move(chain), std::move(meta)};
}

void write_histogram_csv(const std::string& path,
                         const MarginalHistogram& hist, const json& config) {
  std::ostringstream os;
  os << "# dfnid-histogram v1\n";
  os << "# config " << config.dump() << "\n";
  os << "bin_center,density\n";
  for (std::size_t b = 0; b < hist.density.size(); ++b)
    os << fmt_g(hist.lo + (b + 0.5) * hist.bin_width) << ','
       << fmt_g(hist.density[b]) << '\n';
  write_text_file(path, os.str());
}

void write_verdicts_csv(const std::string& path,
                        const std::vector<VerdictRow>& rows,
                        const json& config) {
  std::ostringstream os;
  os << "# dfnid-verdicts v1\n";
  os << "# config " << config.dump() << "\n";
  os << "c_rate,soh_pct,cycle,param,map_log10,lower_log10,upper_log10,class\n";
  for (const auto& r : rows) {
    char soh_pct[32];
    std::snprintf(soh_pct, sizeof(soh_pct), "%.2f", 100.0 * r.soh);
    os << csv_escape(r.c_rate_tag) << ',' << soh_pct << ',' << r.cycle << ','
       << csv_escape(r.param) << ',' << fmt_g(r.verdict.map_log10) << ','
       << fmt_g(r.verdict.lower_log10) << ',';
    if (r.verdict.upper_unbounded)
      os << "+inf";
    else
      os << fmt_g(r.verdict.upper_log10);
    os << ',' << to_string(r.verdict.cls) << '\n';
  }
  write_text_file(path, os.str());
}

void write_region_csvs(const std::string& dir, const std::string& stem,
                       const ConfidenceRegion2D& region, const json& config) {
  const std::size_t nx = region.xs.size(), ny = region.ys.size();
  {
    std::ostringstream os;
    os << "# dfnid-region-axes v1\n";
    os << "# config " << config.dump() << "\n";
    os << "axis,index,log10_value\n";
    for (std::size_t i = 0; i < nx; ++i)
      os << csv_escape(region.x_name) << ',' << i << ',' << fmt_g(region.xs[i])
         << '\n';
    for (std::size_t j = 0; j < ny; ++j)
      os << csv_escape(region.y_name) << ',' << j << ',' << fmt_g(region.ys[j])
         << '\n';
    write_text_file(dir + "/" + stem + "_axes.csv", os.str());
  }
  auto dense = [&](const std::string& suffix, auto&& cell) {
    std::ostringstream os;
    os << "# dfnid-region-" << suffix << " v1\n";
    os << "# config " << config.dump() << "\n";
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (i) os << ',';
        os << cell(i, j);
      }
      os << '\n';
    }
    write_text_file(dir + "/" + stem + "_" + suffix + ".csv", os.str());
  };
  dense("chi2", [&](std::size_t i, std::size_t j) {
    return fmt_g(region.chi2[j * nx + i]);
  });
  dense("mask", [&](std::size_t i, std::size_t j) {
    return std::to_string(int(region.member[j * nx + i]));
  });
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryPoint>& pts,
                          const json& config) {
  std::ostringstream os;
  os << "# dfnid-trajectory v1\n";
  os << "# config " << config.dump() << "\n";
  os << "param,c_rate,soh,map_log10,var_log10,cycle\n";
  for (const auto& p : pts)
    os << csv_escape(p.param) << ',' << csv_escape(p.c_rate) << ','
       << fmt_g(p.soh) << ',' << fmt_g(p.map_log10) << ','
       << fmt_g(p.var_log10) << ',' << p.cycle << '\n';
  write_text_file(path, os.str());
}

std::vector<TrajectoryPoint> read_trajectory_csv(const std::string& path) {
  const auto lines = read_lines(path);
  std::size_t first = 0;
  while (first < lines.size() &&
         (lines[first].empty() || lines[first][0] == '#'))
    ++first;
  if (first >= lines.size())
    throw std::runtime_error(path + ": empty trajectory file");
  const auto header = csv_split(lines[first]);
  const int c_param = column_of(header, "param");
  const int c_rate = column_of(header, "c_rate");
  const int c_soh = column_of(header, "soh");
  const int c_map = column_of(header, "map_log10");
  const int c_var = column_of(header, "var_log10");
  const int c_cycle = column_of(header, "cycle");
  if (c_param < 0 || c_rate < 0 || c_soh < 0 || c_map < 0 || c_var < 0)
    throw std::runtime_error(path + ": missing trajectory columns");
  std::vector<TrajectoryPoint> pts;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li][0] == '#') continue;
    const auto f = csv_split(lines[li]);
    TrajectoryPoint p;
    p.param = f[c_param];
    p.c_rate = f[c_rate];
    p.soh = std::stod(f[c_soh]);
    p.map_log10 = std::stod(f[c_map]);
    p.var_log10 = std::stod(f[c_var]);
    p.cycle = c_cycle >= 0 ? std::stoi(f[c_cycle]) : 0;
    pts.push_back(std::move(p));
  }
  return pts;
}

void write_band_csv(const std::string& path,
                    const std::vector<BandPoint>& band, const json& config) {
  std::ostringstream os;
  os << "# dfnid-band v1\n";
  os << "# config " << config.dump() << "\n";
  os << "soh,mean,lower,upper\n";
  for (const auto& b : band)
    os << fmt_g(b.soh) << ',' << fmt_g(b.mid) << ',' << fmt_g(b.lo) << ','
       << fmt_g(b.hi) << '\n';
  write_text_file(path, os.str());
}

void write_json_doc(const std::string& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

json read_json_doc(const std::string& path) {
  return json::parse(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace dfnid
