#include "dfnid/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "dfnid/csv.hpp"
#include "dfnid/io.hpp"
#include "dfnid/log.hpp"
#include "dfnid/rng.hpp"
#include "dfnid/threadpool.hpp"

namespace dfnid {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (!config_path.empty() && !fs::exists(config_path))
    throw std::invalid_argument("cell parameter document not found: " +
                                config_path);
  for (const auto& p : data_paths)
    if (!fs::exists(p))
      throw std::invalid_argument("data path not found: " + p);
  if (iterations <= 0 || burn_in < 0 || iterations <= burn_in / 1000000)
    throw std::invalid_argument("iterations must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");
  if (!(sigma_v > 0.0))
    throw std::invalid_argument("sigma must be positive");
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '-';
  return s;
}

json thresholds_json(const ClassifyThresholds& t) {
  return json{{"edge_to_peak", t.edge_to_peak},
              {"peak_to_plateau", t.peak_to_plateau},
              {"boundary_mass", t.boundary_mass},
              {"edge_bins", t.edge_bins},
              {"boundary_window", t.boundary_window}};
}

json effective_config(const RunConfig& cfg, const Materials& mat) {
  json j;
  j["command"] = cfg.command;
  j["seed"] = cfg.seed;
  j["c_rate_filter"] = cfg.c_rate_filter;
  j["iterations"] = cfg.iterations;
  j["burn_in"] = cfg.burn_in;
  j["alpha"] = cfg.alpha;
  j["jobs"] = cfg.jobs;
  j["sigma_v"] = cfg.sigma_v;
  j["sim_c_rate"] = cfg.sim_c_rate;
  j["initial_soc"] = cfg.initial_soc;
  j["t_max_s"] = cfg.t_max_s;
  j["soh_grid"] = cfg.soh_grid;
  j["noise_v"] = cfg.noise_v;
  j["fix_k_p"] = cfg.fix_k_p;
  j["dsp_prior"] = cfg.dsp_prior;
  j["pair"] = cfg.pair;
  j["grid_nx"] = cfg.grid_nx;
  j["grid_ny"] = cfg.grid_ny;
  j["thresholds"] = thresholds_json(cfg.thresholds);
  j["cell_parameters"] = materials_to_json(mat);
  return j;
}

ParameterSpace space_for(const RunConfig& cfg, const Materials& mat) {
  ParameterSpace s = ParameterSpace::defaults();
  s.fixed_log10 = theta_to_log10(mat.params.theta);
  if (cfg.fix_k_p) {
    s.fixed[2] = true;
    s.fixed_log10[2] = std::log10(kFixedKp);
  }
  if (cfg.dsp_prior) s.prior[0] = GaussianPrior{-15.2, 1.0};
  return s;
}

int effective_jobs(const RunConfig& cfg) {
  return cfg.jobs > 0 ? cfg.jobs : default_jobs();
}

std::vector<DischargeCurve> load_curves(const RunConfig& cfg) {
  std::vector<DischargeCurve> curves;
  for (const auto& path : cfg.data_paths) {
    auto parsed = parse_discharge_csv(path);
    for (const auto& issue : parsed.rejected)
      log::warn(path + ":" + std::to_string(issue.line) + ": " +
                issue.message);
    for (auto& c : parsed.curves) curves.push_back(std::move(c));
  }
  if (!cfg.c_rate_filter.empty()) {
    const std::string tag = canonical_c_rate_tag(cfg.c_rate_filter, nullptr);
    std::erase_if(curves,
                  [&](const DischargeCurve& c) { return c.c_rate_tag != tag; });
  }
  if (curves.empty()) throw std::runtime_error("no curves selected");
  std::sort(curves.begin(), curves.end(),
            [](const DischargeCurve& a, const DischargeCurve& b) {
              return std::tie(a.cell_id, a.cycle, a.c_rate_tag) <
                     std::tie(b.cell_id, b.cycle, b.c_rate_tag);
            });
  return curves;
}

std::string curve_stem(const DischargeCurve& c) {
  return sanitize(c.cell_id) + "_c" + std::to_string(c.cycle) + "_" +
         sanitize(c.c_rate_tag);
}

// MAP with a short seeded multistart ahead of the simplex descent.
MapResult robust_map(const ObjectiveFn& obj, const ParameterSpace& space,
                     std::uint64_t seed, int presamples = 12) {
  Rng rng(seed);
  const auto idx = space.free_indices();
  std::vector<double> best = space.midpoint();
  double best_f = obj(best).neg_log_post;
  std::vector<double> start = space.extract_free(space.fixed_log10);
  if (space.in_bounds(start)) {
    const double f = obj(start).neg_log_post;
    if (f < best_f) {
      best_f = f;
      best = start;
    }
  }
  for (int i = 0; i < presamples; ++i) {
    std::vector<double> x(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      x[k] = rng.uniform(space.lo[idx[k]], space.hi[idx[k]]);
    const double f = obj(x).neg_log_post;
    if (f < best_f) {
      best_f = f;
      best = x;
    }
  }
  return map_estimate(obj, space, best);
}

int cmd_simulate(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  Protocol proto;
  ProtocolSegment seg;
  seg.c_rate = cfg.sim_c_rate;
  seg.stop.v_min = mat.params.v_cut_discharge;
  seg.stop.t_max = cfg.t_max_s;
  proto.segments = {seg};
  proto.initial_soc = cfg.initial_soc;
  const SimulationResult res = simulate_protocol(mat, proto);

  const std::string tag = canonical_c_rate_tag(fmt_g(cfg.sim_c_rate), nullptr);
  const std::string stem = cfg.out_dir + "/simulate_" + sanitize(tag);
  {
    std::ostringstream os;
    os << "# dfnid-simulation v1\n";
    os << "# config " << config.dump() << "\n";
    os << "t_s,current_A,voltage_V,soc\n";
    for (std::size_t i = 0; i < res.t_s.size(); ++i)
      os << fmt_g(res.t_s[i]) << ',' << fmt_g(res.current_a[i]) << ','
         << fmt_g(res.voltage_v[i]) << ',' << fmt_g(res.soc[i]) << '\n';
    write_text_file(stem + ".csv", os.str());
  }
  json summary;
  summary["config"] = config;
  summary["termination"] = to_string(res.termination);
  summary["failed"] = res.failed;
  summary["failure_message"] = res.failure_message;
  summary["discharged_capacity_Ah"] = res.discharged_capacity_ah;
  summary["end_time_s"] = res.end_time();
  summary["solver"] = {{"steps", res.stats.steps},
                       {"newton_iterations", res.stats.newton_iters},
                       {"rejected_steps", res.stats.rejected_steps},
                       {"jacobians", res.stats.jacobians},
                       {"residual_evaluations", res.stats.residual_evals},
                       {"surface_clamp_events", res.bv_clamp_events}};
  write_json_doc(stem + "_summary.json", summary);
  return res.failed ? 1 : 0;
}

int cmd_synth(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  std::vector<double> grid = cfg.soh_grid;
  if (grid.empty()) {
    for (int i = 0; i < 12; ++i) grid.push_back(0.40 + 0.05 * i);
  }
  std::vector<std::pair<std::string, double>> rates = default_rpt_rates();
  if (!cfg.c_rate_filter.empty()) {
    double v = 0.0;
    const std::string tag = canonical_c_rate_tag(cfg.c_rate_filter, &v);
    rates = {{tag, v}};
  }
  const LadderDataset data =
      synth_ladder(TrajectorySet::nca_reference(), grid, cfg.noise_v, cfg.seed,
                   mat, rates, SimOptions{}, effective_jobs(cfg));

  std::vector<DischargeCurve> curves;
  for (const auto& rung : data.rungs) {
    DischargeCurve c;
    c.cell_id = "synth-" + std::to_string(cfg.seed);
    c.cycle = rung.cycle;
    c.c_rate_tag = rung.c_rate_tag;
    c.c_rate = rung.c_rate;
    c.soh = rung.soh;
    c.t_s = rung.series.t_s;
    c.voltage_v = rung.series.v_v;
    c.current_a.assign(c.t_s.size(), rung.c_rate * mat.params.capacity_ah());
    curves.push_back(std::move(c));
  }
  write_discharge_csv(cfg.out_dir + "/synth_ladder.csv", curves, config);
  json summary;
  summary["config"] = config;
  summary["rungs"] = data.rungs.size();
  summary["dropped_rungs"] = data.dropped_rungs;
  json gen = json::array();
  for (const auto& rung : data.rungs)
    gen.push_back({{"cycle", rung.cycle},
                   {"c_rate", rung.c_rate_tag},
                   {"soh", rung.soh},
                   {"log10_D_s_p", std::log10(rung.theta_gen.d_s_p)},
                   {"log10_D_s_n", std::log10(rung.theta_gen.d_s_n)},
                   {"log10_k_p", std::log10(rung.theta_gen.k_p)},
                   {"log10_k_n", std::log10(rung.theta_gen.k_n)}});
  summary["generating_parameters"] = gen;
  write_json_doc(cfg.out_dir + "/synth_ladder_summary.json", summary);
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  const auto curves = load_curves(cfg);
  const ParameterSpace space = space_for(cfg, mat);

  struct FitOut {
    std::vector<TrajectoryPoint> points;
    json summary;
  };
  std::vector<FitOut> results(curves.size());
  parallel_for(curves.size(), effective_jobs(cfg), [&](std::size_t i) {
    const DischargeCurve& curve = curves[i];
    const Likelihood lik(mat, {curve.to_fit_series()}, cfg.sigma_v);
    const ObjectiveFn obj = make_posterior_objective(lik, space);
    const MapResult map = robust_map(obj, space, Rng::mix(cfg.seed, i));
    const auto var = laplace_variance(obj, space, map.x);
    const auto names = space.free_names();
    FitOut out;
    for (std::size_t k = 0; k < names.size(); ++k) {
      TrajectoryPoint p;
      p.soh = curve.soh;
      p.cycle = curve.cycle;
      p.c_rate = curve.c_rate_tag;
      p.param = names[k];
      p.map_log10 = map.x[k];
      p.var_log10 = var[k];
      out.points.push_back(std::move(p));
    }
    out.summary = {{"cell_id", curve.cell_id},
                   {"cycle", curve.cycle},
                   {"c_rate", curve.c_rate_tag},
                   {"soh", curve.soh},
                   {"chi2", map.chi2},
                   {"rmse_V",
                    std::sqrt(map.chi2 / curve.t_s.size()) * cfg.sigma_v},
                   {"objective", map.value},
                   {"evaluations", map.evals},
                   {"converged", map.converged}};
    results[i] = std::move(out);
  });

  std::vector<TrajectoryPoint> all_points;
  json per_curve = json::array();
  for (const auto& r : results) {
    all_points.insert(all_points.end(), r.points.begin(), r.points.end());
    per_curve.push_back(r.summary);
  }
  write_trajectory_csv(cfg.out_dir + "/fit_results.csv", all_points, config);
  json summary;
  summary["config"] = config;
  summary["curves"] = per_curve;
  write_json_doc(cfg.out_dir + "/fit_summary.json", summary);
  return 0;
}

int cmd_mcmc(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  const auto curves = load_curves(cfg);
  const ParameterSpace space = space_for(cfg, mat);

  std::vector<int> status(curves.size(), 0);
  parallel_for(curves.size(), effective_jobs(cfg), [&](std::size_t i) {
    const DischargeCurve& curve = curves[i];
    const Likelihood lik(mat, {curve.to_fit_series()}, cfg.sigma_v);
    const ObjectiveFn obj = make_posterior_objective(lik, space);
    McmcConfig mc;
    mc.iterations = cfg.iterations;
    mc.burn_in = cfg.burn_in;
    mc.seed = Rng::mix(cfg.seed, i);
    const auto init = space.extract_free(space.fixed_log10);
    const PosteriorChain chain = mcmc_sample(obj, space, mc, init);
    ChainMeta meta{curve.cell_id, curve.cycle, curve.c_rate_tag, curve.c_rate,
                   curve.soh, cfg.sigma_v};
    const std::string stem = cfg.out_dir + "/chain_" + curve_stem(curve);
    write_chain_csv(stem + ".csv", chain, meta, config);
    for (std::size_t k = 0; k < chain.param_names.size(); ++k) {
      const auto hist =
          MarginalHistogram::from_chain(chain, static_cast<int>(k));
      write_histogram_csv(cfg.out_dir + "/hist_" + curve_stem(curve) + "_" +
                              sanitize(chain.param_names[k]) + ".csv",
                          hist, config);
    }
    status[i] = chain.warning ? 1 : 0;
  });
  // Warnings are recorded inside the chain artifacts; they do not fail the
  // command.
  (void)status;
  return 0;
}

int cmd_classify(const RunConfig& cfg) {
  if (cfg.data_paths.empty())
    throw std::runtime_error("classify: no chain files given");
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  std::vector<VerdictRow> rows;
  for (const auto& path : cfg.data_paths) {
    const auto [chain, meta] = read_chain_csv(path);
    for (std::size_t k = 0; k < chain.param_names.size(); ++k) {
      VerdictRow row;
      row.c_rate_tag = meta.c_rate_tag;
      row.soh = meta.soh;
      row.cycle = meta.cycle;
      row.param = chain.param_names[k];
      row.verdict =
          verdict_for(chain, static_cast<int>(k), cfg.alpha, cfg.thresholds);
      rows.push_back(std::move(row));
    }
  }
  write_verdicts_csv(cfg.out_dir + "/verdicts.csv", rows, config);
  return 0;
}

int cmd_grid(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  const auto curves = load_curves(cfg);
  const DischargeCurve& curve = curves.front();

  const auto comma = cfg.pair.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("grid: pair must be 'name,name'");
  const std::string a = cfg.pair.substr(0, comma);
  const std::string b = cfg.pair.substr(comma + 1);
  ParameterSpace space = ParameterSpace::defaults();
  space.fixed_log10 = theta_to_log10(mat.params.theta);
  space.fixed = {true, true, true, true};
  bool found_a = false, found_b = false;
  for (int i = 0; i < 4; ++i) {
    if (a == kThetaNames[i]) {
      space.fixed[i] = false;
      found_a = true;
    }
    if (b == kThetaNames[i]) {
      space.fixed[i] = false;
      found_b = true;
    }
  }
  if (!found_a || !found_b || a == b)
    throw std::invalid_argument("grid: unknown parameter pair " + cfg.pair);

  const Likelihood lik(mat, {curve.to_fit_series()}, cfg.sigma_v);
  const ConfidenceRegion2D region =
      grid_confidence_region(lik, space, GridSpec{cfg.grid_nx, cfg.grid_ny},
                             cfg.alpha, effective_jobs(cfg));
  const std::string stem = "region_" + sanitize(a) + "_" + sanitize(b);
  write_region_csvs(cfg.out_dir, stem, region, config);
  json summary;
  summary["config"] = config;
  summary["curve"] = {{"cell_id", curve.cell_id},
                      {"cycle", curve.cycle},
                      {"c_rate", curve.c_rate_tag},
                      {"soh", curve.soh}};
  summary["chi2_star"] = region.chi2_star;
  summary["threshold"] = region.threshold;
  summary["star"] = {{"x", region.xs[region.star_ix]},
                     {"y", region.ys[region.star_iy]}};
  summary["touches_x_edge"] = region.touches_x_edge();
  summary["touches_y_edge"] = region.touches_y_edge();
  write_json_doc(cfg.out_dir + "/" + stem + "_summary.json", summary);
  return 0;
}

int cmd_soh_fit(const RunConfig& cfg) {
  if (cfg.data_paths.empty())
    throw std::runtime_error("soh-fit: no trajectory files given");
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  std::vector<TrajectoryPoint> pts;
  for (const auto& path : cfg.data_paths) {
    const auto chunk = read_trajectory_csv(path);
    pts.insert(pts.end(), chunk.begin(), chunk.end());
  }
  std::map<std::pair<std::string, std::string>, std::vector<TrajectoryPoint>>
      groups;
  for (const auto& p : pts) groups[{p.param, p.c_rate}].push_back(p);

  json fits_doc = json::array();
  for (const auto& [key, group] : groups) {
    const auto& [param, rate] = key;
    const SohForm form = param == "D_s_n" ? SohForm::Atanh : SohForm::Linear;
    const SohFit fit = fit_soh_trajectory(group, form);
    fits_doc.push_back({{"param", param},
                        {"c_rate", rate},
                        {"form", to_string(fit.form)},
                        {"p0", fit.p0},
                        {"p1", fit.p1},
                        {"p2", fit.p2},
                        {"weighted_residual", fit.weighted_residual},
                        {"fell_back_linear", fit.fell_back_linear},
                        {"soh_lo", fit.soh_lo},
                        {"soh_hi", fit.soh_hi},
                        {"n_points", group.size()}});
    const auto band = uncertainty_band(group);
    write_band_csv(cfg.out_dir + "/band_" + sanitize(param) + "_" +
                       sanitize(rate) + ".csv",
                   band, config);
  }
  json summary;
  summary["config"] = config;
  summary["fits"] = fits_doc;
  write_json_doc(cfg.out_dir + "/soh_fits.json", summary);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const Materials mat = load_materials(cfg.config_path);
  const json config = effective_config(cfg, mat);
  const auto curves = load_curves(cfg);
  const ParameterSpace space = space_for(cfg, mat);

  struct Item {
    std::vector<VerdictRow> rows;
    json summary;
  };
  std::vector<Item> items(curves.size());
  parallel_for(curves.size(), effective_jobs(cfg), [&](std::size_t i) {
    const DischargeCurve& curve = curves[i];
    const Likelihood lik(mat, {curve.to_fit_series()}, cfg.sigma_v);
    const ObjectiveFn obj = make_posterior_objective(lik, space);
    McmcConfig mc;
    mc.iterations = cfg.iterations;
    mc.burn_in = cfg.burn_in;
    mc.seed = Rng::mix(cfg.seed, i);
    const PosteriorChain chain =
        mcmc_sample(obj, space, mc, space.extract_free(space.fixed_log10));
    Item item;
    for (std::size_t k = 0; k < chain.param_names.size(); ++k) {
      VerdictRow row;
      row.c_rate_tag = curve.c_rate_tag;
      row.soh = curve.soh;
      row.cycle = curve.cycle;
      row.param = chain.param_names[k];
      row.verdict =
          verdict_for(chain, static_cast<int>(k), cfg.alpha, cfg.thresholds);
      item.rows.push_back(std::move(row));
    }
    json cls = json::object();
    for (const auto& row : item.rows)
      cls[row.param] = to_string(row.verdict.cls);
    item.summary = {{"cell_id", curve.cell_id},
                    {"cycle", curve.cycle},
                    {"c_rate", curve.c_rate_tag},
                    {"soh", curve.soh},
                    {"acceptance_rate", chain.acceptance_rate},
                    {"warning", chain.warning},
                    {"classes", cls}};
    items[i] = std::move(item);
  });

  std::vector<VerdictRow> rows;
  json per_curve = json::array();
  for (const auto& it : items) {
    rows.insert(rows.end(), it.rows.begin(), it.rows.end());
    per_curve.push_back(it.summary);
  }
  write_verdicts_csv(cfg.out_dir + "/verdicts.csv", rows, config);
  json summary;
  summary["config"] = config;
  summary["curves"] = per_curve;
  write_json_doc(cfg.out_dir + "/report.json", summary);
  return 0;
}

}  // namespace

int run_command(const RunConfig& cfg) {
  try {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "synth") return cmd_synth(cfg);
    if (cfg.command == "fit") return cmd_fit(cfg);
    if (cfg.command == "mcmc") return cmd_mcmc(cfg);
    if (cfg.command == "classify") return cmd_classify(cfg);
    if (cfg.command == "grid") return cmd_grid(cfg);
    if (cfg.command == "soh-fit") return cmd_soh_fit(cfg);
    if (cfg.command == "report") return cmd_report(cfg);
    throw std::invalid_argument("unknown command: " + cfg.command);
  } catch (const std::exception& e) {
    log::error(e.what());
    try {
      fs::create_directories(cfg.out_dir);
      write_json_doc(cfg.out_dir + "/error.json",
                     json{{"command", cfg.command}, {"error", e.what()}});
    } catch (...) {
    }
    return 1;
  }
}

}  // namespace dfnid
