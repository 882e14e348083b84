#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dfnid/degrade.hpp"
#include "dfnid/rng.hpp"

using namespace dfnid;

namespace {

std::vector<TrajectoryPoint> points_on_atanh(double p0, double p1, double p2,
                                             int n, const char* rate = "C/5",
                                             const char* param = "D_s_n") {
  std::vector<TrajectoryPoint> pts;
  for (int i = 0; i < n; ++i) {
    TrajectoryPoint p;
    p.soh = 0.40 + 0.55 * i / (n - 1);
    p.cycle = i * 100;
    p.c_rate = rate;
    p.param = param;
    p.map_log10 = p0 + p1 * std::atanh(p2 * (p.soh - 0.5));
    p.var_log10 = 0.01;
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST_CASE("atanh trajectory coefficients are recovered exactly") {
  const auto pts = points_on_atanh(-14.75, 0.6757, 2.067, 12);
  const SohFit fit = fit_soh_trajectory(pts, SohForm::Atanh);
  CHECK_FALSE(fit.fell_back_linear);
  CHECK(fit.p0 == doctest::Approx(-14.75).epsilon(1e-4));
  CHECK(fit.p1 == doctest::Approx(0.6757).epsilon(1e-4));
  CHECK(fit.p2 == doctest::Approx(2.067).epsilon(1e-4));
}

TEST_CASE("linear form through two-ish points is the interpolating line") {
  std::vector<TrajectoryPoint> pts;
  for (int i = 0; i < 5; ++i) {
    TrajectoryPoint p;
    p.soh = 0.4 + 0.1 * i;
    p.param = "k_n";
    p.c_rate = "1C";
    p.map_log10 = -14.36 + 3.409 * p.soh;
    p.var_log10 = 0.04;
    pts.push_back(p);
  }
  const SohFit fit = fit_soh_trajectory(pts, SohForm::Linear);
  CHECK(fit.p0 == doctest::Approx(-14.36).epsilon(1e-10));
  CHECK(fit.p1 == doctest::Approx(3.409).epsilon(1e-10));
  CHECK(fit.weighted_residual < 1e-12);
}

TEST_CASE("inverse-variance weighting pulls toward low-variance points") {
  // Three-point hand-solved weighted regression: the outlier at soh=0.9
  // carries 100x the variance.
  std::vector<TrajectoryPoint> pts;
  auto add = [&](double soh, double y, double var) {
    TrajectoryPoint p;
    p.soh = soh;
    p.param = "k_n";
    p.c_rate = "C/5";
    p.map_log10 = y;
    p.var_log10 = var;
    pts.push_back(p);
  };
  add(0.3, -12.0, 0.01);
  add(0.5, -11.8, 0.01);
  add(0.9, -10.0, 1.00);  // outlier, heavily down-weighted
  add(0.4, -11.9, 0.01);
  add(0.6, -11.7, 0.01);

  // Closed-form weighted least squares computed independently.
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double w = 1.0 / p.var_log10;
    sw += w;
    sx += w * p.soh;
    sy += w * p.map_log10;
    sxx += w * p.soh * p.soh;
    sxy += w * p.soh * p.map_log10;
  }
  const double det = sw * sxx - sx * sx;
  const double p0 = (sy * sxx - sx * sxy) / det;
  const double p1 = (sw * sxy - sx * sy) / det;

  const SohFit fit = fit_soh_trajectory(pts, SohForm::Linear);
  CHECK(fit.p0 == doctest::Approx(p0).epsilon(1e-12));
  CHECK(fit.p1 == doctest::Approx(p1).epsilon(1e-12));
  // The slope stays near the low-variance trend, far from the outlier pull.
  CHECK(fit.p1 < 1.5);
}

TEST_CASE("weighted optimum is a local minimum") {
  const auto pts = points_on_atanh(-14.0, 0.66, 2.1, 10);
  // Perturb the data so the residual is nonzero.
  auto noisy = pts;
  Rng rng(3);
  for (auto& p : noisy) p.map_log10 += 0.01 * rng.normal();
  const SohFit fit = fit_soh_trajectory(noisy, SohForm::Atanh);
  auto ss_for = [&](double p0, double p1, double p2) {
    double ss = 0.0;
    for (const auto& p : noisy) {
      const double r = p.map_log10 - (p0 + p1 * std::atanh(p2 * (p.soh - 0.5)));
      ss += r * r / p.var_log10;
    }
    return ss;
  };
  const double base = ss_for(fit.p0, fit.p1, fit.p2);
  CHECK(base == doctest::Approx(fit.weighted_residual).epsilon(1e-9));
  for (double f : {0.99, 1.01}) {
    CHECK(ss_for(fit.p0 * f, fit.p1, fit.p2) > base);
    CHECK(ss_for(fit.p0, fit.p1 * f, fit.p2) > base);
    CHECK(ss_for(fit.p0, fit.p1, fit.p2 * f) > base);
  }
}

TEST_CASE("fit and eval round trip reproduces generating points") {
  const auto pts = points_on_atanh(-13.71, 0.6368, 2.190, 12, "2C");
  const SohFit fit = fit_soh_trajectory(pts, SohForm::Atanh);
  for (const auto& p : pts)
    CHECK(eval_soh_trajectory(fit, p.soh) ==
          doctest::Approx(p.map_log10).epsilon(1e-4));
}

TEST_CASE("trajectory evaluation honors the atanh domain") {
  SohFit fit;
  fit.form = SohForm::Atanh;
  fit.p0 = -14.75;
  fit.p1 = 0.6757;
  fit.p2 = 2.067;
  CHECK(eval_soh_trajectory(fit, 0.5) == doctest::Approx(-14.75));
  CHECK_THROWS_AS(eval_soh_trajectory(fit, 0.999), std::domain_error);
  SohFit lin;
  lin.form = SohForm::Linear;
  lin.p0 = -12.18;
  lin.p1 = 1.135;
  CHECK(eval_soh_trajectory(lin, 0.0) == doctest::Approx(-12.18));
  // Linearity: equal increments move the value by exactly p1 * delta.
  const double d = eval_soh_trajectory(lin, 0.61) - eval_soh_trajectory(lin, 0.6);
  CHECK(d == doctest::Approx(1.135 * 0.01).epsilon(1e-9));
}

TEST_CASE("ewma smoothing") {
  CHECK(ewma_smooth({0.0, 1.0, 0.0}, 0.5) ==
        std::vector<double>{0.0, 0.5, 0.25});
  const std::vector<double> series{3.0, -1.0, 2.5, 0.0, 4.0};
  CHECK(ewma_smooth(series, 1.0) == series);
  const std::vector<double> flat(7, 2.5);
  CHECK(ewma_smooth(flat, 0.3) == flat);
  CHECK_THROWS_AS(ewma_smooth({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(ewma_smooth({1.0}, 0.0), std::invalid_argument);

  // Shift equivariance.
  Rng rng(8);
  std::vector<double> xs(50), shifted(50);
  for (int i = 0; i < 50; ++i) {
    xs[i] = rng.normal();
    shifted[i] = xs[i] + 3.7;
  }
  const auto a = ewma_smooth(xs, 0.2);
  const auto b = ewma_smooth(shifted, 0.2);
  for (int i = 0; i < 50; ++i)
    CHECK(b[i] == doctest::Approx(a[i] + 3.7).epsilon(1e-12));
}

TEST_CASE("reference trajectories evaluate to the tabulated anchors") {
  const TrajectorySet set = TrajectorySet::nca_reference();
  const SohFit* dsn = set.find("D_s_n", "C/5");
  REQUIRE(dsn != nullptr);
  CHECK(eval_soh_trajectory(*dsn, 0.5) == doctest::Approx(-14.75));
  const SohFit* kn = set.find("k_n", "C/5");
  REQUIRE(kn != nullptr);
  CHECK(kn->p0 == doctest::Approx(-12.18));
  CHECK(kn->p1 == doctest::Approx(1.135));

  // All three fitted parameters are non-decreasing in SOH over the usable
  // range: degradation lowers them. The atanh forms cap their own domain
  // (the steepest slope constant reaches the pole just below SOH = 0.96).
  for (const char* param : {"D_s_n", "D_s_p", "k_n"}) {
    for (const char* rate : {"C/5", "1C", "2C"}) {
      const SohFit* f = set.find(param, rate);
      REQUIRE(f != nullptr);
      double hi = 0.97;
      if (f->form == SohForm::Atanh) hi = std::min(hi, 0.5 + 0.99 / f->p2);
      double prev = eval_soh_trajectory(*f, 0.25);
      for (double soh = 0.26; soh <= hi; soh += 0.01) {
        const double v = eval_soh_trajectory(*f, soh);
        CHECK(v >= prev - 1e-12);
        prev = v;
      }
    }
  }
}

TEST_CASE("synthetic ladder is deterministic and monotone in capacity") {
  const Materials base = Materials::nca_defaults();
  const TrajectorySet fits = TrajectorySet::nca_reference();
  const std::vector<double> sohs{0.95, 0.8, 0.65, 0.5};
  const auto a = synth_ladder(fits, sohs, 0.005, 42, base,
                              {{"C/5", 0.2}}, SimOptions{}, 1);
  const auto b = synth_ladder(fits, sohs, 0.005, 42, base,
                              {{"C/5", 0.2}}, SimOptions{}, 1);
  REQUIRE(a.rungs.size() == 4);
  REQUIRE(b.rungs.size() == 4);
  for (std::size_t i = 0; i < a.rungs.size(); ++i) {
    REQUIRE(a.rungs[i].series.v_v.size() == b.rungs[i].series.v_v.size());
    for (std::size_t j = 0; j < a.rungs[i].series.v_v.size(); ++j)
      CHECK(a.rungs[i].series.v_v[j] == b.rungs[i].series.v_v[j]);
  }
  // Pristine-first ordering with monotone decreasing discharge duration.
  for (std::size_t i = 1; i < a.rungs.size(); ++i) {
    CHECK(a.rungs[i].soh < a.rungs[i - 1].soh);
    CHECK(a.rungs[i].series.t_s.back() < a.rungs[i - 1].series.t_s.back());
  }
  // Generating k_p pinned to the non-limiting constant.
  for (const auto& r : a.rungs) CHECK(r.theta_gen.k_p == kFixedKp);
}

TEST_CASE("identity-fit rmse comparison is symmetric") {
  const Materials base = Materials::nca_defaults();
  const TrajectorySet fits = TrajectorySet::nca_reference();
  const auto data =
      synth_ladder(fits, {0.9, 0.7, 0.5}, 0.0, 1, base, {{"1C", 1.0}});
  REQUIRE(data.rungs.size() == 3);
  // theta_star equal to the generating values: both columns identical.
  std::vector<RegressedParams> star;
  for (const auto& r : data.rungs) star.push_back(r.theta_gen);
  const RmseComparison cmp = compare_rmse(data, star, fits, base);
  for (const auto& e : cmp.entries) {
    CHECK_FALSE(e.excluded);
    CHECK(e.rmse_star == doctest::Approx(e.rmse_fit).epsilon(1e-12));
    // Noiseless ladder regenerated from its own parameters reproduces the
    // curve to solver tolerance (the step sequence near the final time
    // differs between generation and replay).
    CHECK(e.rmse_star < 1e-3);
  }
  CHECK(cmp.ratio() == doctest::Approx(1.0));
}
