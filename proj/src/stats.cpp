#include "dfnid/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dfnid {

namespace {

// Series expansion of P(a,x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) = 1 - P(a,x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0)
    throw std::invalid_argument("gamma_p: domain");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(int df, double x) {
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(int df, double p) {
  if (df < 1) throw std::invalid_argument("chi2_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("chi2_quantile: p must be in (0,1)");

  // Wilson-Hilferty starting point, then Newton on the CDF with bisection
  // safeguarding.
  const double nu = static_cast<double>(df);
  const double z = [&] {
    // Acklam-style rational approximation of the normal quantile is more
    // than enough for a starting point.
    const double t = p < 0.5 ? std::sqrt(-2.0 * std::log(p))
                             : std::sqrt(-2.0 * std::log(1.0 - p));
    double x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                       (1.0 + 1.432788 * t + 0.189269 * t * t +
                        0.001308 * t * t * t);
    return p < 0.5 ? -x : x;
  }();
  const double wh = 1.0 - 2.0 / (9.0 * nu) + z * std::sqrt(2.0 / (9.0 * nu));
  double x = nu * wh * wh * wh;
  if (!(x > 0.0)) x = 0.5 * nu;

  double lo = 0.0, hi = std::max(4.0 * x, nu + 40.0);
  while (chi2_cdf(df, hi) < p) hi *= 2.0;

  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(df, x) - p;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double logpdf = -0.5 * x + (0.5 * nu - 1.0) * std::log(x) -
                          0.5 * nu * std::log(2.0) - std::lgamma(0.5 * nu);
    const double pdf = std::exp(logpdf);
    double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) < 1e-12 * (1.0 + x)) return next;
    x = next;
  }
  return x;
}

double normal_logpdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) -
         0.91893853320467274178032973640562;  // log(sqrt(2*pi))
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * (sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  const double frac = h - i;
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

double ks_2sample_pvalue(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_2sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double va = a[ia], vb = b[ib];
    if (va <= vb) ++ia;
    if (vb <= va) ++ib;
    d = std::max(d, std::fabs(ia / na - ib / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Kolmogorov tail sum.
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) *
                        std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace dfnid
