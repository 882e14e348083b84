#pragma once

#include <cstddef>
#include <vector>

namespace dfnid {

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

double chi2_cdf(int df, double x);

// Inverse CDF of the chi-squared distribution, accurate to ~1e-10.
// Throws std::invalid_argument for df < 1 or p outside (0,1).
double chi2_quantile(int df, double p);

double normal_logpdf(double x, double mean, double stddev);

// Equal-tailed sample quantile with linear interpolation (R type 7).
// The input must be sorted ascending.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
double ks_2sample_pvalue(std::vector<double> a, std::vector<double> b);

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // unbiased

}  // namespace dfnid
