#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ppft/matrix.hpp"
#include "ppft/noise.hpp"
#include "ppft/rng.hpp"

namespace ppft {

// Empirical verification tools for the mechanism's distributional and
// metric-DP claims. These run against the samplers themselves, not against
// any cached expectations, so they double as regression tests for the RNG.

// One-sample Kolmogorov-Smirnov statistic sup_x |F_n(x) - F(x)|.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n));
  }
  return d;
}

inline double gamma_cdf(double shape, double rate, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, rate * x);
}

// KS distance between the empirical norm of `samples` l2-Laplace draws and
// the Gamma(d_e, epsilon) radius law.
inline double radius_law_ks(int d_e, double epsilon, std::size_t samples, std::uint64_t seed) {
  std::vector<double> norms;
  norms.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    CounterRng rng(seed, t);
    norms.push_back(l2_norm(sample_l2_laplace(d_e, epsilon, rng)));
  }
  return ks_statistic(std::move(norms),
                      [d_e, epsilon](double x) { return gamma_cdf(d_e, epsilon, x); });
}

struct MetricDpScan {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_slack = -1e300;  // max of |log ratio| - eps*||u-u'|| over trials; <= tol when clean
};

// Random-triple scan of the per-slot metric-DP bound: draw u, u' and a
// pre-normalization output y from the mechanism at u, then check
// |ln p(y|u) - ln p(y|u')| <= eps * ||u - u'|| + tol. Dimensions and eps
// vary per trial.
inline MetricDpScan metric_dp_scan(std::size_t trials, std::uint64_t seed, int d_e_min = 2,
                                   int d_e_max = 64, double tol = 1e-9) {
  MetricDpScan scan;
  scan.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    CounterRng rng(seed, t);
    const int d_e =
        d_e_min + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(d_e_max - d_e_min + 1));
    const double eps = std::exp(std::log(0.1) + rng.next_double() * (std::log(100.0) - std::log(0.1)));
    std::vector<double> u(static_cast<std::size_t>(d_e));
    std::vector<double> u_prime(static_cast<std::size_t>(d_e));
    for (auto& v : u) v = rng.next_normal();
    for (auto& v : u_prime) v = rng.next_normal();

    const auto noise = sample_l2_laplace(d_e, eps, rng);
    std::vector<double> y(u.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = u[i] + noise[i];

    const double ratio = log_density_ratio(y, u, u_prime, eps);
    const double bound = eps * l2_dist(u, u_prime);
    const double slack = std::abs(ratio) - bound;
    scan.max_slack = std::max(scan.max_slack, slack);
    if (slack > tol) ++scan.violations;
  }
  return scan;
}

}  // namespace ppft
