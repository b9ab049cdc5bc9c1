#pragma once

// Naive textbook EM for a 2-component 1-d Gaussian mixture. Same contract as
// multimix::gmm_fit (median-split init, variance floor, log-likelihood
// recorded before each M step) but every probability is computed with plain
// density arithmetic instead of log-space accumulation, so agreement between
// the two is a real cross-check rather than the same code twice.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace refem {

struct Fit {
  std::array<double, 2> pi{};
  std::array<double, 2> mu{};
  std::array<double, 2> var{};
  std::vector<double> ll_trace;
  int goodness_component = 0;
};

inline double normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * 3.14159265358979323846 * var);
}

inline Fit fit(const std::vector<double>& xs, int max_iters = 100, double tol = 1e-6,
               double var_floor = 1e-6) {
  const std::size_t n = xs.size();
  Fit f;

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t lo = (n + 1) / 2;
  const std::size_t bounds[3] = {0, lo, n};
  for (int k = 0; k < 2; ++k) {
    const std::size_t b = bounds[k], e = bounds[k + 1];
    const double cnt = static_cast<double>(e - b);
    double mean = 0.0;
    for (std::size_t i = b; i < e; ++i) mean += sorted[i];
    mean /= cnt;
    double var = 0.0;
    for (std::size_t i = b; i < e; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
    var /= cnt;
    f.pi[k] = cnt / static_cast<double>(n);
    f.mu[k] = mean;
    f.var[k] = std::max(var, var_floor);
  }

  std::vector<std::array<double, 2>> resp(n);
  for (int iter = 0; iter < max_iters; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w0 = f.pi[0] * normal_pdf(xs[i], f.mu[0], f.var[0]);
      const double w1 = f.pi[1] * normal_pdf(xs[i], f.mu[1], f.var[1]);
      const double tot = w0 + w1;
      ll += std::log(tot);
      resp[i][0] = w0 / tot;
      resp[i][1] = w1 / tot;
    }
    const bool converged = !f.ll_trace.empty() && ll - f.ll_trace.back() < tol;
    f.ll_trace.push_back(ll);
    if (converged) break;
    for (int k = 0; k < 2; ++k) {
      double rsum = 0.0, xsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        rsum += resp[i][k];
        xsum += resp[i][k] * xs[i];
      }
      f.pi[k] = rsum / static_cast<double>(n);
      f.mu[k] = xsum / rsum;
      double vsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) vsum += resp[i][k] * (xs[i] - f.mu[k]) * (xs[i] - f.mu[k]);
      f.var[k] = std::max(vsum / rsum, var_floor);
    }
  }
  f.goodness_component = f.mu[0] <= f.mu[1] ? 0 : 1;
  return f;
}

inline double goodness(const Fit& f, double x) {
  const double w0 = f.pi[0] * normal_pdf(x, f.mu[0], f.var[0]);
  const double w1 = f.pi[1] * normal_pdf(x, f.mu[1], f.var[1]);
  return (f.goodness_component == 0 ? w0 : w1) / (w0 + w1);
}

}  // namespace refem
