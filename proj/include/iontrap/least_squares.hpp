#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) for small, fixed-size parameter
// vectors with analytic Jacobians.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <span>

#include "iontrap/error.hpp"

namespace iontrap::fit {

template <int N>
using Params = std::array<double, N>;

template <int N>
struct LmOptions {
  int max_iterations = 200;
  double relative_step = 1e-8;
  double initial_damping = 1e-3;
  /// Parameter magnitude used to judge convergence when |p_i| is near zero.
  Params<N> typical{};
  Params<N> lower;
  Params<N> upper;

  LmOptions() {
    typical.fill(1.0);
    lower.fill(-std::numeric_limits<double>::infinity());
    upper.fill(std::numeric_limits<double>::infinity());
  }
};

template <int N>
struct LmResult {
  Params<N> params{};
  Eigen::Matrix<double, N, N> covariance = Eigen::Matrix<double, N, N>::Zero();
  double ssr = 0.0;                // weighted sum of squared residuals
  double residual_variance = 0.0;  // ssr / (n - N)
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] double sigma(int i) const { return std::sqrt(std::max(0.0, covariance(i, i))); }
};

/// Minimises sum_i w_i (y_i - model(x_i, p))^2. `model(x, p, grad)` returns
/// the model value and writes d model / d p into grad. The covariance is
/// (J^T W J)^-1 scaled by the residual variance. Weights may be empty.
template <int N, class Model>
[[nodiscard]] LmResult<N> levenberg_marquardt(const Model& model, std::span<const double> x,
                                              std::span<const double> y, std::span<const double> w,
                                              Params<N> p, const LmOptions<N>& opt = {}) {
  using Mat = Eigen::Matrix<double, N, N>;
  using Vec = Eigen::Matrix<double, N, 1>;
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(N)) throw PreconditionError("fewer data points than free parameters");

  auto clamp = [&](Params<N>& q) {
    for (int i = 0; i < N; ++i) q[i] = std::min(std::max(q[i], opt.lower[i]), opt.upper[i]);
  };
  auto evaluate = [&](const Params<N>& q, Mat* jtj, Vec* jtr) {
    double ssr = 0.0;
    if (jtj) jtj->setZero();
    if (jtr) jtr->setZero();
    Params<N> g{};
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      const double r = y[i] - model(x[i], q, g);
      ssr += wi * r * r;
      if (jtj) {
        const Eigen::Map<const Vec> gv(g.data());
        jtj->noalias() += wi * gv * gv.transpose();
        jtr->noalias() += wi * r * gv;
      }
    }
    return ssr;
  };

  clamp(p);
  LmResult<N> res;
  Mat jtj;
  Vec jtr;
  double ssr = evaluate(p, &jtj, &jtr);
  double damping = opt.initial_damping;

  for (res.iterations = 1; res.iterations <= opt.max_iterations; ++res.iterations) {
    Mat a = jtj;
    for (int i = 0; i < N; ++i) a(i, i) += damping * std::max(jtj(i, i), 1e-300);
    const Vec step = a.ldlt().solve(jtr);

    Params<N> trial = p;
    for (int i = 0; i < N; ++i) trial[i] += step(i);
    clamp(trial);

    bool small = true;
    for (int i = 0; i < N; ++i) {
      const double scale = std::max(std::abs(p[i]), std::abs(opt.typical[i]));
      if (!(std::abs(trial[i] - p[i]) <= opt.relative_step * scale)) small = false;
    }

    const double trial_ssr = evaluate(trial, nullptr, nullptr);
    if (std::isfinite(trial_ssr) && trial_ssr <= ssr) {
      p = trial;
      ssr = evaluate(p, &jtj, &jtr);
      damping = std::max(damping * 0.1, 1e-12);
      if (small) {
        res.converged = true;
        break;
      }
    } else {
      if (small) {
        res.converged = true;
        break;
      }
      damping *= 10.0;
      if (damping > 1e16) break;
    }
  }
  res.iterations = std::min(res.iterations, opt.max_iterations);

  res.params = p;
  res.ssr = ssr;
  res.residual_variance = ssr / static_cast<double>(n - N);
  // Column scales can differ by many orders (phase vs offset); equilibrate
  // before the rank test.
  Vec d;
  for (int i = 0; i < N; ++i) d(i) = jtj(i, i) > 0.0 ? 1.0 / std::sqrt(jtj(i, i)) : 1.0;
  const Mat scaled = d.asDiagonal() * jtj * d.asDiagonal();
  Eigen::FullPivLU<Mat> lu(scaled);
  if (lu.isInvertible())
    res.covariance = d.asDiagonal() * lu.inverse() * d.asDiagonal() * res.residual_variance;
  else
    res.covariance.setConstant(std::numeric_limits<double>::infinity());
  return res;
}

}  // namespace iontrap::fit
