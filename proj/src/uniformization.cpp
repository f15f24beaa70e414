#include "dunif/uniformization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw ValidationError("tolerance eps must lie in (0, 1), got " +
                          std::to_string(eps));
}

void check_distribution(const StateDistribution &p, const UniformizedSystem &sys) {
  if (p.values.size() != sys.P.size())
    throw ValidationError("distribution has " + std::to_string(p.values.size()) +
                          " entries, operator acts on " +
                          std::to_string(sys.P.size()) + " states");
}

void clamp_rounding(std::vector<double> &v) {
  for (double &x : v)
    if (x < 0.0 && x >= -1e-14)
      x = 0.0;
}

int substep_count(double gamma_t, double max_per_step) {
  if (!(gamma_t > max_per_step))
    return 1;
  return static_cast<int>(std::ceil(gamma_t / max_per_step));
}

[[noreturn]] void non_finite(int iteration) {
  throw NumericalError("non-finite value in uniformization series at iteration " +
                       std::to_string(iteration));
}

// One pass of the series over an interval dt with no further splitting.
// Advances p (and dp) in place; returns the iterations taken and the defect.
std::pair<int, long double> series_pass(const UniformizedSystem &sys, double dt,
                                        double eps, std::vector<double> &p,
                                        std::vector<std::vector<double>> *dp,
                                        int iteration_base) {
  const double lambda = sys.gamma * dt;
  const bool with_derivative = dp != nullptr && !dp->empty();
  const PoissonWeights w =
      poisson_weights(lambda, eps, with_derivative ? eps : 0.0);
  const std::size_t n_states = p.size();
  const std::size_t n_params = with_derivative ? dp->size() : 0;
  const int m = static_cast<int>(w.pmf.size()) - 1;

  std::vector<double> q = std::move(p);
  std::vector<double> next(n_states);
  std::vector<double> result(n_states, 0.0);

  std::vector<std::vector<double>> dq, dresult;
  if (with_derivative) {
    dq = std::move(*dp);
    dresult.assign(n_params, std::vector<double>(n_states, 0.0));
  }

  for (int n = 0; n <= m; ++n) {
    const double wn = w.pmf[static_cast<std::size_t>(n)];
    double check = 0.0;
    if (wn != 0.0) {
      for (std::size_t i = 0; i < n_states; ++i) {
        result[i] += wn * q[i];
        check += q[i];
      }
      for (std::size_t j = 0; j < n_params; ++j) {
        const double c = sys.dgamma[j] * (n / sys.gamma - dt);
        const auto &dqj = dq[j];
        auto &dr = dresult[j];
        for (std::size_t i = 0; i < n_states; ++i) {
          dr[i] += wn * (dqj[i] + c * q[i]);
          check += dqj[i];
        }
      }
      if (!std::isfinite(check))
        non_finite(iteration_base + n);
    }
    if (n == m)
      break;
    for (std::size_t j = 0; j < n_params; ++j) {
      sys.P.apply(dq[j], next);
      sys.dP[j].apply(q, next, 1.0, 1.0);
      std::swap(dq[j], next);
    }
    sys.P.apply(q, next);
    std::swap(q, next);
  }

  p = std::move(result);
  if (with_derivative)
    *dp = std::move(dresult);
  return {m, w.defect};
}

SolveReport run(const StateDistribution &p0, const UniformizedSystem &sys,
                const UniformizationOptions &opts, std::vector<double> &p,
                std::vector<std::vector<double>> *dp) {
  check_eps(opts.eps);
  check_distribution(p0, sys);
  if (!(sys.t >= 0.0) || !std::isfinite(sys.t))
    throw ValidationError("solve time must be finite and nonnegative");
  if (!(sys.gamma >= 0.0) || !std::isfinite(sys.gamma))
    throw ValidationError("uniformization rate gamma must be finite and nonnegative");

  p = p0.values;
  SolveReport report;
  report.substeps = 0;
  const double gamma_t = sys.gamma * sys.t;
  if (gamma_t == 0.0) {
    // exp(0) = Id, or Q = 0: nothing moves and derivatives carry over.
    report.substeps = 1;
    return report;
  }

  const int steps = substep_count(gamma_t, opts.max_gamma_t_per_step);
  const double dt = sys.t / steps;
  const double step_eps = opts.eps / steps;
  long double kept = 1.0L;
  for (int s = 0; s < steps; ++s) {
    const auto [iterations, defect] =
        series_pass(sys, dt, step_eps, p, dp, report.iterations);
    report.iterations += iterations;
    kept *= 1.0L - defect;
    ++report.substeps;
  }
  report.mass_defect = static_cast<double>(1.0L - kept);
  clamp_rounding(p);
  return report;
}

} // namespace

StateDistribution StateDistribution::delta(std::vector<std::size_t> grid_shape,
                                           std::size_t index) {
  StateDistribution d = zeros(std::move(grid_shape));
  if (index >= d.values.size())
    throw ValidationError("delta index " + std::to_string(index) +
                          " outside state space of size " +
                          std::to_string(d.values.size()));
  d.values[index] = 1.0;
  return d;
}

StateDistribution StateDistribution::zeros(std::vector<std::size_t> grid_shape) {
  std::size_t n = 1;
  for (std::size_t k : grid_shape)
    n *= k;
  return {std::vector<double>(n, 0.0), std::move(grid_shape)};
}

double StateDistribution::total() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

UniformizedSystem make_system(const TensorOperator &Q,
                              std::span<const TensorOperator> dQ, double gamma,
                              std::span<const double> dgamma, double t) {
  if (dQ.size() != dgamma.size())
    throw ValidationError("need one gamma derivative per generator derivative");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ValidationError("uniformization rate gamma must be finite and nonnegative");

  UniformizedSystem sys{gamma > 0.0 ? scale_shift(Q, 1.0 / gamma, 1.0)
                                    : scale_shift(Q, 0.0, 1.0),
                        {},
                        gamma,
                        std::vector<double>(dgamma.begin(), dgamma.end()),
                        t};
  for (const auto &dq : dQ) {
    if (gamma > 0.0)
      sys.dP.push_back(linear_combination(
          -sys.dgamma[sys.dP.size()] / (gamma * gamma), Q, 1.0 / gamma, dq));
    else
      sys.dP.emplace_back(Q.grid_shape());
  }
  return sys;
}

UniformizedSystem make_system(const TensorOperator &Q, double gamma, double t) {
  return make_system(Q, {}, gamma, {}, t);
}

PoissonWeights poisson_weights(double lambda, double eps, double moment_eps) {
  check_eps(eps);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValidationError("Poisson mean must be finite and nonnegative");
  PoissonWeights w;
  if (lambda == 0.0) {
    w.pmf = {1.0};
    return w;
  }

  const long double lam = lambda;
  const long double log_lam = std::log(lam);
  const long double limit = lam + 60.0L * std::sqrt(lam) + 1000.0L;
  long double cumulative = 0.0L;
  for (long n = 0;; ++n) {
    const long double pmf =
        std::exp(-lam + n * log_lam - std::lgamma(static_cast<long double>(n) + 1));
    cumulative += pmf;
    w.pmf.push_back(static_cast<double>(pmf));

    // 1 - cumulative loses digits deep in the tail; past the mode the
    // geometric bound pmf(n+1) / (1 - λ/(n+2)) is tighter and exact enough.
    long double tail = std::max(0.0L, 1.0L - cumulative);
    if (n + 2 > lam) {
      const long double next = pmf * lam / (n + 1);
      tail = std::min(tail, next / (1.0L - lam / (n + 2)));
    }
    const bool mass_ok = tail < eps;
    const bool moment_ok = moment_eps <= 0.0 || lam * (tail + pmf) < moment_eps;
    if (mass_ok && moment_ok) {
      w.defect = tail;
      return w;
    }
    if (n > limit)
      throw NumericalError("Poisson truncation did not converge for mean " +
                           std::to_string(lambda));
  }
}

int poisson_steps(double gamma, double t, double eps) {
  return static_cast<int>(poisson_weights(gamma * t, eps).pmf.size()) - 1;
}

UniformizeResult uniformize(const StateDistribution &p0,
                            const UniformizedSystem &sys, double eps) {
  UniformizationOptions opts;
  opts.eps = eps;
  return uniformize(p0, sys, opts);
}

UniformizeResult uniformize(const StateDistribution &p0,
                            const UniformizedSystem &sys,
                            const UniformizationOptions &opts) {
  UniformizeResult r;
  r.report = run(p0, sys, opts, r.p.values, nullptr);
  r.p.grid_shape = p0.grid_shape;
  return r;
}

DiffUniformizeResult diff_uniformize(const StateDistribution &p0,
                                     const UniformizedSystem &sys, double eps) {
  UniformizationOptions opts;
  opts.eps = eps;
  return diff_uniformize(p0, sys, opts);
}

DiffUniformizeResult diff_uniformize(const StateDistribution &p0,
                                     const UniformizedSystem &sys,
                                     const UniformizationOptions &opts,
                                     std::span<const StateDistribution> dp0) {
  const std::size_t n_params = sys.dP.size();
  if (sys.dgamma.size() != n_params)
    throw ValidationError("need one gamma derivative per parameter");
  if (!dp0.empty() && dp0.size() != n_params)
    throw ValidationError("initial derivative count does not match parameters");

  std::vector<std::vector<double>> dp(n_params);
  for (std::size_t j = 0; j < n_params; ++j) {
    if (dp0.empty()) {
      dp[j].assign(p0.values.size(), 0.0);
    } else {
      if (dp0[j].values.size() != p0.values.size())
        throw ValidationError("initial derivative has the wrong length");
      dp[j] = dp0[j].values;
    }
  }

  DiffUniformizeResult r;
  r.report = run(p0, sys, opts, r.p.values, &dp);
  r.p.grid_shape = p0.grid_shape;
  for (auto &d : dp)
    r.dp.push_back({std::move(d), p0.grid_shape});
  return r;
}

std::vector<Snapshot> forward_solve(const TensorOperator &Q, double gamma,
                                    const StateDistribution &p0,
                                    std::span<const double> times, double eps) {
  std::vector<Snapshot> out;
  StateDistribution current = p0;
  double t_prev = 0.0;
  SolveReport total;
  total.substeps = 0;
  long double kept = 1.0L;
  const UniformizedSystem base = make_system(Q, gamma, 0.0);
  for (double t : times) {
    if (!(t >= t_prev))
      throw ValidationError("snapshot times must be nonnegative and nondecreasing");
    UniformizedSystem sys = base;
    sys.t = t - t_prev;
    auto r = uniformize(current, sys, eps);
    total.iterations += r.report.iterations;
    total.substeps += r.report.substeps;
    kept *= 1.0L - r.report.mass_defect;
    total.mass_defect = static_cast<double>(1.0L - kept);
    current = std::move(r.p);
    out.push_back({t, current, total});
    t_prev = t;
  }
  return out;
}

} // namespace dunif
