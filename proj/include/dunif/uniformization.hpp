#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dunif/kronop.hpp"

namespace dunif {

inline constexpr double kDefaultEps = 1e-10;

/// Probability vector over a rectangular grid (first axis slowest).
struct StateDistribution {
  std::vector<double> values;
  std::vector<std::size_t> grid_shape;

  static StateDistribution delta(std::vector<std::size_t> grid_shape,
                                 std::size_t index);
  static StateDistribution zeros(std::vector<std::size_t> grid_shape);

  double total() const;
};

/// Uniformized generator P = Q/gamma + Id together with its parameter
/// derivatives dP/dθ_j = -(γ'_j/γ²) Q + (1/γ) dQ/dθ_j.
struct UniformizedSystem {
  TensorOperator P;
  std::vector<TensorOperator> dP;
  double gamma = 0.0;
  std::vector<double> dgamma;
  double t = 0.0;
};

/// Builds P (and dP when derivatives are given) from a generator.  gamma must
/// bound max |Q_xx|; gamma == 0 is only legal for the zero generator.
UniformizedSystem make_system(const TensorOperator &Q,
                              std::span<const TensorOperator> dQ, double gamma,
                              std::span<const double> dgamma, double t);
UniformizedSystem make_system(const TensorOperator &Q, double gamma, double t);

struct SolveReport {
  int iterations = 0;      // matrix-vector recursion steps, summed over substeps
  double mass_defect = 0;  // Poisson truncation defect of the whole solve
  int substeps = 1;
};

struct UniformizationOptions {
  double eps = kDefaultEps;
  /// Largest γ·Δt handled in one pass before the interval is split.  Set to
  /// infinity to force a single pass (weights are carried in long double,
  /// which is representable up to γ·t of roughly 10^4).
  double max_gamma_t_per_step = 200.0;
};

struct UniformizeResult {
  StateDistribution p;
  SolveReport report;
};

struct DiffUniformizeResult {
  StateDistribution p;
  std::vector<StateDistribution> dp;
  SolveReport report;
};

/// exp(tQ) p0 by the uniformization series.
UniformizeResult uniformize(const StateDistribution &p0,
                            const UniformizedSystem &sys,
                            double eps = kDefaultEps);
UniformizeResult uniformize(const StateDistribution &p0,
                            const UniformizedSystem &sys,
                            const UniformizationOptions &opts);

/// exp(tQ) p0 and its derivative for every parameter of `sys`.  `dp0`, when
/// nonempty, holds the derivative of p0 itself (one vector per parameter).
DiffUniformizeResult diff_uniformize(const StateDistribution &p0,
                                     const UniformizedSystem &sys,
                                     double eps = kDefaultEps);
DiffUniformizeResult diff_uniformize(const StateDistribution &p0,
                                     const UniformizedSystem &sys,
                                     const UniformizationOptions &opts,
                                     std::span<const StateDistribution> dp0 = {});

/// Smallest m with 1 - Σ_{n<=m} Poisson(n; γt) < eps.
int poisson_steps(double gamma, double t, double eps);

/// Truncated Poisson(λ) weights for n = 0..m, with m the smallest index whose
/// upper tail is below eps.  When `moment_eps` is positive the series is
/// extended until the first-moment tail Σ_{n>m} n·pmf(n) is below it as well.
struct PoissonWeights {
  std::vector<double> pmf;
  long double defect = 0;  // 1 - Σ pmf, the mass missing from the series
};
PoissonWeights poisson_weights(double lambda, double eps, double moment_eps = 0);

/// Forward solve of an arbitrary generator reporting distributions at the
/// requested (nondecreasing, nonnegative) times.
struct Snapshot {
  double time;
  StateDistribution p;
  SolveReport report;
};
std::vector<Snapshot> forward_solve(const TensorOperator &Q, double gamma,
                                    const StateDistribution &p0,
                                    std::span<const double> times,
                                    double eps = kDefaultEps);

} // namespace dunif
