#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dunif/observations.hpp"
#include "dunif/sir.hpp"
#include "dunif/uniformization.hpp"

namespace dunif {

using Vec2 = std::array<double, 2>;

struct LogLikelihood {
  double value = 0.0;
  Vec2 grad{};                  // d/dlog α, d/dlog β
  bool zero_probability = false;  // some observed transition has probability 0
};

/// Log-likelihood of the series under the stochastic SIR model and its
/// gradient in (log α, log β).  Each transition is solved on its restricted
/// window unless `restricted` is false, in which case the full (N+1)^2 grid
/// is used.
LogLikelihood log_likelihood(const SirParams &params, const ObservationSeries &obs,
                             double eps = kDefaultEps, bool restricted = true);

struct AscentConfig {
  double grad_tol = 1e-4;
  int max_iter = 500;
  double initial_step = 0.1;  // length of the first trial move in log space
  double armijo = 1e-4;
  int max_backtracks = 50;
  double eps = kDefaultEps;
};

struct MapFit {
  SirParams params;
  double log_likelihood = 0.0;
  Vec2 grad{};
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // log-likelihood after each accepted step
};

/// Gradient ascent with backtracking (Armijo) line search in log space.
MapFit fit_map(const ObservationSeries &obs, const SirParams &init,
               const AscentConfig &cfg = {});

struct LogDensity {
  double value;  // -inf for points with zero density
  Vec2 grad;
};
using LogDensityFn = std::function<LogDensity(const Vec2 &)>;

struct Box {
  Vec2 lower;
  Vec2 upper;
  bool contains(const Vec2 &x) const {
    return x[0] >= lower[0] && x[0] <= upper[0] && x[1] >= lower[1] &&
           x[1] <= upper[1];
  }
};

struct HmcConfig {
  int n_chains = 10;
  int chain_len = 100;
  int burn_in = 10;
  double step_size = 0.05;
  int n_leapfrog = 10;
  Box prior_box{{-6.907755278982137, -6.907755278982137},
                {2.302585092994046, 2.302585092994046}};  // [log 0.001, log 10]^2
  std::uint64_t seed = 1;
  /// Starting point; each chain is offset by N(0, init_spread²) and clipped
  /// to the box.  Without it chains start uniformly in the box.
  std::optional<Vec2> init;
  double init_spread = 0.05;
  int threads = 1;

  void validate() const;
};

struct PosteriorSample {
  int chain = 0;
  int iter = 0;
  double log_alpha = 0.0;
  double log_beta = 0.0;
  double log_post = 0.0;
  bool accepted = false;
};

/// Leapfrog integration of dq/dt = p, dp/dt = ∇ log density.  Returns false
/// (leaving q, p at the failure point) if the path leaves `box` or reaches a
/// point of zero density.
bool leapfrog(const LogDensityFn &target, const Box &box, Vec2 &q, Vec2 &p,
              LogDensity &at_q, double step_size, int n_steps);

/// HMC over an arbitrary 2-d log density with a uniform prior on the box.
std::vector<PosteriorSample> hmc_sample(const LogDensityFn &target,
                                        const HmcConfig &cfg);
/// HMC over the SIR posterior of (log α, log β).
std::vector<PosteriorSample> hmc_sample(const ObservationSeries &obs,
                                        const HmcConfig &cfg,
                                        double eps = kDefaultEps);

struct PosteriorSummary {
  Vec2 mean{};
  Vec2 sd{};
  std::array<Vec2, 2> covariance{};
  Vec2 q05{};
  Vec2 q95{};
  Vec2 rhat{};                     // split-R̂
  std::vector<double> acceptance;  // per chain, over retained samples
  std::size_t n_samples = 0;
};

PosteriorSummary summarize_posterior(const std::vector<PosteriorSample> &samples);

} // namespace dunif
