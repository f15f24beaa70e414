#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dunif/kronop.hpp"
#include "dunif/observations.hpp"
#include "dunif/uniformization.hpp"

namespace dunif {

/// Stochastic SIR parameters on the log scale: θ = (log α, log β) where α is
/// the recovery rate and β the infection rate, in inverse time units.
struct SirParams {
  double log_alpha = 0.0;
  double log_beta = 0.0;
  std::int64_t N = 1;

  static SirParams from_rates(double alpha, double beta, std::int64_t N) {
    return {std::log(alpha), std::log(beta), N};
  }
  double alpha() const { return std::exp(log_alpha); }
  double beta() const { return std::exp(log_beta); }
};

inline constexpr std::size_t kLogAlpha = 0;
inline constexpr std::size_t kLogBeta = 1;

struct SirState {
  std::int64_t S = 0;
  std::int64_t I = 0;
  friend bool operator==(const SirState &, const SirState &) = default;
};

/// Rectangle {S_min..S_max} x {I_min..I_max} that every path between two
/// observations must stay in.  I_min may be negative for transitions that
/// recover more people than were infected at the start; those rows exist only
/// to keep the window shape and never carry probability.
struct RestrictedWindow {
  std::int64_t S_min = 0, S_max = 0, I_min = 0, I_max = 0;

  std::size_t s_dim() const { return static_cast<std::size_t>(S_max - S_min + 1); }
  std::size_t i_dim() const { return static_cast<std::size_t>(I_max - I_min + 1); }
  std::vector<std::size_t> shape() const { return {s_dim(), i_dim()}; }
  bool contains(SirState x) const {
    return x.S >= S_min && x.S <= S_max && x.I >= I_min && x.I <= I_max;
  }
  std::size_t index(SirState x) const {
    return static_cast<std::size_t>(x.S - S_min) * i_dim() +
           static_cast<std::size_t>(x.I - I_min);
  }
};

/// Generator with its derivatives in (log α, log β), in that order.
struct SirGenerator {
  TensorOperator Q;
  std::array<TensorOperator, 2> dQ;
};

struct RestrictedGenerator {
  TensorOperator Q;
  std::array<TensorOperator, 2> dQ;
  RestrictedWindow window;
};

struct GammaBound {
  double gamma = 0.0;
  std::array<double, 2> dgamma{};
};

/// Index of (S, I) on the full (N+1) x (N+1) grid.
inline std::size_t full_index(std::int64_t N, SirState x) {
  return static_cast<std::size_t>(x.S) * static_cast<std::size_t>(N + 1) +
         static_cast<std::size_t>(x.I);
}

SirGenerator build_full_generator(const SirParams &params);
GammaBound gamma_full(const SirParams &params);

RestrictedWindow restricted_window(SirState from, SirState to);
RestrictedGenerator build_restricted_generator(const SirParams &params,
                                               SirState from, SirState to);
GammaBound gamma_restricted(const SirParams &params, const RestrictedWindow &window);

/// Uniformized system (with both parameter derivatives) for a generator.
UniformizedSystem sir_system(const TensorOperator &Q,
                             const std::array<TensorOperator, 2> &dQ,
                             const GammaBound &g, double t);

struct SirPoint {
  double t;
  double S;
  double I;
};

/// Explicit Euler for the deterministic SIR equations.  The final step is
/// shortened so the trajectory ends exactly at t_end.
std::vector<SirPoint> euler_solve(const SirParams &params, double S0, double I0,
                                  double dt, double t_end);
/// Same with raw rates, allowing α = 0 or β = 0.
std::vector<SirPoint> euler_solve_rates(double alpha, double beta, std::int64_t N,
                                        double S0, double I0, double dt,
                                        double t_end);

struct OdeFit {
  double alpha = 0.0;
  double beta = 0.0;
  double residual = 0.0;
  bool degenerate = false;
  int evaluations = 0;
};

/// Least-squares fit of the deterministic model to (t, S, I) observations.
OdeFit least_squares_fit(const ObservationSeries &obs, std::int64_t N);

/// Sum of squared S and I deviations of the Euler solution from the
/// observations, integrated from the first record with steps of at most dt.
double ode_residual(const ObservationSeries &obs, std::int64_t N, double alpha,
                    double beta, double dt);

} // namespace dunif
