#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dunif/kronop.hpp"
#include "dunif/uniformization.hpp"

namespace dunif {

/// Stochastic predator-prey model on {0..X_max} x {0..Y_max}.  Prey (X) are
/// born logistically with rate αX - αX²/X_max, a contact consumes one prey
/// and produces one predator with rate βXY, and predators (Y) die with rate δY.
struct PredPreyParams {
  double alpha = 1.0;
  double beta = 0.004;
  double delta = 0.8;
  std::int64_t X_max = 1;
  std::int64_t Y_max = 1;
};

inline std::size_t pp_index(const PredPreyParams &p, std::int64_t X, std::int64_t Y) {
  return static_cast<std::size_t>(X) * static_cast<std::size_t>(p.Y_max + 1) +
         static_cast<std::size_t>(Y);
}

TensorOperator build_pp_generator(const PredPreyParams &params);

/// Upper bound on max |Q_xx|: β X_max Y_max + δ Y_max + α X_max/4 + α X_max.
double pp_gamma(const PredPreyParams &params);

struct PpSnapshot {
  double time;
  StateDistribution p;
  SolveReport report;
  double leaked = 0.0;  // 1 - |p|_1 minus the Poisson defect
  bool leak_warning = false;
};

/// Forward solve from the point mass at (X0, Y0).  leak_warning is set when
/// more than 1e-3 of the mass left through the Y_max cutoff.
std::vector<PpSnapshot> solve_pp(const PredPreyParams &params, std::int64_t X0,
                                 std::int64_t Y0, std::span<const double> times,
                                 double eps = kDefaultEps);

} // namespace dunif
