#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dunif/predprey.hpp"
#include "dunif/rng.hpp"
#include "dunif/sir.hpp"

namespace dunif {

/// One state of a two-species chain: (S, I) for SIR, (X, Y) for predator-prey.
struct TrajectoryEvent {
  double time = 0.0;
  std::int64_t a = 0;
  std::int64_t b = 0;
};

/// Event-based record of one Gillespie run, starting with (0, initial state).
struct Trajectory {
  std::vector<TrajectoryEvent> events;
  /// Predator-prey only: some predator birth went past Y_max.
  bool exceeded_cap = false;

  const TrajectoryEvent &final_state() const { return events.back(); }
};

Trajectory gillespie_sir(const SirParams &params, std::int64_t S0, std::int64_t I0,
                         double t_end, std::uint64_t seed);
Trajectory gillespie_sir(const SirParams &params, std::int64_t S0, std::int64_t I0,
                         double t_end, Rng &rng);

Trajectory gillespie_pp(const PredPreyParams &params, std::int64_t X0,
                        std::int64_t Y0, double t_end, std::uint64_t seed);
Trajectory gillespie_pp(const PredPreyParams &params, std::int64_t X0,
                        std::int64_t Y0, double t_end, Rng &rng);

/// State in effect at each grid time (right-continuous step function).
std::vector<TrajectoryEvent> resample(const Trajectory &traj,
                                      std::span<const double> grid);

/// TSV with header "time\t<a>\t<b>", one event per row, 17 significant digits.
void write_tsv(std::ostream &os, const Trajectory &traj, const char *a_name,
               const char *b_name);

} // namespace dunif
