#include "dunif/ssa.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "dunif/errors.hpp"

namespace dunif {

Trajectory gillespie_sir(const SirParams &params, std::int64_t S0, std::int64_t I0,
                         double t_end, std::uint64_t seed) {
  Rng rng(seed);
  return gillespie_sir(params, S0, I0, t_end, rng);
}

Trajectory gillespie_sir(const SirParams &params, std::int64_t S0, std::int64_t I0,
                         double t_end, Rng &rng) {
  if (S0 < 0 || I0 < 0 || S0 + I0 > params.N)
    throw ValidationError("initial SIR state needs S0, I0 >= 0 and S0 + I0 <= N");
  const double alpha = params.alpha();
  const double inf = params.beta() / static_cast<double>(params.N);

  Trajectory traj;
  traj.events.push_back({0.0, S0, I0});
  double t = 0.0;
  std::int64_t S = S0, I = I0;
  while (I > 0) {
    const double infection = inf * static_cast<double>(S) * static_cast<double>(I);
    const double total = infection + alpha * static_cast<double>(I);
    t += rng.exponential(total);
    if (t > t_end)
      break;
    if (rng.uniform() * total < infection) {
      --S;
      ++I;
    } else {
      --I;
    }
    traj.events.push_back({t, S, I});
  }
  return traj;
}

Trajectory gillespie_pp(const PredPreyParams &params, std::int64_t X0,
                        std::int64_t Y0, double t_end, std::uint64_t seed) {
  Rng rng(seed);
  return gillespie_pp(params, X0, Y0, t_end, rng);
}

Trajectory gillespie_pp(const PredPreyParams &params, std::int64_t X0,
                        std::int64_t Y0, double t_end, Rng &rng) {
  if (X0 < 0 || X0 > params.X_max || Y0 < 0 || Y0 > params.Y_max)
    throw ValidationError("initial predator-prey state outside the grid");
  const double x_max = static_cast<double>(params.X_max);

  Trajectory traj;
  traj.events.push_back({0.0, X0, Y0});
  double t = 0.0;
  std::int64_t X = X0, Y = Y0;
  for (;;) {
    const double x = static_cast<double>(X), y = static_cast<double>(Y);
    const double consumption = params.beta * x * y;
    const double birth = std::max(0.0, params.alpha * x - params.alpha * x * x / x_max);
    const double death = params.delta * y;
    const double total = consumption + birth + death;
    if (total <= 0.0)
      break;
    t += rng.exponential(total);
    if (t > t_end)
      break;
    const double u = rng.uniform() * total;
    if (u < consumption) {
      --X;
      ++Y;
      if (Y > params.Y_max)
        traj.exceeded_cap = true;
    } else if (u < consumption + birth) {
      ++X;
    } else {
      --Y;
    }
    traj.events.push_back({t, X, Y});
  }
  return traj;
}

std::vector<TrajectoryEvent> resample(const Trajectory &traj,
                                      std::span<const double> grid) {
  std::vector<TrajectoryEvent> out;
  out.reserve(grid.size());
  std::size_t k = 0;
  for (double t : grid) {
    while (k + 1 < traj.events.size() && traj.events[k + 1].time <= t)
      ++k;
    out.push_back({t, traj.events[k].a, traj.events[k].b});
  }
  return out;
}

void write_tsv(std::ostream &os, const Trajectory &traj, const char *a_name,
               const char *b_name) {
  os << "time\t" << a_name << '\t' << b_name << '\n';
  char buf[64];
  for (const auto &e : traj.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf << '\t' << e.a << '\t' << e.b << '\n';
  }
}

} // namespace dunif
