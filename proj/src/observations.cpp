#include "dunif/observations.hpp"

#include <cmath>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

std::string where(const Observation &o, std::size_t k) {
  std::string s = "record " + std::to_string(k);
  if (!o.date.empty())
    s += " (" + o.date + ")";
  return s;
}

} // namespace

void ObservationSeries::validate() const {
  if (population <= 0)
    throw ValidationError("population size must be positive");
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto &o = records[k];
    if (!std::isfinite(o.t))
      throw ValidationError(where(o, k) + ": time is not finite");
    if (o.S < 0 || o.I < 0 || o.S + o.I > population)
      throw ValidationError(where(o, k) + ": counts S=" + std::to_string(o.S) +
                            ", I=" + std::to_string(o.I) +
                            " do not fit a population of " +
                            std::to_string(population));
    if (k == 0)
      continue;
    const auto &prev = records[k - 1];
    if (!(o.t > prev.t))
      throw ValidationError(where(o, k) + ": times must strictly increase");
    if (o.S > prev.S)
      throw ValidationError(where(o, k) + ": susceptibles increased from " +
                            std::to_string(prev.S) + " to " +
                            std::to_string(o.S));
    const auto r_prev = population - prev.S - prev.I;
    const auto r = population - o.S - o.I;
    if (r < r_prev)
      throw ValidationError(where(o, k) + ": recovered decreased from " +
                            std::to_string(r_prev) + " to " + std::to_string(r));
  }
}

} // namespace dunif
