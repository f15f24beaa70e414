#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dunif {

struct Observation {
  double t = 0.0;
  std::int64_t S = 0;
  std::int64_t I = 0;
  std::string date;  // ISO day when the record came from a case file
};

/// Snapshots of one SIR chain in a population of size N.
struct ObservationSeries {
  std::int64_t population = 0;
  std::vector<Observation> records;

  /// Throws ValidationError unless times strictly increase, S never
  /// increases, R = N - S - I never decreases and all counts are in range.
  void validate() const;
};

} // namespace dunif
