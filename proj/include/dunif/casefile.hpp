#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dunif/observations.hpp"

namespace dunif {

/// Reads a case-count CSV with header `date,infected,recovered`.  Dates are
/// ISO-8601 days; S = N - infected - recovered and times are days since the
/// first row.  Malformed rows raise ValidationError naming the line.
ObservationSeries ingest(const std::string &path, std::int64_t population);
ObservationSeries ingest(std::istream &in, std::int64_t population);

/// Reads observations written as TSV with header `time\tS\tI` (optionally
/// led by a `run` column, in which case only `run` is kept).
ObservationSeries read_observation_tsv(std::istream &in, std::int64_t population,
                                       long run = 0);

/// Splits a dated series into calendar months.  Each segment holds the
/// records dated in that month plus the first record of the following month,
/// so every transition is counted in the month where it starts.
struct MonthSegment {
  std::string month;  // YYYY-MM
  ObservationSeries series;
};
std::vector<MonthSegment> split_by_month(const ObservationSeries &obs);

} // namespace dunif
