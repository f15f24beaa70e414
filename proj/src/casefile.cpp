#include "dunif/casefile.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <sstream>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep))
    out.push_back(field);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
}

template <class T> bool parse_number(const std::string &s, T &out) {
  const char *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::chrono::sys_days parse_day(const std::string &s, bool &ok) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0, d = 0;
  ok = s.size() == 10 && s[4] == '-' && s[7] == '-' &&
       parse_number(s.substr(0, 4), y) && parse_number(s.substr(5, 2), m) &&
       parse_number(s.substr(8, 2), d);
  const year_month_day ymd{year{y}, month{m}, day{d}};
  ok = ok && ymd.ok();
  return ok ? sys_days{ymd} : sys_days{};
}

[[noreturn]] void fail(std::size_t line, const std::string &what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

} // namespace

ObservationSeries ingest(const std::string &path, std::int64_t population) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open case file " + path);
  return ingest(in, population);
}

ObservationSeries ingest(std::istream &in, std::int64_t population) {
  if (population <= 0)
    throw ValidationError("population size must be positive");
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("case file is empty");
  strip_cr(line);
  if (line != "date,infected,recovered")
    fail(1, "expected header 'date,infected,recovered', got '" + line + "'");

  ObservationSeries obs;
  obs.population = population;
  std::chrono::sys_days first{};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty())
      continue;
    const auto f = split(line, ',');
    if (f.size() != 3)
      fail(line_no, "expected 3 comma-separated fields, got " +
                        std::to_string(f.size()));
    bool ok = false;
    const auto day = parse_day(f[0], ok);
    if (!ok)
      fail(line_no, "invalid ISO date '" + f[0] + "'");
    std::int64_t infected = 0, recovered = 0;
    if (!parse_number(f[1], infected) || !parse_number(f[2], recovered))
      fail(line_no, "counts must be integers");
    if (infected < 0 || recovered < 0)
      fail(line_no, "counts must be nonnegative");
    if (infected + recovered > population)
      throw ValidationError(f[0] + ": infected + recovered exceeds population " +
                            std::to_string(population));
    if (obs.records.empty())
      first = day;
    Observation o;
    o.t = static_cast<double>((day - first).count());
    o.S = population - infected - recovered;
    o.I = infected;
    o.date = f[0];
    if (!obs.records.empty() && !(o.t > obs.records.back().t))
      throw ValidationError(f[0] + ": dates must strictly increase");
    obs.records.push_back(std::move(o));
  }
  obs.validate();
  return obs;
}

ObservationSeries read_observation_tsv(std::istream &in, std::int64_t population,
                                       long run) {
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("observation file is empty");
  strip_cr(line);
  bool with_run = false;
  if (line == "run\ttime\tS\tI")
    with_run = true;
  else if (line != "time\tS\tI")
    fail(1, "expected header 'time\\tS\\tI' or 'run\\ttime\\tS\\tI'");

  ObservationSeries obs;
  obs.population = population;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty() || line[0] == '#')
      continue;
    const auto f = split(line, '\t');
    const std::size_t off = with_run ? 1 : 0;
    if (f.size() != 3 + off)
      fail(line_no, "wrong number of fields");
    if (with_run) {
      long r = 0;
      if (!parse_number(f[0], r))
        fail(line_no, "run must be an integer");
      if (r != run)
        continue;
    }
    Observation o;
    try {
      std::size_t used = 0;
      o.t = std::stod(f[off], &used);
      if (used != f[off].size())
        fail(line_no, "invalid time");
    } catch (const std::logic_error &) {
      fail(line_no, "invalid time");
    }
    if (!parse_number(f[off + 1], o.S) || !parse_number(f[off + 2], o.I))
      fail(line_no, "counts must be integers");
    obs.records.push_back(std::move(o));
  }
  obs.validate();
  return obs;
}

std::vector<MonthSegment> split_by_month(const ObservationSeries &obs) {
  std::vector<MonthSegment> out;
  for (std::size_t k = 0; k < obs.records.size(); ++k) {
    const auto &o = obs.records[k];
    if (o.date.size() < 7)
      throw ValidationError("month segmentation needs dated records");
    const std::string month = o.date.substr(0, 7);
    if (out.empty() || out.back().month != month) {
      if (!out.empty())
        out.back().series.records.push_back(o);
      out.push_back({month, {obs.population, {}}});
    }
    out.back().series.records.push_back(o);
  }
  return out;
}

} // namespace dunif
