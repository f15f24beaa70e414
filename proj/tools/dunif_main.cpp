#include <CLI11.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dunif/casefile.hpp"
#include "dunif/errors.hpp"
#include "dunif/infer.hpp"
#include "dunif/predprey.hpp"
#include "dunif/sir.hpp"
#include "dunif/ssa.hpp"
#include "dunif/uniformization.hpp"

namespace {

using namespace dunif;

std::string num(double x) {
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// All output is collected in memory and written once at the end, through a
// temporary file and a rename so readers never see a partial file.
void emit(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f)
      throw ValidationError("cannot write " + path);
    f << text;
    if (!f.flush())
      throw ValidationError("cannot write " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot move output into place at " + path);
  }
}

// Case CSVs start with a `date,` header; anything else is read as the TSV
// that `simulate` writes.
ObservationSeries load_series(const std::string &path, std::int64_t population,
                              long run) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (first.rfind("date,", 0) == 0)
    return ingest(in, population);
  return read_observation_tsv(in, population, run);
}

double positive_rate(double x, const char *name) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw ValidationError(std::string(name) + " must be a positive finite rate");
  return x;
}

// ---------------------------------------------------------------- simulate

struct SimSir {
  double alpha = 1.0, beta = 2.5, t_end = 1.0;
  std::int64_t N = 10, S0 = 9, I0 = 1;
  int runs = 1;
  std::uint64_t seed = 1;
  double grid = 0.0;
  std::string out = "-";
};

struct SimPp {
  double alpha = 1.0, beta = 0.004, delta = 0.8, t_end = 1.0;
  std::int64_t x_max = 100, y_max = 100, X0 = 50, Y0 = 10;
  int runs = 1;
  std::uint64_t seed = 1;
  double grid = 0.0;
  std::string out = "-";
};

std::vector<double> make_grid(double step, double t_end) {
  if (!(step > 0.0))
    throw ValidationError("--grid must be positive");
  std::vector<double> g;
  for (long k = 0;; ++k) {
    const double t = k * step;
    if (t > t_end + 1e-12 * step)
      break;
    g.push_back(t);
  }
  return g;
}

template <class Run>
std::string simulate_table(int runs, double grid, double t_end, const char *a,
                           const char *b, std::uint64_t seed, Run run_one) {
  if (runs < 1)
    throw ValidationError("--runs must be at least 1");
  if (!(t_end >= 0.0))
    throw ValidationError("--t-end must be nonnegative");
  std::ostringstream os;
  if (runs > 1)
    os << "run\t";
  os << "time\t" << a << '\t' << b << '\n';
  std::vector<double> g;
  if (grid > 0.0)
    g = make_grid(grid, t_end);
  for (int r = 0; r < runs; ++r) {
    const Trajectory traj = run_one(Rng::stream_seed(seed, static_cast<std::uint64_t>(r)));
    if (traj.exceeded_cap)
      std::cerr << "warning: run " << r << " exceeded the predator cap\n";
    const std::vector<TrajectoryEvent> rows = grid > 0.0 ? resample(traj, g) : traj.events;
    for (const auto &e : rows) {
      if (runs > 1)
        os << r << '\t';
      os << num(e.time) << '\t' << e.a << '\t' << e.b << '\n';
    }
  }
  return os.str();
}

void run_sim_sir(const SimSir &o) {
  if (o.N < 1 || o.S0 < 0 || o.I0 < 0 || o.S0 + o.I0 > o.N)
    throw ValidationError("initial state must satisfy 0 <= S0, I0 and S0 + I0 <= N");
  const SirParams p = SirParams::from_rates(positive_rate(o.alpha, "alpha"),
                                            positive_rate(o.beta, "beta"), o.N);
  emit(o.out, simulate_table(o.runs, o.grid, o.t_end, "S", "I", o.seed,
                             [&](std::uint64_t s) {
                               return gillespie_sir(p, o.S0, o.I0, o.t_end, s);
                             }));
}

PredPreyParams pp_params(double alpha, double beta, double delta, std::int64_t x_max,
                         std::int64_t y_max) {
  PredPreyParams p;
  p.alpha = positive_rate(alpha, "alpha");
  p.beta = positive_rate(beta, "beta");
  p.delta = positive_rate(delta, "delta");
  p.X_max = x_max;
  p.Y_max = y_max;
  if (x_max < 1 || y_max < 1)
    throw ValidationError("population caps must be at least 1");
  return p;
}

void run_sim_pp(const SimPp &o) {
  const PredPreyParams p = pp_params(o.alpha, o.beta, o.delta, o.x_max, o.y_max);
  if (o.X0 < 0 || o.X0 > o.x_max || o.Y0 < 0 || o.Y0 > o.y_max)
    throw ValidationError("initial state lies outside the grid");
  emit(o.out, simulate_table(o.runs, o.grid, o.t_end, "X", "Y", o.seed,
                             [&](std::uint64_t s) {
                               return gillespie_pp(p, o.X0, o.Y0, o.t_end, s);
                             }));
}

// ------------------------------------------------------------------- solve

struct SolveOpts {
  double alpha = 1.0, beta = 2.5, delta = 0.8;
  std::int64_t N = 10, S0 = 9, I0 = 1;
  std::int64_t x_max = 20, y_max = 20, X0 = 10, Y0 = 5;
  std::vector<double> times{0.0};
  double eps = kDefaultEps;
  double min_prob = 0.0;
  std::string out = "-";
};

void report_line(std::ostream &os, double t, const SolveReport &r) {
  os << "# time " << num(t) << " iterations " << r.iterations << " substeps "
     << r.substeps << " mass_defect " << num(r.mass_defect) << '\n';
}

void run_solve_sir(const SolveOpts &o) {
  if (o.N < 1 || o.S0 < 0 || o.I0 < 0 || o.S0 + o.I0 > o.N)
    throw ValidationError("initial state must satisfy 0 <= S0, I0 and S0 + I0 <= N");
  const SirParams p = SirParams::from_rates(positive_rate(o.alpha, "alpha"),
                                            positive_rate(o.beta, "beta"), o.N);
  const SirGenerator gen = build_full_generator(p);
  const auto n = static_cast<std::size_t>(o.N + 1);
  const auto p0 = StateDistribution::delta({n, n}, full_index(o.N, {o.S0, o.I0}));
  const auto snaps = forward_solve(gen.Q, gamma_full(p).gamma, p0, o.times, o.eps);
  std::ostringstream os;
  os << "time\tS\tI\tprobability\n";
  for (const auto &s : snaps) {
    report_line(os, s.time, s.report);
    for (std::size_t k = 0; k < s.p.values.size(); ++k)
      if (s.p.values[k] > o.min_prob)
        os << num(s.time) << '\t' << k / n << '\t' << k % n << '\t'
           << num(s.p.values[k]) << '\n';
  }
  emit(o.out, os.str());
}

void run_solve_pp(const SolveOpts &o) {
  const PredPreyParams p = pp_params(o.alpha, o.beta, o.delta, o.x_max, o.y_max);
  if (o.X0 < 0 || o.X0 > o.x_max || o.Y0 < 0 || o.Y0 > o.y_max)
    throw ValidationError("initial state lies outside the grid");
  const auto snaps = solve_pp(p, o.X0, o.Y0, o.times, o.eps);
  const auto ny = static_cast<std::size_t>(o.y_max + 1);
  std::ostringstream os;
  os << "time\tX\tY\tprobability\n";
  for (const auto &s : snaps) {
    report_line(os, s.time, s.report);
    os << "# leaked " << num(s.leaked) << '\n';
    if (s.leak_warning)
      std::cerr << "warning: " << num(s.leaked)
                << " of the mass left through the predator cap by t = " << num(s.time)
                << "\n";
    for (std::size_t k = 0; k < s.p.values.size(); ++k)
      if (s.p.values[k] > o.min_prob)
        os << num(s.time) << '\t' << k / ny << '\t' << k % ny << '\t'
           << num(s.p.values[k]) << '\n';
  }
  emit(o.out, os.str());
}

// --------------------------------------------------------------- inference

struct DataOpts {
  std::int64_t N = 0;
  std::string data;
  long run = 0;
  double eps = kDefaultEps;
};

void add_data_options(CLI::App *app, DataOpts &d) {
  app->add_option("--population,-N", d.N, "Population size N")->required();
  app->add_option("--data", d.data, "Case CSV or observation TSV")->required();
  app->add_option("--run", d.run, "Run to read from a multi-run TSV");
  app->add_option("--eps", d.eps, "Truncation tolerance per solve");
}

struct LoglikOpts {
  DataOpts d;
  double alpha = 1.0, beta = 1.0;
  bool full = false;
  std::string out = "-";
};

void run_loglik(const LoglikOpts &o) {
  const auto obs = load_series(o.d.data, o.d.N, o.d.run);
  const SirParams p = SirParams::from_rates(positive_rate(o.alpha, "alpha"),
                                            positive_rate(o.beta, "beta"), o.d.N);
  const LogLikelihood ll = log_likelihood(p, obs, o.d.eps, !o.full);
  std::ostringstream os;
  os << "log_likelihood\t" << num(ll.value) << '\n'
     << "dlog_alpha\t" << num(ll.grad[0]) << '\n'
     << "dlog_beta\t" << num(ll.grad[1]) << '\n';
  if (ll.zero_probability)
    os << "# some observed transition has probability zero\n";
  emit(o.out, os.str());
}

struct FitOpts {
  DataOpts d;
  double alpha = 1.0, beta = 1.0;
  AscentConfig ascent;
  std::string out = "-";
};

void run_fit(const FitOpts &o) {
  const auto obs = load_series(o.d.data, o.d.N, o.d.run);
  AscentConfig cfg = o.ascent;
  cfg.eps = o.d.eps;
  const MapFit fit = fit_map(obs,
                             SirParams::from_rates(positive_rate(o.alpha, "alpha"),
                                                   positive_rate(o.beta, "beta"), o.d.N),
                             cfg);
  std::ostringstream os;
  os << "alpha\t" << num(fit.params.alpha()) << '\n'
     << "beta\t" << num(fit.params.beta()) << '\n'
     << "log_likelihood\t" << num(fit.log_likelihood) << '\n'
     << "iterations\t" << fit.iterations << '\n'
     << "converged\t" << (fit.converged ? "true" : "false") << '\n';
  emit(o.out, os.str());
  if (!fit.converged)
    std::cerr << "warning: gradient ascent stopped before reaching the tolerance\n";
}

struct FitOdeOpts {
  DataOpts d;
  std::string out = "-";
};

void run_fit_ode(const FitOdeOpts &o) {
  const auto obs = load_series(o.d.data, o.d.N, o.d.run);
  const OdeFit fit = least_squares_fit(obs, o.d.N);
  std::ostringstream os;
  os << "alpha\t" << num(fit.alpha) << '\n'
     << "beta\t" << num(fit.beta) << '\n'
     << "residual\t" << num(fit.residual) << '\n'
     << "degenerate\t" << (fit.degenerate ? "true" : "false") << '\n';
  emit(o.out, os.str());
}

struct HmcOpts {
  DataOpts d;
  HmcConfig cfg;
  double alpha = 1.0, beta = 1.0;
  std::string init = "map";
  bool by_month = false;
  std::string out = "-";
};

void write_samples(std::ostream &os, const std::vector<PosteriorSample> &samples,
                   const std::string *segment) {
  for (const auto &s : samples) {
    os << '{';
    if (segment)
      os << "\"segment\":\"" << *segment << "\",";
    os << "\"chain\":" << s.chain << ",\"iter\":" << s.iter
       << ",\"log_alpha\":" << num(s.log_alpha) << ",\"log_beta\":" << num(s.log_beta)
       << ",\"log_post\":";
    // JSON has no infinities; a sample always has finite density, but guard
    // the format anyway.
    if (std::isfinite(s.log_post))
      os << num(s.log_post);
    else
      os << "null";
    os << ",\"accepted\":" << (s.accepted ? "true" : "false") << "}\n";
  }
}

std::vector<PosteriorSample> hmc_one(const ObservationSeries &obs, const HmcOpts &o) {
  HmcConfig cfg = o.cfg;
  const SirParams start = SirParams::from_rates(positive_rate(o.alpha, "alpha"),
                                                positive_rate(o.beta, "beta"), obs.population);
  if (o.init == "map") {
    AscentConfig a;
    a.eps = o.d.eps;
    const MapFit fit = fit_map(obs, start, a);
    cfg.init = Vec2{fit.params.log_alpha, fit.params.log_beta};
  } else if (o.init == "given") {
    cfg.init = Vec2{start.log_alpha, start.log_beta};
  } else {
    cfg.init.reset();
  }
  return hmc_sample(obs, cfg, o.d.eps);
}

void run_hmc(const HmcOpts &o) {
  o.cfg.validate();
  const auto obs = load_series(o.d.data, o.d.N, o.d.run);
  std::ostringstream os;
  if (o.by_month) {
    for (const auto &seg : split_by_month(obs)) {
      if (seg.series.records.size() < 2)
        continue;
      write_samples(os, hmc_one(seg.series, o), &seg.month);
    }
  } else {
    write_samples(os, hmc_one(obs, o), nullptr);
  }
  emit(o.out, os.str());
}

// ------------------------------------------------------------------ config

std::map<std::string, std::string> read_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(n) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Config values are appended as `--key=value` for every key not already
// given on the command line, so flags win over the file and the file wins
// over built-in defaults.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path)
    return rest;
  for (const auto &[key, value] : read_config(*path)) {
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto &a : rest)
      if (a == flag || a.rfind(flag + "=", 0) == 0)
        given = true;
    if (!given)
      rest.push_back(flag + "=" + value);
  }
  return rest;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Transient distributions, simulation and inference for stochastic "
               "SIR and predator-prey chains"};
  app.require_subcommand(1);
  app.add_option("--config", "key=value file with option defaults");

  SimSir sim_sir;
  SimPp sim_pp;
  auto *simulate = app.add_subcommand("simulate", "Gillespie trajectories as TSV");
  simulate->require_subcommand(1);
  {
    auto *c = simulate->add_subcommand("sir", "stochastic SIR");
    c->add_option("--alpha", sim_sir.alpha, "recovery rate");
    c->add_option("--beta", sim_sir.beta, "infection rate");
    c->add_option("--population,-N", sim_sir.N, "population size");
    c->add_option("--s0", sim_sir.S0, "initial susceptibles");
    c->add_option("--i0", sim_sir.I0, "initial infected");
    c->add_option("--t-end", sim_sir.t_end, "final time");
    c->add_option("--runs", sim_sir.runs, "number of trajectories");
    c->add_option("--seed", sim_sir.seed, "random seed");
    c->add_option("--grid", sim_sir.grid, "report the state on a time grid with this step");
    c->add_option("--out,-o", sim_sir.out, "output file (- for stdout)");
    c->callback([&] { run_sim_sir(sim_sir); });
  }
  {
    auto *c = simulate->add_subcommand("pp", "predator-prey");
    c->add_option("--alpha", sim_pp.alpha, "prey birth rate");
    c->add_option("--beta", sim_pp.beta, "consumption rate");
    c->add_option("--delta", sim_pp.delta, "predator death rate");
    c->add_option("--x-max", sim_pp.x_max, "prey carrying capacity");
    c->add_option("--y-max", sim_pp.y_max, "predator cap (flagged when exceeded)");
    c->add_option("--x0", sim_pp.X0, "initial prey");
    c->add_option("--y0", sim_pp.Y0, "initial predators");
    c->add_option("--t-end", sim_pp.t_end, "final time");
    c->add_option("--runs", sim_pp.runs, "number of trajectories");
    c->add_option("--seed", sim_pp.seed, "random seed");
    c->add_option("--grid", sim_pp.grid, "report the state on a time grid with this step");
    c->add_option("--out,-o", sim_pp.out, "output file (- for stdout)");
    c->callback([&] { run_sim_pp(sim_pp); });
  }

  SolveOpts solve_sir, solve_pp_opts;
  auto *solve = app.add_subcommand("solve", "transient distribution snapshots as TSV");
  solve->require_subcommand(1);
  {
    auto *c = solve->add_subcommand("sir", "stochastic SIR on the full grid");
    c->add_option("--alpha", solve_sir.alpha, "recovery rate");
    c->add_option("--beta", solve_sir.beta, "infection rate");
    c->add_option("--population,-N", solve_sir.N, "population size");
    c->add_option("--s0", solve_sir.S0, "initial susceptibles");
    c->add_option("--i0", solve_sir.I0, "initial infected");
    c->add_option("--times", solve_sir.times, "comma-separated report times")->delimiter(',');
    c->add_option("--eps", solve_sir.eps, "truncation tolerance");
    c->add_option("--min-prob", solve_sir.min_prob, "omit entries at or below this");
    c->add_option("--out,-o", solve_sir.out, "output file (- for stdout)");
    c->callback([&] { run_solve_sir(solve_sir); });
  }
  {
    auto *c = solve->add_subcommand("pp", "predator-prey");
    c->add_option("--alpha", solve_pp_opts.alpha, "prey birth rate");
    c->add_option("--beta", solve_pp_opts.beta, "consumption rate");
    c->add_option("--delta", solve_pp_opts.delta, "predator death rate");
    c->add_option("--x-max", solve_pp_opts.x_max, "prey carrying capacity");
    c->add_option("--y-max", solve_pp_opts.y_max, "predator cap");
    c->add_option("--x0", solve_pp_opts.X0, "initial prey");
    c->add_option("--y0", solve_pp_opts.Y0, "initial predators");
    c->add_option("--times", solve_pp_opts.times, "comma-separated report times")->delimiter(',');
    c->add_option("--eps", solve_pp_opts.eps, "truncation tolerance");
    c->add_option("--min-prob", solve_pp_opts.min_prob, "omit entries at or below this");
    c->add_option("--out,-o", solve_pp_opts.out, "output file (- for stdout)");
    c->callback([&] { run_solve_pp(solve_pp_opts); });
  }

  LoglikOpts ll;
  {
    auto *c = app.add_subcommand("loglik", "log-likelihood and gradient in (log alpha, log beta)");
    add_data_options(c, ll.d);
    c->add_option("--alpha", ll.alpha, "recovery rate")->required();
    c->add_option("--beta", ll.beta, "infection rate")->required();
    c->add_flag("--full", ll.full, "solve on the full grid instead of restricted windows");
    c->add_option("--out,-o", ll.out, "output file (- for stdout)");
    c->callback([&] { run_loglik(ll); });
  }

  FitOpts fit;
  {
    auto *c = app.add_subcommand("fit", "maximum-likelihood rates by gradient ascent");
    add_data_options(c, fit.d);
    c->add_option("--alpha", fit.alpha, "initial recovery rate");
    c->add_option("--beta", fit.beta, "initial infection rate");
    c->add_option("--max-iter", fit.ascent.max_iter, "iteration limit");
    c->add_option("--grad-tol", fit.ascent.grad_tol, "gradient norm tolerance");
    c->add_option("--out,-o", fit.out, "output file (- for stdout)");
    c->callback([&] { run_fit(fit); });
  }

  FitOdeOpts fit_ode;
  {
    auto *c = app.add_subcommand("fit-ode", "least-squares fit of the deterministic model");
    add_data_options(c, fit_ode.d);
    c->add_option("--out,-o", fit_ode.out, "output file (- for stdout)");
    c->callback([&] { run_fit_ode(fit_ode); });
  }

  HmcOpts hmc;
  {
    auto *c = app.add_subcommand("hmc", "posterior samples of (log alpha, log beta) as JSON lines");
    add_data_options(c, hmc.d);
    c->add_option("--chains", hmc.cfg.n_chains, "number of chains");
    c->add_option("--len", hmc.cfg.chain_len, "iterations per chain");
    c->add_option("--burn-in", hmc.cfg.burn_in, "iterations dropped per chain");
    c->add_option("--step-size", hmc.cfg.step_size, "leapfrog step size");
    c->add_option("--leapfrog", hmc.cfg.n_leapfrog, "leapfrog steps per proposal");
    c->add_option("--seed", hmc.cfg.seed, "random seed");
    c->add_option("--threads", hmc.cfg.threads, "worker threads")->envname("CTMC_THREADS");
    c->add_option("--init", hmc.init, "chain start: map, given or prior")
        ->check(CLI::IsMember({"map", "given", "prior"}));
    c->add_option("--alpha", hmc.alpha, "recovery rate used to start");
    c->add_option("--beta", hmc.beta, "infection rate used to start");
    c->add_option("--init-spread", hmc.cfg.init_spread, "sd of the per-chain start jitter");
    c->add_flag("--segment-by-month", hmc.by_month,
                "run independent inferences per calendar month");
    c->add_option("--out,-o", hmc.out, "output file (- for stdout)");
    c->callback([&] { run_hmc(hmc); });
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
