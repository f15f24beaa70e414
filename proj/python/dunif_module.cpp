#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dunif/casefile.hpp"
#include "dunif/errors.hpp"
#include "dunif/infer.hpp"
#include "dunif/predprey.hpp"
#include "dunif/sir.hpp"
#include "dunif/ssa.hpp"
#include "dunif/uniformization.hpp"

namespace py = pybind11;
using namespace dunif;

namespace {

using Array = py::array_t<double>;

Array grid_array(const std::vector<double> &v, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ObservationSeries series_from(std::int64_t N, const std::vector<double> &t,
                              const std::vector<std::int64_t> &S,
                              const std::vector<std::int64_t> &I) {
  if (t.size() != S.size() || t.size() != I.size())
    throw ValidationError("times, S and I must have the same length");
  ObservationSeries obs{N, {}};
  for (std::size_t k = 0; k < t.size(); ++k)
    obs.records.push_back({t[k], S[k], I[k], ""});
  obs.validate();
  return obs;
}

py::dict report_dict(const SolveReport &r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["mass_defect"] = r.mass_defect;
  d["substeps"] = r.substeps;
  return d;
}

py::dict solve_sir(std::int64_t N, double alpha, double beta, std::int64_t s0,
                   std::int64_t i0, double t, double eps, bool derivatives) {
  if (s0 < 0 || i0 < 0 || s0 + i0 > N)
    throw ValidationError("initial state outside 0 <= S, I and S + I <= N");
  const auto params = SirParams::from_rates(alpha, beta, N);
  const auto gen = build_full_generator(params);
  const auto n = static_cast<std::size_t>(N + 1);
  const auto p0 = StateDistribution::delta({n, n}, full_index(N, {s0, i0}));
  UniformizationOptions opts;
  opts.eps = eps;
  py::dict out;
  if (derivatives) {
    const auto r = diff_uniformize(p0, sir_system(gen.Q, gen.dQ, gamma_full(params), t), opts);
    out["p"] = grid_array(r.p.values, n, n);
    out["dlog_alpha"] = grid_array(r.dp[kLogAlpha].values, n, n);
    out["dlog_beta"] = grid_array(r.dp[kLogBeta].values, n, n);
    out["report"] = report_dict(r.report);
  } else {
    const auto r = uniformize(p0, make_system(gen.Q, gamma_full(params).gamma, t), opts);
    out["p"] = grid_array(r.p.values, n, n);
    out["report"] = report_dict(r.report);
  }
  return out;
}

py::list solve_pp_py(double alpha, double beta, double delta, std::int64_t x_max,
                     std::int64_t y_max, std::int64_t x0, std::int64_t y0,
                     const std::vector<double> &times, double eps) {
  const PredPreyParams params{alpha, beta, delta, x_max, y_max};
  const auto snaps = solve_pp(params, x0, y0, times, eps);
  py::list out;
  for (const auto &s : snaps) {
    py::dict d;
    d["time"] = s.time;
    d["p"] = grid_array(s.p.values, static_cast<std::size_t>(x_max + 1),
                        static_cast<std::size_t>(y_max + 1));
    d["report"] = report_dict(s.report);
    d["leaked"] = s.leaked;
    d["leak_warning"] = s.leak_warning;
    out.append(d);
  }
  return out;
}

Array trajectory_array(const Trajectory &traj) {
  Array out({traj.events.size(), std::size_t{3}});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    m(k, 0) = traj.events[k].time;
    m(k, 1) = static_cast<double>(traj.events[k].a);
    m(k, 2) = static_cast<double>(traj.events[k].b);
  }
  return out;
}

py::dict summary_dict(const PosteriorSummary &s) {
  auto vec = [](const Vec2 &v) { return py::make_tuple(v[0], v[1]); };
  py::dict d;
  d["mean"] = vec(s.mean);
  d["sd"] = vec(s.sd);
  d["q05"] = vec(s.q05);
  d["q95"] = vec(s.q95);
  d["rhat"] = vec(s.rhat);
  d["acceptance"] = s.acceptance;
  d["n_samples"] = s.n_samples;
  return d;
}

std::vector<PosteriorSample> samples_from(const Array &a) {
  const auto m = a.unchecked<2>();
  if (m.shape(1) != 6)
    throw ValidationError("sample array must have 6 columns");
  std::vector<PosteriorSample> out;
  for (py::ssize_t k = 0; k < m.shape(0); ++k)
    out.push_back({static_cast<int>(m(k, 0)), static_cast<int>(m(k, 1)), m(k, 2), m(k, 3),
                   m(k, 4), m(k, 5) != 0.0});
  return out;
}

} // namespace

PYBIND11_MODULE(_dunif, m) {
  m.doc() = "Uniformization solver, simulation and inference for stochastic SIR and "
            "predator-prey chains";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const ValidationError &e) {
      py::set_error(validation, e.what());
    } catch (const NumericalError &e) {
      py::set_error(numerical, e.what());
    } catch (const Error &e) {
      py::set_error(base, e.what());
    }
  });

  m.def("solve_sir", &solve_sir, py::arg("N"), py::arg("alpha"), py::arg("beta"),
        py::arg("s0"), py::arg("i0"), py::arg("t"), py::arg("eps") = kDefaultEps,
        py::arg("derivatives") = false,
        "Distribution of (S, I) at time t as an (N+1, N+1) array indexed [S, I], "
        "optionally with derivatives in log alpha and log beta.");

  m.def("gamma_full", [](std::int64_t N, double alpha, double beta) {
    return gamma_full(SirParams::from_rates(alpha, beta, N)).gamma;
  }, py::arg("N"), py::arg("alpha"), py::arg("beta"));

  m.def("solve_pp", &solve_pp_py, py::arg("alpha"), py::arg("beta"), py::arg("delta"),
        py::arg("x_max"), py::arg("y_max"), py::arg("x0"), py::arg("y0"), py::arg("times"),
        py::arg("eps") = kDefaultEps,
        "Predator-prey distributions at each time, arrays indexed [X, Y].");

  m.def("simulate_sir", [](std::int64_t N, double alpha, double beta, std::int64_t s0,
                           std::int64_t i0, double t_end, std::uint64_t seed) {
    return trajectory_array(gillespie_sir(SirParams::from_rates(alpha, beta, N), s0, i0, t_end, seed));
  }, py::arg("N"), py::arg("alpha"), py::arg("beta"), py::arg("s0"), py::arg("i0"),
        py::arg("t_end"), py::arg("seed") = 1, "Gillespie events as rows (time, S, I).");

  m.def("simulate_pp", [](double alpha, double beta, double delta, std::int64_t x_max,
                          std::int64_t y_max, std::int64_t x0, std::int64_t y0, double t_end,
                          std::uint64_t seed) {
    const auto traj = gillespie_pp({alpha, beta, delta, x_max, y_max}, x0, y0, t_end, seed);
    return py::make_tuple(trajectory_array(traj), traj.exceeded_cap);
  }, py::arg("alpha"), py::arg("beta"), py::arg("delta"), py::arg("x_max"), py::arg("y_max"),
        py::arg("x0"), py::arg("y0"), py::arg("t_end"), py::arg("seed") = 1,
        "Gillespie events as rows (time, X, Y) and whether Y went past y_max.");

  m.def("read_cases", [](const std::string &path, std::int64_t N) {
    const auto obs = ingest(path, N);
    std::vector<double> t;
    std::vector<std::int64_t> S, I;
    std::vector<std::string> dates;
    for (const auto &r : obs.records) {
      t.push_back(r.t);
      S.push_back(r.S);
      I.push_back(r.I);
      dates.push_back(r.date);
    }
    py::dict d;
    d["t"] = t;
    d["S"] = S;
    d["I"] = I;
    d["date"] = dates;
    return d;
  }, py::arg("path"), py::arg("N"));

  m.def("log_likelihood", [](std::int64_t N, const std::vector<double> &t,
                             const std::vector<std::int64_t> &S,
                             const std::vector<std::int64_t> &I, double alpha, double beta,
                             double eps, bool restricted) {
    const auto ll = log_likelihood(SirParams::from_rates(alpha, beta, N), series_from(N, t, S, I),
                                   eps, restricted);
    return py::make_tuple(ll.value, py::make_tuple(ll.grad[0], ll.grad[1]));
  }, py::arg("N"), py::arg("t"), py::arg("S"), py::arg("I"), py::arg("alpha"),
        py::arg("beta"), py::arg("eps") = kDefaultEps, py::arg("restricted") = true,
        "Log-likelihood and its gradient in (log alpha, log beta).");

  m.def("fit_map", [](std::int64_t N, const std::vector<double> &t,
                      const std::vector<std::int64_t> &S, const std::vector<std::int64_t> &I,
                      double alpha, double beta) {
    const auto fit = fit_map(series_from(N, t, S, I), SirParams::from_rates(alpha, beta, N));
    py::dict d;
    d["alpha"] = fit.params.alpha();
    d["beta"] = fit.params.beta();
    d["log_likelihood"] = fit.log_likelihood;
    d["iterations"] = fit.iterations;
    d["converged"] = fit.converged;
    d["trace"] = fit.trace;
    return d;
  }, py::arg("N"), py::arg("t"), py::arg("S"), py::arg("I"), py::arg("alpha") = 1.0,
        py::arg("beta") = 1.0);

  m.def("fit_ode", [](std::int64_t N, const std::vector<double> &t,
                      const std::vector<std::int64_t> &S, const std::vector<std::int64_t> &I) {
    const auto fit = least_squares_fit(series_from(N, t, S, I), N);
    py::dict d;
    d["alpha"] = fit.alpha;
    d["beta"] = fit.beta;
    d["residual"] = fit.residual;
    d["degenerate"] = fit.degenerate;
    return d;
  }, py::arg("N"), py::arg("t"), py::arg("S"), py::arg("I"));

  m.def("hmc", [](std::int64_t N, const std::vector<double> &t,
                  const std::vector<std::int64_t> &S, const std::vector<std::int64_t> &I,
                  int chains, int length, int burn_in, double step_size, int n_leapfrog,
                  std::uint64_t seed, int threads, std::optional<std::pair<double, double>> init,
                  double init_spread) {
    HmcConfig cfg;
    cfg.n_chains = chains;
    cfg.chain_len = length;
    cfg.burn_in = burn_in;
    cfg.step_size = step_size;
    cfg.n_leapfrog = n_leapfrog;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.init_spread = init_spread;
    if (init)
      cfg.init = Vec2{init->first, init->second};
    const auto obs = series_from(N, t, S, I);
    std::vector<PosteriorSample> samples;
    {
      py::gil_scoped_release release;
      samples = hmc_sample(obs, cfg);
    }
    Array out({samples.size(), std::size_t{6}});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto &s = samples[k];
      m(k, 0) = s.chain;
      m(k, 1) = s.iter;
      m(k, 2) = s.log_alpha;
      m(k, 3) = s.log_beta;
      m(k, 4) = s.log_post;
      m(k, 5) = s.accepted ? 1.0 : 0.0;
    }
    return out;
  }, py::arg("N"), py::arg("t"), py::arg("S"), py::arg("I"), py::arg("chains") = 10,
        py::arg("length") = 100, py::arg("burn_in") = 10, py::arg("step_size") = 0.05,
        py::arg("n_leapfrog") = 10, py::arg("seed") = 1, py::arg("threads") = 1,
        py::arg("init") = py::none(), py::arg("init_spread") = 0.05,
        "Posterior samples as rows (chain, iter, log_alpha, log_beta, log_post, accepted). "
        "init is a (log_alpha, log_beta) start; without it chains start uniformly in the prior box.");

  m.def("summarize", [](const Array &samples) {
    return summary_dict(summarize_posterior(samples_from(samples)));
  }, py::arg("samples"), "Means, quantiles, split R-hat and acceptance of hmc() output.");
}
