#include "dunif/sir.hpp"

#include <algorithm>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <limits>
#include <memory>
#include <string>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

std::vector<double> counts(std::int64_t from, std::int64_t to) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, to - from + 1)));
  for (std::int64_t k = from; k <= to; ++k)
    v.push_back(static_cast<double>(std::max<std::int64_t>(k, 0)));
  return v;
}

// Shared by the full and restricted constructions: the infection and
// recovery band pairs, each as (gain, loss) factors over the S and I axes.
struct SirBands {
  BandMatrix s_inf_gain, s_inf_loss, s_rec;
  BandMatrix i_inf_gain, i_inf_loss, i_rec_gain, i_rec_loss;
};

SirGenerator assemble(const SirParams &params, const SirBands &b,
                      std::vector<std::size_t> shape) {
  const double alpha = params.alpha();
  const double inf = params.beta() / static_cast<double>(params.N);

  TensorOperator infection(shape), recovery(shape);
  infection.add_term(1.0, {b.s_inf_gain, b.i_inf_gain});
  infection.add_term(-1.0, {b.s_inf_loss, b.i_inf_loss});
  recovery.add_term(1.0, {b.s_rec, b.i_rec_gain});
  recovery.add_term(-1.0, {b.s_rec, b.i_rec_loss});

  return {linear_combination(inf, infection, alpha, recovery),
          {linear_combination(0.0, infection, alpha, recovery),
           linear_combination(inf, infection, 0.0, recovery)}};
}

void check_params(const SirParams &p) {
  if (p.N <= 0)
    throw ValidationError("population size must be positive");
  if (!std::isfinite(p.log_alpha) || !std::isfinite(p.log_beta))
    throw ValidationError("SIR log-parameters must be finite");
}

} // namespace

SirGenerator build_full_generator(const SirParams &params) {
  check_params(params);
  const std::int64_t N = params.N;
  const auto n = static_cast<std::size_t>(N + 1);

  std::vector<double> i_inf_loss = counts(0, N);
  i_inf_loss.back() = 0.0;  // no infections out of I = N

  SirBands b{BandMatrix::superdiag(counts(1, N)),
             BandMatrix::diag(counts(0, N)),
             BandMatrix::identity(n),
             BandMatrix::subdiag(counts(0, N - 1)),
             BandMatrix::diag(std::move(i_inf_loss)),
             BandMatrix::superdiag(counts(1, N)),
             BandMatrix::diag(counts(0, N))};
  return assemble(params, b, {n, n});
}

GammaBound gamma_full(const SirParams &params) {
  check_params(params);
  const double alpha = params.alpha();
  const double beta = params.beta();
  const double m = static_cast<double>(params.N - 1);
  GammaBound g;
  // Ties α = (N-1)β take the α branch.
  if (alpha >= m * beta) {
    g.gamma = m * alpha + alpha;
    g.dgamma = {static_cast<double>(params.N) * alpha, 0.0};
  } else {
    g.gamma = m * alpha + m * beta;
    g.dgamma = {m * alpha, m * beta};
  }
  return g;
}

RestrictedWindow restricted_window(SirState from, SirState to) {
  const std::int64_t dS = to.S - from.S;
  const std::int64_t dI = to.I - from.I;
  const std::int64_t dR = -dS - dI;
  if (dS > 0 || dR < 0)
    throw ValidationError(
        "impossible SIR transition (" + std::to_string(from.S) + "," +
        std::to_string(from.I) + ") -> (" + std::to_string(to.S) + "," +
        std::to_string(to.I) + "): susceptibles may not increase and " +
        "recovered may not decrease");
  return {from.S + dS, from.S, from.I - dR, from.I - dS};
}

RestrictedGenerator build_restricted_generator(const SirParams &params,
                                               SirState from, SirState to) {
  check_params(params);
  for (SirState x : {from, to})
    if (x.S < 0 || x.I < 0 || x.S > params.N || x.I > params.N)
      throw ValidationError("SIR state outside [0, N]^2");
  const RestrictedWindow w = restricted_window(from, to);

  // Degenerate one-row axes have no off-diagonal band; use an all-zero
  // diagonal of the same dimension instead.
  auto offdiag = [](std::size_t dim, bool super, std::vector<double> entries) {
    if (dim == 1)
      return BandMatrix::diag({0.0});
    return super ? BandMatrix::superdiag(std::move(entries))
                 : BandMatrix::subdiag(std::move(entries));
  };

  SirBands b{offdiag(w.s_dim(), true, counts(w.S_min + 1, w.S_max)),
             BandMatrix::diag(counts(w.S_min, w.S_max)),
             BandMatrix::identity(w.s_dim()),
             offdiag(w.i_dim(), false, counts(w.I_min, w.I_max - 1)),
             BandMatrix::diag(counts(w.I_min, w.I_max)),
             offdiag(w.i_dim(), true, counts(w.I_min + 1, w.I_max)),
             BandMatrix::diag(counts(w.I_min, w.I_max))};
  auto gen = assemble(params, b, w.shape());
  return {std::move(gen.Q), std::move(gen.dQ), w};
}

GammaBound gamma_restricted(const SirParams &params, const RestrictedWindow &w) {
  check_params(params);
  const double alpha = params.alpha();
  const double inf = params.beta() / static_cast<double>(params.N);
  const auto i_max = static_cast<double>(std::max<std::int64_t>(w.I_max, 0));
  const auto s_max = static_cast<double>(std::max<std::int64_t>(w.S_max, 0));
  GammaBound g;
  g.gamma = inf * s_max * i_max + alpha * i_max;
  g.dgamma = {alpha * i_max, inf * s_max * i_max};
  return g;
}

UniformizedSystem sir_system(const TensorOperator &Q,
                             const std::array<TensorOperator, 2> &dQ,
                             const GammaBound &g, double t) {
  return make_system(Q, dQ, g.gamma, g.dgamma, t);
}

std::vector<SirPoint> euler_solve(const SirParams &params, double S0, double I0,
                                  double dt, double t_end) {
  check_params(params);
  return euler_solve_rates(params.alpha(), params.beta(), params.N, S0, I0, dt,
                           t_end);
}

std::vector<SirPoint> euler_solve_rates(double alpha, double beta, std::int64_t N,
                                        double S0, double I0, double dt,
                                        double t_end) {
  if (!(dt > 0.0))
    throw ValidationError("Euler step must be positive");
  if (!(t_end >= 0.0))
    throw ValidationError("Euler end time must be nonnegative");
  const auto steps =
      t_end == 0.0 ? 0 : static_cast<long>(std::ceil(t_end / dt - 1e-9));
  std::vector<SirPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  double S = S0, I = I0;
  out.push_back({0.0, S, I});
  const double inv_n = 1.0 / static_cast<double>(N);
  for (long k = 1; k <= steps; ++k) {
    const double t_prev = (k - 1) * dt;
    const double t = k == steps ? t_end : k * dt;
    const double h = t - t_prev;
    const double infections = beta * S * I * inv_n * h;
    const double recoveries = alpha * I * h;
    S -= infections;
    I += infections - recoveries;
    out.push_back({t, S, I});
  }
  return out;
}

double ode_residual(const ObservationSeries &obs, std::int64_t N, double alpha,
                    double beta, double dt) {
  if (obs.records.empty())
    return 0.0;
  const double inv_n = 1.0 / static_cast<double>(N);
  double S = static_cast<double>(obs.records.front().S);
  double I = static_cast<double>(obs.records.front().I);
  double residual = 0.0;
  for (std::size_t k = 1; k < obs.records.size(); ++k) {
    const double span = obs.records[k].t - obs.records[k - 1].t;
    const long n = std::max(1L, std::lround(span / dt));
    const double h = span / static_cast<double>(n);
    for (long j = 0; j < n; ++j) {
      const double infections = beta * S * I * inv_n * h;
      const double recoveries = alpha * I * h;
      S -= infections;
      I += infections - recoveries;
    }
    const double dS = S - static_cast<double>(obs.records[k].S);
    const double dI = I - static_cast<double>(obs.records[k].I);
    residual += dS * dS + dI * dI;
  }
  return residual;
}

namespace {

struct FitContext {
  const ObservationSeries *obs;
  std::int64_t N;
  double dt;
  int evaluations = 0;
};

double fit_objective(const gsl_vector *x, void *data) {
  auto *ctx = static_cast<FitContext *>(data);
  ++ctx->evaluations;
  const double a = std::exp(gsl_vector_get(x, 0));
  const double b = std::exp(gsl_vector_get(x, 1));
  const double r = ode_residual(*ctx->obs, ctx->N, a, b, ctx->dt);
  return std::isfinite(r) ? r : std::numeric_limits<double>::max();
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer *m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector *v) const { gsl_vector_free(v); }
};
using MinimizerPtr = std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter>;
using VectorPtr = std::unique_ptr<gsl_vector, VectorDeleter>;

struct SimplexResult {
  double log_alpha, log_beta, value;
  bool converged;
};

SimplexResult nelder_mead(FitContext &ctx, double la, double lb) {
  gsl_multimin_function f{&fit_objective, 2, &ctx};
  VectorPtr x(gsl_vector_alloc(2)), step(gsl_vector_alloc(2));
  gsl_vector_set(x.get(), 0, la);
  gsl_vector_set(x.get(), 1, lb);
  gsl_vector_set_all(step.get(), 0.5);
  MinimizerPtr m(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2));
  gsl_multimin_fminimizer_set(m.get(), &f, x.get(), step.get());

  bool converged = false;
  for (int iter = 0; iter < 5000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS)
      break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), 1e-10) ==
        GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  const gsl_vector *best = gsl_multimin_fminimizer_x(m.get());
  return {gsl_vector_get(best, 0), gsl_vector_get(best, 1),
          gsl_multimin_fminimizer_minimum(m.get()), converged};
}

} // namespace

OdeFit least_squares_fit(const ObservationSeries &obs, std::int64_t N) {
  if (obs.records.size() < 2)
    throw ValidationError("least-squares fit needs at least two observations");
  ObservationSeries checked = obs;
  checked.population = N;
  checked.validate();

  const auto &first = obs.records.front();
  const auto &last = obs.records.back();
  const double span = last.t - first.t;

  OdeFit fit;
  const bool static_data = std::all_of(
      obs.records.begin(), obs.records.end(),
      [&](const Observation &o) { return o.S == first.S && o.I == first.I; });
  if (static_data) {
    // Zero rates reproduce the data exactly; report the smallest such point.
    fit.degenerate = true;
    return fit;
  }

  // Moment estimates from trapezoidal integrals of I and S·I.
  double int_i = 0.0, int_si = 0.0;
  for (std::size_t k = 1; k < obs.records.size(); ++k) {
    const auto &a = obs.records[k - 1];
    const auto &b = obs.records[k];
    const double h = b.t - a.t;
    int_i += 0.5 * h * static_cast<double>(a.I + b.I);
    int_si += 0.5 * h *
              (static_cast<double>(a.S) * static_cast<double>(a.I) +
               static_cast<double>(b.S) * static_cast<double>(b.I));
  }
  const double recovered = static_cast<double>((N - last.S - last.I) -
                                               (N - first.S - first.I));
  const double infected = static_cast<double>(first.S - last.S);
  double a0 = int_i > 0 && recovered > 0 ? recovered / int_i : 1.0 / span;
  double b0 = int_si > 0 && infected > 0
                  ? infected * static_cast<double>(N) / int_si
                  : 1.0 / span;

  FitContext ctx{&obs, N, span / 10000.0};
  gsl_set_error_handler_off();
  const double la = std::log(a0), lb = std::log(b0);
  const std::array<std::array<double, 2>, 5> starts{
      {{la, lb}, {la + 1, lb}, {la - 1, lb}, {la, lb + 1}, {la, lb - 1}}};

  SimplexResult best{la, lb, std::numeric_limits<double>::infinity(), false};
  for (const auto &s : starts) {
    const SimplexResult r = nelder_mead(ctx, s[0], s[1]);
    if (r.value < best.value)
      best = r;
  }
  fit.evaluations = ctx.evaluations;
  fit.residual = best.value;
  if (!best.converged)
    throw NumericalError("least-squares fit did not converge; best residual " +
                         std::to_string(best.value) + " at alpha=" +
                         std::to_string(std::exp(best.log_alpha)) +
                         ", beta=" + std::to_string(std::exp(best.log_beta)));
  fit.alpha = std::exp(best.log_alpha);
  fit.beta = std::exp(best.log_beta);
  return fit;
}

} // namespace dunif
