#include "dunif/infer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <thread>

#include "dunif/errors.hpp"
#include "dunif/rng.hpp"

namespace dunif {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double norm(const Vec2 &v) { return std::hypot(v[0], v[1]); }

} // namespace

LogLikelihood log_likelihood(const SirParams &params, const ObservationSeries &obs,
                             double eps, bool restricted) {
  if (obs.population != params.N)
    throw ValidationError("observation population " +
                          std::to_string(obs.population) +
                          " differs from model population " +
                          std::to_string(params.N));
  obs.validate();

  LogLikelihood ll;
  if (obs.records.size() < 2)
    return ll;

  std::optional<SirGenerator> full;
  GammaBound full_gamma;
  if (!restricted) {
    full = build_full_generator(params);
    full_gamma = gamma_full(params);
  }

  for (std::size_t k = 1; k < obs.records.size(); ++k) {
    const auto &a = obs.records[k - 1];
    const auto &b = obs.records[k];
    const SirState from{a.S, a.I}, to{b.S, b.I};
    const double dt = b.t - a.t;

    double prob = 0.0;
    Vec2 dprob{};
    if (restricted) {
      const RestrictedGenerator gen = build_restricted_generator(params, from, to);
      const GammaBound g = gamma_restricted(params, gen.window);
      const auto sys = sir_system(gen.Q, gen.dQ, g, dt);
      const auto r = diff_uniformize(
          StateDistribution::delta(gen.window.shape(), gen.window.index(from)),
          sys, eps);
      const std::size_t idx = gen.window.index(to);
      prob = r.p.values[idx];
      dprob = {r.dp[0].values[idx], r.dp[1].values[idx]};
    } else {
      const auto sys = sir_system(full->Q, full->dQ, full_gamma, dt);
      const auto shape = full->Q.grid_shape();
      const auto r = diff_uniformize(
          StateDistribution::delta(shape, full_index(params.N, from)), sys, eps);
      const std::size_t idx = full_index(params.N, to);
      prob = r.p.values[idx];
      dprob = {r.dp[0].values[idx], r.dp[1].values[idx]};
    }

    if (!(prob > 0.0)) {
      ll.value = kNegInf;
      ll.grad = {0.0, 0.0};
      ll.zero_probability = true;
      return ll;
    }
    ll.value += std::log(prob);
    ll.grad[0] += dprob[0] / prob;
    ll.grad[1] += dprob[1] / prob;
  }
  return ll;
}

MapFit fit_map(const ObservationSeries &obs, const SirParams &init,
               const AscentConfig &cfg) {
  auto eval = [&](const Vec2 &x) {
    return log_likelihood({x[0], x[1], init.N}, obs, cfg.eps);
  };

  Vec2 x{init.log_alpha, init.log_beta};
  LogLikelihood cur = eval(x);
  if (!std::isfinite(cur.value))
    throw ValidationError(
        "log-likelihood is -inf at the initial parameters; check that the "
        "observations are consistent with an SIR chain");

  MapFit fit;
  constexpr double kMaxMove = 1.0;  // trial moves are capped in log space
  double step = 0.0;
  Vec2 prev_x{}, prev_g{};
  bool have_prev = false;

  while (fit.iterations < cfg.max_iter) {
    const double gnorm = norm(cur.grad);
    if (gnorm < cfg.grad_tol) {
      fit.converged = true;
      break;
    }
    // Barzilai-Borwein trial step, falling back to doubling the last one.
    if (!have_prev) {
      step = cfg.initial_step / gnorm;
    } else {
      const Vec2 dx{x[0] - prev_x[0], x[1] - prev_x[1]};
      const Vec2 dg{cur.grad[0] - prev_g[0], cur.grad[1] - prev_g[1]};
      const double curv = -(dx[0] * dg[0] + dx[1] * dg[1]);
      step = curv > 0.0 ? (dx[0] * dx[0] + dx[1] * dx[1]) / curv : 2.0 * step;
    }
    step = std::min(step, kMaxMove / gnorm);

    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b) {
      const Vec2 trial{x[0] + step * cur.grad[0], x[1] + step * cur.grad[1]};
      const LogLikelihood next = eval(trial);
      if (std::isfinite(next.value) &&
          next.value >= cur.value + cfg.armijo * step * gnorm * gnorm) {
        prev_x = x;
        prev_g = cur.grad;
        have_prev = true;
        x = trial;
        cur = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      break;  // no ascent possible at working precision
    ++fit.iterations;
    fit.trace.push_back(cur.value);
  }

  fit.params = {x[0], x[1], init.N};
  fit.log_likelihood = cur.value;
  fit.grad = cur.grad;
  if (!fit.converged && norm(cur.grad) < cfg.grad_tol)
    fit.converged = true;
  return fit;
}

void HmcConfig::validate() const {
  if (n_chains < 1 || chain_len < 1)
    throw ValidationError("HMC needs at least one chain of positive length");
  if (burn_in < 0 || burn_in >= chain_len)
    throw ValidationError("HMC burn-in must be in [0, chain length)");
  if (!(step_size > 0.0))
    throw ValidationError("HMC step size must be positive");
  if (n_leapfrog < 0)
    throw ValidationError("HMC leapfrog count must be nonnegative");
  if (!(prior_box.lower[0] < prior_box.upper[0] &&
        prior_box.lower[1] < prior_box.upper[1]))
    throw ValidationError("HMC prior box is empty");
  if (threads < 1)
    throw ValidationError("HMC needs at least one thread");
}

bool leapfrog(const LogDensityFn &target, const Box &box, Vec2 &q, Vec2 &p,
              LogDensity &at_q, double step_size, int n_steps) {
  if (n_steps == 0)
    return true;
  const double half = 0.5 * step_size;
  p[0] += half * at_q.grad[0];
  p[1] += half * at_q.grad[1];
  for (int l = 0; l < n_steps; ++l) {
    q[0] += step_size * p[0];
    q[1] += step_size * p[1];
    if (!box.contains(q))
      return false;
    at_q = target(q);
    if (!std::isfinite(at_q.value))
      return false;
    const double w = l + 1 == n_steps ? half : step_size;
    p[0] += w * at_q.grad[0];
    p[1] += w * at_q.grad[1];
  }
  return true;
}

namespace {

std::vector<PosteriorSample> run_chain(const LogDensityFn &target,
                                       const HmcConfig &cfg, int chain) {
  Rng rng(Rng::stream_seed(cfg.seed, static_cast<std::uint64_t>(chain)));
  const Box &box = cfg.prior_box;

  auto density = [&](const Vec2 &q) {
    if (!box.contains(q))
      return LogDensity{kNegInf, {0.0, 0.0}};
    LogDensity d = target(q);
    if (!std::isfinite(d.value))
      d.grad = {0.0, 0.0};
    return d;
  };

  Vec2 q{};
  LogDensity cur{kNegInf, {0.0, 0.0}};
  auto clipped = [&](Vec2 x) {
    for (std::size_t d = 0; d < 2; ++d)
      x[d] = std::clamp(x[d], box.lower[d], box.upper[d]);
    return x;
  };
  if (cfg.init) {
    for (int attempt = 0; attempt < 100 && !std::isfinite(cur.value); ++attempt) {
      q = clipped({(*cfg.init)[0] + cfg.init_spread * rng.normal(),
                   (*cfg.init)[1] + cfg.init_spread * rng.normal()});
      cur = density(q);
    }
    if (!std::isfinite(cur.value)) {
      q = clipped(*cfg.init);
      cur = density(q);
    }
  } else {
    for (int attempt = 0; attempt < 1000 && !std::isfinite(cur.value); ++attempt) {
      for (std::size_t d = 0; d < 2; ++d)
        q[d] = box.lower[d] + (box.upper[d] - box.lower[d]) * rng.uniform();
      cur = density(q);
    }
  }

  std::vector<PosteriorSample> out;
  out.reserve(static_cast<std::size_t>(cfg.chain_len - cfg.burn_in));
  for (int iter = 0; iter < cfg.chain_len; ++iter) {
    Vec2 p{rng.normal(), rng.normal()};
    const double h0 = -cur.value + 0.5 * (p[0] * p[0] + p[1] * p[1]);
    Vec2 q_new = q;
    LogDensity at_new = cur;
    const double log_u = std::log(rng.uniform());
    bool accepted = false;
    if (leapfrog(density, box, q_new, p, at_new, cfg.step_size, cfg.n_leapfrog)) {
      const double h1 = -at_new.value + 0.5 * (p[0] * p[0] + p[1] * p[1]);
      if (log_u < h0 - h1 || (std::isinf(h0) && std::isfinite(h1))) {
        q = q_new;
        cur = at_new;
        accepted = true;
      }
    }
    if (iter >= cfg.burn_in)
      out.push_back({chain, iter, q[0], q[1], cur.value, accepted});
  }
  return out;
}

} // namespace

std::vector<PosteriorSample> hmc_sample(const LogDensityFn &target,
                                        const HmcConfig &cfg) {
  cfg.validate();
  std::vector<std::vector<PosteriorSample>> chains(
      static_cast<std::size_t>(cfg.n_chains));
  const int workers = std::min(cfg.threads, cfg.n_chains);
  if (workers <= 1) {
    for (int c = 0; c < cfg.n_chains; ++c)
      chains[static_cast<std::size_t>(c)] = run_chain(target, cfg, c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int c = next++; c < cfg.n_chains; c = next++)
            chains[static_cast<std::size_t>(c)] = run_chain(target, cfg, c);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          next = cfg.n_chains;
        }
      });
    }
    for (auto &t : pool)
      t.join();
    for (auto &e : errors)
      if (e)
        std::rethrow_exception(e);
  }

  std::vector<PosteriorSample> all;
  for (auto &c : chains)
    all.insert(all.end(), c.begin(), c.end());
  return all;
}

std::vector<PosteriorSample> hmc_sample(const ObservationSeries &obs,
                                        const HmcConfig &cfg, double eps) {
  obs.validate();
  const std::int64_t N = obs.population;
  LogDensityFn target = [&obs, N, eps](const Vec2 &x) {
    const LogLikelihood ll = log_likelihood({x[0], x[1], N}, obs, eps);
    return LogDensity{ll.value, ll.grad};
  };
  return hmc_sample(target, cfg);
}

namespace {

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_of(const std::vector<double> &v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i)
    s += v[i];
  return s / static_cast<double>(end - begin);
}

double split_rhat(const std::vector<std::vector<double>> &chains, std::size_t len) {
  const std::size_t n = len / 2;
  std::vector<double> means, vars;
  for (const auto &c : chains) {
    for (std::size_t half = 0; half < 2; ++half) {
      const std::size_t b = half * (len - n);
      const double m = mean_of(c, b, b + n);
      double v = 0.0;
      for (std::size_t i = b; i < b + n; ++i)
        v += (c[i] - m) * (c[i] - m);
      means.push_back(m);
      vars.push_back(v / static_cast<double>(n - 1));
    }
  }
  const double w = mean_of(vars, 0, vars.size());
  const double grand = mean_of(means, 0, means.size());
  double b = 0.0;
  for (double m : means)
    b += (m - grand) * (m - grand);
  b *= static_cast<double>(n) / static_cast<double>(means.size() - 1);
  if (w == 0.0)
    return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus =
      (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
      b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

} // namespace

PosteriorSummary summarize_posterior(const std::vector<PosteriorSample> &samples) {
  std::map<int, std::vector<const PosteriorSample *>> by_chain;
  for (const auto &s : samples)
    by_chain[s.chain].push_back(&s);
  if (by_chain.size() < 2)
    throw ValidationError("posterior summary needs at least two chains");
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto &[c, v] : by_chain)
    len = std::min(len, v.size());
  if (len < 10)
    throw ValidationError("posterior summary needs at least 10 samples per chain");

  PosteriorSummary out;
  out.n_samples = samples.size();
  std::array<std::vector<double>, 2> coord;
  for (const auto &s : samples) {
    coord[0].push_back(s.log_alpha);
    coord[1].push_back(s.log_beta);
  }
  const double n = static_cast<double>(samples.size());
  for (std::size_t d = 0; d < 2; ++d) {
    out.mean[d] = mean_of(coord[d], 0, coord[d].size());
    out.q05[d] = quantile(coord[d], 0.05);
    out.q95[d] = quantile(coord[d], 0.95);
  }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double c = 0.0;
      for (std::size_t k = 0; k < samples.size(); ++k)
        c += (coord[i][k] - out.mean[i]) * (coord[j][k] - out.mean[j]);
      out.covariance[i][j] = c / (n - 1.0);
    }
  for (std::size_t d = 0; d < 2; ++d) {
    out.sd[d] = std::sqrt(out.covariance[d][d]);
    std::vector<std::vector<double>> chains;
    for (const auto &[c, v] : by_chain) {
      std::vector<double> xs;
      for (std::size_t k = 0; k < len; ++k)
        xs.push_back(d == 0 ? v[k]->log_alpha : v[k]->log_beta);
      chains.push_back(std::move(xs));
    }
    out.rhat[d] = split_rhat(chains, len);
  }
  for (const auto &[c, v] : by_chain) {
    const auto acc = std::count_if(v.begin(), v.end(),
                                   [](const PosteriorSample *s) { return s->accepted; });
    out.acceptance.push_back(static_cast<double>(acc) / static_cast<double>(v.size()));
  }
  return out;
}

} // namespace dunif
