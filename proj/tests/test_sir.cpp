#include "doctest.h"

#include <cmath>
#include <random>

#include "dunif/errors.hpp"
#include "dunif/sir.hpp"
#include "oracle.hpp"

using namespace dunif;

namespace {

oracle::Matrix dense_of(const TensorOperator &op) {
  return oracle::from_row_major(op.dense(), op.size());
}

double max_abs_diag(const oracle::Matrix &Q) { return Q.diagonal().cwiseAbs().maxCoeff(); }

std::vector<double> full_solve(const SirParams &p, SirState from, double t) {
  const auto gen = build_full_generator(p);
  const auto n = static_cast<std::size_t>(p.N + 1);
  return uniformize(StateDistribution::delta({n, n}, full_index(p.N, from)),
                    make_system(gen.Q, gamma_full(p).gamma, t))
      .p.values;
}

double restricted_entry(const SirParams &p, SirState from, SirState to, double t) {
  const auto rg = build_restricted_generator(p, from, to);
  const auto g = gamma_restricted(p, rg.window);
  const auto p0 = StateDistribution::delta(rg.window.shape(), rg.window.index(from));
  const auto r = uniformize(p0, make_system(rg.Q, g.gamma, t));
  return r.p.values[rg.window.index(to)];
}

ObservationSeries euler_observations(double a, double b, std::int64_t N, double S0,
                                     double I0, int days, bool round) {
  const auto traj = euler_solve_rates(a, b, N, S0, I0, 5e-4, days);
  ObservationSeries obs{N, {}};
  for (int d = 0; d <= days; ++d) {
    const auto &pt = traj[static_cast<std::size_t>(d) * 2000];
    CHECK(pt.t == doctest::Approx(d));
    const double S = round ? std::round(pt.S) : pt.S;
    const double I = round ? std::round(pt.I) : pt.I;
    obs.records.push_back({static_cast<double>(d), static_cast<std::int64_t>(S),
                           static_cast<std::int64_t>(I), ""});
  }
  return obs;
}

} // namespace

TEST_CASE("tensor generator equals the entrywise construction, N = 1..8") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  for (std::int64_t N = 1; N <= 8; ++N) {
    const double a = u(g), b = u(g);
    const auto gen = build_full_generator(SirParams::from_rates(a, b, N));
    CHECK((dense_of(gen.Q) - oracle::sir_q(N, a, b)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("N = 3 generator, explicit entries") {
  const double a = 1.0, b = 3.0;
  const auto Q = dense_of(build_full_generator(SirParams::from_rates(a, b, 3)).Q);
  auto at = [&](SirState to, SirState from) {
    return Q(static_cast<Eigen::Index>(full_index(3, to)),
             static_cast<Eigen::Index>(full_index(3, from)));
  };
  CHECK(at({2, 2}, {3, 1}) == doctest::Approx(b * 3 * 1 / 3.0));
  CHECK(at({3, 0}, {3, 1}) == doctest::Approx(a));
  CHECK(at({3, 1}, {3, 1}) == doctest::Approx(-(b + a)));
  // S = 0: only recovery.
  CHECK(at({0, 2}, {0, 2}) == doctest::Approx(-2 * a));
  // I = N: no infection out of it.
  CHECK(at({1, 3}, {1, 3}) == doctest::Approx(-3 * a));
  // Corner S = 0, I = N.
  CHECK(at({0, 3}, {0, 3}) == doctest::Approx(-3 * a));
}

TEST_CASE("states with I = 0 are absorbing") {
  const std::int64_t N = 6;
  const auto Q = dense_of(build_full_generator(SirParams::from_rates(1.4, 2.2, N)).Q);
  for (std::int64_t S = 0; S <= N; ++S)
    CHECK(Q.col(static_cast<Eigen::Index>(full_index(N, {S, 0}))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator derivatives match finite differences in log parameters") {
  const std::int64_t N = 5;
  const double a = 1.0, b = 2.0, h = 1e-6;
  const auto gen = build_full_generator(SirParams::from_rates(a, b, N));
  const oracle::Matrix fd_a =
      (oracle::sir_q(N, a * std::exp(h), b) - oracle::sir_q(N, a * std::exp(-h), b)) / (2 * h);
  const oracle::Matrix fd_b =
      (oracle::sir_q(N, a, b * std::exp(h)) - oracle::sir_q(N, a, b * std::exp(-h))) / (2 * h);
  CHECK((dense_of(gen.dQ[kLogAlpha]) - fd_a).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((dense_of(gen.dQ[kLogBeta]) - fd_b).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("gamma_full") {
  SUBCASE("N = 500 with alpha = 1, beta = 2.5") {
    CHECK(gamma_full(SirParams::from_rates(1.0, 2.5, 500)).gamma ==
          doctest::Approx(1746.5).epsilon(1e-14));
  }
  SUBCASE("alpha branch") {
    const auto g = gamma_full(SirParams::from_rates(10.0, 1.0, 3));
    CHECK(g.gamma == doctest::Approx(30.0));
    CHECK(g.dgamma[kLogAlpha] == doctest::Approx(30.0));
    CHECK(g.dgamma[kLogBeta] == 0.0);
  }
  SUBCASE("equals the dense diagonal maximum") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (std::int64_t N = 1; N <= 10; ++N)
      for (int k = 0; k < 5; ++k) {
        const double a = u(gen), b = u(gen);
        CHECK(gamma_full(SirParams::from_rates(a, b, N)).gamma ==
              doctest::Approx(max_abs_diag(oracle::sir_q(N, a, b))).epsilon(1e-13));
      }
  }
  SUBCASE("derivatives match finite differences away from the tie") {
    for (auto [a, b] : {std::pair{1.0, 2.5}, std::pair{10.0, 1.0}}) {
      const auto p = SirParams::from_rates(a, b, 7);
      const double h = 1e-6;
      auto gam = [](double la, double lb) { return gamma_full({la, lb, 7}).gamma; };
      const auto g = gamma_full(p);
      CHECK(g.dgamma[0] == doctest::Approx((gam(p.log_alpha + h, p.log_beta) -
                                            gam(p.log_alpha - h, p.log_beta)) / (2 * h))
                               .epsilon(1e-8));
      CHECK(g.dgamma[1] == doctest::Approx((gam(p.log_alpha, p.log_beta + h) -
                                            gam(p.log_alpha, p.log_beta - h)) / (2 * h))
                               .epsilon(1e-8)
                               .scale(1.0));
    }
  }
}

TEST_CASE("restricted window shapes") {
  const auto w = restricted_window({4, 1}, {3, 1});
  // ΔS = -1, ΔR = 1: S in {3, 4}, I in {0, 1, 2}.
  CHECK(w.S_min == 3);
  CHECK(w.S_max == 4);
  CHECK(w.I_min == 0);
  CHECK(w.I_max == 2);
  CHECK(w.s_dim() == 2);
  CHECK(w.i_dim() == 3);

  CHECK_THROWS_AS(restricted_window({3, 1}, {4, 0}), ValidationError);
  CHECK_THROWS_AS(restricted_window({3, 1}, {3, 2}), ValidationError);
}

TEST_CASE("restricted generator, same state") {
  const double a = 1.5, b = 2.0;
  const std::int64_t N = 10;
  const auto p = SirParams::from_rates(a, b, N);
  const auto rg = build_restricted_generator(p, {6, 3}, {6, 3});
  REQUIRE(rg.Q.size() == 1);
  CHECK(rg.Q.dense()[0] == doctest::Approx(-(b * 6 * 3 / N + a * 3)));
}

TEST_CASE("restricted entry equals the full solve, N = 5, (4,1) -> (3,1)") {
  const auto p = SirParams::from_rates(1.0, 2.0, 5);
  const double t = 0.8;
  const auto full = full_solve(p, {4, 1}, t);
  CHECK(std::abs(restricted_entry(p, {4, 1}, {3, 1}, t) - full[full_index(5, {3, 1})]) <
        2e-10);
}

TEST_CASE("restricted generator columns sum to at most zero") {
  const auto p = SirParams::from_rates(1.3, 2.4, 8);
  for (std::int64_t S = 0; S <= 8; ++S)
    for (std::int64_t I = 0; S + I <= 8; ++I)
      for (std::int64_t S2 = 0; S2 <= S; ++S2)
        for (std::int64_t I2 = 0; S2 + I2 <= 8; ++I2) {
          if (S2 + I2 > S + I)
            continue;  // recovered would decrease
          const auto Q = dense_of(build_restricted_generator(p, {S, I}, {S2, I2}).Q);
          CHECK(Q.colwise().sum().maxCoeff() <= 1e-12);
        }
}

TEST_CASE("gamma_restricted") {
  SUBCASE("I_max = 0") {
    const auto w = restricted_window({5, 0}, {5, 0});
    CHECK(gamma_restricted(SirParams::from_rates(1.0, 2.0, 5), w).gamma == 0.0);
  }
  SUBCASE("explicit value") {
    RestrictedWindow w{3, 4, 0, 2};
    CHECK(gamma_restricted(SirParams::from_rates(1.0, 2.0, 5), w).gamma ==
          doctest::Approx(5.2));
  }
  SUBCASE("derivatives match finite differences") {
    RestrictedWindow w{2, 6, 1, 4};
    const SirParams p = SirParams::from_rates(0.7, 1.9, 10);
    const double h = 1e-6;
    auto gam = [&](double la, double lb) { return gamma_restricted({la, lb, 10}, w).gamma; };
    const auto g = gamma_restricted(p, w);
    CHECK(g.dgamma[0] == doctest::Approx((gam(p.log_alpha + h, p.log_beta) -
                                          gam(p.log_alpha - h, p.log_beta)) / (2 * h))
                             .epsilon(1e-8));
    CHECK(g.dgamma[1] == doctest::Approx((gam(p.log_alpha, p.log_beta + h) -
                                          gam(p.log_alpha, p.log_beta - h)) / (2 * h))
                             .epsilon(1e-8));
  }
  SUBCASE("dominates the restricted diagonal") {
    const auto p = SirParams::from_rates(1.1, 3.3, 9);
    for (std::int64_t S = 0; S <= 9; ++S)
      for (std::int64_t I = 0; S + I <= 9; ++I)
        for (std::int64_t S2 = 0; S2 <= S; ++S2)
          for (std::int64_t I2 = 0; S2 + I2 <= S + I; ++I2) {
            const auto rg = build_restricted_generator(p, {S, I}, {S2, I2});
            CHECK(gamma_restricted(p, rg.window).gamma >=
                  max_abs_diag(dense_of(rg.Q)) * (1 - 1e-14));
          }
  }
}

TEST_CASE("property: restriction consistency for N <= 8") {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (std::int64_t N = 1; N <= 8; ++N) {
    const auto p = SirParams::from_rates(u(g), u(g), N);
    const double t = std::uniform_real_distribution<double>(0.1, 1.5)(g);
    for (std::int64_t S = 0; S <= N; ++S)
      for (std::int64_t I = 0; S + I <= N; ++I) {
        const auto full = full_solve(p, {S, I}, t);
        for (std::int64_t S2 = 0; S2 <= S; ++S2)
          for (std::int64_t I2 = 0; S2 + I2 <= S + I; ++I2)
            CHECK(std::abs(restricted_entry(p, {S, I}, {S2, I2}, t) -
                           full[full_index(N, {S2, I2})]) < 2e-10);
      }
  }
}

TEST_CASE("property: susceptibles never increase") {
  const std::int64_t N = 8;
  const auto p = SirParams::from_rates(0.9, 2.7, N);
  for (std::int64_t S = 0; S <= N; ++S)
    for (std::int64_t I = 0; S + I <= N; ++I) {
      const auto full = full_solve(p, {S, I}, 1.2);
      for (std::int64_t S2 = S + 1; S2 <= N; ++S2)
        for (std::int64_t I2 = 0; I2 <= N; ++I2)
          CHECK(full[full_index(N, {S2, I2})] < 1e-10);
    }
}

TEST_CASE("euler_solve") {
  SUBCASE("zero rates") {
    const auto tr = euler_solve_rates(0.0, 0.0, 10, 7, 3, 0.1, 2.0);
    for (const auto &pt : tr) {
      CHECK(pt.S == 7.0);
      CHECK(pt.I == 3.0);
    }
    CHECK(tr.back().t == 2.0);
  }
  SUBCASE("one step") {
    const auto p = SirParams::from_rates(1.0, 2.5, 500);
    const auto tr = euler_solve(p, 497, 3, 0.01, 0.01);
    REQUIRE(tr.size() == 2);
    CHECK(tr[1].S == 497.0 - 2.5 * 497.0 * 3.0 / 500.0 * 0.01);
    CHECK(tr[1].I == 3.0 + 2.5 * 497.0 * 3.0 / 500.0 * 0.01 - 1.0 * 3.0 * 0.01);
  }
  SUBCASE("N = 500 curve has a single interior peak") {
    const auto tr = euler_solve(SirParams::from_rates(1.0, 2.5, 500), 497, 3, 1e-3, 20.0);
    std::size_t peak = 0;
    for (std::size_t k = 1; k < tr.size(); ++k)
      if (tr[k].I > tr[peak].I)
        peak = k;
    CHECK(peak > 0);
    CHECK(peak + 1 < tr.size());
    for (std::size_t k = 1; k <= peak; ++k)
      CHECK(tr[k].I >= tr[k - 1].I);
    for (std::size_t k = peak + 1; k < tr.size(); ++k)
      CHECK(tr[k].I <= tr[k - 1].I);
  }
  SUBCASE("last step lands on t_end") {
    const auto tr = euler_solve_rates(1.0, 2.0, 50, 45, 5, 0.3, 1.0);
    CHECK(tr.back().t == 1.0);
    CHECK(tr.size() == 5);
  }
}

TEST_CASE("least squares fit") {
  SUBCASE("round trip on exact Euler data") {
    // Large N keeps integer rounding far below the fit's resolution.
    const std::int64_t N = 1000000;
    const double a = 0.4, b = 1.1;
    const auto obs = euler_observations(a, b, N, N - 1000, 1000, 5, true);
    const auto fit = least_squares_fit(obs, N);
    CHECK(!fit.degenerate);
    CHECK(std::abs(fit.alpha - a) / a < 1e-4);
    CHECK(std::abs(fit.beta - b) / b < 1e-4);
  }
  SUBCASE("static data is degenerate") {
    ObservationSeries obs{10, {{0, 7, 0, ""}, {1, 7, 0, ""}}};
    const auto fit = least_squares_fit(obs, 10);
    CHECK(fit.degenerate);
    CHECK(fit.alpha == 0.0);
    CHECK(fit.beta == 0.0);
  }
  SUBCASE("optimum beats random parameter points") {
    ObservationSeries obs{100, {{0, 95, 5, ""}, {1, 88, 9, ""}, {2, 77, 15, ""},
                                {3, 65, 20, ""}, {4, 55, 21, ""}, {5, 48, 19, ""}}};
    const auto fit = least_squares_fit(obs, 100);
    const double dt = 5.0 / 10000.0;
    std::mt19937_64 g(23);
    std::uniform_real_distribution<double> u(std::log(0.01), std::log(10.0));
    for (int k = 0; k < 100; ++k)
      CHECK(fit.residual <= ode_residual(obs, 100, std::exp(u(g)), std::exp(u(g)), dt) + 1e-9);
  }
  SUBCASE("too few observations") {
    ObservationSeries obs{10, {{0, 7, 1, ""}}};
    CHECK_THROWS_AS(least_squares_fit(obs, 10), ValidationError);
  }
}
