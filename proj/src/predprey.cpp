#include "dunif/predprey.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

std::vector<double> ramp(std::int64_t from, std::int64_t to, int power = 1) {
  std::vector<double> v;
  for (std::int64_t k = from; k <= to; ++k)
    v.push_back(std::pow(static_cast<double>(k), power));
  return v;
}

void check(const PredPreyParams &p) {
  if (!(p.alpha > 0.0 && p.beta > 0.0 && p.delta > 0.0))
    throw ValidationError("predator-prey rates must be positive");
  if (p.X_max < 1 || p.Y_max < 1)
    throw ValidationError("predator-prey caps must be at least 1");
}

} // namespace

TensorOperator build_pp_generator(const PredPreyParams &p) {
  check(p);
  const auto nx = static_cast<std::size_t>(p.X_max + 1);
  const auto ny = static_cast<std::size_t>(p.Y_max + 1);

  auto x_birth_loss = ramp(0, p.X_max);
  x_birth_loss.back() = 0.0;
  auto x_cap_loss = ramp(0, p.X_max, 2);
  x_cap_loss.back() = 0.0;

  const BandMatrix x_cons_gain = BandMatrix::superdiag(ramp(1, p.X_max));
  const BandMatrix x_cons_loss = BandMatrix::diag(ramp(0, p.X_max));
  const BandMatrix x_birth_gain = BandMatrix::subdiag(ramp(0, p.X_max - 1));
  const BandMatrix x_birth_lossm = BandMatrix::diag(std::move(x_birth_loss));
  const BandMatrix x_cap_gain = BandMatrix::subdiag(ramp(0, p.X_max - 1, 2));
  const BandMatrix x_cap_lossm = BandMatrix::diag(std::move(x_cap_loss));
  const BandMatrix x_id = BandMatrix::identity(nx);

  const BandMatrix y_cons_gain = BandMatrix::subdiag(ramp(0, p.Y_max - 1));
  const BandMatrix y_count = BandMatrix::diag(ramp(0, p.Y_max));
  const BandMatrix y_id = BandMatrix::identity(ny);
  const BandMatrix y_death_gain = BandMatrix::superdiag(ramp(1, p.Y_max));

  const double cap = p.alpha / static_cast<double>(p.X_max);
  TensorOperator Q({nx, ny});
  Q.add_term(p.beta, {x_cons_gain, y_cons_gain});
  Q.add_term(p.alpha, {x_birth_gain, y_id});
  Q.add_term(-cap, {x_cap_gain, y_id});
  Q.add_term(p.delta, {x_id, y_death_gain});
  Q.add_term(-p.beta, {x_cons_loss, y_count});
  Q.add_term(-p.alpha, {x_birth_lossm, y_id});
  Q.add_term(cap, {x_cap_lossm, y_id});
  Q.add_term(-p.delta, {x_id, y_count});
  return Q;
}

double pp_gamma(const PredPreyParams &p) {
  const auto X = static_cast<double>(p.X_max);
  const auto Y = static_cast<double>(p.Y_max);
  return p.beta * X * Y + p.delta * Y + p.alpha * X / 4.0 + p.alpha * X;
}

std::vector<PpSnapshot> solve_pp(const PredPreyParams &params, std::int64_t X0,
                                 std::int64_t Y0, std::span<const double> times,
                                 double eps) {
  const TensorOperator Q = build_pp_generator(params);
  if (X0 < 0 || X0 > params.X_max || Y0 < 0 || Y0 > params.Y_max)
    throw ValidationError("initial predator-prey state outside the grid");
  const auto p0 = StateDistribution::delta(Q.grid_shape(), pp_index(params, X0, Y0));
  std::vector<PpSnapshot> out;
  for (auto &s : forward_solve(Q, pp_gamma(params), p0, times, eps)) {
    PpSnapshot snap{s.time, std::move(s.p), s.report};
    snap.leaked = std::max(0.0, 1.0 - snap.p.total() - snap.report.mass_defect);
    snap.leak_warning = snap.leaked > 1e-3;
    out.push_back(std::move(snap));
  }
  return out;
}

} // namespace dunif
