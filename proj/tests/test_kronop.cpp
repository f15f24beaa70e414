#include "doctest.h"

#include <random>

#include "dunif/errors.hpp"
#include "dunif/kronop.hpp"
#include "dunif/sir.hpp"
#include "oracle.hpp"

using namespace dunif;

namespace {

oracle::Matrix dense_of(const BandMatrix &m) {
  return oracle::from_row_major(m.dense(), m.dim());
}

oracle::Matrix dense_of(const TensorOperator &op) {
  return oracle::from_row_major(op.dense(), op.size());
}

// Reference materialization of a sum of Kronecker products, written
// independently of TensorOperator::dense().
oracle::Matrix kron_sum(const std::vector<std::pair<double, std::vector<BandMatrix>>> &terms) {
  oracle::Matrix total;
  for (const auto &[c, factors] : terms) {
    oracle::Matrix k = dense_of(factors[0]);
    for (std::size_t i = 1; i < factors.size(); ++i)
      k = oracle::kron(k, dense_of(factors[i]));
    if (total.size() == 0)
      total = c * k;
    else
      total += c * k;
  }
  return total;
}

std::vector<double> random_entries(std::mt19937_64 &g, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto &x : v)
    x = u(g);
  return v;
}

BandMatrix random_band(std::mt19937_64 &g, std::size_t dim) {
  switch (g() % 4) {
  case 0:
    return BandMatrix::identity(dim);
  case 1:
    return BandMatrix::diag(random_entries(g, dim));
  case 2:
    return BandMatrix::superdiag(random_entries(g, dim - 1));
  default:
    return BandMatrix::subdiag(random_entries(g, dim - 1));
  }
}

} // namespace

TEST_CASE("band matrices densify to their bands") {
  const auto sup = BandMatrix::superdiag({1.0, 2.0, 3.0});
  const oracle::Matrix d = dense_of(sup);
  oracle::Matrix expect = oracle::Matrix::Zero(4, 4);
  expect(0, 1) = 1.0;
  expect(1, 2) = 2.0;
  expect(2, 3) = 3.0;
  CHECK(d == expect);

  CHECK(dense_of(BandMatrix::diag({1.0, 1.0, 1.0})) == oracle::Matrix::Identity(3, 3));
  CHECK(dense_of(BandMatrix::identity(3)) == oracle::Matrix::Identity(3, 3));

  const auto sub = BandMatrix::subdiag({5.0});
  CHECK(dense_of(sub)(1, 0) == 5.0);
  CHECK(sub.offset() == -1);
  CHECK(sup.offset() == 1);
}

TEST_CASE("infection loss band on S for N = 3 is diag(0, 1, 2, 3)") {
  const auto gen = build_full_generator(SirParams::from_rates(1.0, 1.0, 3));
  bool found = false;
  // The S factor of the negative infection term carries the S counts.
  for (const auto &t : gen.dQ[kLogBeta].terms())
    if (t.coefficient < 0 && t.factors[0].band() == Band::diagonal &&
        !t.factors[0].is_identity()) {
      const auto e = t.factors[0].entries();
      CHECK(std::vector<double>(e.begin(), e.end()) == std::vector<double>{0, 1, 2, 3});
      found = true;
    }
  CHECK(found);
}

TEST_CASE("band length mismatches are rejected") {
  CHECK_THROWS_AS(BandMatrix(3, Band::diagonal, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(BandMatrix(3, Band::superdiagonal, {1.0, 2.0, 3.0}), ValidationError);
  CHECK_THROWS_AS(BandMatrix(0, Band::diagonal, {}), ValidationError);
}

TEST_CASE("operator factors must match the grid") {
  TensorOperator op({3, 4});
  CHECK_THROWS_AS(op.add_term(1.0, {BandMatrix::identity(3)}), ValidationError);
  CHECK_THROWS_AS(op.add_term(1.0, {BandMatrix::identity(4), BandMatrix::identity(3)}),
                  ValidationError);
  op.add_term(1.0, {BandMatrix::identity(3), BandMatrix::identity(4)});
  std::vector<double> v(11, 1.0), out(12);
  CHECK_THROWS_AS(op.apply(v, out), ValidationError);
}

TEST_CASE("identity operator and scaling") {
  TensorOperator id({3, 2});
  id.add_term(1.0, {BandMatrix::identity(3), BandMatrix::identity(2)});
  std::vector<double> v{1, 2, 3, 4, 5, 6};
  CHECK(matvec(id, v) == v);

  TensorOperator two({3, 2});
  two.add_term(2.0, {BandMatrix::identity(3), BandMatrix::identity(2)});
  const auto w = matvec(two, v);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(w[i] == 2.0 * v[i]);
}

TEST_CASE("SIR generator applied to a point mass, N = 3") {
  // α = 1, β = 3: from (S, I) = (2, 1) infection has rate 3·2·1/3 = 2 and
  // recovery rate 1.
  const auto gen = build_full_generator(SirParams::from_rates(1.0, 3.0, 3));
  std::vector<double> e(16, 0.0);
  e[full_index(3, {2, 1})] = 1.0;
  const auto q = matvec(gen.Q, e);
  for (std::int64_t S = 0; S <= 3; ++S)
    for (std::int64_t I = 0; I <= 3; ++I) {
      const double got = q[full_index(3, {S, I})];
      double expect = 0.0;
      if (S == 1 && I == 2)
        expect = 2.0;
      else if (S == 2 && I == 0)
        expect = 1.0;
      else if (S == 2 && I == 1)
        expect = -3.0;
      CHECK(got == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("scale_shift") {
  const auto params = SirParams::from_rates(1.3, 2.1, 4);
  const auto gen = build_full_generator(params);
  const auto Q = dense_of(gen.Q);

  SUBCASE("(0, 1) gives the identity") {
    CHECK(dense_of(scale_shift(gen.Q, 0.0, 1.0)) ==
          oracle::Matrix::Identity(Q.rows(), Q.cols()));
  }
  SUBCASE("(2, 0) is linear") {
    CHECK((dense_of(scale_shift(gen.Q, 2.0, 0.0)) - 2.0 * Q).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("(1/gamma, 1) is substochastic and keeps column sums") {
    for (std::int64_t N = 1; N <= 5; ++N) {
      const auto p = SirParams::from_rates(0.7, 1.9, N);
      const auto g = gamma_full(p).gamma;
      const auto P = dense_of(scale_shift(build_full_generator(p).Q, 1.0 / g, 1.0));
      CHECK(P.minCoeff() >= -1e-15);
      for (Eigen::Index c = 0; c < P.cols(); ++c)
        CHECK(P.col(c).sum() == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("property: matvec equals the dense Kronecker sum") {
  std::mt19937_64 g(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rank = 1 + g() % 3;
    std::vector<std::size_t> shape(rank);
    for (auto &d : shape)
      d = 1 + g() % 5;
    TensorOperator op(shape);
    std::vector<std::pair<double, std::vector<BandMatrix>>> terms;
    const int nterms = 1 + static_cast<int>(g() % 4);
    for (int k = 0; k < nterms; ++k) {
      std::vector<BandMatrix> f;
      for (auto d : shape)
        f.push_back(d == 1 ? BandMatrix::diag(random_entries(g, 1)) : random_band(g, d));
      const double c = std::uniform_real_distribution<double>(-1, 1)(g);
      op.add_term(c, f);
      terms.emplace_back(c, f);
    }
    const oracle::Matrix ref = kron_sum(terms);
    CHECK((dense_of(op) - ref).cwiseAbs().maxCoeff() < 1e-12);

    const auto v = random_entries(g, op.size());
    const auto w = matvec(op, v);
    const oracle::Vector expect = ref * oracle::to_eigen(v);
    CHECK((oracle::to_eigen(w) - expect).cwiseAbs().maxCoeff() < 1e-12);

    // out = scale * op v + beta * out
    std::vector<double> acc = random_entries(g, op.size());
    const oracle::Vector acc0 = oracle::to_eigen(acc);
    op.apply(v, acc, 0.5, -2.0);
    CHECK((oracle::to_eigen(acc) - (0.5 * expect - 2.0 * acc0)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("property: matvec is linear") {
  std::mt19937_64 g(7);
  const auto gen = build_full_generator(SirParams::from_rates(0.9, 2.2, 6));
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = random_entries(g, gen.Q.size());
    const auto v = random_entries(g, gen.Q.size());
    const double a = std::uniform_real_distribution<double>(-3, 3)(g);
    const double b = std::uniform_real_distribution<double>(-3, 3)(g);
    std::vector<double> mix(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      mix[i] = a * u[i] + b * v[i];
    const auto lhs = matvec(gen.Q, mix);
    const auto qu = matvec(gen.Q, u);
    const auto qv = matvec(gen.Q, v);
    for (std::size_t i = 0; i < u.size(); ++i)
      CHECK(lhs[i] == doctest::Approx(a * qu[i] + b * qv[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("property: SIR generator columns sum to zero") {
  for (std::int64_t N = 1; N <= 12; ++N) {
    const auto Q = dense_of(build_full_generator(SirParams::from_rates(1.1, 2.7, N)).Q);
    CHECK(Q.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("terms with equal factors merge") {
  TensorOperator op(std::vector<std::size_t>{3});
  op.add_term(1.0, {BandMatrix::diag({1, 2, 3})});
  op.add_term(2.0, {BandMatrix::diag({1, 2, 3})});
  CHECK(op.terms().size() == 1);
  CHECK(op.terms()[0].coefficient == 3.0);
}
