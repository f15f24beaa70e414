#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dunif {

enum class Band { diagonal, superdiagonal, subdiagonal };

/// Square matrix with a single nonzero band.
///
/// A diagonal matrix of dimension n stores n entries; the super- and
/// subdiagonal kinds store n-1.  superdiag(e) has (i, i+1) = e[i] and
/// subdiag(e) has (i+1, i) = e[i].
class BandMatrix {
public:
  BandMatrix(std::size_t dim, Band band, std::vector<double> entries);

  static BandMatrix identity(std::size_t dim);
  static BandMatrix diag(std::vector<double> entries);
  static BandMatrix superdiag(std::vector<double> entries);
  static BandMatrix subdiag(std::vector<double> entries);

  std::size_t dim() const { return dim_; }
  Band band() const { return band_; }
  std::span<const double> entries() const { return entries_; }
  bool is_identity() const { return identity_; }

  /// Column index minus row index of the band.
  int offset() const;
  /// Value in output row `row` (0 for rows the band does not touch).
  double row_value(std::size_t row) const;

  /// Row-major dim x dim copy.
  std::vector<double> dense() const;

  friend bool operator==(const BandMatrix &, const BandMatrix &) = default;

private:
  std::size_t dim_;
  Band band_;
  std::vector<double> entries_;
  bool identity_ = false;
};

struct TensorTerm {
  double coefficient = 0.0;
  std::vector<BandMatrix> factors;
};

/// Weighted sum of Kronecker products of band matrices.
///
/// States are linearized with the first axis slowest: for a grid (n0, n1)
/// the multi-index (i0, i1) maps to i0 * n1 + i1.  The operator is
/// immutable once shared, so concurrent apply() calls are safe.
class TensorOperator {
public:
  explicit TensorOperator(std::vector<std::size_t> grid_shape);
  explicit TensorOperator(std::vector<TensorTerm> terms);

  /// Adds coefficient * (factors[0] ⊗ factors[1] ⊗ ...).  A term whose
  /// factors equal an existing term's factors is merged into it.
  void add_term(double coefficient, std::vector<BandMatrix> factors);

  const std::vector<std::size_t> &grid_shape() const { return shape_; }
  std::size_t size() const { return size_; }
  const std::vector<TensorTerm> &terms() const { return terms_; }

  /// out = scale * (op v) + beta * out.  `v` and `out` must not alias.
  void apply(std::span<const double> v, std::span<double> out,
             double scale = 1.0, double beta = 0.0) const;

  /// Row-major size x size materialization; for tests on small grids.
  std::vector<double> dense() const;

private:
  void check_factors(const std::vector<BandMatrix> &factors) const;

  std::vector<std::size_t> shape_;
  std::size_t size_ = 1;
  std::vector<TensorTerm> terms_;
};

std::vector<double> matvec(const TensorOperator &op, std::span<const double> v);

/// a * op + b * Id.
TensorOperator scale_shift(const TensorOperator &op, double a, double b);

/// a * x + b * y; both operators must share a grid shape.
TensorOperator linear_combination(double a, const TensorOperator &x, double b,
                                  const TensorOperator &y);

} // namespace dunif
