#include "dunif/kronop.hpp"

#include <algorithm>
#include <string>

#include "dunif/errors.hpp"

namespace dunif {

namespace {

std::size_t expected_entries(std::size_t dim, Band band) {
  if (band == Band::diagonal)
    return dim;
  return dim == 0 ? 0 : dim - 1;
}

// Per-axis view of a band factor used by the accumulation loop: output rows
// [begin, end) read input row (row + offset) scaled by values[row - begin],
// or by 1 when values is null (identity).
struct AxisPass {
  std::size_t begin;
  std::size_t end;
  std::ptrdiff_t offset;
  const double *values;
};

AxisPass make_pass(const BandMatrix &m) {
  const std::size_t n = m.dim();
  const double *values = m.is_identity() ? nullptr : m.entries().data();
  switch (m.band()) {
  case Band::diagonal:
    return {0, n, 0, values};
  case Band::superdiagonal:
    return {0, n == 0 ? 0 : n - 1, 1, values};
  case Band::subdiagonal:
    return {std::size_t{n == 0 ? 0u : 1u}, n, -1, values};
  }
  return {0, 0, 0, nullptr};
}

void accumulate(const std::vector<AxisPass> &passes,
                const std::vector<std::size_t> &strides, std::size_t axis,
                std::size_t out_base, std::ptrdiff_t in_base, double weight,
                const double *v, double *out) {
  const AxisPass &pass = passes[axis];
  const std::size_t stride = strides[axis];
  if (axis + 1 == passes.size()) {
    const std::size_t count = pass.end - pass.begin;
    const double *src = v + (in_base + pass.offset +
                             static_cast<std::ptrdiff_t>(pass.begin));
    double *dst = out + out_base + pass.begin;
    if (pass.values == nullptr) {
      for (std::size_t j = 0; j < count; ++j)
        dst[j] += weight * src[j];
    } else {
      for (std::size_t j = 0; j < count; ++j)
        dst[j] += weight * pass.values[j] * src[j];
    }
    return;
  }
  for (std::size_t i = pass.begin; i < pass.end; ++i) {
    const double w =
        pass.values == nullptr ? weight : weight * pass.values[i - pass.begin];
    if (w == 0.0)
      continue;
    accumulate(passes, strides, axis + 1, out_base + i * stride,
               in_base + (static_cast<std::ptrdiff_t>(i) + pass.offset) *
                             static_cast<std::ptrdiff_t>(stride),
               w, v, out);
  }
}

} // namespace

BandMatrix::BandMatrix(std::size_t dim, Band band, std::vector<double> entries)
    : dim_(dim), band_(band), entries_(std::move(entries)) {
  if (dim_ == 0)
    throw ValidationError("band matrix dimension must be positive");
  if (entries_.size() != expected_entries(dim_, band_))
    throw ValidationError("band matrix of dimension " + std::to_string(dim_) +
                          " needs " +
                          std::to_string(expected_entries(dim_, band_)) +
                          " entries, got " + std::to_string(entries_.size()));
  identity_ = band_ == Band::diagonal &&
              std::all_of(entries_.begin(), entries_.end(),
                          [](double x) { return x == 1.0; });
}

BandMatrix BandMatrix::identity(std::size_t dim) {
  return BandMatrix(dim, Band::diagonal, std::vector<double>(dim, 1.0));
}

BandMatrix BandMatrix::diag(std::vector<double> entries) {
  const std::size_t n = entries.size();
  return BandMatrix(n, Band::diagonal, std::move(entries));
}

BandMatrix BandMatrix::superdiag(std::vector<double> entries) {
  const std::size_t n = entries.size() + 1;
  return BandMatrix(n, Band::superdiagonal, std::move(entries));
}

BandMatrix BandMatrix::subdiag(std::vector<double> entries) {
  const std::size_t n = entries.size() + 1;
  return BandMatrix(n, Band::subdiagonal, std::move(entries));
}

int BandMatrix::offset() const {
  switch (band_) {
  case Band::superdiagonal:
    return 1;
  case Band::subdiagonal:
    return -1;
  default:
    return 0;
  }
}

double BandMatrix::row_value(std::size_t row) const {
  if (row >= dim_)
    return 0.0;
  switch (band_) {
  case Band::diagonal:
    return entries_[row];
  case Band::superdiagonal:
    return row + 1 < dim_ ? entries_[row] : 0.0;
  case Band::subdiagonal:
    return row >= 1 ? entries_[row - 1] : 0.0;
  }
  return 0.0;
}

std::vector<double> BandMatrix::dense() const {
  std::vector<double> a(dim_ * dim_, 0.0);
  for (std::size_t r = 0; r < dim_; ++r) {
    const auto c = static_cast<std::ptrdiff_t>(r) + offset();
    if (c < 0 || c >= static_cast<std::ptrdiff_t>(dim_))
      continue;
    a[r * dim_ + static_cast<std::size_t>(c)] = row_value(r);
  }
  return a;
}

TensorOperator::TensorOperator(std::vector<std::size_t> grid_shape)
    : shape_(std::move(grid_shape)) {
  if (shape_.empty())
    throw ValidationError("tensor operator needs at least one axis");
  for (std::size_t n : shape_) {
    if (n == 0)
      throw ValidationError("tensor operator axes must be nonempty");
    size_ *= n;
  }
}

TensorOperator::TensorOperator(std::vector<TensorTerm> terms)
    : TensorOperator([&] {
        if (terms.empty() || terms.front().factors.empty())
          throw ValidationError("tensor operator needs at least one factor");
        std::vector<std::size_t> shape;
        for (const auto &f : terms.front().factors)
          shape.push_back(f.dim());
        return shape;
      }()) {
  for (auto &t : terms)
    add_term(t.coefficient, std::move(t.factors));
}

void TensorOperator::check_factors(const std::vector<BandMatrix> &factors) const {
  if (factors.size() != shape_.size())
    throw ValidationError("tensor term has " + std::to_string(factors.size()) +
                          " factors, operator has " +
                          std::to_string(shape_.size()) + " axes");
  for (std::size_t a = 0; a < shape_.size(); ++a)
    if (factors[a].dim() != shape_[a])
      throw ValidationError("factor " + std::to_string(a) + " has dimension " +
                            std::to_string(factors[a].dim()) + ", expected " +
                            std::to_string(shape_[a]));
}

void TensorOperator::add_term(double coefficient,
                              std::vector<BandMatrix> factors) {
  check_factors(factors);
  for (auto &t : terms_) {
    if (t.factors == factors) {
      t.coefficient += coefficient;
      return;
    }
  }
  terms_.push_back({coefficient, std::move(factors)});
}

void TensorOperator::apply(std::span<const double> v, std::span<double> out,
                           double scale, double beta) const {
  if (v.size() != size_ || out.size() != size_)
    throw ValidationError("matvec dimension mismatch: operator acts on " +
                          std::to_string(size_) + " states, got vectors of " +
                          std::to_string(v.size()) + " and " +
                          std::to_string(out.size()));
  if (beta == 0.0)
    std::fill(out.begin(), out.end(), 0.0);
  else if (beta != 1.0)
    for (double &x : out)
      x *= beta;

  std::vector<std::size_t> strides(shape_.size());
  std::size_t s = 1;
  for (std::size_t a = shape_.size(); a-- > 0;) {
    strides[a] = s;
    s *= shape_[a];
  }

  std::vector<AxisPass> passes(shape_.size());
  for (const auto &term : terms_) {
    const double w = scale * term.coefficient;
    if (w == 0.0)
      continue;
    for (std::size_t a = 0; a < shape_.size(); ++a)
      passes[a] = make_pass(term.factors[a]);
    accumulate(passes, strides, 0, 0, 0, w, v.data(), out.data());
  }
}

std::vector<double> TensorOperator::dense() const {
  std::vector<double> a(size_ * size_, 0.0);
  std::vector<double> e(size_, 0.0), col(size_);
  for (std::size_t j = 0; j < size_; ++j) {
    e[j] = 1.0;
    apply(e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < size_; ++i)
      a[i * size_ + j] = col[i];
  }
  return a;
}

std::vector<double> matvec(const TensorOperator &op, std::span<const double> v) {
  std::vector<double> out(op.size());
  op.apply(v, out);
  return out;
}

TensorOperator scale_shift(const TensorOperator &op, double a, double b) {
  TensorOperator result(op.grid_shape());
  for (const auto &t : op.terms())
    result.add_term(a * t.coefficient, t.factors);
  std::vector<BandMatrix> ids;
  for (std::size_t n : op.grid_shape())
    ids.push_back(BandMatrix::identity(n));
  result.add_term(b, std::move(ids));
  return result;
}

TensorOperator linear_combination(double a, const TensorOperator &x, double b,
                                  const TensorOperator &y) {
  if (x.grid_shape() != y.grid_shape())
    throw ValidationError("linear_combination of operators with different grids");
  TensorOperator result(x.grid_shape());
  for (const auto &t : x.terms())
    result.add_term(a * t.coefficient, t.factors);
  for (const auto &t : y.terms())
    result.add_term(b * t.coefficient, t.factors);
  return result;
}

} // namespace dunif
