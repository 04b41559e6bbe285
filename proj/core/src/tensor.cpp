#include "flowid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "flowid/error.hpp"
#include "flowid/rng.hpp"

namespace flowid {

namespace {

std::size_t element_count(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a matrix, got shape " +
                     shape_string(t.shape()));
  }
}

}  // namespace

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
  }
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
  }
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("value count " + std::to_string(values_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

Tensor Tensor::row_vector(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor eye = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
  return eye;
}

std::size_t Tensor::trailing_extent() const noexcept {
  if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  }
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::fill(double value) noexcept {
  std::fill(values_.begin(), values_.end(), value);
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw ShapeError("+=: shape " + shape_string(shape_) + " vs " + shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) noexcept {
  for (auto& v : values_) v *= factor;
  return *this;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  if (b.rows() != q) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(p, r);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  for (std::size_t i = 0; i < p; ++i) {
    double* c_row = C + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      if (aik == 0.0) continue;
      const double* b_row = B + k * r;
      for (std::size_t j = 0; j < r; ++j) c_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Tensor matmul_at(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_at");
  require_matrix(b, "matmul_at");
  const std::size_t q = a.rows(), p = a.cols(), r = b.cols();
  if (b.rows() != q) {
    throw ShapeError("matmul_at: row counts differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(p, r);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  for (std::size_t k = 0; k < q; ++k) {
    const double* b_row = B + k * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double aki = A[k * p + i];
      if (aki == 0.0) continue;
      double* c_row = C + i * r;
      for (std::size_t j = 0; j < r; ++j) c_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  const std::size_t p = a.rows(), q = a.cols(), r = b.rows();
  if (b.cols() != q) {
    throw ShapeError("matmul_bt: column counts differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(p, r);
  for (std::size_t i = 0; i < p; ++i) {
    const auto a_row = a.row(i);
    for (std::size_t j = 0; j < r; ++j) {
      const auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
  if (kernel == 0 || stride == 0) throw ShapeError("conv1d: kernel and stride must be >= 1");
  if (length + 2 * padding < kernel) {
    throw ShapeError("conv1d: padded length " + std::to_string(length + 2 * padding) +
                     " shorter than kernel " + std::to_string(kernel));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

std::pair<std::size_t, std::size_t> conv1d_tap_range(std::size_t j, std::size_t length,
                                                     std::size_t out_len, std::size_t stride,
                                                     std::size_t padding) {
  // output t reads x[t*stride + j - padding]
  std::size_t t_begin = 0;
  if (j < padding) t_begin = (padding - j + stride - 1) / stride;
  if (j >= length + padding) return {t_begin, t_begin};
  const std::size_t last = (length + padding - 1 - j) / stride;  // largest t with an in-range read
  const std::size_t t_end = std::min(out_len, last + 1);
  return {t_begin, std::max(t_begin, t_end)};
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  require_matrix(input, "conv1d input");
  if (kernel.rank() != 3) {
    throw ShapeError("conv1d: kernel must be rank 3, got " + shape_string(kernel.shape()));
  }
  const std::size_t c_in = input.rows(), length = input.cols();
  const std::size_t c_out = kernel.shape()[0], k = kernel.shape()[2];
  if (kernel.shape()[1] != c_in) {
    throw ShapeError("conv1d: kernel expects " + std::to_string(kernel.shape()[1]) +
                     " input channels, got " + std::to_string(c_in));
  }
  const std::size_t out_len = conv1d_output_length(length, k, stride, padding);
  Tensor out = Tensor::matrix(c_out, out_len);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* o = &out(co, 0);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* x = input.row(ci).data();
      const double* w = kernel.data() + (co * c_in + ci) * k;
      for (std::size_t j = 0; j < k; ++j) {
        if (w[j] == 0.0) continue;
        const auto [t_begin, t_end] = conv1d_tap_range(j, length, out_len, stride, padding);
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(padding);
        if (stride == 1) {
          const double* xs = x + (static_cast<std::ptrdiff_t>(t_begin) + shift);
          for (std::size_t t = t_begin; t < t_end; ++t) o[t] += w[j] * xs[t - t_begin];
        } else {
          for (std::size_t t = t_begin; t < t_end; ++t)
            o[t] += w[j] * x[static_cast<std::ptrdiff_t>(t * stride) + shift];
        }
      }
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t cols = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = out.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (auto& v : row) {
      v = std::exp(v - peak);
      total += v;
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

double elu(double x) noexcept { return x > 0.0 ? x : std::expm1(x); }

Tensor dropout_mask(const Tensor::Shape& shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Tensor CsrMatrix::multiply(const Tensor& dense) const {
  if (dense.rank() != 2 || dense.rows() != cols) {
    throw ShapeError("csr multiply: operand " + shape_string(dense.shape()) + " vs " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::size_t width = dense.cols();
  Tensor out = Tensor::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = &out(r, 0);
    for (std::size_t idx = row_offsets[r]; idx < row_offsets[r + 1]; ++idx) {
      const double w = values[idx];
      const double* src = dense.row(col_indices[idx]).data();
      for (std::size_t c = 0; c < width; ++c) o[c] += w * src[c];
    }
  }
  return out;
}

Tensor CsrMatrix::multiply_transposed(const Tensor& dense) const {
  if (dense.rank() != 2 || dense.rows() != rows) {
    throw ShapeError("csr multiply_transposed: operand " + shape_string(dense.shape()) + " vs " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::size_t width = dense.cols();
  Tensor out = Tensor::matrix(cols, width);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = dense.row(r).data();
    for (std::size_t idx = row_offsets[r]; idx < row_offsets[r + 1]; ++idx) {
      const double w = values[idx];
      double* o = &out(col_indices[idx], 0);
      for (std::size_t c = 0; c < width; ++c) o[c] += w * src[c];
    }
  }
  return out;
}

Tensor CsrMatrix::to_dense() const {
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t idx = row_offsets[r]; idx < row_offsets[r + 1]; ++idx)
      out(r, col_indices[idx]) += values[idx];
  return out;
}

}  // namespace flowid
