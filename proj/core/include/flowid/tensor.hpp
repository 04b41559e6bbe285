#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flowid {

class Rng;

/// Dense row-major array of doubles. Rank 2 is the workhorse; rank 3 holds
/// convolution kernels and payload batches.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::span<const double> values);
  static Tensor scalar(double value) { return Tensor({1, 1}, value); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Leading extent; for rank 2 the row count.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  /// Product of all trailing extents; for rank 2 the column count.
  std::size_t cols() const noexcept {
    if (shape_.size() == 2) return shape_[1];
    return trailing_extent();
  }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols(), cols()};
  }

  /// Value of a single-element tensor.
  double item() const;
  bool all_finite() const noexcept;
  Tensor& fill(double value) noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  Tensor reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double factor) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t trailing_extent() const noexcept;
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Tensor::Shape& shape);

// ---------------------------------------------------------------------------
// Dense kernels. All validate shapes and throw ShapeError on mismatch.

Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ·b without materialising the transpose.
Tensor matmul_at(const Tensor& a, const Tensor& b);
/// a·bᵀ without materialising the transpose.
Tensor matmul_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);
/// Output positions [begin, end) whose tap j reads inside the unpadded signal.
std::pair<std::size_t, std::size_t> conv1d_tap_range(std::size_t j, std::size_t length,
                                                     std::size_t out_len, std::size_t stride,
                                                     std::size_t padding);
/// Cross-correlation of a channels_in×L signal with a channels_out×channels_in×k
/// kernel, zero padded on both ends.
Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& logits);

double sigmoid(double x) noexcept;
double relu(double x) noexcept;
double elu(double x) noexcept;

/// Inverted-dropout mask: each entry 0 with probability `rate`, else 1/(1-rate).
/// Throws ConfigError unless 0 <= rate < 1.
Tensor dropout_mask(const Tensor::Shape& shape, double rate, Rng& rng);

// ---------------------------------------------------------------------------

/// Compressed sparse row matrix, used for incidence-derived propagation operators.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  /// Dense product this·dense.
  Tensor multiply(const Tensor& dense) const;
  /// Dense product thisᵀ·dense.
  Tensor multiply_transposed(const Tensor& dense) const;
  Tensor to_dense() const;
};

}  // namespace flowid
