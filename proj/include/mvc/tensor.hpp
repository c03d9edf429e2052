#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mvc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Storage allocator with a fixed 64-byte alignment. Vectorized kernels split
// loops by address alignment, so a fixed alignment keeps results bitwise
// reproducible from one allocation to the next.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

// Explicit, owned random state. Every stochastic routine takes one of these.
using Rng = std::mt19937_64;

// Dense row-major array of doubles.
//
// Rank 0 and rank 1 tensors are viewed as a single row when treated as a
// matrix, so a bias of shape [m] behaves like [1 x m].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  // Builds a rank-2 tensor from nested rows; all rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Matrix view of the tensor: rank 2 is itself, lower ranks are one row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  Storage& raw() noexcept { return data_; }
  const Storage& raw() const noexcept { return data_; }

  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  // Bitwise equality of shape and values.
  bool operator==(const Tensor& other) const noexcept;

 private:
  std::vector<std::size_t> shape_;
  Storage data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Throws NumericError naming `what` if `t` holds NaN or Inf.
void require_finite(const Tensor& t, const std::string& what);

// rows x cols matrix of independent standard normal draws.
Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

// Copies the listed rows (in order) into a new rows.size() x cols tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

}  // namespace mvc
