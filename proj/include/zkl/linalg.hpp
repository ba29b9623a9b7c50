#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace zkl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
  Vector column(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& entries() const noexcept { return data_; }

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// a * b. Throws InvalidArgument when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ * b without forming the transpose. Requires a.rows() == b.rows().
Matrix transpose_matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double trace(const Matrix& m);
Matrix outer(std::span<const double> a, std::span<const double> b);

double frobenius_norm(const Matrix& m);
bool is_symmetric(const Matrix& m, double tol);
bool all_finite(std::span<const double> v) noexcept;

/// Singular values sorted non-decreasing; min(rows, cols) of them.
/// One-sided Jacobi on the columns of m (or mᵀ when m is wide).
Vector singular_values(const Matrix& m);

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Eigenvalues of a symmetric matrix, sorted non-decreasing.
/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass falls below 1e-12·‖m‖_F.
/// Throws InvalidArgument for non-square input or asymmetry beyond 1e-10 (relative to ‖m‖_F).
Vector symmetric_eigenvalues(const Matrix& m);

}  // namespace zkl
