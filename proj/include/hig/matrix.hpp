#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hig {

// Dense row-major matrix of doubles. Library operations never mutate their
// inputs; every entry is required to be finite.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-filled
  Matrix(int rows, int cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(int n);
  static Matrix column(std::vector<double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }
  bool empty() const { return size() == 0; }

  double& at(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](int i) { return values_[i]; }
  double operator[](int i) const { return values_[i]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "3x2"

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix transpose(const Matrix& a);

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> u);

// dot(u,v) / (|u| |v|). Throws DegenerateVectorError on a zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Variant used inside neighbor selection: a zero-norm input yields similarity
// 0 with a logged warning instead of aborting the forward pass.
double cosine_similarity_or_zero(std::span<const double> u, std::span<const double> v);

// Throws NumericError naming `context` if any entry is non-finite.
void ensure_finite(const Matrix& m, const std::string& context);

}  // namespace hig
