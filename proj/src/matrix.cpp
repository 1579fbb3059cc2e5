#include "hig/matrix.hpp"

#include <cmath>

#include "hig/error.hpp"
#include "hig/log.hpp"

namespace hig {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
  values_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
  if (values_.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not fill shape " + shape_str());
  if (!all_finite()) throw NumericError("non-finite entry in matrix of shape " + shape_str());
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ == 0 ? 0 : static_cast<int>(rows.begin()->size());
  values_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != cols_) throw DimensionError("ragged initializer rows");
    values_.insert(values_.end(), row.begin(), row.end());
  }
  if (!all_finite()) throw NumericError("non-finite entry in matrix of shape " + shape_str());
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Matrix(n, 1, std::move(values));
}

bool Matrix::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str());
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw DimensionError("add shape mismatch: " + a.shape_str() + " + " + b.shape_str());
  Matrix out = a;
  for (int i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw DimensionError("subtract shape mismatch: " + a.shape_str() + " - " + b.shape_str());
  Matrix out = a;
  for (int i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  for (int i = 0; i < out.size(); ++i) out[i] *= factor;
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("dot length mismatch: " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  double nu = norm(u);
  double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateVectorError("cosine similarity of zero-norm vector");
  return dot(u, v) / (nu * nv);
}

double cosine_similarity_or_zero(std::span<const double> u, std::span<const double> v) {
  double nu = norm(u);
  double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    log::warn("zero-norm feature in neighbor selection; treating similarity as 0");
    return 0.0;
  }
  return dot(u, v) / (nu * nv);
}

void ensure_finite(const Matrix& m, const std::string& context) {
  if (!m.all_finite()) throw NumericError("non-finite value in " + context);
}

}  // namespace hig
