#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace varimp {

struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct calibration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
  training_error(const std::string& what, std::size_t epoch)
      : std::runtime_error(what), epoch(epoch) {}
  std::size_t epoch = 0;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    for (const auto& r : rows) {
      if (m.rows_ == 0) m.cols_ = r.size();
      if (r.size() != m.cols_) throw shape_error("from_rows: ragged rows");
      m.data_.insert(m.data_.end(), r.begin(), r.end());
      ++m.rows_;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, const std::vector<double>& v) {
    if (v.size() != rows_) throw shape_error("set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  Matrix without_column(std::size_t c) const {
    if (c >= cols_) throw shape_error("without_column: index out of range");
    Matrix out(rows_, cols_ - 1);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* src = row_ptr(r);
      double* dst = out.row_ptr(r);
      for (std::size_t j = 0, k = 0; j < cols_; ++j) {
        if (j != c) dst[k++] = src[j];
      }
    }
    return out;
  }

  Matrix select_rows(const std::vector<std::size_t>& idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double* src = row_ptr(idx[r]);
      double* dst = out.row_ptr(r);
      for (std::size_t c = 0; c < cols_; ++c) dst[c] = src[c];
    }
    return out;
  }

  Matrix slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) throw shape_error("slice_rows: bad range");
    Matrix out(end - begin, cols_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
              data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), out.data_.begin());
    return out;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population variance (divide by n).
inline double population_variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance (divide by n-1).
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double mse(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size()) throw shape_error("mse: length mismatch");
  if (y.empty()) throw shape_error("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    s += e * e;
  }
  return s / static_cast<double>(y.size());
}

inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw shape_error("pearson_correlation: length mismatch");
  if (a.size() < 2) throw shape_error("pearson_correlation: need at least 2 points");
  const double ma = mean(a), mb = mean(b);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw numeric_error("pearson_correlation: zero variance input");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace varimp
