#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace decompound {

/// Cholesky factor of a small dense symmetric positive-definite matrix
/// (row-major, n x n). The parameter update only ever factors J x J
/// matrices, so a plain O(n^3) factorization is all that is needed; solves
/// go through forward/back substitution and no inverse is ever formed.
class CholeskyFactor {
 public:
  static CholeskyFactor decompose(std::span<const double> matrix,
                                  std::size_t n) {
    if (matrix.size() != n * n || n == 0) {
      throw std::invalid_argument("CholeskyFactor: bad dimensions");
    }
    CholeskyFactor f;
    f.n_ = n;
    f.lower_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = matrix[i * n + j];
        for (std::size_t k = 0; k < j; ++k) {
          s -= f.lower_[i * n + k] * f.lower_[j * n + k];
        }
        if (i == j) {
          if (!(s > 0.0)) {
            throw std::runtime_error(
                "CholeskyFactor: matrix is not positive definite");
          }
          f.lower_[i * n + i] = std::sqrt(s);
        } else {
          f.lower_[i * n + j] = s / f.lower_[j * n + j];
        }
      }
    }
    return f;
  }

  std::size_t size() const { return n_; }

  /// x with (L L^T) x = b.
  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> y = forward(b);
    back_substitute(y);
    return y;
  }

  /// x with L^T x = b; applying this to iid standard normals yields a draw
  /// with covariance (L L^T)^{-1}.
  std::vector<double> solve_transposed(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    back_substitute(x);
    return x;
  }

  /// b' (L L^T)^{-1} b = || L^{-1} b ||^2.
  double inverse_quadratic_form(std::span<const double> b) const {
    const std::vector<double> y = forward(b);
    double q = 0.0;
    for (const double v : y) {
      q += v * v;
    }
    return q;
  }

 private:
  std::vector<double> forward(std::span<const double> b) const {
    if (b.size() != n_) {
      throw std::invalid_argument("CholeskyFactor: bad vector length");
    }
    std::vector<double> y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) {
        s -= lower_[i * n_ + k] * y[k];
      }
      y[i] = s / lower_[i * n_ + i];
    }
    return y;
  }

  void back_substitute(std::vector<double>& x) const {
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) {
        s -= lower_[k * n_ + ii] * x[k];
      }
      x[ii] = s / lower_[ii * n_ + ii];
    }
  }

  std::size_t n_ = 0;
  std::vector<double> lower_;  // row-major lower triangle
};

}  // namespace decompound
