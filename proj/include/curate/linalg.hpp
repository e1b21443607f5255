#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "curate/error.hpp"

namespace curate {

// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
};

// Cyclic Jacobi rotations. Intended for small matrices (the Rayleigh-Ritz
// step and test-sized problems).
inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw Error(ErrorCode::DimensionMismatch, "eigen of a non-square matrix");
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale = std::max(scale, std::abs(x));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1.0, scale * scale)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

// Orthonormalizes the columns of q in place (modified Gram-Schmidt, two
// passes). Columns that vanish are replaced by the next standard basis
// vector that survives orthogonalization, so rank-deficient input still
// yields an orthonormal basis.
inline void orthonormalize_columns(Matrix& q) {
  const std::size_t n = q.rows();
  const std::size_t b = q.cols();
  double ref = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += q(i, j) * q(i, j);
    ref = std::max(ref, std::sqrt(s));
  }
  const double tiny = std::max(ref, 1.0) * 1e-12;
  std::size_t next_basis = 0;

  auto project_out = [&](std::size_t j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= d * q(i, k);
      }
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += q(i, j) * q(i, j);
    return std::sqrt(s);
  };

  for (std::size_t j = 0; j < b; ++j) {
    double norm = project_out(j);
    while (norm <= tiny) {
      if (next_basis >= n) throw Error(ErrorCode::InvalidArgument, "more columns than rows");
      for (std::size_t i = 0; i < n; ++i) q(i, j) = (i == next_basis) ? 1.0 : 0.0;
      ++next_basis;
      norm = project_out(j);
    }
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
}

struct TopEigen {
  std::vector<double> values;  // k, descending
  Matrix vectors;              // n x k, orthonormal columns
  int iterations = 0;
};

// Top-k eigenpairs of a symmetric positive semi-definite matrix by
// orthogonal iteration with a Rayleigh-Ritz projection on an oversampled
// block. Converged when the top-k Ritz subspace moves less than `tol`.
inline TopEigen top_eigen_orthogonal_iteration(const Matrix& a, std::size_t k,
                                               int max_iterations = 1000, double tol = 1e-10) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw Error(ErrorCode::DimensionMismatch, "eigen of a non-square matrix");
  if (k == 0 || k > n) throw Error(ErrorCode::InvalidArgument, "k must be in [1, n]");
  const std::size_t b = std::min(n, std::max<std::size_t>(2 * k, k + 8));

  Matrix q(n, b);
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : q.data()) x = normal(rng);
  orthonormalize_columns(q);

  auto multiply = [&](const Matrix& x) {
    Matrix y(n, x.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto ai = a.row(i);
      auto yi = y.row(i);
      for (std::size_t l = 0; l < n; ++l) {
        const double ail = ai[l];
        if (ail == 0.0) continue;
        const auto xl = x.row(l);
        for (std::size_t j = 0; j < x.cols(); ++j) yi[j] += ail * xl[j];
      }
    }
    return y;
  };

  TopEigen out;
  Matrix previous;
  for (int it = 1; it <= max_iterations; ++it) {
    // Rayleigh-Ritz on span(Q): H = Q^T A Q, rotate Q onto H's eigenvectors.
    const Matrix aq = multiply(q);
    Matrix h(b, b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = i; j < b; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += q(r, i) * aq(r, j);
        h(i, j) = s;
        h(j, i) = s;
      }
    const auto small = jacobi_eigen(h);
    Matrix ritz(n, b);
    Matrix next(n, b);  // A * ritz, the next iterate before orthonormalization
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < b; ++j) {
        double s = 0.0;
        double t = 0.0;
        for (std::size_t l = 0; l < b; ++l) {
          s += q(r, l) * small.vectors(l, j);
          t += aq(r, l) * small.vectors(l, j);
        }
        ritz(r, j) = s;
        next(r, j) = t;
      }
    q = std::move(ritz);

    // Distance between consecutive top-k subspaces: |P_old Q_new - Q_new|.
    bool converged = false;
    if (previous.rows() == n) {
      double change = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> residual(n);
        for (std::size_t r = 0; r < n; ++r) residual[r] = q(r, j);
        for (std::size_t l = 0; l < k; ++l) {
          double d = 0.0;
          for (std::size_t r = 0; r < n; ++r) d += previous(r, l) * q(r, j);
          for (std::size_t r = 0; r < n; ++r) residual[r] -= d * previous(r, l);
        }
        for (double x : residual) change += x * x;
      }
      converged = std::sqrt(change) < tol;
    }
    previous = Matrix(n, k);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < k; ++j) previous(r, j) = q(r, j);
    if (converged || b == n) {
      // b == n: the Ritz step is an exact full decomposition.
      out.values.assign(small.values.begin(), small.values.begin() + static_cast<std::ptrdiff_t>(k));
      out.vectors = std::move(previous);
      out.iterations = it;
      return out;
    }
    orthonormalize_columns(next);
    q = std::move(next);
  }
  throw Error(ErrorCode::ConvergenceFailure,
              "orthogonal iteration did not converge in " + std::to_string(max_iterations) +
                  " iterations");
}

}  // namespace curate
