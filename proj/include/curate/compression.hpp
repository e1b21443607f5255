#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "curate/error.hpp"
#include "curate/linalg.hpp"
#include "curate/vecmath.hpp"

namespace curate {

// x -> components * (x - mean). Rows of `components` are orthonormal.
struct PcaTransform {
  std::vector<double> mean;             // original dim
  Matrix components;                    // k x dim
  std::vector<double> explained_variance;  // k, non-increasing
  int iterations = 0;

  std::size_t input_dim() const noexcept { return mean.size(); }
  std::size_t output_dim() const noexcept { return components.rows(); }

  template <std::floating_point T>
  std::vector<double> project(std::span<const T> x) const {
    if (x.size() != mean.size()) {
      throw Error(ErrorCode::DimensionMismatch, "PCA input has the wrong dimension");
    }
    std::vector<double> y(output_dim(), 0.0);
    for (std::size_t r = 0; r < output_dim(); ++r) {
      const auto c = components.row(r);
      double acc = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) acc += c[j] * (static_cast<double>(x[j]) - mean[j]);
      y[r] = acc;
    }
    return y;
  }

  std::vector<double> reconstruct(std::span<const double> y) const {
    std::vector<double> x(mean);
    for (std::size_t r = 0; r < output_dim(); ++r) {
      const auto c = components.row(r);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += y[r] * c[j];
    }
    return x;
  }
};

// Top-k principal components of the mean-centered sample covariance
// (normalized by count - 1). Works on the smaller of the covariance and Gram
// matrices. Each component's first entry with |v| > 1e-12 is positive.
inline PcaTransform fit_pca(const Matrix& data, std::size_t k) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "PCA needs at least 2 samples");
  if (k == 0 || k > d) throw Error(ErrorCode::InvalidArgument, "PCA k must be in [1, dim]");

  PcaTransform pca;
  pca.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) pca.mean[j] += data(i, j);
  for (auto& m : pca.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = data(i, j) - pca.mean[j];
  const double denom = static_cast<double>(n - 1);

  pca.components = Matrix(k, d);
  if (d <= n) {
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = centered.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        const double xa = x[a];
        if (xa == 0.0) continue;
        auto ca = cov.row(a);
        for (std::size_t b = a; b < d; ++b) ca[b] += xa * x[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        cov(a, b) /= denom;
        cov(b, a) = cov(a, b);
      }
    auto eig = top_eigen_orthogonal_iteration(cov, k);
    pca.iterations = eig.iterations;
    pca.explained_variance = eig.values;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t j = 0; j < d; ++j) pca.components(r, j) = eig.vectors(j, r);
  } else {
    // Gram route: eigenvectors u of X X^T / (n-1) map to X^T u / |X^T u|.
    Matrix gram(n, n);
    const Matrix& cc = centered;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        const double g = dot(cc.row(a), cc.row(b)) / denom;
        gram(a, b) = g;
        gram(b, a) = g;
      }
    const std::size_t kg = std::min(k, n);
    auto eig = top_eigen_orthogonal_iteration(gram, kg);
    pca.iterations = eig.iterations;
    pca.explained_variance.assign(k, 0.0);
    Matrix basis(d, k);
    for (std::size_t r = 0; r < kg; ++r) {
      pca.explained_variance[r] = eig.values[r];
      for (std::size_t i = 0; i < n; ++i) {
        const double u = eig.vectors(i, r);
        if (u == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) basis(j, r) += u * centered(i, j);
      }
    }
    // Null-variance directions (beyond the sample rank) get an arbitrary
    // orthonormal completion.
    orthonormalize_columns(basis);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t j = 0; j < d; ++j) pca.components(r, j) = basis(j, r);
  }

  for (std::size_t r = 0; r < k; ++r) {
    auto row = pca.components.row(r);
    for (double v : row) {
      if (std::abs(v) > 1e-12) {
        if (v < 0) {
          for (auto& x : row) x = -x;
        }
        break;
      }
    }
    if (pca.explained_variance[r] < 0.0 && pca.explained_variance[r] > -1e-9) {
      pca.explained_variance[r] = 0.0;
    }
  }
  return pca;
}

// Per-dimension affine 8-bit codes: code = round((x - min) / (max - min) * 255).
struct QuantizedBlock {
  std::size_t count = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> codes;  // count x width, row-major
  std::vector<double> scale;        // (max - min) / 255, 0 for constant columns
  std::vector<double> offset;       // min

  std::uint8_t code(std::size_t r, std::size_t j) const { return codes[r * width + j]; }

  double value(std::size_t r, std::size_t j) const {
    return offset[j] + scale[j] * static_cast<double>(codes[r * width + j]);
  }

  // Encodes a vector outside the fitted block with the same parameters.
  std::vector<std::uint8_t> encode(std::span<const double> x) const {
    if (x.size() != width) throw Error(ErrorCode::DimensionMismatch, "quantizer width mismatch");
    std::vector<std::uint8_t> out(width, 0);
    for (std::size_t j = 0; j < width; ++j) {
      if (scale[j] == 0.0) continue;
      const double c = std::round((x[j] - offset[j]) / scale[j]);
      out[j] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
    }
    return out;
  }

  friend bool operator==(const QuantizedBlock&, const QuantizedBlock&) = default;
};

inline QuantizedBlock quantize_8bit(const Matrix& vectors) {
  if (vectors.rows() == 0 || vectors.cols() == 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot quantize an empty block");
  }
  QuantizedBlock block;
  block.count = vectors.rows();
  block.width = vectors.cols();
  block.codes.assign(block.count * block.width, 0);
  block.scale.assign(block.width, 0.0);
  block.offset.assign(block.width, 0.0);
  for (std::size_t j = 0; j < block.width; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < block.count; ++r) {
      const double x = vectors(r, j);
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "cannot quantize NaN/Inf");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    block.offset[j] = lo;
    if (hi == lo) continue;
    block.scale[j] = (hi - lo) / 255.0;
    for (std::size_t r = 0; r < block.count; ++r) {
      const double c = std::round((vectors(r, j) - lo) / (hi - lo) * 255.0);
      block.codes[r * block.width + j] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
    }
  }
  return block;
}

inline Matrix dequantize(const QuantizedBlock& block) {
  Matrix out(block.count, block.width);
  for (std::size_t r = 0; r < block.count; ++r)
    for (std::size_t j = 0; j < block.width; ++j) out(r, j) = block.value(r, j);
  return out;
}

struct KMeansResult {
  Matrix centroids;                   // K x dim
  std::vector<std::size_t> assignment;
  std::vector<double> objective;      // after each assignment step
  int iterations = 0;
  bool converged = false;             // reached an assignment fixpoint
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. An assignment only changes on a
// strict improvement, so the loop stops at a fixpoint; empty clusters keep
// their previous centroid.
inline KMeansResult lloyd_kmeans(const Matrix& points, std::size_t clusters, std::mt19937_64& rng,
                                 int max_iterations = 100) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (clusters == 0 || clusters > n) {
    throw Error(ErrorCode::InvalidArgument, "k-means needs 1 <= K <= count");
  }
  KMeansResult out;
  out.centroids = Matrix(clusters, d);

  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < clusters; ++c) {
    std::copy(points.row(chosen).begin(), points.row(chosen).end(), out.centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], detail::squared_distance(points.row(i), out.centroids.row(c)));
      total += nearest[i];
    }
    if (c + 1 == clusters) break;
    if (total <= 0.0) {
      // All points coincide with chosen centroids; fall back to uniform picks.
      chosen = pick(rng);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= nearest[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
  }

  out.assignment.assign(n, clusters);  // sentinel: unassigned
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = out.assignment[i];
      double best_d = best < clusters
                          ? detail::squared_distance(points.row(i), out.centroids.row(best))
                          : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < clusters; ++c) {
        const double dist = detail::squared_distance(points.row(i), out.centroids.row(c));
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (best != out.assignment[i]) {
        out.assignment[i] = best;
        changed = true;
      }
      objective += best_d;
    }
    out.objective.push_back(objective);
    out.iterations = it + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    Matrix sums(clusters, d);
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = out.assignment[i];
      ++counts[c];
      auto s = sums.row(c);
      const auto p = points.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        out.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
      }
    }
  }
  return out;
}

inline std::size_t coreset_size(std::size_t count, double keep_ratio) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "keep ratio must be in (0, 1]");
  }
  // The epsilon absorbs binary rounding of products like 0.1 * 1000.
  const double target = keep_ratio * static_cast<double>(count) - 1e-9;
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(target)), 1, count);
}

struct Coreset {
  std::vector<EmbeddingVector> centroids;  // unit norm
  std::vector<std::size_t> representative;  // index of the member closest to each centroid
  KMeansResult clustering;
};

// Replaces `points` by ceil(keep_ratio * count) unit-norm k-means centroids.
inline Coreset kmeans_coreset_detailed(const Matrix& points, double keep_ratio,
                                       std::mt19937_64& rng, int max_iterations = 100) {
  const std::size_t n = points.rows();
  if (n == 0) throw Error(ErrorCode::InsufficientData, "k-means coreset of an empty set");
  const std::size_t clusters = coreset_size(n, keep_ratio);
  Coreset out;
  if (clusters == n) {
    for (std::size_t i = 0; i < n; ++i) {
      out.centroids.push_back(EmbeddingVector(l2_normalized(points.row(i))));
      out.representative.push_back(i);
    }
    out.clustering.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.clustering.assignment[i] = i;
    out.clustering.centroids = points;
    out.clustering.converged = true;
    return out;
  }
  out.clustering = lloyd_kmeans(points, clusters, rng, max_iterations);
  out.representative.assign(clusters, n);
  std::vector<double> best(clusters, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = out.clustering.assignment[i];
    const double dist = detail::squared_distance(points.row(i), out.clustering.centroids.row(c));
    if (dist < best[c]) {
      best[c] = dist;
      out.representative[c] = i;
    }
  }
  for (std::size_t c = 0; c < clusters; ++c) {
    const auto row = std::as_const(out.clustering.centroids).row(c);
    if (l2_norm(row) > 0.0) {
      out.centroids.push_back(EmbeddingVector(l2_normalized(row)));
    } else {
      // Members cancelled out; keep the representative's direction.
      out.centroids.push_back(EmbeddingVector(l2_normalized(points.row(out.representative[c]))));
    }
  }
  return out;
}

inline std::vector<EmbeddingVector> kmeans_coreset(const Matrix& points, double keep_ratio,
                                                   std::mt19937_64& rng) {
  return kmeans_coreset_detailed(points, keep_ratio, rng).centroids;
}

inline Matrix to_matrix(std::span<const EmbeddingVector> vectors) {
  if (vectors.empty()) return {};
  Matrix m(vectors.size(), vectors.front().dim());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != m.cols()) throw Error(ErrorCode::DimensionMismatch, "ragged vectors");
    std::copy(vectors[i].values().begin(), vectors[i].values().end(), m.row(i).begin());
  }
  return m;
}

}  // namespace curate
