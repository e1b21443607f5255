#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curate/error.hpp"

namespace curate {

// A dense, finite, non-empty real vector. Arithmetic is always 64-bit.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    validate();
  }

  EmbeddingVector(std::initializer_list<double> values) : values_(values) { validate(); }

  template <std::floating_point T>
  static EmbeddingVector from_span(std::span<const T> values) {
    return EmbeddingVector(std::vector<double>(values.begin(), values.end()));
  }

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool is_unit(double tol = 1e-6) const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  void validate() const {
    if (values_.empty()) {
      throw Error(ErrorCode::InvalidArgument, "embedding must have dim >= 1");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "embedding contains NaN or Inf");
      }
    }
  }

  std::vector<double> values_;
};

template <std::floating_point A, std::floating_point B>
double dot(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <std::floating_point T>
double l2_norm(std::span<const T> a) {
  double acc = 0.0;
  for (T v : a) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

// (a.b) / (|a| |b|), clamped to [-1, 1].
template <std::floating_point A, std::floating_point B>
double cosine_similarity(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  if (aa <= 0.0 || bb <= 0.0) {
    throw Error(ErrorCode::ZeroNormVector, "cosine similarity of a zero vector");
  }
  // sqrt(aa * bb) makes a vector scored against itself come out as exactly 1.
  const double norms = aa * bb;
  const double denom = (std::isfinite(norms) && norms > 0.0) ? std::sqrt(norms)
                                                             : std::sqrt(aa) * std::sqrt(bb);
  return std::clamp(ab / denom, -1.0, 1.0);
}

template <std::floating_point A, std::floating_point B>
double cosine_distance(std::span<const A> a, std::span<const B> b) {
  return 1.0 - cosine_similarity(a, b);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

inline double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  return 1.0 - cosine_similarity(a, b);
}

template <std::floating_point T>
std::vector<double> l2_normalized(std::span<const T> a) {
  const double n = l2_norm(a);
  if (!(n > 0.0)) {
    throw Error(ErrorCode::ZeroNormVector, "cannot normalize a zero vector");
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i]) / n;
  return out;
}

inline EmbeddingVector l2_normalize(const EmbeddingVector& a) {
  return EmbeddingVector(l2_normalized(a.values()));
}

inline bool EmbeddingVector::is_unit(double tol) const {
  return std::abs(l2_norm(values()) - 1.0) <= tol;
}

}  // namespace curate
