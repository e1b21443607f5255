#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "curate/compression.hpp"
#include "curate/forgetstore.hpp"

namespace curate {

// Inverted-file index over an Exact store: k-means cells, each holding the
// rows assigned to it. Search scans the n_probe cells whose centroids are
// closest to the query. The index covers the rows present at build time.
class IvfIndex {
 public:
  static IvfIndex build(const ForgetStore& store, std::size_t n_lists, std::uint64_t seed = 0,
                        int max_iterations = 25) {
    auto repr = store.representation();
    if (!repr || repr->variant != StoreVariant::Exact) {
      throw Error(ErrorCode::InvalidArgument, "IVF index needs a non-empty Exact store");
    }
    const std::size_t n = repr->rows();
    if (n_lists == 0 || n < n_lists) {
      throw Error(ErrorCode::InsufficientData, "IVF index needs count >= n_lists >= 1");
    }
    IvfIndex index;
    index.store_ = &store;
    index.repr_ = repr;
    index.rows_ = n;
    Matrix points(n, repr->dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = repr->exact_rows->row(i);
      std::copy(r.begin(), r.end(), points.row(i).begin());
    }
    std::mt19937_64 rng(seed);
    auto km = lloyd_kmeans(points, n_lists, rng, max_iterations);
    index.centroids_ = std::move(km.centroids);
    index.lists_.assign(n_lists, {});
    for (std::size_t i = 0; i < n; ++i) index.lists_[km.assignment[i]].push_back(i);
    return index;
  }

  std::size_t n_lists() const noexcept { return lists_.size(); }
  std::size_t indexed_rows() const noexcept { return rows_; }

  Match search(const EmbeddingVector& query, std::size_t n_probe) const {
    if (query.dim() != repr_->dim) {
      throw Error(ErrorCode::DimensionMismatch, "query dim does not match the index");
    }
    n_probe = std::clamp<std::size_t>(n_probe, 1, lists_.size());
    std::vector<std::pair<double, std::size_t>> cells(lists_.size());
    for (std::size_t c = 0; c < lists_.size(); ++c) {
      cells[c] = {detail::squared_distance(centroids_.row(c), query.values()), c};
    }
    std::sort(cells.begin(), cells.end());

    const auto stored_query = detail::to_stored(query);
    const auto q = std::span<const float>(stored_query);
    double best = -std::numeric_limits<double>::infinity();
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::size_t best_row = kNone;
    // Cells may be empty; keep probing until at least one row was scored.
    for (std::size_t p = 0; p < cells.size() && (p < n_probe || best_row == kNone); ++p) {
      for (std::size_t row : lists_[cells[p].second]) {
        const double s = cosine_similarity(repr_->exact_rows->row(row), q);
        if (s > best || (s == best && row < best_row)) {
          best = s;
          best_row = row;
        }
      }
    }
    if (best_row == kNone) return {};
    return {best, store_->record_meta(best_row).id, best_row};
  }

 private:
  IvfIndex() = default;

  const ForgetStore* store_ = nullptr;
  std::shared_ptr<const detail::Representation> repr_;
  std::size_t rows_ = 0;
  Matrix centroids_;
  std::vector<std::vector<std::size_t>> lists_;
};

}  // namespace curate
