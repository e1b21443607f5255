#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "curate/compression.hpp"
#include "curate/error.hpp"
#include "curate/linalg.hpp"
#include "curate/vecmath.hpp"

namespace curate {

enum class StoreVariant : std::uint8_t { Exact = 0, Compressed = 1, Clustered = 2 };

inline std::string to_string(StoreVariant v) {
  switch (v) {
    case StoreVariant::Exact: return "exact";
    case StoreVariant::Compressed: return "compressed";
    case StoreVariant::Clustered: return "clustered";
  }
  return "unknown";
}

inline StoreVariant parse_store_variant(const std::string& name) {
  if (name == "exact") return StoreVariant::Exact;
  if (name == "compressed") return StoreVariant::Compressed;
  if (name == "clustered") return StoreVariant::Clustered;
  throw Error(ErrorCode::InvalidArgument, "unknown store mode '" + name + "'");
}

struct StoreMode {
  StoreVariant variant = StoreVariant::Exact;
  std::size_t pca_dim = 32;
  int quant_bits = 8;
  double keep_ratio = 0.1;
  std::uint64_t rng_seed = 0;
};

struct ForgetRecord {
  std::string id;
  std::string text;
  EmbeddingVector embedding;  // unit norm; as stored (float32 precision)
  std::int64_t accepted_at = 0;  // steady-clock nanoseconds, strictly increasing
};

// Result of a max-similarity lookup. An empty store yields no score.
struct Match {
  std::optional<double> score;
  std::optional<std::string> id;
  std::optional<std::size_t> record_index;
};

namespace detail {

// Append-only row storage with lock-free readers. Rows live in fixed-size
// chunks whose directory is allocated up front, so appends never move data
// that readers may be scanning. A row is visible once `publish` has stored
// a size covering it.
template <typename T>
class RowLog {
 public:
  static constexpr std::size_t kChunkRows = 1024;

  RowLog(std::size_t width, std::size_t capacity)
      : width_(width), chunks_((capacity + kChunkRows - 1) / kChunkRows) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t capacity() const noexcept { return chunks_.size() * kChunkRows; }
  std::size_t size() const noexcept { return size_.load(std::memory_order_acquire); }

  // Writer only. Returns the new row's index; not yet visible.
  std::size_t append(std::span<const T> row) {
    const std::size_t i = pending_;
    const std::size_t c = i / kChunkRows;
    if (c >= chunks_.size()) throw Error(ErrorCode::StoreFull, "row log capacity exhausted");
    if (!chunks_[c]) chunks_[c] = std::make_unique<T[]>(kChunkRows * width_);
    std::copy(row.begin(), row.end(), chunks_[c].get() + (i % kChunkRows) * width_);
    pending_ = i + 1;
    return i;
  }

  void publish() { size_.store(pending_, std::memory_order_release); }

  std::span<const T> row(std::size_t i) const {
    return {chunks_[i / kChunkRows].get() + (i % kChunkRows) * width_, width_};
  }

 private:
  std::size_t width_;
  std::vector<std::unique_ptr<T[]>> chunks_;
  std::atomic<std::size_t> size_{0};
  std::size_t pending_ = 0;
};

// Rows are kept as float32 unit vectors. Exact-mode queries are rounded the
// same way, so re-querying a stored embedding scores exactly 1.
inline std::vector<float> to_stored(const EmbeddingVector& v) {
  const auto unit = l2_normalized(v.values());
  return std::vector<float>(unit.begin(), unit.end());
}

struct RecordMeta {
  std::string id;
  std::string text;
  std::int64_t accepted_at = 0;
};

// One scoring representation of the store. Exact keeps float rows of the
// original dimension; Compressed and Clustered keep 8-bit codes in PCA space.
struct Representation {
  StoreVariant variant = StoreVariant::Exact;
  std::size_t dim = 0;
  std::optional<PcaTransform> pca;
  std::vector<double> scale;   // quantizer, width k
  std::vector<double> offset;
  std::unique_ptr<RowLog<float>> exact_rows;
  std::unique_ptr<RowLog<std::uint8_t>> code_rows;
  std::unique_ptr<RowLog<std::uint64_t>> row_record;  // row -> record index
  StoreMode mode;

  std::size_t rows() const {
    return variant == StoreVariant::Exact ? exact_rows->size() : code_rows->size();
  }

  std::vector<std::uint8_t> encode(std::span<const double> projected) const {
    QuantizedBlock q;
    q.width = scale.size();
    q.scale = scale;
    q.offset = offset;
    return q.encode(projected);
  }
};

inline std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace detail

struct CompressionReport {
  StoreVariant variant = StoreVariant::Exact;
  std::size_t records = 0;
  std::size_t stored_rows = 0;  // rows scored after compression
  std::size_t dim = 0;
  std::size_t k = 0;
  std::uint64_t exact_bytes = 0;
  std::uint64_t compressed_bytes = 0;
  double ratio = 0.0;
  int pca_iterations = 0;
};

// exact = count * dim * 4; compressed = rows * k + (k * dim + dim + 2k) * 4.
inline std::uint64_t exact_payload_bytes(std::size_t count, std::size_t dim) {
  return static_cast<std::uint64_t>(count) * dim * 4;
}

inline std::uint64_t compressed_payload_bytes(std::size_t rows, std::size_t dim, std::size_t k) {
  return static_cast<std::uint64_t>(rows) * k +
         (static_cast<std::uint64_t>(k) * dim + dim + 2 * k) * 4;
}

// Plain-data image of a store, used for persistence.
struct StoreState {
  StoreVariant variant = StoreVariant::Exact;
  std::size_t dim = 0;
  std::size_t k = 0;
  std::vector<detail::RecordMeta> records;
  std::vector<float> exact_rows;  // records x dim (Exact)
  std::optional<PcaTransform> pca;
  QuantizedBlock block;           // rows x k (Compressed / Clustered)
  std::vector<std::uint64_t> row_record;
};

// The forget set F. add() appends in O(1) amortized; retrievals scan an
// immutable view and never take the writer lock. Records are never removed.
class ForgetStore {
 public:
  static constexpr std::size_t kDefaultCapacity = std::size_t{1} << 22;

  explicit ForgetStore(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "store capacity must be positive");
    records_ = std::make_unique<detail::RowLog<detail::RecordMeta>>(1, capacity_);
  }

  ForgetStore(const ForgetStore&) = delete;
  ForgetStore& operator=(const ForgetStore&) = delete;

  std::size_t count() const noexcept { return records_->size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_.load(std::memory_order_acquire); }

  StoreVariant variant() const {
    auto repr = snapshot();
    return repr ? repr->variant : StoreVariant::Exact;
  }

  // Rows scored by max_similarity (centroids plus later additions when Clustered).
  std::size_t scored_rows() const {
    auto repr = snapshot();
    return repr ? repr->rows() : 0;
  }

  std::size_t pca_dim() const {
    auto repr = snapshot();
    return (repr && repr->pca) ? repr->pca->output_dim() : 0;
  }

  ForgetRecord add(std::string text, const EmbeddingVector& embedding) {
    std::lock_guard lock(writer_mutex_);
    if (!repr_) {
      auto repr = std::make_shared<detail::Representation>();
      repr->variant = StoreVariant::Exact;
      repr->dim = embedding.dim();
      repr->exact_rows = std::make_unique<detail::RowLog<float>>(embedding.dim(), capacity_);
      publish_representation(std::move(repr));
      dim_.store(embedding.dim(), std::memory_order_release);
    }
    auto& repr = *repr_;
    if (embedding.dim() != repr.dim) {
      throw Error(ErrorCode::DimensionMismatch, "store dim " + std::to_string(repr.dim) +
                                                    ", embedding dim " +
                                                    std::to_string(embedding.dim()));
    }
    const std::size_t index = records_->size();
    if (index >= capacity_) {
      throw Error(ErrorCode::StoreFull, "store holds its maximum of " +
                                            std::to_string(capacity_) + " records");
    }

    const auto stored = detail::to_stored(embedding);

    ForgetRecord record;
    record.id = next_id();
    record.text = std::move(text);
    record.accepted_at = std::max(detail::steady_now_ns(), last_timestamp_ + 1);
    last_timestamp_ = record.accepted_at;
    record.embedding = EmbeddingVector(std::vector<double>(stored.begin(), stored.end()));

    detail::RecordMeta meta{record.id, record.text, record.accepted_at};
    records_->append(std::span<const detail::RecordMeta>(&meta, 1));
    records_->publish();
    append_row(repr, std::span<const float>(stored), index);
    return record;
  }

  // s_max over the current representation. Ties go to the earliest row.
  Match max_similarity(const EmbeddingVector& query) const {
    auto repr = snapshot();
    if (!repr) return {};
    if (query.dim() != repr->dim) {
      throw Error(ErrorCode::DimensionMismatch, "store dim " + std::to_string(repr->dim) +
                                                    ", query dim " + std::to_string(query.dim()));
    }
    const std::size_t rows = repr->rows();
    if (rows == 0) return {};

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    if (repr->variant == StoreVariant::Exact) {
      const auto stored_query = detail::to_stored(query);
      const auto q = std::span<const float>(stored_query);
      for (std::size_t i = 0; i < rows; ++i) {
        const double s = cosine_similarity(repr->exact_rows->row(i), q);
        if (s > best) {
          best = s;
          best_row = i;
        }
      }
    } else {
      const auto projected = repr->pca->project(query.values());
      const double qn = l2_norm(std::span<const double>(projected));
      const std::size_t k = projected.size();
      std::vector<double> row(k);
      for (std::size_t i = 0; i < rows; ++i) {
        const auto codes = repr->code_rows->row(i);
        for (std::size_t j = 0; j < k; ++j) {
          row[j] = repr->offset[j] + repr->scale[j] * static_cast<double>(codes[j]);
        }
        double s = 0.0;
        const double rn = l2_norm(std::span<const double>(row));
        if (qn > 0.0 && rn > 0.0) {
          s = std::clamp(dot(std::span<const double>(row), std::span<const double>(projected)) /
                             (rn * qn),
                         -1.0, 1.0);
        }
        if (s > best) {
          best = s;
          best_row = i;
        }
      }
    }
    const std::size_t record = record_of(*repr, best_row);
    return {best, records_->row(record)[0].id, record};
  }

  ForgetRecord record(std::size_t index) const {
    if (index >= count()) throw Error(ErrorCode::InvalidArgument, "record index out of range");
    const auto& meta = records_->row(index)[0];
    ForgetRecord r{meta.id, meta.text, {}, meta.accepted_at};
    auto repr = snapshot();
    if (repr && repr->variant == StoreVariant::Exact && index < repr->exact_rows->size()) {
      const auto row = repr->exact_rows->row(index);
      r.embedding = EmbeddingVector(std::vector<double>(row.begin(), row.end()));
    }
    return r;
  }

  // Converts an Exact store to a Compressed or Clustered one. Fitting runs on
  // a snapshot without the writer lock; records added meanwhile are encoded
  // under the lock right before the representation is swapped.
  CompressionReport compress(const StoreMode& mode) {
    std::lock_guard compress_lock(compress_mutex_);
    if (mode.variant == StoreVariant::Exact) {
      throw Error(ErrorCode::InvalidArgument, "compress() needs a Compressed or Clustered mode");
    }
    if (mode.quant_bits != 8) throw Error(ErrorCode::InvalidArgument, "only 8-bit codes exist");
    auto old = snapshot();
    if (!old) throw Error(ErrorCode::InsufficientData, "compression needs at least 2 records");
    if (old->variant != StoreVariant::Exact) {
      throw Error(ErrorCode::InvalidArgument, "only an Exact store can be compressed");
    }
    const std::size_t n0 = old->rows();
    if (n0 < 2) throw Error(ErrorCode::InsufficientData, "compression needs at least 2 records");
    const std::size_t dim = old->dim;
    if (mode.pca_dim == 0 || mode.pca_dim > dim) {
      throw Error(ErrorCode::InvalidArgument, "PCA dim must be in [1, dim]");
    }

    Matrix data(n0, dim);
    for (std::size_t i = 0; i < n0; ++i) {
      const auto row = old->exact_rows->row(i);
      std::copy(row.begin(), row.end(), data.row(i).begin());
    }
    PcaTransform pca = fit_pca(data, mode.pca_dim);
    const std::size_t k = pca.output_dim();
    Matrix projected(n0, k);
    for (std::size_t i = 0; i < n0; ++i) {
      const auto y = pca.project(std::span<const double>(std::as_const(data).row(i)));
      std::copy(y.begin(), y.end(), projected.row(i).begin());
    }

    Matrix rows;
    std::vector<std::uint64_t> row_record;
    if (mode.variant == StoreVariant::Compressed) {
      rows = std::move(projected);
      row_record.resize(n0);
      for (std::size_t i = 0; i < n0; ++i) row_record[i] = i;
    } else {
      std::mt19937_64 rng(mode.rng_seed);
      const auto coreset = kmeans_coreset_detailed(projected, mode.keep_ratio, rng);
      rows = to_matrix(coreset.centroids);
      row_record.assign(coreset.representative.begin(), coreset.representative.end());
    }
    const auto block = quantize_8bit(rows);

    auto repr = std::make_shared<detail::Representation>();
    repr->variant = mode.variant;
    repr->dim = dim;
    repr->mode = mode;
    repr->pca = std::move(pca);
    repr->scale = block.scale;
    repr->offset = block.offset;
    repr->code_rows = std::make_unique<detail::RowLog<std::uint8_t>>(k, capacity_);
    repr->row_record = std::make_unique<detail::RowLog<std::uint64_t>>(1, capacity_);
    for (std::size_t r = 0; r < block.count; ++r) {
      repr->code_rows->append(std::span<const std::uint8_t>(&block.codes[r * k], k));
      repr->row_record->append(std::span<const std::uint64_t>(&row_record[r], 1));
    }
    repr->row_record->publish();
    repr->code_rows->publish();

    CompressionReport report;
    {
      std::lock_guard lock(writer_mutex_);
      const std::size_t n = old->rows();
      for (std::size_t i = n0; i < n; ++i) {
        append_encoded(*repr, old->exact_rows->row(i), i);
      }
      report.records = records_->size();
      report.stored_rows = repr->rows();
      publish_representation(repr);
    }
    report.variant = mode.variant;
    report.dim = dim;
    report.k = k;
    report.exact_bytes = exact_payload_bytes(report.records, dim);
    report.compressed_bytes = compressed_payload_bytes(report.stored_rows, dim, k);
    report.ratio = static_cast<double>(report.exact_bytes) /
                   static_cast<double>(report.compressed_bytes);
    report.pca_iterations = repr->pca->iterations;
    return report;
  }

  StoreState export_state() const {
    std::lock_guard lock(writer_mutex_);
    StoreState state;
    const std::size_t n = records_->size();
    for (std::size_t i = 0; i < n; ++i) state.records.push_back(records_->row(i)[0]);
    if (!repr_) return state;
    state.variant = repr_->variant;
    state.dim = repr_->dim;
    const std::size_t rows = repr_->rows();
    if (repr_->variant == StoreVariant::Exact) {
      state.exact_rows.reserve(rows * repr_->dim);
      for (std::size_t i = 0; i < rows; ++i) {
        const auto r = repr_->exact_rows->row(i);
        state.exact_rows.insert(state.exact_rows.end(), r.begin(), r.end());
      }
    } else {
      state.pca = repr_->pca;
      state.k = repr_->pca->output_dim();
      state.block.count = rows;
      state.block.width = state.k;
      state.block.scale = repr_->scale;
      state.block.offset = repr_->offset;
      for (std::size_t i = 0; i < rows; ++i) {
        const auto r = repr_->code_rows->row(i);
        state.block.codes.insert(state.block.codes.end(), r.begin(), r.end());
        state.row_record.push_back(repr_->row_record->row(i)[0]);
      }
    }
    return state;
  }

  static std::unique_ptr<ForgetStore> from_state(const StoreState& state,
                                                 std::size_t capacity = kDefaultCapacity) {
    auto store = std::make_unique<ForgetStore>(std::max(capacity, state.records.size()));
    std::lock_guard lock(store->writer_mutex_);
    for (const auto& meta : state.records) {
      if (!store->ids_.insert(meta.id).second) {
        throw Error(ErrorCode::ParseError, "duplicate record id '" + meta.id + "'");
      }
      store->records_->append(std::span<const detail::RecordMeta>(&meta, 1));
      store->last_timestamp_ = std::max(store->last_timestamp_, meta.accepted_at);
    }
    store->records_->publish();
    if (state.dim == 0) return store;

    auto repr = std::make_shared<detail::Representation>();
    repr->variant = state.variant;
    repr->dim = state.dim;
    const std::size_t cap = store->capacity_;
    if (state.variant == StoreVariant::Exact) {
      if (state.exact_rows.size() != state.records.size() * state.dim) {
        throw Error(ErrorCode::ParseError, "exact payload does not match record count");
      }
      repr->exact_rows = std::make_unique<detail::RowLog<float>>(state.dim, cap);
      for (std::size_t i = 0; i < state.records.size(); ++i) {
        repr->exact_rows->append(
            std::span<const float>(state.exact_rows.data() + i * state.dim, state.dim));
      }
      repr->exact_rows->publish();
    } else {
      if (!state.pca || state.block.width != state.k ||
          state.row_record.size() != state.block.count) {
        throw Error(ErrorCode::ParseError, "compressed payload is inconsistent");
      }
      repr->pca = state.pca;
      repr->mode.variant = state.variant;
      repr->mode.pca_dim = state.k;
      repr->scale = state.block.scale;
      repr->offset = state.block.offset;
      repr->code_rows = std::make_unique<detail::RowLog<std::uint8_t>>(state.k, cap);
      repr->row_record = std::make_unique<detail::RowLog<std::uint64_t>>(1, cap);
      for (std::size_t r = 0; r < state.block.count; ++r) {
        if (state.row_record[r] >= state.records.size()) {
          throw Error(ErrorCode::ParseError, "row refers to a missing record");
        }
        repr->code_rows->append(
            std::span<const std::uint8_t>(state.block.codes.data() + r * state.k, state.k));
        repr->row_record->append(std::span<const std::uint64_t>(&state.row_record[r], 1));
      }
      repr->row_record->publish();
      repr->code_rows->publish();
    }
    store->dim_.store(state.dim, std::memory_order_release);
    store->publish_representation(std::move(repr));
    return store;
  }

  // Read-only view for index builders; valid as long as the pointer is held.
  std::shared_ptr<const detail::Representation> representation() const { return snapshot(); }

  const detail::RecordMeta& record_meta(std::size_t index) const {
    return records_->row(index)[0];
  }

 private:
  std::shared_ptr<const detail::Representation> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return repr_;
  }

  void publish_representation(std::shared_ptr<detail::Representation> repr) {
    std::lock_guard lock(snapshot_mutex_);
    repr_ = std::move(repr);
  }

  static std::size_t record_of(const detail::Representation& repr, std::size_t row) {
    if (repr.variant == StoreVariant::Exact) return row;
    return static_cast<std::size_t>(repr.row_record->row(row)[0]);
  }

  // Writer lock held.
  void append_row(detail::Representation& repr, std::span<const float> unit, std::size_t record) {
    if (repr.variant == StoreVariant::Exact) {
      repr.exact_rows->append(unit);
      repr.exact_rows->publish();
    } else {
      append_encoded(repr, unit, record);
    }
  }

  // Post-compression additions become their own rows, encoded with the
  // fitted PCA and quantizer.
  static void append_encoded(detail::Representation& repr, std::span<const float> unit,
                             std::size_t record) {
    const auto y = repr.pca->project(unit);
    const auto codes = repr.encode(y);
    const std::uint64_t rec = record;
    repr.row_record->append(std::span<const std::uint64_t>(&rec, 1));
    repr.row_record->publish();
    repr.code_rows->append(std::span<const std::uint8_t>(codes));
    repr.code_rows->publish();
  }

  std::string next_id() {
    for (std::size_t seq = records_->size();; ++seq) {
      std::string id = "f-" + std::to_string(seq);
      if (ids_.insert(id).second) return id;
    }
  }

  std::size_t capacity_;
  std::unique_ptr<detail::RowLog<detail::RecordMeta>> records_;
  std::shared_ptr<detail::Representation> repr_;
  std::atomic<std::size_t> dim_{0};
  std::unordered_set<std::string> ids_;
  std::int64_t last_timestamp_ = 0;
  mutable std::mutex writer_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::mutex compress_mutex_;
};

}  // namespace curate
