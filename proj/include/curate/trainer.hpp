#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "curate/embedder.hpp"
#include "curate/error.hpp"
#include "curate/vecmath.hpp"

namespace curate {

// One element (q, q', y) of the training set. pair_type is 1 for
// (seed, paraphrase), 2 for (seed, contrast), 3 for (paraphrase, contrast of
// paraphrase). seed_id_b is only set for randomly paired negatives.
struct LabeledPair {
  std::string text_a;
  std::string text_b;
  int label = 0;
  int pair_type = 1;
  std::string seed_id;
  std::string seed_id_b;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

using TrainingDataset = std::vector<LabeledPair>;

inline void validate(const LabeledPair& p) {
  if (p.label != 0 && p.label != 1) {
    throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
  }
  if (p.text_a.empty() || p.text_b.empty()) {
    throw Error(ErrorCode::InvalidArgument, "pair texts must be non-empty");
  }
  if (p.pair_type < 1 || p.pair_type > 3) {
    throw Error(ErrorCode::InvalidArgument, "pair type must be 1, 2 or 3");
  }
}

// Affine map applied on top of a frozen base embedding. Row-major weight.
class ProjectionHead {
 public:
  ProjectionHead() = default;

  ProjectionHead(std::size_t out_dim, std::size_t in_dim)
      : out_dim_(out_dim), in_dim_(in_dim), weight_(out_dim * in_dim, 0.0), bias_(out_dim, 0.0) {
    if (out_dim == 0 || in_dim == 0) {
      throw Error(ErrorCode::InvalidArgument, "projection head dims must be positive");
    }
  }

  ProjectionHead(std::size_t out_dim, std::size_t in_dim, std::vector<double> weight,
                 std::vector<double> bias)
      : out_dim_(out_dim), in_dim_(in_dim), weight_(std::move(weight)), bias_(std::move(bias)) {
    if (out_dim == 0 || in_dim == 0 || weight_.size() != out_dim * in_dim ||
        bias_.size() != out_dim) {
      throw Error(ErrorCode::DimensionMismatch, "projection head shape is inconsistent");
    }
    for (double v : weight_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite head weight");
    }
    for (double v : bias_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite head bias");
    }
  }

  static ProjectionHead identity(std::size_t dim) {
    ProjectionHead h(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) h.weight_[i * dim + i] = 1.0;
    return h;
  }

  static ProjectionHead random(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
    ProjectionHead h(out_dim, in_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    for (auto& w : h.weight_) w = normal(rng);
    return h;
  }

  std::size_t out_dim() const noexcept { return out_dim_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  // out_dim 1 is legal but cosine distance only takes the values 0 and 2 there.
  bool degenerate() const noexcept { return out_dim_ < 2; }

  double& w(std::size_t r, std::size_t c) { return weight_[r * in_dim_ + c]; }
  double w(std::size_t r, std::size_t c) const { return weight_[r * in_dim_ + c]; }
  std::vector<double>& weight() noexcept { return weight_; }
  const std::vector<double>& weight() const noexcept { return weight_; }
  std::vector<double>& bias() noexcept { return bias_; }
  const std::vector<double>& bias() const noexcept { return bias_; }

  std::size_t parameter_count() const noexcept { return weight_.size() + bias_.size(); }

  // weight * x + bias, not normalized.
  std::vector<double> project(std::span<const double> x) const {
    if (x.size() != in_dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "head expects dim " + std::to_string(in_dim_) + ", got " +
                      std::to_string(x.size()));
    }
    std::vector<double> z(bias_);
    for (std::size_t r = 0; r < out_dim_; ++r) {
      const double* row = &weight_[r * in_dim_];
      double acc = 0.0;
      for (std::size_t c = 0; c < in_dim_; ++c) acc += row[c] * x[c];
      z[r] += acc;
    }
    return z;
  }

  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;

 private:
  std::size_t out_dim_ = 0;
  std::size_t in_dim_ = 0;
  std::vector<double> weight_;
  std::vector<double> bias_;
};

inline EmbeddingVector embed_with_head(const EmbeddingVector& base, const ProjectionHead& head) {
  const auto z = head.project(base.values());
  return EmbeddingVector(l2_normalized(std::span<const double>(z)));
}

struct EmbeddedPair {
  EmbeddingVector a;
  EmbeddingVector b;
  int label = 0;
};

inline double pair_loss(double distance, int label, double margin) {
  if (label == 1) return distance * distance;
  const double hinge = std::max(0.0, margin - distance);
  return hinge * hinge;
}

// (1 / 2|T|) * sum[ y d^2 + (1 - y) max(0, m - d)^2 ], d = cosine distance.
inline double contrastive_loss(std::span<const EmbeddedPair> batch, double margin) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "contrastive loss of an empty batch");
  double sum = 0.0;
  for (const auto& p : batch) sum += pair_loss(cosine_distance(p.a, p.b), p.label, margin);
  return sum / (2.0 * static_cast<double>(batch.size()));
}

// Loss of the head applied to a batch of base-embedding pairs.
inline double head_loss(std::span<const EmbeddedPair> base_batch, const ProjectionHead& head,
                        double margin) {
  if (base_batch.empty()) throw Error(ErrorCode::EmptyBatch, "contrastive loss of an empty batch");
  std::vector<EmbeddedPair> projected;
  projected.reserve(base_batch.size());
  for (const auto& p : base_batch) {
    projected.push_back({embed_with_head(p.a, head), embed_with_head(p.b, head), p.label});
  }
  return contrastive_loss(projected, margin);
}

struct HeadGradient {
  std::vector<double> weight;  // row-major, same shape as the head
  std::vector<double> bias;
  double loss = 0.0;
};

namespace detail {

constexpr double kNormEpsilon = 1e-12;

// Accumulates d(loss)/d(head) for a batch; the normalization epsilon keeps a
// collapsed projection finite. Pair order is fixed, so reductions are
// deterministic.
inline HeadGradient accumulate_gradient(std::span<const EmbeddedPair> base_batch,
                                        const ProjectionHead& head, double margin) {
  if (base_batch.empty()) throw Error(ErrorCode::EmptyBatch, "gradient of an empty batch");
  const std::size_t out = head.out_dim();
  const std::size_t in = head.in_dim();
  HeadGradient g{std::vector<double>(out * in, 0.0), std::vector<double>(out, 0.0), 0.0};
  const double scale = 1.0 / (2.0 * static_cast<double>(base_batch.size()));

  std::vector<double> ga(out);
  std::vector<double> gb(out);
  for (const auto& p : base_batch) {
    if (p.a.dim() != in || p.b.dim() != in) {
      throw Error(ErrorCode::DimensionMismatch, "pair dim does not match head input");
    }
    const auto za = head.project(p.a.values());
    const auto zb = head.project(p.b.values());
    const double na = l2_norm(std::span<const double>(za)) + kNormEpsilon;
    const double nb = l2_norm(std::span<const double>(zb)) + kNormEpsilon;
    const double c = dot(std::span<const double>(za), std::span<const double>(zb)) / (na * nb);
    const double d = 1.0 - std::clamp(c, -1.0, 1.0);
    g.loss += pair_loss(d, p.label, margin);

    double dloss_dd = 0.0;
    if (p.label == 1) {
      dloss_dd = 2.0 * d;
    } else if (d < margin) {
      dloss_dd = -2.0 * (margin - d);
    }  // d >= margin: flat hinge, subgradient 0
    const double dloss_dc = -dloss_dd * scale;
    if (dloss_dc == 0.0) continue;

    for (std::size_t r = 0; r < out; ++r) {
      ga[r] = dloss_dc * (zb[r] / (na * nb) - c * za[r] / (na * na));
      gb[r] = dloss_dc * (za[r] / (na * nb) - c * zb[r] / (nb * nb));
    }
    const auto xa = p.a.values();
    const auto xb = p.b.values();
    for (std::size_t r = 0; r < out; ++r) {
      double* row = &g.weight[r * in];
      for (std::size_t col = 0; col < in; ++col) row[col] += ga[r] * xa[col] + gb[r] * xb[col];
      g.bias[r] += ga[r] + gb[r];
    }
  }
  g.loss *= scale;
  return g;
}

}  // namespace detail

// Analytic gradient of head_loss with respect to weight and bias.
inline HeadGradient loss_gradient(std::span<const EmbeddedPair> base_batch,
                                  const ProjectionHead& head, double margin) {
  return detail::accumulate_gradient(base_batch, head, margin);
}

struct TrainConfig {
  double margin = 0.5;
  double learning_rate = 2e-5;
  int epochs = 1;
  std::size_t batch_size = 16;
  std::size_t warmup_steps = 100;
  bool shuffle = true;
  std::uint64_t rng_seed = 0;
  // 0 keeps the base dimension and starts from the identity map.
  std::size_t out_dim = 0;

  void validate() const {
    if (!(margin > 0.0 && margin <= 2.0)) {
      throw Error(ErrorCode::InvalidArgument, "margin must be in (0, 2]");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorCode::InvalidArgument, "learning rate must be finite and >= 0");
    }
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  }
};

struct TrainResult {
  ProjectionHead head;
  std::vector<double> step_losses;  // batch loss before each update
  double initial_loss = 0.0;        // whole-dataset loss before training
  double final_loss = 0.0;          // whole-dataset loss after training

  // Mean batch loss over the last 10% of steps (at least one step).
  double tail_mean_loss() const {
    if (step_losses.empty()) return 0.0;
    const std::size_t n = std::max<std::size_t>(1, step_losses.size() / 10);
    return std::accumulate(step_losses.end() - static_cast<std::ptrdiff_t>(n), step_losses.end(),
                           0.0) /
           static_cast<double>(n);
  }
};

// Learning rate at a 0-based step: linear ramp from 0 over warmup, then flat.
inline double scheduled_learning_rate(const TrainConfig& config, std::size_t step) {
  if (step < config.warmup_steps) {
    return config.learning_rate * static_cast<double>(step) /
           static_cast<double>(config.warmup_steps);
  }
  return config.learning_rate;
}

using TrainLogger = std::function<void(std::size_t step, double lr, double loss)>;

// Mini-batch SGD on the contrastive objective over a frozen base embedder.
inline TrainResult train(const TrainingDataset& dataset, const Embedder& base,
                         const TrainConfig& config, const TrainLogger& log = {}) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "training dataset is empty");
  for (const auto& p : dataset) validate(p);

  // Embed every distinct text once; the base model is frozen.
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> texts;
  for (const auto& p : dataset) {
    for (const auto* t : {&p.text_a, &p.text_b}) {
      if (index.emplace(*t, texts.size()).second) texts.push_back(*t);
    }
  }
  const auto base_embs = base.embed_batch(texts);
  const std::size_t in_dim = base.dim();
  for (const auto& e : base_embs) {
    if (e.dim() != in_dim) {
      throw Error(ErrorCode::EmbedderFailure, "base embedder returned inconsistent dimension");
    }
  }
  std::vector<EmbeddedPair> pairs;
  pairs.reserve(dataset.size());
  for (const auto& p : dataset) {
    pairs.push_back({base_embs[index.at(p.text_a)], base_embs[index.at(p.text_b)], p.label});
  }

  TrainResult result;
  if (config.out_dim == 0 || config.out_dim == in_dim) {
    result.head = ProjectionHead::identity(in_dim);
  } else {
    result.head = ProjectionHead::random(config.out_dim, in_dim, config.rng_seed);
  }
  auto& head = result.head;
  result.initial_loss = detail::accumulate_gradient(pairs, head, config.margin).loss;

  std::mt19937_64 rng(config.rng_seed);
  std::vector<std::size_t> order(pairs.size());
  std::vector<EmbeddedPair> batch;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(pairs[order[i]]);

      const auto grad = detail::accumulate_gradient(batch, head, config.margin);
      if (!std::isfinite(grad.loss)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "loss became non-finite at step " + std::to_string(step) + " (epoch " +
                        std::to_string(epoch) + ", batch of " + std::to_string(batch.size()) +
                        ")");
      }
      const double lr = scheduled_learning_rate(config, step);
      if (log) log(step, lr, grad.loss);
      result.step_losses.push_back(grad.loss);
      if (lr != 0.0) {
        for (std::size_t i = 0; i < grad.weight.size(); ++i) head.weight()[i] -= lr * grad.weight[i];
        for (std::size_t i = 0; i < grad.bias.size(); ++i) head.bias()[i] -= lr * grad.bias[i];
      }
      ++step;
    }
  }
  result.final_loss = detail::accumulate_gradient(pairs, head, config.margin).loss;
  if (!std::isfinite(result.final_loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "final loss is non-finite");
  }
  return result;
}

// U = head o base.
class ComposedEmbedder final : public Embedder {
 public:
  ComposedEmbedder(std::shared_ptr<const Embedder> base, ProjectionHead head)
      : base_(std::move(base)), head_(std::move(head)) {
    if (base_->dim() != head_.in_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "head input dim does not match base embedder");
    }
  }

  std::size_t dim() const override { return head_.out_dim(); }

  EmbeddingVector embed(std::string_view text) const override {
    try {
      return embed_with_head(base_->embed(text), head_);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroNormVector) {
        throw Error(ErrorCode::EmbedderFailure, "projection collapsed to zero");
      }
      throw;
    }
  }

  const ProjectionHead& head() const noexcept { return head_; }

 private:
  std::shared_ptr<const Embedder> base_;
  ProjectionHead head_;
};

}  // namespace curate
