#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "curate/error.hpp"
#include "curate/forgetstore.hpp"
#include "curate/text.hpp"

namespace curate {

class RefusalSet {
 public:
  explicit RefusalSet(std::vector<std::string> phrases) : phrases_(std::move(phrases)) {
    if (phrases_.empty()) throw Error(ErrorCode::EmptyRefusalSet, "refusal set is empty");
    std::unordered_set<std::string> seen;
    for (const auto& p : phrases_) {
      if (p.empty()) throw Error(ErrorCode::InvalidArgument, "refusal phrase is empty");
      if (!seen.insert(p).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate refusal phrase '" + p + "'");
      }
    }
  }

  // One phrase per line; blank lines and lines starting with '#' are skipped.
  static RefusalSet parse(const std::string& text) {
    std::vector<std::string> phrases;
    std::unordered_set<std::string> seen;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (seen.insert(t).second) phrases.push_back(t);
    }
    return RefusalSet(std::move(phrases));
  }

  static RefusalSet defaults();

  const std::vector<std::string>& phrases() const noexcept { return phrases_; }
  std::size_t size() const noexcept { return phrases_.size(); }

 private:
  std::vector<std::string> phrases_;
};

inline RefusalSet RefusalSet::defaults() {
  return RefusalSet({
      "I don't know.",
      "I can't answer that question.",
      "I'm not able to help with that.",
      "Sorry, I can't provide that information.",
      "That's not something I can answer.",
      "I'm unable to respond to that request.",
      "I don't have an answer for that.",
      "I can't share details about that.",
      "I'm afraid I can't help with this one.",
      "That information isn't available from me.",
      "I'd rather not answer that.",
      "I can't discuss that topic.",
      "Unfortunately, I can't respond to that.",
      "I have no information I can share on that.",
      "I'm not in a position to answer that.",
      "I can't give you an answer to that question.",
      "Sorry, that's outside what I can tell you.",
      "I won't be able to answer that.",
      "I can't go into that.",
      "That's something I'm unable to address.",
      "I'm sorry, but I can't answer this.",
      "I can't confirm or provide that information.",
      "I don't have anything to say about that.",
      "I'm not able to provide an answer here.",
      "That isn't a question I can respond to.",
      "I can't offer any information on that.",
      "Sorry, I'm not able to discuss that.",
      "I can't help you with that question.",
      "I'm unable to share that.",
      "I'd prefer not to respond to that.",
      "That's beyond what I can answer.",
      "I'm sorry, I don't know the answer to that.",
  });
}

struct GateConfig {
  double threshold = 0.8;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "threshold must be in [0, 1]");
    }
  }
};

enum class GateAction { Answer, Refuse };

inline std::string to_string(GateAction a) { return a == GateAction::Answer ? "answer" : "refuse"; }

struct GateDecision {
  GateAction action = GateAction::Answer;
  std::optional<double> s_max;
  std::optional<std::string> matched_id;
  std::optional<std::string> refusal_text;
};

// Refuse iff a score exists and score >= threshold.
inline GateAction decide_action(std::optional<double> s_max, double threshold) {
  return (s_max && *s_max >= threshold) ? GateAction::Refuse : GateAction::Answer;
}

inline const std::string& sample_refusal(const RefusalSet& set, std::mt19937_64& rng) {
  if (set.size() == 0) throw Error(ErrorCode::EmptyRefusalSet, "refusal set is empty");
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  return set.phrases()[pick(rng)];
}

inline GateDecision decide(const Match& match, const GateConfig& config, const RefusalSet& refusals,
                           std::mt19937_64& rng) {
  GateDecision d;
  d.s_max = match.score;
  d.action = decide_action(match.score, config.threshold);
  if (d.action == GateAction::Refuse) {
    d.matched_id = match.id;
    d.refusal_text = sample_refusal(refusals, rng);
  }
  return d;
}

inline GateDecision decide(const EmbeddingVector& query, const ForgetStore& store,
                           const GateConfig& config, const RefusalSet& refusals,
                           std::mt19937_64& rng) {
  return decide(store.max_similarity(query), config, refusals, rng);
}

}  // namespace curate
