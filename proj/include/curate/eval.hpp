#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "curate/embedder.hpp"
#include "curate/error.hpp"
#include "curate/forgetstore.hpp"
#include "curate/gate.hpp"
#include "curate/gateway.hpp"
#include "curate/text.hpp"

namespace curate::eval {

// --- ROUGE-L -------------------------------------------------------------

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Two-row dynamic program.
template <typename T>
std::size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline RougeScore rouge_l_tokens(const std::vector<std::string>& cand,
                                 const std::vector<std::string>& ref) {
  RougeScore s;
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return s;
  s.precision = lcs / static_cast<double>(cand.size());
  s.recall = lcs / static_cast<double>(ref.size());
  s.f = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// Lowercase, non-alphanumerics become separators, sentence-level LCS.
inline RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l_tokens(tokenize(candidate), tokenize(reference));
}

inline double refusal_score(std::string_view response, const RefusalSet& refusals) {
  if (refusals.size() == 0) throw Error(ErrorCode::EmptyRefusalSet, "refusal set is empty");
  const auto cand = tokenize(response);
  double best = 0.0;
  for (const auto& phrase : refusals.phrases()) {
    best = std::max(best, rouge_l_tokens(cand, tokenize(phrase)).f);
  }
  return best;
}

// --- classification ------------------------------------------------------

enum class GoldLabel { Forget, Retain };

inline std::string to_string(GoldLabel g) { return g == GoldLabel::Forget ? "forget" : "retain"; }

inline GoldLabel parse_gold(const std::string& s) {
  if (s == "forget") return GoldLabel::Forget;
  if (s == "retain") return GoldLabel::Retain;
  throw Error(ErrorCode::ParseError, "gold label must be \"forget\" or \"retain\", got '" + s + "'");
}

struct ClassificationMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

// Positive class: refuse / forget. A ratio with an empty denominator is 1
// (no refusals means no false refusals; no forget items means none missed).
inline ClassificationMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                                 std::size_t tn) {
  ClassificationMetrics m{tp, fp, fn, tn};
  m.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double sum = m.precision + m.recall;
  m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
  return m;
}

inline ClassificationMetrics classification_metrics(std::span<const GateAction> actions,
                                                    std::span<const GoldLabel> gold) {
  if (actions.size() != gold.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(actions.size()) + " decisions vs " +
                                               std::to_string(gold.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const bool refused = actions[i] == GateAction::Refuse;
    const bool positive = gold[i] == GoldLabel::Forget;
    if (refused && positive) ++tp;
    else if (refused) ++fp;
    else if (positive) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

inline ClassificationMetrics classification_metrics(std::span<const GateDecision> decisions,
                                                    std::span<const GoldLabel> gold) {
  std::vector<GateAction> actions;
  actions.reserve(decisions.size());
  for (const auto& d : decisions) actions.push_back(d.action);
  return classification_metrics(std::span<const GateAction>(actions), gold);
}

// --- exact match ---------------------------------------------------------

// Option extraction, first rule that matches wins:
//   1. a parenthesised option anywhere: "(B)"
//   2. a leading option: "B", "B.", "B)", "B:" at the start of the response
//   3. "answer is B" / "answer: B"
//   4. a standalone capital letter token
// Gold values longer than one character are compared against the whole
// response after tokenization instead.
inline std::optional<std::string> extract_option(std::string_view response) {
  static const std::regex kParen(R"(\(([A-Za-z0-9])\))");
  static const std::regex kLeading(R"(^\s*([A-Za-z0-9])(?:[.):]|\s|$))");
  static const std::regex kAnswerIs(R"(answer\s*(?:is|:)\s*\(?([A-Za-z0-9])\b)", std::regex::icase);
  static const std::regex kCapital(R"((?:^|[^A-Za-z0-9])([A-Z])(?:[^A-Za-z0-9']|$))");
  const std::string s(response);
  std::smatch m;
  for (const auto* re : {&kParen, &kLeading, &kAnswerIs, &kCapital}) {
    if (std::regex_search(s, m, *re)) return to_lower(m[1].str());
  }
  return std::nullopt;
}

inline int exact_match(std::string_view response, std::string_view gold) {
  const auto g = tokenize(gold);
  if (g.empty()) return 0;
  if (g.size() == 1 && g[0].size() == 1) {
    const auto opt = extract_option(response);
    return opt && *opt == g[0] ? 1 : 0;
  }
  return tokenize(response) == g ? 1 : 0;
}

// --- stage plans ---------------------------------------------------------

struct EvalItem {
  std::string q;
  std::string ref;
  GoldLabel gold = GoldLabel::Retain;
};

struct EvalSet {
  std::string name;
  std::vector<EvalItem> items;
};

struct Stage {
  std::vector<std::string> forget;  // new items only; the store accumulates
  std::vector<EvalSet> eval_sets;
};

struct StagePlan {
  std::vector<Stage> stages;

  std::size_t query_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) {
      for (const auto& e : s.eval_sets) n += e.items.size();
    }
    return n;
  }
};

inline void validate(const StagePlan& plan) {
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    for (const auto& f : plan.stages[i].forget) {
      if (trim(f).empty()) {
        throw Error(ErrorCode::ValidationError, "stage " + std::to_string(i) + " has an empty forget item");
      }
    }
    for (const auto& set : plan.stages[i].eval_sets) {
      for (const auto& item : set.items) {
        if (trim(item.q).empty()) {
          throw Error(ErrorCode::ValidationError,
                      "stage " + std::to_string(i) + " set '" + set.name + "' has an empty query");
        }
      }
    }
  }
}

// {stages: [{forget: [str], eval_sets: {name: [{q, ref, gold}]}}]}
inline StagePlan plan_from_json(const nlohmann::json& j) {
  StagePlan plan;
  try {
    for (const auto& js : j.at("stages")) {
      Stage stage;
      if (js.contains("forget")) stage.forget = js["forget"].get<std::vector<std::string>>();
      if (js.contains("eval_sets")) {
        for (const auto& [name, items] : js["eval_sets"].items()) {
          EvalSet set{name, {}};
          for (const auto& it : items) {
            set.items.push_back({it.at("q").get<std::string>(), it.value("ref", std::string()),
                                 parse_gold(it.at("gold").get<std::string>())});
          }
          stage.eval_sets.push_back(std::move(set));
        }
      }
      plan.stages.push_back(std::move(stage));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad stage plan: ") + e.what());
  }
  validate(plan);
  return plan;
}

inline nlohmann::json to_json(const StagePlan& plan) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : plan.stages) {
    nlohmann::json sets = nlohmann::json::object();
    for (const auto& set : s.eval_sets) {
      nlohmann::json items = nlohmann::json::array();
      for (const auto& it : set.items) {
        items.push_back({{"q", it.q}, {"ref", it.ref}, {"gold", to_string(it.gold)}});
      }
      sets[set.name] = std::move(items);
    }
    stages.push_back({{"forget", s.forget}, {"eval_sets", std::move(sets)}});
  }
  return {{"stages", std::move(stages)}};
}

inline StagePlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

// --- stage-wise evaluation -----------------------------------------------

struct QueryOutcome {
  GateAction action = GateAction::Answer;
  GoldLabel gold = GoldLabel::Retain;
  std::optional<double> s_max;
  std::string response;
};

struct SetReport {
  std::string name;
  std::size_t count = 0;
  ClassificationMetrics classification;
  double answer_rate = 0.0;
  double rouge_l_mean = 0.0;        // response vs reference, items with a reference
  double refusal_score_mean = 0.0;
  std::optional<double> exact_match_accuracy;  // items with a reference
  std::vector<QueryOutcome> outcomes;
};

struct StageReport {
  std::size_t stage = 0;
  std::size_t forget_count = 0;  // cumulative
  std::vector<SetReport> sets;

  const SetReport* find(std::string_view name) const {
    for (const auto& s : sets) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

struct MetricsReport {
  double delta = 0.0;
  std::vector<StageReport> stages;
};

inline SetReport summarize(const std::string& name, const std::vector<EvalItem>& items,
                           std::vector<QueryOutcome> outcomes, const RefusalSet& refusals) {
  SetReport r;
  r.name = name;
  r.count = items.size();
  std::vector<GateAction> actions;
  std::vector<GoldLabel> gold;
  std::size_t answered = 0, with_ref = 0, matched = 0;
  double rouge_sum = 0.0, refusal_sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& o = outcomes[i];
    actions.push_back(o.action);
    gold.push_back(items[i].gold);
    if (o.action == GateAction::Answer) ++answered;
    refusal_sum += refusal_score(o.response, refusals);
    if (!items[i].ref.empty()) {
      ++with_ref;
      rouge_sum += rouge_l(o.response, items[i].ref).f;
      matched += static_cast<std::size_t>(exact_match(o.response, items[i].ref));
    }
  }
  r.classification = classification_metrics(std::span<const GateAction>(actions),
                                            std::span<const GoldLabel>(gold));
  if (!items.empty()) {
    const auto n = static_cast<double>(items.size());
    r.answer_rate = static_cast<double>(answered) / n;
    r.refusal_score_mean = refusal_sum / n;
  }
  if (with_ref > 0) {
    r.rouge_l_mean = rouge_sum / static_cast<double>(with_ref);
    r.exact_match_accuracy = static_cast<double>(matched) / static_cast<double>(with_ref);
  }
  r.outcomes = std::move(outcomes);
  return r;
}

// Runs every stage through the gateway's forget and query paths, in order.
inline MetricsReport run_stages(const StagePlan& plan, Gateway& gateway) {
  validate(plan);
  MetricsReport report;
  report.delta = gateway.threshold();
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& stage = plan.stages[i];
    for (const auto& text : stage.forget) gateway.forget(text);
    StageReport sr;
    sr.stage = i;
    sr.forget_count = gateway.store().count();
    for (const auto& set : stage.eval_sets) {
      std::vector<QueryOutcome> outcomes;
      outcomes.reserve(set.items.size());
      for (const auto& item : set.items) {
        const auto q = gateway.query(item.q);
        outcomes.push_back({q.action, item.gold, q.s_max, q.response});
      }
      sr.sets.push_back(summarize(set.name, set.items, std::move(outcomes), gateway.refusals()));
    }
    report.stages.push_back(std::move(sr));
  }
  return report;
}

inline nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : report.stages) {
    nlohmann::json sets = nlohmann::json::object();
    for (const auto& s : st.sets) {
      const auto& c = s.classification;
      sets[s.name] = {{"count", s.count},
                      {"precision", c.precision},
                      {"recall", c.recall},
                      {"f1", c.f1},
                      {"tp", c.tp},
                      {"fp", c.fp},
                      {"fn", c.fn},
                      {"tn", c.tn},
                      {"answer_rate", s.answer_rate},
                      {"rouge_l_mean", s.rouge_l_mean},
                      {"refusal_score_mean", s.refusal_score_mean},
                      {"exact_match_accuracy", s.exact_match_accuracy
                                                   ? nlohmann::json(*s.exact_match_accuracy)
                                                   : nlohmann::json(nullptr)}};
    }
    stages.push_back({{"stage", st.stage}, {"forget_count", st.forget_count}, {"sets", sets}});
  }
  return {{"delta", report.delta}, {"stages", stages}};
}

// Flat rows: stage,set,metric,value
inline std::string to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "stage,set,metric,value\n";
  for (const auto& st : report.stages) {
    for (const auto& s : st.sets) {
      const auto row = [&](const char* metric, double v) {
        out << st.stage << ',' << s.name << ',' << metric << ',' << v << '\n';
      };
      row("count", static_cast<double>(s.count));
      row("precision", s.classification.precision);
      row("recall", s.classification.recall);
      row("f1", s.classification.f1);
      row("answer_rate", s.answer_rate);
      row("rouge_l_mean", s.rouge_l_mean);
      row("refusal_score_mean", s.refusal_score_mean);
      if (s.exact_match_accuracy) row("exact_match_accuracy", *s.exact_match_accuracy);
    }
  }
  return out.str();
}

// --- threshold sweep -----------------------------------------------------

struct ScoredQuery {
  std::size_t stage = 0;
  std::string set;
  GoldLabel gold = GoldLabel::Retain;
  std::optional<double> s_max;
};

struct ScoreOptions {
  // Runs after each stage's forget items were added, before its queries.
  std::function<void(std::size_t stage, ForgetStore&)> after_forgets;
};

// Embeds each query once and records s_max at its stage.
inline std::vector<ScoredQuery> score_plan(const StagePlan& plan, const Embedder& embedder,
                                           ForgetStore& store, const ScoreOptions& options = {}) {
  validate(plan);
  std::vector<ScoredQuery> out;
  out.reserve(plan.query_count());
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    for (const auto& text : plan.stages[i].forget) store.add(text, embedder.embed(text));
    if (options.after_forgets) options.after_forgets(i, store);
    for (const auto& set : plan.stages[i].eval_sets) {
      for (const auto& item : set.items) {
        out.push_back({i, set.name, item.gold, store.max_similarity(embedder.embed(item.q)).score});
      }
    }
  }
  return out;
}

inline std::vector<bool> refused_at(std::span<const ScoredQuery> scored, double delta) {
  std::vector<bool> out(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out[i] = decide_action(scored[i].s_max, delta) == GateAction::Refuse;
  }
  return out;
}

inline ClassificationMetrics metrics_at(std::span<const ScoredQuery> scored, double delta) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& q : scored) {
    const bool refused = decide_action(q.s_max, delta) == GateAction::Refuse;
    const bool positive = q.gold == GoldLabel::Forget;
    if (refused && positive) ++tp;
    else if (refused) ++fp;
    else if (positive) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

struct SweepRow {
  double delta = 0.0;
  ClassificationMetrics metrics;
  std::size_t refusals = 0;
};

inline std::vector<SweepRow> threshold_sweep(std::span<const ScoredQuery> scored,
                                             std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "sweep values must be in [0, 1]");
    }
    if (i > 0 && grid[i] < grid[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "sweep grid must be sorted");
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double delta : grid) {
    SweepRow row{delta, metrics_at(scored, delta), 0};
    row.refusals = row.metrics.tp + row.metrics.fp;
    rows.push_back(row);
  }
  return rows;
}

// "lo:hi:step", inclusive of hi when it lies on the grid.
inline std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad grid '" + spec + "', expected lo:hi:step");
    }
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw Error(ErrorCode::InvalidArgument, "bad grid '" + spec + "', expected lo:hi:step");
  }
  const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Round to 10 decimals so 0.01 + 79 * 0.01 is the double nearest 0.8.
    grid[i] = std::round((parts[0] + static_cast<double>(i) * parts[2]) * 1e10) / 1e10;
  }
  return grid;
}

inline std::vector<double> default_grid() { return parse_grid("0.01:0.99:0.01"); }

// Highest F1; ties resolve to the median of the tied thresholds.
inline double best_threshold(std::span<const SweepRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  double best = -1.0;
  for (const auto& r : rows) best = std::max(best, r.metrics.f1);
  std::vector<double> tied;
  for (const auto& r : rows) {
    if (r.metrics.f1 == best) tied.push_back(r.delta);
  }
  return tied[tied.size() / 2];
}

// gnuplot-friendly: '#' header, tab-separated columns.
inline std::string sweep_tsv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out.precision(10);
  out << "# delta\tprecision\trecall\tf1\trefusals\n";
  for (const auto& r : rows) {
    out << r.delta << '\t' << r.metrics.precision << '\t' << r.metrics.recall << '\t'
        << r.metrics.f1 << '\t' << r.refusals << '\n';
  }
  return out.str();
}

inline nlohmann::json to_json(std::span<const SweepRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"delta", r.delta}, {"precision", r.metrics.precision},
                   {"recall", r.metrics.recall}, {"f1", r.metrics.f1}, {"refusals", r.refusals}});
  }
  return out;
}

// --- planted-cluster benchmark -------------------------------------------

// Synthetic forget/retain task with known separability. Every item is a
// sequence of pseudo-words drawn without replacement from a fresh stream, so
// overlaps are exactly the ones planted:
//   paraphrase of a forget item keeps `paraphrase_keep` of its tokens,
//   a near-utility distractor keeps `near_keep`, retain items keep none.
struct PlantedOptions {
  std::size_t stages = 3;
  std::size_t forget_per_stage = 100;
  std::size_t retain_items = 200;
  std::size_t tokens_per_item = 12;
  std::size_t paraphrase_keep = 8;  // 8/12 = 67% shared
  std::size_t near_keep = 3;        // 3/12 = 25% shared
  std::uint64_t seed = 7;
};

class PseudoWords {
 public:
  explicit PseudoWords(std::uint64_t seed) : rng_(seed) {}

  std::string next() {
    static constexpr char kConsonants[] = "bcdfghjklmnprstvz";
    static constexpr char kVowels[] = "aeiou";
    for (;;) {
      std::string w;
      std::uniform_int_distribution<int> syllables(2, 4);
      const int n = syllables(rng_);
      for (int i = 0; i < n; ++i) {
        w += kConsonants[std::uniform_int_distribution<std::size_t>(0, 16)(rng_)];
        w += kVowels[std::uniform_int_distribution<std::size_t>(0, 4)(rng_)];
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> take(std::size_t n) {
    std::vector<std::string> out(n);
    for (auto& w : out) w = next();
    return out;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::unordered_set<std::string> used_;
};

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Keeps `keep` randomly chosen positions and replaces the others with fresh words.
inline std::vector<std::string> planted_variant(const std::vector<std::string>& base,
                                                std::size_t keep, PseudoWords& words) {
  std::vector<std::size_t> pos(base.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), words.rng());
  std::vector<bool> kept(base.size(), false);
  for (std::size_t i = 0; i < std::min(keep, base.size()); ++i) kept[pos[i]] = true;
  std::vector<std::string> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = kept[i] ? base[i] : words.next();
  return out;
}

// |tokens(a) ∩ tokens(b)| / |tokens(a)| over distinct tokens.
inline double token_overlap(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  const std::unordered_set<std::string> sa(ta.begin(), ta.end());
  const std::unordered_set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : sa) shared += sb.count(t);
  return static_cast<double>(shared) / static_cast<double>(sa.size());
}

// Each stage adds forget items; its eval sets cover every forget item so far
// (as paraphrases, gold forget), one near-utility distractor per forget item
// (gold retain) and a fixed retain set (gold retain).
inline StagePlan make_planted_plan(const PlantedOptions& o) {
  if (o.paraphrase_keep > o.tokens_per_item || o.near_keep > o.tokens_per_item) {
    throw Error(ErrorCode::InvalidArgument, "cannot keep more tokens than an item has");
  }
  PseudoWords words(o.seed);
  std::vector<EvalItem> retain;
  for (std::size_t i = 0; i < o.retain_items; ++i) {
    retain.push_back({join_tokens(words.take(o.tokens_per_item)), "OK", GoldLabel::Retain});
  }
  StagePlan plan;
  std::vector<EvalItem> paraphrases, near;
  for (std::size_t s = 0; s < o.stages; ++s) {
    Stage stage;
    for (std::size_t i = 0; i < o.forget_per_stage; ++i) {
      const auto base = words.take(o.tokens_per_item);
      stage.forget.push_back(join_tokens(base));
      paraphrases.push_back(
          {join_tokens(planted_variant(base, o.paraphrase_keep, words)), "", GoldLabel::Forget});
      near.push_back(
          {join_tokens(planted_variant(base, o.near_keep, words)), "OK", GoldLabel::Retain});
    }
    stage.eval_sets = {{"forget", paraphrases}, {"near_utility", near}, {"retain", retain}};
    plan.stages.push_back(std::move(stage));
  }
  return plan;
}

}  // namespace curate::eval
