#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "curate/error.hpp"
#include "curate/http.hpp"
#include "curate/text.hpp"
#include "curate/trainer.hpp"

namespace curate {

struct SeedQuestion {
  std::string id;
  std::string text;
  std::optional<std::string> answer;
};

struct AugmentedTriple {
  std::string seed_id;
  std::string q_s;   // seed question
  std::string q_p;   // paraphrase of q_s
  std::string q_c;   // contrastive variant of q_s
  std::string q_pc;  // contrastive variant of q_p

  friend bool operator==(const AugmentedTriple&, const AugmentedTriple&) = default;
};

inline bool is_valid(const AugmentedTriple& t) {
  const std::string* texts[] = {&t.q_s, &t.q_p, &t.q_c, &t.q_pc};
  for (std::size_t i = 0; i < 4; ++i) {
    if (texts[i]->empty()) return false;
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (*texts[i] == *texts[j]) return false;
    }
  }
  return true;
}

enum class TemplateKind { Tau1, Tau2, NearUtility };

inline constexpr std::string_view kQuestionPlaceholder = "{question}";

// Appended with probability declarative_probability so that the surrogate
// also produces statement-form variants.
inline constexpr std::string_view kDeclarativeInstruction =
    "\nWrite every generated sentence as a declarative statement instead of a question.";

struct PromptTemplate {
  TemplateKind kind = TemplateKind::Tau1;
  std::string text;
  double declarative_probability = 0.3;

  void validate() const {
    std::size_t count = 0;
    for (auto pos = text.find(kQuestionPlaceholder); pos != std::string::npos;
         pos = text.find(kQuestionPlaceholder, pos + kQuestionPlaceholder.size())) {
      ++count;
    }
    if (count != 1) {
      throw Error(ErrorCode::MalformedTemplate,
                  "template must contain exactly one {question} placeholder, found " +
                      std::to_string(count));
    }
    if (!(declarative_probability >= 0.0 && declarative_probability <= 1.0)) {
      throw Error(ErrorCode::MalformedTemplate, "declarative probability must be in [0, 1]");
    }
  }
};

inline std::string_view template_file_name(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Tau1: return "tau1.txt";
    case TemplateKind::Tau2: return "tau2.txt";
    case TemplateKind::NearUtility: return "near_utility.txt";
  }
  return "";
}

inline std::string default_template_text(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Tau1:
      return "You rewrite questions for training a semantic similarity model.\n"
             "Given the question below, produce two new sentences.\n"
             "1. A paraphrase that asks for exactly the same information with different wording.\n"
             "2. A contrastive variant that keeps most of the words and structure but asks for\n"
             "   different information, so that it has a different answer.\n"
             "Reply with exactly two lines and nothing else:\n"
             "PARAPHRASE: <paraphrase>\n"
             "CONTRAST: <contrastive variant>\n"
             "Question: {question}";
    case TemplateKind::Tau2:
      return "Given the question below, write a contrastive variant that keeps most of the\n"
             "words and sentence structure but changes the meaning so that the answer differs.\n"
             "Reply with exactly one line and nothing else:\n"
             "CONTRAST: <contrastive variant>\n"
             "Question: {question}";
    case TemplateKind::NearUtility:
      return "Write a new question that is lexically and structurally similar to the question\n"
             "below but is about a different, closely related topic, so that its answer differs.\n"
             "If the question is about a real person, do not state anything false about that\n"
             "person; ask about a different attribute or a different subject instead.\n"
             "If the question is multiple choice, keep the multiple-choice format and options\n"
             "layout, one of which must be selected.\n"
             "Reply with exactly one line and nothing else:\n"
             "VARIANT: <new question>\n"
             "Question: {question}";
  }
  return {};
}

struct TemplateSet {
  PromptTemplate tau1{TemplateKind::Tau1, default_template_text(TemplateKind::Tau1)};
  PromptTemplate tau2{TemplateKind::Tau2, default_template_text(TemplateKind::Tau2)};
  PromptTemplate near_utility{TemplateKind::NearUtility,
                              default_template_text(TemplateKind::NearUtility), 0.0};

  // Files missing from the directory keep their built-in text.
  static TemplateSet load(const std::filesystem::path& dir, double declarative_probability) {
    TemplateSet set;
    set.tau1.declarative_probability = declarative_probability;
    set.tau2.declarative_probability = declarative_probability;
    for (auto* t : {&set.tau1, &set.tau2, &set.near_utility}) {
      const auto path = dir / template_file_name(t->kind);
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(ErrorCode::IoError, "cannot read template " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      t->text = ss.str();
      while (!t->text.empty() && (t->text.back() == '\n' || t->text.back() == '\r')) {
        t->text.pop_back();
      }
      t->validate();
    }
    return set;
  }
};

inline std::string render_prompt(const PromptTemplate& tmpl, std::string_view question,
                                 std::mt19937_64& rng) {
  tmpl.validate();
  if (question.empty()) throw Error(ErrorCode::InvalidArgument, "question must be non-empty");
  std::string out = tmpl.text;
  out.replace(out.find(kQuestionPlaceholder), kQuestionPlaceholder.size(), question);
  std::bernoulli_distribution declarative(tmpl.declarative_probability);
  if (declarative(rng)) out += kDeclarativeInstruction;
  return out;
}

// Text-completion service used to generate training and evaluation variants.
//   POST url {"prompt": str, "max_tokens": int} -> {"text": str}
class SurrogateClient {
 public:
  virtual ~SurrogateClient() = default;
  // Throws Error(SurrogateUnavailable) when the service cannot be reached.
  virtual std::string complete(const std::string& prompt, int max_tokens) = 0;
};

class HttpSurrogateClient final : public SurrogateClient {
 public:
  explicit HttpSurrogateClient(const std::string& url,
                               std::chrono::milliseconds timeout = std::chrono::seconds(60))
      : url_(http::parse_url(url)), timeout_(timeout) {}

  std::string complete(const std::string& prompt, int max_tokens) override {
    const auto res = http::post_json(url_, {{"prompt", prompt}, {"max_tokens", max_tokens}},
                                     timeout_);
    if (res.status != http::CallStatus::Ok) {
      throw Error(ErrorCode::SurrogateUnavailable, res.detail);
    }
    if (!res.body.contains("text") || !res.body["text"].is_string()) {
      // A reply without text is treated like an unparseable generation.
      return {};
    }
    return res.body["text"].get<std::string>();
  }

 private:
  http::Url url_;
  std::chrono::milliseconds timeout_;
};

// In-process surrogate driven by a callback; counts calls. Thread-safe if the
// callback is.
class MockSurrogate final : public SurrogateClient {
 public:
  using Responder = std::function<std::string(const std::string& prompt, std::size_t call)>;

  explicit MockSurrogate(Responder responder) : responder_(std::move(responder)) {}

  std::string complete(const std::string& prompt, int /*max_tokens*/) override {
    const std::size_t call = calls_.fetch_add(1);
    return responder_(prompt, call);
  }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

// Returns the text after the first line starting with `tag` (case-insensitive),
// or nullopt when absent or empty.
inline std::optional<std::string> find_tagged_line(std::string_view response,
                                                   std::string_view tag) {
  std::istringstream in{std::string(response)};
  const std::string tag_lower = to_lower(tag);
  for (std::string line; std::getline(in, line);) {
    const std::string t = trim(line);
    if (t.size() < tag.size()) continue;
    if (to_lower(std::string_view(t).substr(0, tag.size())) != tag_lower) continue;
    std::string rest = trim(std::string_view(t).substr(tag.size()));
    if (rest.empty()) return std::nullopt;
    return rest;
  }
  return std::nullopt;
}

// Rule-based offline surrogate for demos and tests. It reads the "Question:"
// line of the prompt and answers in the tagged-line format.
inline std::string rule_based_completion(const std::string& prompt) {
  auto question = find_tagged_line(prompt, "Question:");
  if (!question) return "";
  auto q = *question;
  if (const auto pos = q.find(kDeclarativeInstruction); pos != std::string::npos) q.resize(pos);
  const auto tokens = tokenize(q);
  std::string paraphrase = "Could you tell me " + q;
  std::string contrast;
  // Swap the last content word for a fixed alternative.
  if (!tokens.empty()) {
    std::string swapped;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) swapped += tokens[i] + " ";
    contrast = swapped + (tokens.back() == "history" ? "geography" : "history");
  } else {
    contrast = "history";
  }
  const bool tau1 = prompt.find("PARAPHRASE:") != std::string::npos;
  const bool near = prompt.find("VARIANT:") != std::string::npos;
  if (tau1) return "PARAPHRASE: " + paraphrase + "\nCONTRAST: " + contrast;
  if (near) return "VARIANT: " + contrast + " instead";
  return "CONTRAST: " + contrast + " today";
}

struct GenerationOptions {
  int retry_limit = 3;  // extra attempts after the first failed parse
  int max_tokens = 256;
  std::size_t max_concurrency = 4;
  std::uint64_t rng_seed = 0;
};

using LogSink = std::function<void(const std::string&)>;

struct TripleOutcome {
  AugmentedTriple triple;
  int retries = 0;
};

namespace detail {

template <typename Parse>
auto call_with_retries(SurrogateClient& surrogate, const std::string& prompt,
                       const GenerationOptions& options, int& retries, const LogSink& log,
                       const std::string& what, Parse parse) {
  for (int attempt = 0;; ++attempt) {
    const std::string reply = surrogate.complete(prompt, options.max_tokens);
    if (auto parsed = parse(reply)) return *parsed;
    if (attempt >= options.retry_limit) {
      throw Error(ErrorCode::UnparseableResponse,
                  what + ": no parseable reply after " + std::to_string(attempt + 1) +
                      " attempts");
    }
    ++retries;
    if (log) log(what + ": unparseable reply, retry " + std::to_string(retries));
  }
}

}  // namespace detail

// One tau1 call for (paraphrase, contrast) and one tau2 call for the
// contrast of the paraphrase.
inline TripleOutcome generate_triple(const SeedQuestion& seed, SurrogateClient& surrogate,
                                     const TemplateSet& templates,
                                     const GenerationOptions& options, std::mt19937_64& rng,
                                     const LogSink& log = {}) {
  if (seed.text.empty()) throw Error(ErrorCode::InvalidArgument, "seed question text is empty");
  TripleOutcome out;
  out.triple.seed_id = seed.id;
  out.triple.q_s = seed.text;

  const auto tau1_prompt = render_prompt(templates.tau1, seed.text, rng);
  auto [para, contrast] = detail::call_with_retries(
      surrogate, tau1_prompt, options, out.retries, log, "seed " + seed.id + " tau1",
      [&](const std::string& reply) -> std::optional<std::pair<std::string, std::string>> {
        auto p = find_tagged_line(reply, "PARAPHRASE:");
        auto c = find_tagged_line(reply, "CONTRAST:");
        if (!p || !c || *p == *c || *p == seed.text || *c == seed.text) return std::nullopt;
        return std::make_pair(*p, *c);
      });
  out.triple.q_p = para;
  out.triple.q_c = contrast;

  const auto tau2_prompt = render_prompt(templates.tau2, out.triple.q_p, rng);
  out.triple.q_pc = detail::call_with_retries(
      surrogate, tau2_prompt, options, out.retries, log, "seed " + seed.id + " tau2",
      [&](const std::string& reply) -> std::optional<std::string> {
        auto c = find_tagged_line(reply, "CONTRAST:");
        if (!c) return std::nullopt;
        AugmentedTriple candidate = out.triple;
        candidate.q_pc = *c;
        if (!is_valid(candidate)) return std::nullopt;
        return *c;
      });
  return out;
}

struct GenerationReport {
  std::vector<AugmentedTriple> triples;  // seed order, unparseable seeds dropped
  std::size_t skipped = 0;
  std::size_t retries = 0;
};

// Generates triples with at most options.max_concurrency surrogate calls in
// flight. Per-seed rngs derive from (rng_seed, seed index), so output does not
// depend on scheduling.
inline GenerationReport generate_triples(const std::vector<SeedQuestion>& seeds,
                                         SurrogateClient& surrogate,
                                         const TemplateSet& templates,
                                         const GenerationOptions& options,
                                         const LogSink& log = {}) {
  std::vector<std::optional<TripleOutcome>> results(seeds.size());
  std::mutex log_mutex;
  LogSink safe_log = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(line);
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
      std::mt19937_64 rng(options.rng_seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
      try {
        results[i] = generate_triple(seeds[i], surrogate, templates, options, rng, safe_log);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparseableResponse) throw;
        safe_log("skipping seed " + seeds[i].id + ": " + e.what());
      }
    }
  };
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(options.max_concurrency, seeds.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(seeds.size());
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  GenerationReport report;
  for (auto& r : results) {
    if (!r) {
      ++report.skipped;
      continue;
    }
    report.retries += static_cast<std::size_t>(r->retries);
    report.triples.push_back(std::move(r->triple));
  }
  return report;
}

// T* = {(q_s, q_p, 1), (q_s, q_c, 0), (q_p, q'_c, 0)} per triple.
inline TrainingDataset assemble_dataset(const std::vector<AugmentedTriple>& triples,
                                        bool include_type3 = true) {
  if (triples.empty()) throw Error(ErrorCode::InvalidArgument, "no triples to assemble");
  TrainingDataset out;
  out.reserve(triples.size() * (include_type3 ? 3 : 2));
  for (const auto& t : triples) {
    out.push_back({t.q_s, t.q_p, 1, 1, t.seed_id, {}});
    out.push_back({t.q_s, t.q_c, 0, 2, t.seed_id, {}});
    if (include_type3) out.push_back({t.q_p, t.q_pc, 0, 3, t.seed_id, {}});
  }
  return out;
}

// Negatives made by pairing questions of two different seeds.
inline TrainingDataset generate_random_negatives(const std::vector<SeedQuestion>& seeds,
                                                 std::size_t count, std::mt19937_64& rng) {
  if (seeds.size() < 2) {
    throw Error(ErrorCode::InsufficientSeeds, "random negatives need at least 2 seeds");
  }
  std::uniform_int_distribution<std::size_t> first(0, seeds.size() - 1);
  std::uniform_int_distribution<std::size_t> other(0, seeds.size() - 2);
  TrainingDataset out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = first(rng);
    std::size_t j = other(rng);
    if (j >= i) ++j;
    out.push_back({seeds[i].text, seeds[j].text, 0, 2, seeds[i].id, seeds[j].id});
  }
  return out;
}

// Near-utility evaluation questions, one per forget question that yields a
// parseable VARIANT line.
inline std::vector<std::string> generate_near_utility(const std::vector<std::string>& questions,
                                                      SurrogateClient& surrogate,
                                                      const PromptTemplate& tmpl,
                                                      const GenerationOptions& options,
                                                      const LogSink& log = {}) {
  std::vector<std::string> out;
  std::mt19937_64 rng(options.rng_seed);
  int retries = 0;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto prompt = render_prompt(tmpl, questions[i], rng);
    try {
      out.push_back(detail::call_with_retries(
          surrogate, prompt, options, retries, log, "near-utility " + std::to_string(i),
          [&](const std::string& reply) -> std::optional<std::string> {
            auto v = find_tagged_line(reply, "VARIANT:");
            if (!v || *v == questions[i]) return std::nullopt;
            return v;
          }));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableResponse) throw;
      if (log) log(std::string("skipping near-utility item: ") + e.what());
    }
  }
  return out;
}

}  // namespace curate
