// curate: command-line entry point for the forget-request gateway.
//
//   curate datagen  --seeds seeds.jsonl --out pairs.jsonl
//   curate train    --data pairs.jsonl --out head.cur8
//   curate serve    --config service.json --port 8080
//   curate forget   --text "..."            (HTTP client of a running serve)
//   curate query    --prompt "..."
//   curate stats
//   curate threshold --delta 0.9
//   curate compress --store store.cur8 --mode compressed
//   curate eval     --plan plan.json
//   curate sweep    --plan plan.json --grid 0.01:0.99:0.01
//
// Exit codes: 0 success, 1 domain or transport error, 2 usage error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "curate/config.hpp"
#include "curate/datagen.hpp"
#include "curate/embedder.hpp"
#include "curate/eval.hpp"
#include "curate/gate.hpp"
#include "curate/gateway.hpp"
#include "curate/http.hpp"
#include "curate/store_io.hpp"
#include "curate/trainer.hpp"
#include "curate/upstream.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

bool g_json = false;

void emit(const json& j, const std::string& human) {
  if (g_json) {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << human;
  }
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  curate::io::write_file_atomic(
      path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                          text.size()));
}

// Embedder options shared by the offline subcommands.
struct EmbedderFlags {
  int dim = 256;
  std::string url;
  std::string head;

  void add(CLI::App* cmd) {
    cmd->add_option("--dim", dim, "Embedding dimension of the base embedder")->check(CLI::PositiveNumber);
    cmd->add_option("--embedder-url", url, "Embedding provider URL (default: in-process stub)");
    cmd->add_option("--head", head, "Trained projection head (.cur8) applied after the base embedder");
  }

  std::shared_ptr<const curate::Embedder> make() const {
    curate::ServiceConfig c;
    c.embedder_dim = dim;
    c.embedder_url = url;
    c.head_path = head;
    return curate::make_embedder(c);
  }
};

// --- HTTP client helpers ----------------------------------------------------

json call_gateway(const std::string& base, const std::string& method, const std::string& path,
                  const json& body = json::object()) {
  auto url = curate::http::parse_url(base);
  url.path = path;
  const auto timeout = std::chrono::milliseconds(60000);
  const auto res = method == "GET" ? curate::http::get_json(url, timeout)
                                   : curate::http::post_json(url, body, timeout);
  if (res.status == curate::http::CallStatus::HttpError) {
    const std::string msg = res.body.value("message", res.detail);
    throw curate::Error(curate::ErrorCode::UpstreamFailure,
                        "gateway answered " + std::to_string(res.http_status) + ": " + msg);
  }
  if (res.status != curate::http::CallStatus::Ok) {
    throw curate::Error(curate::ErrorCode::UpstreamFailure,
                        "cannot reach gateway at " + base + ": " + res.detail);
  }
  return res.body;
}

// --- subcommands --------------------------------------------------------------

struct DatagenArgs {
  std::string seeds;
  std::string out;
  std::string templates;
  std::string surrogate_url;
  std::string near_utility_out;
  std::size_t negatives = 0;
  bool no_type3 = false;
  double declarative_p = 0.3;
  std::uint64_t seed = 0;
  int retries = 3;
  std::size_t concurrency = 4;
};

int run_datagen(const DatagenArgs& a) {
  const auto seeds = curate::io::load_seeds(a.seeds);
  const auto templates = a.templates.empty()
                             ? curate::TemplateSet{}
                             : curate::TemplateSet::load(a.templates, a.declarative_p);
  std::unique_ptr<curate::SurrogateClient> surrogate;
  if (a.surrogate_url.empty()) {
    surrogate = std::make_unique<curate::MockSurrogate>(
        [](const std::string& prompt, std::size_t) { return curate::rule_based_completion(prompt); });
  } else {
    surrogate = std::make_unique<curate::HttpSurrogateClient>(a.surrogate_url);
  }
  curate::GenerationOptions opts;
  opts.retry_limit = a.retries;
  opts.max_concurrency = a.concurrency;
  opts.rng_seed = a.seed;
  auto log = [](const std::string& line) { std::cerr << line << '\n'; };

  const auto report = curate::generate_triples(seeds, *surrogate, templates, opts, log);
  auto dataset = curate::assemble_dataset(report.triples, !a.no_type3);
  if (a.negatives > 0) {
    std::mt19937_64 rng(a.seed);
    const auto neg = curate::generate_random_negatives(seeds, a.negatives, rng);
    dataset.insert(dataset.end(), neg.begin(), neg.end());
  }
  curate::io::save_dataset(a.out, dataset);

  std::size_t near_count = 0;
  if (!a.near_utility_out.empty()) {
    std::vector<std::string> questions;
    for (const auto& s : seeds) questions.push_back(s.text);
    const auto near =
        curate::generate_near_utility(questions, *surrogate, templates.near_utility, opts, log);
    std::string text;
    for (const auto& q : near) text += json{{"question", q}}.dump() + "\n";
    write_text(a.near_utility_out, text);
    near_count = near.size();
  }

  const json j{{"seeds", seeds.size()}, {"triples", report.triples.size()},
               {"skipped", report.skipped}, {"retries", report.retries},
               {"pairs", dataset.size()}, {"near_utility", near_count}, {"out", a.out}};
  emit(j, "seeds      " + std::to_string(seeds.size()) + "\ntriples    " +
              std::to_string(report.triples.size()) + "\nskipped    " +
              std::to_string(report.skipped) + "\nretries    " + std::to_string(report.retries) +
              "\npairs      " + std::to_string(dataset.size()) + "\nwritten to " + a.out + "\n");
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string out;
  EmbedderFlags embedder;
  curate::TrainConfig config;
  bool no_shuffle = false;
  bool lenient = false;
};

int run_train(TrainArgs a) {
  const auto loaded = curate::io::load_dataset(a.data, !a.lenient);
  for (const auto& e : loaded.skipped) {
    std::cerr << a.data << ": skipped line " << e.line << ": " << e.message << '\n';
  }
  a.config.shuffle = !a.no_shuffle;
  const auto base = a.embedder.make();
  const auto result = curate::train(loaded.dataset, *base, a.config);
  curate::io::save_head(a.out, result.head,
                        {{"margin", a.config.margin}, {"learning_rate", a.config.learning_rate},
                         {"epochs", a.config.epochs}, {"pairs", loaded.dataset.size()}});
  const json j{{"pairs", loaded.dataset.size()}, {"steps", result.step_losses.size()},
               {"initial_loss", result.initial_loss}, {"final_loss", result.final_loss},
               {"out_dim", result.head.out_dim()}, {"in_dim", result.head.in_dim()},
               {"out", a.out}};
  emit(j, "pairs        " + std::to_string(loaded.dataset.size()) + "\nsteps        " +
              std::to_string(result.step_losses.size()) + "\ninitial loss " +
              fmt(result.initial_loss, 6) + "\nfinal loss   " + fmt(result.final_loss, 6) +
              "\nhead         " + std::to_string(result.head.out_dim()) + "x" +
              std::to_string(result.head.in_dim()) + " -> " + a.out + "\n");
  return kOk;
}

struct ServeArgs {
  std::string config_file;
  std::map<std::string, std::string> flags;
  std::string port_file;
};

int run_serve(const ServeArgs& a) {
  const auto config = curate::load_config(
      a.config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(a.config_file),
      curate::environment_overrides(), a.flags);

  // Handle SIGINT/SIGTERM synchronously: block them before any thread starts.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto service = curate::make_service(config);
  curate::GatewayServer server(service.gateway, config.worker_threads, config.max_in_flight);
  const int port = server.start(config.host, config.port);
  if (!a.port_file.empty()) write_text(a.port_file, std::to_string(port) + "\n");
  std::cerr << "listening on " << config.host << ':' << port << " (store "
            << service.gateway->store().count() << " records, delta " << config.delta << ")\n";

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  if (service.persister) {
    service.persister->request();
    service.persister->flush();
    if (const auto err = service.persister->last_error()) {
      std::cerr << "error: store was not saved: " << *err << '\n';
      return kDomainError;
    }
  }
  return kOk;
}

int run_forget(const std::string& url, const std::string& text) {
  const auto r = call_gateway(url, "POST", "/v1/forget", {{"text", text}});
  emit(r, "id         " + r.value("id", std::string()) + "\nlatency_ms " +
              fmt(r.value("latency_ms", 0.0), 3) + "\n");
  return kOk;
}

int run_query(const std::string& url, const std::string& prompt) {
  const auto r = call_gateway(url, "POST", "/v1/query", {{"prompt", prompt}});
  const auto s_max = r["s_max"].is_null() ? std::string("none") : fmt(r["s_max"].get<double>());
  const auto matched = r["matched_id"].is_null() ? std::string("-") : r["matched_id"].get<std::string>();
  emit(r, "action     " + r.value("action", std::string()) + "\ns_max      " + s_max +
              "\nmatched_id " + matched + "\nresponse   " + r.value("response", std::string()) +
              "\nlatency_ms " + fmt(r.value("latency_ms", 0.0), 3) + "\n");
  return kOk;
}

int run_stats(const std::string& url) {
  const auto r = call_gateway(url, "GET", "/v1/stats");
  std::ostringstream out;
  out << "count          " << r["count"] << "\nstore_mode     " << r["store_mode"].get<std::string>()
      << "\ndim            " << r["dim"] << "\ndelta          " << r["delta"]
      << "\nuptime_s       " << fmt(r["uptime_s"].get<double>(), 1) << "\nqueries        "
      << r["queries"] << "\nrefusals       " << r["refusals"] << "\nupstream_calls "
      << r["upstream_calls"] << '\n';
  for (const char* ep : {"forget", "query"}) {
    const auto& l = r["latency_ms"][ep];
    out << std::left << std::setw(15) << (std::string(ep) + " ms") << "p50 " << fmt(l["p50"].get<double>(), 3)
        << "  p95 " << fmt(l["p95"].get<double>(), 3) << "  p99 " << fmt(l["p99"].get<double>(), 3)
        << "  (n=" << l["n"] << ")\n";
  }
  emit(r, out.str());
  return kOk;
}

int run_threshold(const std::string& url, double delta) {
  const auto r = call_gateway(url, "POST", "/v1/threshold", {{"delta", delta}});
  emit(r, "delta " + fmt(r["previous"].get<double>(), 2) + " -> " +
              fmt(r["current"].get<double>(), 2) + "\n");
  return kOk;
}

struct CompressArgs {
  std::string store;
  std::string out;
  std::string url = "http://127.0.0.1:8080";
  std::string mode = "compressed";
  std::size_t pca_dim = 32;
  double keep_ratio = 0.1;
  std::uint64_t seed = 0;
};

int run_compress(const CompressArgs& a) {
  json r;
  if (!a.store.empty()) {
    auto store = curate::io::load_store(a.store);
    curate::StoreMode mode;
    mode.variant = curate::parse_store_variant(a.mode);
    mode.pca_dim = a.pca_dim;
    mode.keep_ratio = a.keep_ratio;
    mode.rng_seed = a.seed;
    const auto rep = store->compress(mode);
    const std::string out = a.out.empty() ? a.store : a.out;
    curate::io::save_store(out, *store);
    r = {{"mode", curate::to_string(rep.variant)}, {"records", rep.records},
         {"stored_rows", rep.stored_rows}, {"dim", rep.dim}, {"k", rep.k},
         {"exact_bytes", rep.exact_bytes}, {"compressed_bytes", rep.compressed_bytes},
         {"ratio", rep.ratio}, {"out", out}};
  } else {
    r = call_gateway(a.url, "POST", "/v1/compress",
                     {{"mode", a.mode}, {"pca_dim", a.pca_dim}, {"keep_ratio", a.keep_ratio},
                      {"rng_seed", a.seed}});
  }
  emit(r, "mode        " + r["mode"].get<std::string>() + "\nrecords     " + r["records"].dump() +
              "\nstored_rows " + r["stored_rows"].dump() + "\nbytes       " +
              r["exact_bytes"].dump() + " -> " + r["compressed_bytes"].dump() + "\nratio       " +
              fmt(r["ratio"].get<double>(), 2) + "x\n");
  return kOk;
}

struct EvalArgs {
  std::string plan;
  EmbedderFlags embedder;
  double delta = 0.8;
  std::string refusals;
  std::string mock_response = "OK";
  std::uint64_t seed = 0;
  std::string csv;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const auto plan = curate::eval::load_plan(a.plan);
  auto refusals = a.refusals.empty() ? curate::RefusalSet::defaults()
                                     : curate::io::load_refusals(a.refusals);
  auto upstream = std::make_shared<curate::MockUpstream>(a.mock_response);
  curate::Gateway gateway(a.embedder.make(), upstream, std::move(refusals),
                          curate::GateConfig{a.delta, a.seed});
  const auto report = curate::eval::run_stages(plan, gateway);
  const auto j = curate::eval::to_json(report);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, curate::eval::to_csv(report));

  std::ostringstream out;
  out << "delta " << fmt(a.delta, 2) << "\n"
      << std::left << std::setw(7) << "stage" << std::setw(16) << "set" << std::setw(7) << "n"
      << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(8) << "f1"
      << std::setw(9) << "answer" << "refusal_score\n";
  for (const auto& st : report.stages) {
    for (const auto& s : st.sets) {
      out << std::setw(7) << st.stage << std::setw(16) << s.name << std::setw(7) << s.count
          << std::setw(11) << fmt(s.classification.precision) << std::setw(9)
          << fmt(s.classification.recall) << std::setw(8) << fmt(s.classification.f1)
          << std::setw(9) << fmt(s.answer_rate) << fmt(s.refusal_score_mean) << '\n';
    }
  }
  out << "upstream calls " << upstream->calls() << '\n';
  json summary = j;
  summary["upstream_calls"] = upstream->calls();
  emit(summary, out.str());
  return kOk;
}

struct SweepArgs {
  std::string plan;
  EmbedderFlags embedder;
  std::string grid = "0.01:0.99:0.01";
  std::string out;
};

int run_sweep(const SweepArgs& a) {
  const auto plan = curate::eval::load_plan(a.plan);
  const auto grid = curate::eval::parse_grid(a.grid);
  const auto embedder = a.embedder.make();
  curate::ForgetStore store;
  const auto scored = curate::eval::score_plan(plan, *embedder, store);
  const auto rows = curate::eval::threshold_sweep(scored, grid);
  const auto tsv = curate::eval::sweep_tsv(rows);
  if (!a.out.empty()) write_text(a.out, tsv);
  emit({{"queries", scored.size()}, {"best_delta", curate::eval::best_threshold(rows)},
        {"rows", curate::eval::to_json(rows)}},
       tsv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forget-request gateway: data generation, training, serving and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", g_json, "Print machine-readable JSON instead of tables");
  std::string url = "http://127.0.0.1:8080";
  auto add_url = [&](CLI::App* cmd) {
    cmd->add_option("--url", url, "Gateway base URL")->capture_default_str();
  };

  DatagenArgs datagen;
  auto* c_datagen = app.add_subcommand("datagen", "Generate contrastive training pairs from seed questions");
  c_datagen->add_option("--seeds", datagen.seeds, "Seed questions (JSONL {id, question, answer} or one per line)")
      ->required()->check(CLI::ExistingFile);
  c_datagen->add_option("--out", datagen.out, "Output dataset (JSONL)")->required();
  c_datagen->add_option("--templates", datagen.templates, "Directory with tau1.txt, tau2.txt, near_utility.txt");
  c_datagen->add_option("--surrogate-url", datagen.surrogate_url, "Surrogate LLM URL (default: offline rule-based mock)");
  c_datagen->add_option("--near-utility-out", datagen.near_utility_out, "Also write near-utility questions here");
  c_datagen->add_option("--negatives", datagen.negatives, "Extra random cross-seed negative pairs");
  c_datagen->add_flag("--no-type3", datagen.no_type3, "Omit (paraphrase, contrast-of-paraphrase) pairs");
  c_datagen->add_option("--declarative-p", datagen.declarative_p, "Probability of the declarative-form instruction")
      ->check(CLI::Range(0.0, 1.0));
  c_datagen->add_option("--seed", datagen.seed, "RNG seed");
  c_datagen->add_option("--retries", datagen.retries, "Retries per surrogate call on unparseable replies")
      ->check(CLI::NonNegativeNumber);
  c_datagen->add_option("--concurrency", datagen.concurrency, "Concurrent surrogate calls")->check(CLI::PositiveNumber);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a projection head with the contrastive loss");
  c_train->add_option("--data", train.data, "Training pairs (JSONL)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Output head file (.cur8)")->required();
  train.embedder.add(c_train);
  c_train->add_option("--margin", train.config.margin, "Contrastive margin")->capture_default_str();
  c_train->add_option("--lr", train.config.learning_rate, "Learning rate")->capture_default_str();
  c_train->add_option("--epochs", train.config.epochs, "Epochs")->capture_default_str();
  c_train->add_option("--batch", train.config.batch_size, "Batch size")->capture_default_str();
  c_train->add_option("--warmup", train.config.warmup_steps, "Linear warmup steps")->capture_default_str();
  c_train->add_option("--out-dim", train.config.out_dim, "Head output dim (0: same as input, identity init)");
  c_train->add_option("--seed", train.config.rng_seed, "RNG seed");
  c_train->add_flag("--no-shuffle", train.no_shuffle, "Keep dataset order");
  c_train->add_flag("--lenient", train.lenient, "Skip malformed dataset lines instead of failing");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the gateway HTTP service until SIGINT/SIGTERM");
  c_serve->add_option("--config", serve.config_file, "Config file (JSON object of settings)");
  c_serve->add_option("--port-file", serve.port_file, "Write the bound port to this file");
  const std::vector<std::pair<std::string, std::string>> serve_flags = {
      {"host", "Listen address"},
      {"port", "Listen port (0 picks a free one)"},
      {"delta", "Refusal threshold in [0, 1]"},
      {"rng_seed", "Seed for refusal sampling"},
      {"embedder_url", "Embedding provider URL (default: stub)"},
      {"embedder_dim", "Embedding dimension"},
      {"head_path", "Trained projection head file"},
      {"upstream_url", "Upstream model URL (default: canned mock)"},
      {"upstream_timeout_ms", "Upstream timeout"},
      {"max_tokens", "max_tokens sent upstream"},
      {"mock_response", "Canned mock upstream reply"},
      {"refusal_file", "Refusal phrases file"},
      {"store_path", "Store file, loaded at start and saved on change"},
      {"store_mode", "exact, compressed or clustered"},
      {"pca_dim", "PCA dimension for compressed modes"},
      {"keep_ratio", "Fraction of rows kept in clustered mode"},
      {"store_capacity", "Maximum number of forget records"},
      {"worker_threads", "HTTP worker threads"},
      {"max_in_flight", "Requests in flight before 503"},
      {"persist_interval_ms", "Minimum time between store writes"},
  };
  for (const auto& [key, help] : serve_flags) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    c_serve->add_option_function<std::string>(
        flag, [&serve, key = key](const std::string& v) { serve.flags[key] = v; }, help);
  }

  std::string forget_text;
  auto* c_forget = app.add_subcommand("forget", "Send a forget request to a running gateway");
  c_forget->add_option("--text", forget_text, "Text to forget")->required();
  add_url(c_forget);

  std::string prompt;
  auto* c_query = app.add_subcommand("query", "Send a query to a running gateway");
  c_query->add_option("--prompt", prompt, "Prompt")->required();
  add_url(c_query);

  auto* c_stats = app.add_subcommand("stats", "Show gateway counters and latency quantiles");
  add_url(c_stats);

  double delta = 0.8;
  auto* c_threshold = app.add_subcommand("threshold", "Change the refusal threshold of a running gateway");
  c_threshold->add_option("--delta", delta, "New threshold")->required();
  add_url(c_threshold);

  CompressArgs compress;
  auto* c_compress = app.add_subcommand("compress", "Compress a store file, or a running gateway's store");
  auto* store_opt = c_compress->add_option("--store", compress.store, "Store file to compress offline")
                        ->check(CLI::ExistingFile);
  c_compress->add_option("--out", compress.out, "Output file (default: overwrite --store)")->needs(store_opt);
  c_compress->add_option("--url", compress.url, "Gateway base URL when --store is not given")
      ->capture_default_str();
  c_compress->add_option("--mode", compress.mode, "compressed or clustered")
      ->check(CLI::IsMember({"compressed", "clustered"}))->capture_default_str();
  c_compress->add_option("--pca-dim", compress.pca_dim, "PCA dimension")->capture_default_str();
  c_compress->add_option("--keep-ratio", compress.keep_ratio, "Fraction of rows kept (clustered)")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_compress->add_option("--seed", compress.seed, "k-means seed");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Run a stage plan through an in-process gateway with a mock upstream");
  c_eval->add_option("--plan", ev.plan, "Stage plan (JSON)")->required()->check(CLI::ExistingFile);
  ev.embedder.add(c_eval);
  c_eval->add_option("--delta", ev.delta, "Refusal threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_eval->add_option("--refusals", ev.refusals, "Refusal phrases file");
  c_eval->add_option("--mock-response", ev.mock_response, "Canned upstream reply");
  c_eval->add_option("--seed", ev.seed, "Refusal sampling seed");
  c_eval->add_option("--csv", ev.csv, "Also write flat CSV (stage,set,metric,value)");
  c_eval->add_option("--out", ev.out, "Also write the JSON report");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Threshold sweep over a stage plan (TSV: delta precision recall f1 refusals)");
  c_sweep->add_option("--plan", sweep.plan, "Stage plan (JSON)")->required()->check(CLI::ExistingFile);
  sweep.embedder.add(c_sweep);
  c_sweep->add_option("--grid", sweep.grid, "lo:hi:step")->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "Also write the TSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*c_datagen) return run_datagen(datagen);
    if (*c_train) return run_train(train);
    if (*c_serve) return run_serve(serve);
    if (*c_forget) return run_forget(url, forget_text);
    if (*c_query) return run_query(url, prompt);
    if (*c_stats) return run_stats(url);
    if (*c_threshold) return run_threshold(url, delta);
    if (*c_compress) return run_compress(compress);
    if (*c_eval) return run_eval(ev);
    if (*c_sweep) return run_sweep(sweep);
  } catch (const curate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == curate::ErrorCode::ValidationError) return kUsageError;
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kUsageError;
}
