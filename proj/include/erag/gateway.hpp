#pragma once
// Uniform access to language-model and embedding capabilities. A Gateway
// wraps one Backend per role with response caching, bounded in-flight
// concurrency, retry-with-backoff for transient provider failures, and
// format enforcement for structured (navigate-mode) generations.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "erag/error.hpp"

namespace erag {

struct SummaryRequest {
    std::vector<std::string> child_summaries;  // nonempty, each nonempty
    int level = 1;
    int budget = 65536;  // max output tokens; output is truncated, never rejected

    SummaryRequest(std::vector<std::string> children, int level_, int budget_ = 65536);
};

struct SelectionCandidate {
    std::string id;
    std::string description;
};

struct SelectionRequest {
    std::string query;
    std::vector<SelectionCandidate> candidates;  // nonempty, unique ids
    bool allow_none = false;

    SelectionRequest(std::string query_, std::vector<SelectionCandidate> candidates_,
                     bool allow_none_ = false);
};

// A chain rendering plus the leaf it bottoms out at, the unit of generation
// context. Baselines pass degenerate single-line chains through the same type.
struct ChainContext {
    std::string leaf_id;
    std::string rendering;
};

enum class GenerationMode { navigate, explain };

struct GenerationRequest {
    std::string query;
    std::vector<ChainContext> chains;  // nonempty
    GenerationMode mode = GenerationMode::navigate;

    GenerationRequest(std::string query_, std::vector<ChainContext> chains_, GenerationMode mode_);
};

struct EmbeddingRequest {
    std::string text;  // nonempty

    explicit EmbeddingRequest(std::string text_);
};

// Parsed navigate-mode generation output.
struct NavigationChoice {
    std::string waypoint;
    std::string reasoning;
};

// Attempts to parse a navigate-mode response: a JSON object with string
// fields "waypoint" and "reasoning".
std::optional<NavigationChoice> parse_navigation_choice(std::string_view text);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual std::string summarize(const SummaryRequest& req) = 0;
    virtual std::optional<std::string> select(const SelectionRequest& req) = 0;
    // corrective_hint is nonempty on the retry after a malformed response.
    virtual std::string generate(const GenerationRequest& req, std::string_view corrective_hint) = 0;
    virtual std::vector<double> embed(const EmbeddingRequest& req) = 0;
};

// Deterministic offline backend. All outputs are pure functions of the
// request: summaries are order-preserving deduplicated joins of child
// phrases, selection scores are distinct-content-token overlap counts,
// and embeddings hash a bag of content tokens into a fixed dimension.
class MockBackend : public Backend {
public:
    explicit MockBackend(int embedding_dim = 256) : dim_(embedding_dim) {}

    std::string name() const override { return "mock"; }
    std::string summarize(const SummaryRequest& req) override;
    std::optional<std::string> select(const SelectionRequest& req) override;
    std::string generate(const GenerationRequest& req, std::string_view corrective_hint) override;
    std::vector<double> embed(const EmbeddingRequest& req) override;

    int embedding_dim() const { return dim_; }

private:
    int dim_;
};

// Thread-safe request->response store keyed by the canonical request string.
// Persists as an append-only JSONL log; save_file() writes the compacted,
// key-sorted form.
class ResponseCache {
public:
    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    std::size_t size() const;

    void load_file(const std::string& path);        // merges, last write wins
    void save_file(const std::string& path) const;  // compacted canonical form
    void attach_append_log(const std::string& path);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
    std::string append_path_;
};

struct GatewayConfig {
    bool cache_enabled = true;
    int max_in_flight = 8;
    int provider_attempts = 3;  // total attempts for retryable provider errors
    int backoff_base_ms = 200;
    double backoff_jitter = 0.5;  // fraction of the delay added as jitter
    std::uint64_t jitter_seed = 0;
};

struct GatewayStats {
    long summarize_requests = 0, summarize_provider_calls = 0;
    long select_requests = 0, select_provider_calls = 0;
    long generate_requests = 0, generate_provider_calls = 0;
    long embed_requests = 0, embed_provider_calls = 0;
};

struct BackendSet {
    std::shared_ptr<Backend> summarizer;
    std::shared_ptr<Backend> selector;
    std::shared_ptr<Backend> generator;
    std::shared_ptr<Backend> embedder;

    static BackendSet all(std::shared_ptr<Backend> backend) {
        return BackendSet{backend, backend, backend, backend};
    }
};

// Interface consumed by summarize_forest; Gateway is the production impl.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string summarize(const SummaryRequest& req) = 0;
};

class Gateway : public Summarizer {
public:
    explicit Gateway(BackendSet backends, GatewayConfig config = {},
                     std::shared_ptr<ResponseCache> cache = nullptr);

    std::string summarize(const SummaryRequest& req) override;

    // Never returns an id outside req.candidates; nullopt only when
    // req.allow_none and the backend declines every candidate.
    std::optional<std::string> select(const SelectionRequest& req);

    // navigate mode guarantees a parseable waypoint/reasoning block whose
    // waypoint is one of the request chains' leaves; one corrective retry,
    // then MalformedResponse.
    std::string generate(const GenerationRequest& req);

    // Unit-norm (1 +- 1e-9) vector, deterministic for identical text.
    std::vector<double> embed(const EmbeddingRequest& req);

    GatewayStats stats() const;
    std::shared_ptr<ResponseCache> cache() const { return cache_; }

private:
    std::string cached_call(const std::string& key,
                            const std::function<std::string()>& call);
    void backoff_sleep(int attempt);
    std::string call_with_retries(const std::function<std::string()>& call);

    BackendSet backends_;
    GatewayConfig config_;
    std::shared_ptr<ResponseCache> cache_;

    mutable std::mutex rng_mutex_;
    std::mt19937_64 rng_;

    std::atomic<int> in_flight_{0};
    std::mutex slot_mutex_;
    std::condition_variable slot_cv_;

    mutable std::mutex stats_mutex_;
    GatewayStats stats_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace erag
