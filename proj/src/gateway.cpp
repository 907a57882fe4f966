#include "erag/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "erag/text.hpp"
#include "json.hpp"

namespace erag {

namespace {

// RAII slot under the gateway's bounded in-flight limit.
class InFlightSlot {
public:
    InFlightSlot(std::atomic<int>& count, int limit, std::mutex& m, std::condition_variable& cv)
        : count_(count), mutex_(m), cv_(cv) {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return count_.load() < limit; });
        count_.fetch_add(1);
    }
    ~InFlightSlot() {
        count_.fetch_sub(1);
        cv_.notify_one();
    }

private:
    std::atomic<int>& count_;
    std::mutex& mutex_;
    std::condition_variable& cv_;
};

std::string canonical_summary_key(std::string_view backend, const SummaryRequest& req) {
    nlohmann::json j{{"op", "summarize"},
                     {"backend", std::string(backend)},
                     {"level", req.level},
                     {"budget", req.budget},
                     {"children", req.child_summaries}};
    return j.dump();
}

std::string canonical_select_key(std::string_view backend, const SelectionRequest& req) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : req.candidates) cands.push_back({{"id", c.id}, {"desc", c.description}});
    nlohmann::json j{{"op", "select"},
                     {"backend", std::string(backend)},
                     {"query", req.query},
                     {"allow_none", req.allow_none},
                     {"candidates", cands}};
    return j.dump();
}

std::string canonical_generate_key(std::string_view backend, const GenerationRequest& req) {
    nlohmann::json chains = nlohmann::json::array();
    for (const auto& c : req.chains) chains.push_back({{"leaf", c.leaf_id}, {"text", c.rendering}});
    nlohmann::json j{{"op", "generate"},
                     {"backend", std::string(backend)},
                     {"query", req.query},
                     {"mode", req.mode == GenerationMode::navigate ? "navigate" : "explain"},
                     {"chains", chains}};
    return j.dump();
}

std::string canonical_embed_key(std::string_view backend, const EmbeddingRequest& req) {
    nlohmann::json j{{"op", "embed"}, {"backend", std::string(backend)}, {"text", req.text}};
    return j.dump();
}

// Summary part of a chain rendering line ("level=.. pos=(..) id=..: <summary>").
std::string line_summary(const std::string& line) {
    auto pos = line.find(": ");
    return pos == std::string::npos ? line : line.substr(pos + 2);
}

int line_level(const std::string& line) {
    if (line.rfind("level=", 0) != 0) return -1;
    int value = 0;
    size_t i = 6;
    if (i >= line.size() || !std::isdigit(static_cast<unsigned char>(line[i]))) return -1;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        value = value * 10 + (line[i] - '0');
        ++i;
    }
    return value;
}

}  // namespace

SummaryRequest::SummaryRequest(std::vector<std::string> children, int level_, int budget_)
    : child_summaries(std::move(children)), level(level_), budget(budget_) {
    if (child_summaries.empty()) {
        throw Error(ErrorCode::InvariantViolation, "SummaryRequest requires child summaries");
    }
    for (const auto& c : child_summaries) {
        if (c.empty()) {
            throw Error(ErrorCode::InvariantViolation, "SummaryRequest child summary is empty");
        }
    }
    if (budget < 1) {
        throw Error(ErrorCode::InvariantViolation, "SummaryRequest budget must be positive");
    }
}

SelectionRequest::SelectionRequest(std::string query_, std::vector<SelectionCandidate> candidates_,
                                   bool allow_none_)
    : query(std::move(query_)), candidates(std::move(candidates_)), allow_none(allow_none_) {
    if (candidates.empty()) {
        throw Error(ErrorCode::InvariantViolation, "SelectionRequest requires candidates");
    }
    std::unordered_set<std::string> ids;
    for (const auto& c : candidates) {
        if (!ids.insert(c.id).second) {
            throw Error(ErrorCode::InvariantViolation,
                        "SelectionRequest has duplicate candidate id '" + c.id + "'");
        }
    }
}

GenerationRequest::GenerationRequest(std::string query_, std::vector<ChainContext> chains_,
                                     GenerationMode mode_)
    : query(std::move(query_)), chains(std::move(chains_)), mode(mode_) {
    if (chains.empty()) {
        throw Error(ErrorCode::InvariantViolation, "GenerationRequest requires chains");
    }
}

EmbeddingRequest::EmbeddingRequest(std::string text_) : text(std::move(text_)) {
    if (text.empty()) {
        throw Error(ErrorCode::InvariantViolation, "EmbeddingRequest requires nonempty text");
    }
}

std::optional<NavigationChoice> parse_navigation_choice(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("waypoint") || !j["waypoint"].is_string()) return std::nullopt;
    if (!j.contains("reasoning") || !j["reasoning"].is_string()) return std::nullopt;
    return NavigationChoice{j["waypoint"].get<std::string>(), j["reasoning"].get<std::string>()};
}

// --- MockBackend -----------------------------------------------------------

std::string MockBackend::summarize(const SummaryRequest& req) {
    // Order-preserving dedup of the "; "-separated phrases of all children.
    std::vector<std::string> phrases;
    std::unordered_set<std::string> seen;
    for (const auto& child : req.child_summaries) {
        for (auto& phrase : split(child, "; ")) {
            if (!phrase.empty() && seen.insert(phrase).second) phrases.push_back(phrase);
        }
    }
    return truncate_tokens(join(phrases, "; "), req.budget);
}

std::optional<std::string> MockBackend::select(const SelectionRequest& req) {
    int best_score = -1;
    std::string best_id;
    for (const auto& c : req.candidates) {
        int score = token_overlap(req.query, c.description);
        if (score > best_score) {
            best_score = score;
            best_id = c.id;
        }
    }
    if (best_score == 0 && req.allow_none) return std::nullopt;
    return best_id;
}

std::string MockBackend::generate(const GenerationRequest& req, std::string_view) {
    if (req.mode == GenerationMode::navigate) {
        // Best leaf-summary overlap with the query; ties keep request order.
        int best_score = -1;
        const ChainContext* best = nullptr;
        for (const auto& chain : req.chains) {
            auto lines = split(chain.rendering, "\n");
            int score = lines.empty() ? 0 : token_overlap(req.query, line_summary(lines.front()));
            if (score > best_score) {
                best_score = score;
                best = &chain;
            }
        }
        nlohmann::json out{
            {"waypoint", best->leaf_id},
            {"reasoning", "Leaf '" + best->leaf_id + "' has the strongest token overlap with the query among " +
                              std::to_string(req.chains.size()) + " retrieved chains."}};
        return out.dump();
    }

    // explain: distinct root summaries first, then distinct level-1 summaries.
    std::vector<std::string> roots;
    std::vector<std::string> mids;
    std::unordered_set<std::string> seen_roots, seen_mids;
    for (const auto& chain : req.chains) {
        auto lines = split(chain.rendering, "\n");
        if (lines.empty()) continue;
        std::string root = line_summary(lines.back());
        if (seen_roots.insert(root).second) roots.push_back(root);
        for (const auto& line : lines) {
            if (line_level(line) == 1) {
                std::string mid = line_summary(line);
                if (seen_mids.insert(mid).second) mids.push_back(mid);
            }
        }
    }
    std::string answer = join(roots, "; ");
    if (!mids.empty()) answer += ". Details: " + join(mids, "; ");
    return answer;
}

std::vector<double> MockBackend::embed(const EmbeddingRequest& req) {
    std::vector<std::string> tokens = content_tokens(req.text);
    if (tokens.empty()) tokens = tokenize(req.text);
    if (tokens.empty()) tokens.push_back(req.text);

    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& t : tokens) {
        v[fnv1a(t) % static_cast<std::uint64_t>(dim_)] += 1.0;
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    for (double& x : v) x /= norm;
    return v;
}

// --- ResponseCache ----------------------------------------------------------

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
    std::lock_guard lock(mutex_);
    entries_[key] = value;
    if (!append_path_.empty()) {
        std::ofstream out(append_path_, std::ios::app | std::ios::binary);
        if (out) {
            nlohmann::json record{{"digest", fnv1a_hex(key)}, {"request", key}, {"response", value}};
            out << record.dump() << "\n";
        }
    }
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void ResponseCache::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;  // absent cache is an empty cache
    std::lock_guard lock(mutex_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("request") || !record.contains("response")) {
            continue;  // tolerate torn tail lines in the append log
        }
        entries_[record["request"].get<std::string>()] = record["response"].get<std::string>();
    }
}

void ResponseCache::save_file(const std::string& path) const {
    std::lock_guard lock(mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write cache file '" + path + "'");
    for (const auto& [key, value] : entries_) {
        nlohmann::json record{{"digest", fnv1a_hex(key)}, {"request", key}, {"response", value}};
        out << record.dump() << "\n";
    }
}

void ResponseCache::attach_append_log(const std::string& path) {
    std::lock_guard lock(mutex_);
    append_path_ = path;
}

// --- Gateway ----------------------------------------------------------------

Gateway::Gateway(BackendSet backends, GatewayConfig config, std::shared_ptr<ResponseCache> cache)
    : backends_(std::move(backends)), config_(config), cache_(std::move(cache)),
      rng_(config.jitter_seed) {
    if (!backends_.summarizer || !backends_.selector || !backends_.generator ||
        !backends_.embedder) {
        throw Error(ErrorCode::InvariantViolation, "Gateway requires a backend per role");
    }
    if (config_.cache_enabled && !cache_) cache_ = std::make_shared<ResponseCache>();
}

void Gateway::backoff_sleep(int attempt) {
    double delay = config_.backoff_base_ms * std::pow(2.0, attempt);
    double jitter;
    {
        std::lock_guard lock(rng_mutex_);
        jitter = std::uniform_real_distribution<double>(0.0, config_.backoff_jitter)(rng_);
    }
    delay *= 1.0 + jitter;
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay)));
}

std::string Gateway::call_with_retries(const std::function<std::string()>& call) {
    int attempt = 0;
    while (true) {
        try {
            InFlightSlot slot(in_flight_, config_.max_in_flight, slot_mutex_, slot_cv_);
            return call();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ProviderError || !e.retryable() ||
                attempt + 1 >= config_.provider_attempts) {
                throw;
            }
            backoff_sleep(attempt);
            ++attempt;
        }
    }
}

std::string Gateway::cached_call(const std::string& key,
                                 const std::function<std::string()>& call) {
    if (cache_ && config_.cache_enabled) {
        if (auto hit = cache_->get(key)) return *hit;
    }
    std::string value = call_with_retries(call);
    if (cache_ && config_.cache_enabled) cache_->put(key, value);
    return value;
}

std::string Gateway::summarize(const SummaryRequest& req) {
    {
        std::lock_guard lock(stats_mutex_);
        ++stats_.summarize_requests;
    }
    const std::string key = canonical_summary_key(backends_.summarizer->name(), req);
    std::string out = cached_call(key, [&] {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.summarize_provider_calls;
        }
        return truncate_tokens(backends_.summarizer->summarize(req), req.budget);
    });
    if (out.empty()) {
        throw Error(ErrorCode::ProviderError, "summarizer returned empty text", false);
    }
    return out;
}

std::optional<std::string> Gateway::select(const SelectionRequest& req) {
    {
        std::lock_guard lock(stats_mutex_);
        ++stats_.select_requests;
    }
    const std::string key = canonical_select_key(backends_.selector->name(), req);
    std::string encoded = cached_call(key, [&] {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.select_provider_calls;
        }
        auto choice = backends_.selector->select(req);
        nlohmann::json j;
        j["selected"] = choice ? nlohmann::json(*choice) : nlohmann::json(nullptr);
        return j.dump();
    });
    nlohmann::json j = nlohmann::json::parse(encoded);
    if (j["selected"].is_null()) {
        if (!req.allow_none) {
            throw Error(ErrorCode::MalformedResponse, "selector declined a forced choice");
        }
        return std::nullopt;
    }
    const std::string id = j["selected"].get<std::string>();
    for (const auto& c : req.candidates) {
        if (c.id == id) return id;
    }
    throw Error(ErrorCode::MalformedResponse, "selector returned unknown id '" + id + "'");
}

std::string Gateway::generate(const GenerationRequest& req) {
    {
        std::lock_guard lock(stats_mutex_);
        ++stats_.generate_requests;
    }
    const std::string key = canonical_generate_key(backends_.generator->name(), req);
    return cached_call(key, [&] {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.generate_provider_calls;
        }
        std::string out = backends_.generator->generate(req, "");
        if (req.mode == GenerationMode::navigate) {
            auto validate = [&](const std::string& text) -> bool {
                auto choice = parse_navigation_choice(text);
                if (!choice) return false;
                for (const auto& chain : req.chains) {
                    if (chain.leaf_id == choice->waypoint) return true;
                }
                return false;
            };
            if (!validate(out)) {
                {
                    std::lock_guard lock(stats_mutex_);
                    ++stats_.generate_provider_calls;
                }
                out = backends_.generator->generate(
                    req, "The previous reply was not a JSON object with a valid "
                         "\"waypoint\" from the candidate chains and a \"reasoning\" string. "
                         "Previous reply: " + out);
                if (!validate(out)) {
                    throw Error(ErrorCode::MalformedResponse,
                                "generator produced no valid waypoint block after retry");
                }
            }
        }
        return out;
    });
}

std::vector<double> Gateway::embed(const EmbeddingRequest& req) {
    {
        std::lock_guard lock(stats_mutex_);
        ++stats_.embed_requests;
    }
    const std::string key = canonical_embed_key(backends_.embedder->name(), req);
    std::string encoded = cached_call(key, [&] {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.embed_provider_calls;
        }
        nlohmann::json j = backends_.embedder->embed(req);
        return j.dump();
    });
    std::vector<double> v = nlohmann::json::parse(encoded).get<std::vector<double>>();
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (v.empty() || std::abs(std::sqrt(norm_sq) - 1.0) > 1e-9) {
        throw Error(ErrorCode::ProviderError, "embedder returned a non-unit vector", false);
    }
    return v;
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(stats_mutex_);
    return stats_;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::InvariantViolation, "cosine of mismatched dimensions");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

}  // namespace erag
