#include "erag/remote.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "erag/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace erag {

namespace {

const char* kSummarizeTemplate =
    "You maintain a hierarchical spatial memory for a mobile robot.\n"
    "Combine the following level-{{level}} child area descriptions into one\n"
    "abstraction that covers all of them. Keep every distinct object and place\n"
    "mentioned; do not invent new ones. Reply with the description only, at\n"
    "most {{budget}} words.\n"
    "\n"
    "Child descriptions:\n"
    "{{children}}\n";

const char* kSelectTemplate =
    "You are choosing where to descend in a hierarchical spatial memory.\n"
    "Query: {{query}}\n"
    "\n"
    "Candidates (id: description):\n"
    "{{candidates}}\n"
    "\n"
    "Reply with exactly one candidate id{{none_clause}}.\n";

const char* kSelectCorrectiveTemplate =
    "{{base}}\n"
    "Your previous reply \"{{previous}}\" was not one of the candidate ids.\n"
    "Reply again with exactly one id copied verbatim from the list.\n";

const char* kNavigateTemplate =
    "You select a navigation waypoint for a robot.\n"
    "Query: {{query}}\n"
    "\n"
    "Retrieved memory chains (leaf first, root last):\n"
    "{{chains}}\n"
    "\n"
    "Choose the best leaf waypoint for the query. Reply with a single JSON\n"
    "object and nothing else: {\"waypoint\": \"<leaf id>\", \"reasoning\": \"<why>\"}\n"
    "The waypoint must be one of: {{leaf_ids}}\n";

const char* kExplainTemplate =
    "You answer questions about an environment using retrieved memory chains.\n"
    "Query: {{query}}\n"
    "\n"
    "Retrieved memory chains (leaf first, root last):\n"
    "{{chains}}\n"
    "\n"
    "Answer the query based only on these chains.\n";

std::string read_file_or(const std::string& path, const std::string& fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string trim(const std::string& s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

std::string strip_quotes(std::string s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        s = s.substr(1, s.size() - 2);
    }
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::string chains_block(const GenerationRequest& req) {
    std::string block;
    for (std::size_t i = 0; i < req.chains.size(); ++i) {
        block += "Chain " + std::to_string(i + 1) + ":\n" + req.chains[i].rendering + "\n\n";
    }
    return block;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? value : fallback;
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
    return PromptTemplates{kSummarizeTemplate, kSelectTemplate, kSelectCorrectiveTemplate,
                           kNavigateTemplate, kExplainTemplate};
}

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
    PromptTemplates t = defaults();
    t.summarize = read_file_or(dir + "/summarize.txt", t.summarize);
    t.select = read_file_or(dir + "/select.txt", t.select);
    t.select_corrective = read_file_or(dir + "/select_corrective.txt", t.select_corrective);
    t.navigate = read_file_or(dir + "/navigate.txt", t.navigate);
    t.explain = read_file_or(dir + "/explain.txt", t.explain);
    return t;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out = tmpl;
    for (const auto& [name, value] : vars) {
        const std::string placeholder = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig config;
    config.base_url = env_or("ERAG_BASE_URL", "");
    config.api_key = env_or("ERAG_API_KEY", "");
    config.summarizer_model = env_or("ERAG_MODEL_SUMMARIZER", config.summarizer_model);
    config.selector_model = env_or("ERAG_MODEL_SELECTOR", config.selector_model);
    config.generator_model = env_or("ERAG_MODEL_GENERATOR", config.generator_model);
    config.embedder_model = env_or("ERAG_MODEL_EMBEDDER", config.embedder_model);
    config.prompt_dir = env_or("ERAG_PROMPT_DIR", "");
    return config;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error(ErrorCode::ProviderError, "remote backend requires a base URL", false);
    }
    templates_ = config_.prompt_dir.empty() ? PromptTemplates::defaults()
                                            : PromptTemplates::load_dir(config_.prompt_dir);
}

std::string RemoteBackend::name() const {
    return "remote[" + config_.summarizer_model + "," + config_.selector_model + "," +
           config_.generator_model + "," + config_.embedder_model + "]";
}

std::string RemoteBackend::post_json(const std::string& path, const std::string& body) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_sec);
    client.set_read_timeout(config_.timeout_sec);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
        throw Error(ErrorCode::ProviderError,
                    "connection to " + config_.base_url + " failed: " +
                        httplib::to_string(res.error()),
                    /*retryable=*/true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw Error(ErrorCode::ProviderError,
                    "provider returned status " + std::to_string(res->status), /*retryable=*/true);
    }
    if (res->status != 200) {
        throw Error(ErrorCode::ProviderError,
                    "provider returned status " + std::to_string(res->status) + ": " + res->body,
                    /*retryable=*/false);
    }
    return res->body;
}

std::string RemoteBackend::chat(const std::string& model, const std::string& prompt) {
    nlohmann::json body{{"model", model},
                        {"temperature", 0.0},
                        {"messages", nlohmann::json::array({nlohmann::json{
                                         {"role", "user"}, {"content", prompt}}})}};
    const std::string response = post_json("/v1/chat/completions", body.dump());
    nlohmann::json j = nlohmann::json::parse(response, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
        !j["choices"][0].contains("message")) {
        throw Error(ErrorCode::ProviderError, "unexpected chat completion payload", false);
    }
    return j["choices"][0]["message"].value("content", "");
}

std::string RemoteBackend::summarize(const SummaryRequest& req) {
    std::string children;
    for (const auto& child : req.child_summaries) children += "- " + child + "\n";
    const std::string prompt = render_template(templates_.summarize,
                                               {{"level", std::to_string(req.level)},
                                                {"budget", std::to_string(req.budget)},
                                                {"children", children}});
    return trim(chat(config_.summarizer_model, prompt));
}

std::optional<std::string> RemoteBackend::select(const SelectionRequest& req) {
    std::string candidates;
    for (const auto& c : req.candidates) candidates += c.id + ": " + c.description + "\n";
    const std::string base = render_template(
        templates_.select,
        {{"query", req.query},
         {"candidates", candidates},
         {"none_clause", req.allow_none ? std::string(", or NONE if nothing is compatible")
                                        : std::string()}});

    auto try_parse = [&](const std::string& reply) -> std::optional<std::optional<std::string>> {
        const std::string cleaned = strip_quotes(trim(reply));
        if (req.allow_none) {
            std::string upper = cleaned;
            std::transform(upper.begin(), upper.end(), upper.begin(),
                           [](unsigned char c) { return std::toupper(c); });
            if (upper == "NONE") return std::optional<std::string>{};
        }
        for (const auto& c : req.candidates) {
            if (c.id == cleaned) return std::optional<std::string>{cleaned};
        }
        return std::nullopt;
    };

    const std::string first = chat(config_.selector_model, base);
    if (auto parsed = try_parse(first)) return *parsed;

    // One corrective retry naming the stray reply, then a typed failure.
    const std::string retry_prompt = render_template(
        templates_.select_corrective, {{"base", base}, {"previous", trim(first)}});
    const std::string second = chat(config_.selector_model, retry_prompt);
    if (auto parsed = try_parse(second)) return *parsed;
    throw Error(ErrorCode::MalformedResponse,
                "selector replied outside the candidate set twice: '" + trim(second) + "'");
}

std::string RemoteBackend::generate(const GenerationRequest& req,
                                    std::string_view corrective_hint) {
    std::map<std::string, std::string> vars{{"query", req.query}, {"chains", chains_block(req)}};
    std::string prompt;
    if (req.mode == GenerationMode::navigate) {
        std::string leaf_ids;
        for (std::size_t i = 0; i < req.chains.size(); ++i) {
            if (i > 0) leaf_ids += ", ";
            leaf_ids += req.chains[i].leaf_id;
        }
        vars["leaf_ids"] = leaf_ids;
        prompt = render_template(templates_.navigate, vars);
    } else {
        prompt = render_template(templates_.explain, vars);
    }
    if (!corrective_hint.empty()) {
        prompt += "\nThe previous attempt was rejected: " + std::string(corrective_hint) + "\n";
    }
    std::string reply = trim(chat(config_.generator_model, prompt));
    if (req.mode == GenerationMode::navigate) {
        // Providers often wrap JSON in code fences; unwrap before validation.
        if (reply.rfind("```", 0) == 0) {
            const auto first_newline = reply.find('\n');
            const auto last_fence = reply.rfind("```");
            if (first_newline != std::string::npos && last_fence > first_newline) {
                reply = trim(reply.substr(first_newline + 1, last_fence - first_newline - 1));
            }
        }
    }
    return reply;
}

std::vector<double> RemoteBackend::embed(const EmbeddingRequest& req) {
    nlohmann::json body{{"model", config_.embedder_model}, {"input", req.text}};
    const std::string response = post_json("/v1/embeddings", body.dump());
    nlohmann::json j = nlohmann::json::parse(response, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].empty() ||
        !j["data"][0].contains("embedding")) {
        throw Error(ErrorCode::ProviderError, "unexpected embeddings payload", false);
    }
    std::vector<double> v = j["data"][0]["embedding"].get<std::vector<double>>();
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (v.empty() || norm_sq <= 0.0) {
        throw Error(ErrorCode::ProviderError, "embedder returned an empty vector", false);
    }
    const double norm = std::sqrt(norm_sq);
    for (double& x : v) x /= norm;
    return v;
}

}  // namespace erag
