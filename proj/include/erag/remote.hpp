#pragma once
// Remote provider backend speaking the OpenAI-compatible chat/embeddings
// protocol. Prompts are versioned text assets with named placeholders so
// they can be swapped without a rebuild; built-in defaults mirror the files
// under assets/prompts/.

#include <map>
#include <string>

#include "erag/gateway.hpp"

namespace erag {

struct PromptTemplates {
    std::string summarize;
    std::string select;
    std::string select_corrective;
    std::string navigate;
    std::string explain;

    static PromptTemplates defaults();
    // Reads <dir>/{summarize,select,select_corrective,navigate,explain}.txt;
    // missing files keep their built-in default.
    static PromptTemplates load_dir(const std::string& dir);
};

// Replaces {{name}} placeholders; unknown placeholders are left intact.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

struct RemoteConfig {
    std::string base_url;  // scheme://host[:port]
    std::string api_key;
    std::string summarizer_model = "gpt-4o-mini";
    std::string selector_model = "gpt-4o-mini";
    std::string generator_model = "gpt-4o-mini";
    std::string embedder_model = "text-embedding-3-small";
    int timeout_sec = 60;
    std::string prompt_dir;  // empty = built-in templates

    // ERAG_BASE_URL, ERAG_API_KEY, ERAG_MODEL_{SUMMARIZER,SELECTOR,GENERATOR,
    // EMBEDDER}, ERAG_PROMPT_DIR.
    static RemoteConfig from_env();
};

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);

    std::string name() const override;
    std::string summarize(const SummaryRequest& req) override;
    std::optional<std::string> select(const SelectionRequest& req) override;
    std::string generate(const GenerationRequest& req, std::string_view corrective_hint) override;
    std::vector<double> embed(const EmbeddingRequest& req) override;

private:
    std::string chat(const std::string& model, const std::string& prompt);
    std::string post_json(const std::string& path, const std::string& body);

    RemoteConfig config_;
    PromptTemplates templates_;
};

}  // namespace erag
