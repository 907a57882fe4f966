#include "erag/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "erag/text.hpp"
#include "json.hpp"

namespace erag {

namespace {

std::string render_line(const ForestNode& n) {
    char coords[96];
    std::snprintf(coords, sizeof(coords), "pos=(%.2f, %.2f, %.2f)", n.centroid.x, n.centroid.y,
                  n.centroid.z);
    return "level=" + std::to_string(n.level) + " " + coords + " id=" + n.id + ": " + n.summary;
}

}  // namespace

const char* query_kind_name(QueryKind kind) {
    switch (kind) {
        case QueryKind::explicit_target: return "explicit";
        case QueryKind::implicit: return "implicit";
        case QueryKind::global: return "global";
    }
    return "unknown";
}

QueryKind parse_query_kind(const std::string& name) {
    if (name == "explicit") return QueryKind::explicit_target;
    if (name == "implicit") return QueryKind::implicit;
    if (name == "global") return QueryKind::global;
    throw Error(ErrorCode::UsageError, "unknown query kind '" + name + "'");
}

Query::Query(std::string text_, QueryKind kind_) : text(std::move(text_)), kind(kind_) {
    if (text.empty()) throw Error(ErrorCode::InvariantViolation, "query text must be nonempty");
}

const char* retrieval_method_name(RetrievalMethod method) {
    switch (method) {
        case RetrievalMethod::semantic_match: return "semantic_match";
        case RetrievalMethod::rag: return "rag";
        case RetrievalMethod::embodied_rag: return "embodied_rag";
    }
    return "unknown";
}

RetrievalMethod parse_retrieval_method(const std::string& name) {
    if (name == "semantic" || name == "semantic_match") return RetrievalMethod::semantic_match;
    if (name == "rag") return RetrievalMethod::rag;
    if (name == "embodied" || name == "embodied_rag") return RetrievalMethod::embodied_rag;
    throw Error(ErrorCode::UsageError, "unknown retrieval method '" + name + "'");
}

Chain render_chain(const SemanticForest& forest, const std::string& leaf_id) {
    Chain chain;
    chain.node_ids = forest.chain(leaf_id);
    std::vector<std::string> lines;
    lines.reserve(chain.node_ids.size());
    for (const auto& id : chain.node_ids) lines.push_back(render_line(forest.node(id)));
    chain.rendering = join(lines, "\n");
    return chain;
}

Chain render_leaf_only(const SemanticForest& forest, const std::string& leaf_id) {
    const ForestNode& n = forest.node(leaf_id);
    if (!n.is_leaf()) throw Error(ErrorCode::NotALeaf, "forest node '" + leaf_id + "' is not a leaf");
    Chain chain;
    chain.node_ids = {leaf_id};
    chain.rendering = render_line(n);
    return chain;
}

namespace {

// Cosine of the query embedding against every leaf caption, sorted best
// first with ties broken by leaf id. Shared by both baselines.
std::vector<ScoredLeaf> rank_leaves(const SemanticForest& forest, Gateway& gateway,
                                    const Query& query) {
    const std::vector<double> q = gateway.embed(EmbeddingRequest(query.text));
    std::vector<ScoredLeaf> scored;
    scored.reserve(forest.leaf_count());
    for (const auto& [map_id, leaf_id] : forest.leaf_index()) {
        const std::vector<double> e = gateway.embed(EmbeddingRequest(forest.node(leaf_id).summary));
        scored.push_back({leaf_id, cosine_similarity(q, e)});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredLeaf& a, const ScoredLeaf& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.leaf_id < b.leaf_id;
    });
    return scored;
}

}  // namespace

RetrievalResult retrieve_semantic_match(const SemanticForest& forest, Gateway& gateway,
                                        const Query& query) {
    RetrievalResult result;
    result.method = RetrievalMethod::semantic_match;
    auto ranked = rank_leaves(forest, gateway, query);
    result.leaves = {ranked.front()};
    return result;
}

RetrievalResult retrieve_rag(const SemanticForest& forest, Gateway& gateway, const Query& query,
                             int k) {
    if (k < 1) throw Error(ErrorCode::UsageError, "k must be at least 1");
    RetrievalResult result;
    result.method = RetrievalMethod::rag;
    auto ranked = rank_leaves(forest, gateway, query);
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
    result.leaves = std::move(ranked);
    return result;
}

std::vector<int> embodied_quotas(const std::vector<std::size_t>& tree_leaf_counts, int k) {
    const int n = static_cast<int>(tree_leaf_counts.size());
    std::size_t total_leaves = 0;
    for (auto c : tree_leaf_counts) total_leaves += c;
    int total = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), total_leaves));

    std::vector<int> quotas(tree_leaf_counts.size(), 0);
    const int base = total / n;
    const int remainder = total % n;
    for (int i = 0; i < n; ++i) quotas[i] = base + (i < remainder ? 1 : 0);

    // Cap at tree capacity, then hand the surplus back out in the same order.
    int surplus = 0;
    for (int i = 0; i < n; ++i) {
        const int cap = static_cast<int>(tree_leaf_counts[i]);
        if (quotas[i] > cap) {
            surplus += quotas[i] - cap;
            quotas[i] = cap;
        }
    }
    while (surplus > 0) {
        bool placed = false;
        for (int i = 0; i < n && surplus > 0; ++i) {
            if (quotas[i] < static_cast<int>(tree_leaf_counts[i])) {
                ++quotas[i];
                --surplus;
                placed = true;
            }
        }
        if (!placed) break;  // total <= sum(capacities), so this cannot trigger
    }
    return quotas;
}

namespace {

// Exhaustion bookkeeping for repeated descents within one tree.
struct TreeState {
    std::unordered_set<std::string> exhausted;
    std::unordered_map<std::string, int> exhausted_children;

    bool is_exhausted(const std::string& id) const { return exhausted.count(id) > 0; }

    void exhaust_leaf(const SemanticForest& forest, const std::string& leaf_id) {
        exhausted.insert(leaf_id);
        const ForestNode* n = &forest.node(leaf_id);
        while (n->parent) {
            const ForestNode& parent = forest.node(*n->parent);
            const int done = ++exhausted_children[parent.id];
            if (done < static_cast<int>(parent.children.size())) break;
            exhausted.insert(parent.id);
            n = &parent;
        }
    }
};

struct TreeOutcome {
    std::vector<Chain> chains;
    std::vector<DescentTrace> traces;
};

TreeOutcome run_tree_descents(const SemanticForest& forest, Gateway& gateway, const Query& query,
                              const std::string& root_id, int quota) {
    TreeOutcome outcome;
    TreeState state;
    for (int d = 0; d < quota; ++d) {
        DescentTrace trace;
        trace.root_id = root_id;
        const ForestNode* current = &forest.node(root_id);
        while (!current->is_leaf()) {
            std::vector<SelectionCandidate> candidates;
            std::vector<std::string> candidate_ids;
            for (const auto& child_id : current->children) {  // children sorted by id
                if (state.is_exhausted(child_id)) continue;
                candidates.push_back({child_id, forest.node(child_id).summary});
                candidate_ids.push_back(child_id);
            }
            SelectionRequest req(query.text, std::move(candidates), /*allow_none=*/false);
            auto selected = gateway.select(req);
            trace.steps.push_back({current->id, std::move(candidate_ids), *selected});
            current = &forest.node(*selected);
        }
        trace.leaf_id = current->id;
        state.exhaust_leaf(forest, current->id);
        outcome.chains.push_back(render_chain(forest, current->id));
        outcome.traces.push_back(std::move(trace));
    }
    return outcome;
}

}  // namespace

RetrievalResult retrieve_embodied(const SemanticForest& forest, Gateway& gateway,
                                  const Query& query, int k, int concurrency) {
    if (k < 1) throw Error(ErrorCode::UsageError, "k must be at least 1");

    // Trees ordered by descending leaf count, ties by root id.
    struct Tree {
        std::string root;
        std::size_t leaf_count;
    };
    std::vector<Tree> trees;
    for (const auto& root : forest.roots()) {
        trees.push_back({root, forest.leaves_under(root).size()});
    }
    std::sort(trees.begin(), trees.end(), [](const Tree& a, const Tree& b) {
        if (a.leaf_count != b.leaf_count) return a.leaf_count > b.leaf_count;
        return a.root < b.root;
    });
    std::vector<std::size_t> counts;
    counts.reserve(trees.size());
    for (const auto& t : trees) counts.push_back(t.leaf_count);
    const std::vector<int> quotas = embodied_quotas(counts, k);

    // Descents within a tree consume exhaustion state sequentially; distinct
    // trees run concurrently. Results assemble in tree order regardless of
    // scheduling.
    std::vector<TreeOutcome> outcomes(trees.size());
    std::vector<std::exception_ptr> errors(trees.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        while (true) {
            const std::size_t idx = cursor.fetch_add(1);
            if (idx >= trees.size()) return;
            if (quotas[idx] == 0) continue;
            try {
                outcomes[idx] =
                    run_tree_descents(forest, gateway, query, trees[idx].root, quotas[idx]);
            } catch (...) {
                errors[idx] = std::current_exception();
            }
        }
    };
    const int worker_count =
        std::max(1, std::min<int>(concurrency, static_cast<int>(trees.size())));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    RetrievalResult result;
    result.method = RetrievalMethod::embodied_rag;
    for (std::size_t i = 0; i < trees.size(); ++i) {
        if (errors[i]) {
            // Attach the audit trail gathered so far before surfacing.
            try {
                std::rethrow_exception(errors[i]);
            } catch (const Error& e) {
                throw Error(e.code(), std::string(e.what()) + " [tree '" + trees[i].root +
                                          "', trace: " + traces_to_json(outcomes[i].traces) + "]");
            }
        }
        for (auto& c : outcomes[i].chains) result.chains.push_back(std::move(c));
        for (auto& t : outcomes[i].traces) result.traces.push_back(std::move(t));
    }
    return result;
}

std::string traces_to_json(const std::vector<DescentTrace>& traces) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& trace : traces) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& step : trace.steps) {
            steps.push_back({{"visited", step.node_id},
                             {"candidates", step.candidate_ids},
                             {"selected", step.selected_id}});
        }
        out.push_back({{"root", trace.root_id}, {"leaf", trace.leaf_id}, {"steps", steps}});
    }
    return out.dump();
}

}  // namespace erag
