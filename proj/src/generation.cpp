#include "erag/generation.hpp"

#include <chrono>

#include "json.hpp"

namespace erag {

namespace {

std::vector<ChainContext> chain_contexts(const std::vector<Chain>& chains) {
    std::vector<ChainContext> out;
    out.reserve(chains.size());
    for (const auto& c : chains) out.push_back({c.leaf_id(), c.rendering});
    return out;
}

}  // namespace

NavigationResult generate_navigation(const Query& query, const std::vector<Chain>& chains,
                                     const AgentState& state, const TopologicalMap& map,
                                     const SemanticForest& forest, Gateway& gateway) {
    if (chains.empty()) {
        throw Error(ErrorCode::InvariantViolation, "generate_navigation requires chains");
    }
    if (!map.has_node(state.current_node)) {
        throw Error(ErrorCode::UnknownNode, "agent node '" + state.current_node + "'");
    }

    NavigationResult result;
    GenerationRequest req(query.text, chain_contexts(chains), GenerationMode::navigate);
    try {
        const std::string raw = gateway.generate(req);
        auto choice = parse_navigation_choice(raw);
        // The gateway already enforced format and candidate membership.
        result.waypoint = choice->waypoint;
        result.reasoning = choice->reasoning;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse) throw;
        result.waypoint = chains.front().leaf_id();
        result.reasoning = "Generator output was unusable; defaulted to the first retrieved chain.";
        result.fallback_used = true;
    }

    const ForestNode& leaf = forest.node(result.waypoint);
    if (!leaf.map_node) {
        throw Error(ErrorCode::NotALeaf, "waypoint '" + result.waypoint + "' is not a leaf");
    }
    result.map_node = *leaf.map_node;
    result.path = map.shortest_path(state.current_node, result.map_node);
    return result;
}

AnswerResult generate_text_answer(const Query& query, const std::vector<Chain>& chains,
                                  Gateway& gateway) {
    if (chains.empty()) {
        throw Error(ErrorCode::InvariantViolation, "generate_text_answer requires chains");
    }
    GenerationRequest req(query.text, chain_contexts(chains), GenerationMode::explain);
    AnswerResult result;
    result.answer = gateway.generate(req);
    if (result.answer.empty()) {
        throw Error(ErrorCode::ProviderError, "generator returned an empty answer", false);
    }
    result.cited_chains = chains;
    return result;
}

QueryOutcome run_query(const Query& query, int k, const AgentState& state,
                       const TopologicalMap& map, const SemanticForest& forest, Gateway& gateway,
                       RetrievalMethod method, int concurrency) {
    const auto start = std::chrono::steady_clock::now();
    QueryOutcome outcome{query, method, k, {}, std::nullopt, std::nullopt, {}, 0.0};

    switch (method) {
        case RetrievalMethod::semantic_match:
            outcome.retrieval = retrieve_semantic_match(forest, gateway, query);
            break;
        case RetrievalMethod::rag:
            outcome.retrieval = retrieve_rag(forest, gateway, query, k);
            break;
        case RetrievalMethod::embodied_rag:
            outcome.retrieval = retrieve_embodied(forest, gateway, query, k, concurrency);
            break;
    }

    // Baselines compose with the same generation stage through single-node
    // chains; chain retrieval passes its full chains.
    std::vector<Chain> chains;
    if (method == RetrievalMethod::embodied_rag) {
        chains = outcome.retrieval.chains;
    } else {
        chains.reserve(outcome.retrieval.leaves.size());
        for (const auto& scored : outcome.retrieval.leaves) {
            chains.push_back(render_leaf_only(forest, scored.leaf_id));
        }
    }

    if (query.kind == QueryKind::global) {
        outcome.answer = generate_text_answer(query, chains, gateway);
    } else {
        outcome.navigation = generate_navigation(query, chains, state, map, forest, gateway);
        if (outcome.navigation->fallback_used) {
            outcome.warnings.push_back("generator fallback: first chain leaf used");
        }
    }

    outcome.timing_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return outcome;
}

std::string outcome_record(const QueryOutcome& outcome, bool include_timing,
                           bool include_trace) {
    nlohmann::json record;
    record["query"] = outcome.query.text;
    record["kind"] = query_kind_name(outcome.query.kind);
    record["method"] = retrieval_method_name(outcome.method);
    record["k"] = outcome.k;
    if (outcome.navigation) {
        record["result"] = {{"type", "navigation"},
                            {"waypoint", outcome.navigation->waypoint},
                            {"map_node", outcome.navigation->map_node},
                            {"reasoning", outcome.navigation->reasoning},
                            {"path", outcome.navigation->path},
                            {"fallback", outcome.navigation->fallback_used}};
    } else if (outcome.answer) {
        nlohmann::json cited = nlohmann::json::array();
        for (const auto& c : outcome.answer->cited_chains) cited.push_back(c.leaf_id());
        record["result"] = {{"type", "answer"},
                            {"answer", outcome.answer->answer},
                            {"cited_leaves", cited}};
    }
    record["warnings"] = outcome.warnings;
    if (include_timing) record["timing_ms"] = outcome.timing_ms;
    if (include_trace && !outcome.retrieval.traces.empty()) {
        record["trace"] = nlohmann::json::parse(traces_to_json(outcome.retrieval.traces));
    }
    return record.dump();
}

}  // namespace erag
