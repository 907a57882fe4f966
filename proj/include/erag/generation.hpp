#pragma once
// Turns retrieved chains into a navigation decision (waypoint + reasoning +
// planned node path) or a free-form text answer, and dispatches a full query
// through retrieval + generation. Baseline methods compose through the same
// stage by wrapping their leaves as single-node chains.

#include <optional>
#include <string>
#include <vector>

#include "erag/forest.hpp"
#include "erag/gateway.hpp"
#include "erag/retrieval.hpp"
#include "erag/topo_map.hpp"

namespace erag {

struct AgentState {
    std::string current_node;  // must exist in the map
};

struct NavigationResult {
    std::string waypoint;   // leaf forest id, always from the input chains
    std::string map_node;   // its map node
    std::string reasoning;
    std::vector<std::string> path;  // shortest node path from the agent
    bool fallback_used = false;     // generator output was unusable; first chain chosen
};

struct AnswerResult {
    std::string answer;  // nonempty
    std::vector<Chain> cited_chains;
};

// Waypoint selection over the chains' leaves, then path planning from the
// agent's node. A generator that names no valid candidate (after the
// gateway's corrective retry) falls back to the first chain's leaf with a
// warning flag. Unreachable waypoints surface as errors.
NavigationResult generate_navigation(const Query& query, const std::vector<Chain>& chains,
                                     const AgentState& state, const TopologicalMap& map,
                                     const SemanticForest& forest, Gateway& gateway);

AnswerResult generate_text_answer(const Query& query, const std::vector<Chain>& chains,
                                  Gateway& gateway);

// One query end to end. explicit/implicit kinds navigate; global kinds answer.
struct QueryOutcome {
    Query query;
    RetrievalMethod method;
    int k = 1;
    RetrievalResult retrieval;
    std::optional<NavigationResult> navigation;
    std::optional<AnswerResult> answer;
    std::vector<std::string> warnings;
    double timing_ms = 0.0;
};

QueryOutcome run_query(const Query& query, int k, const AgentState& state,
                       const TopologicalMap& map, const SemanticForest& forest, Gateway& gateway,
                       RetrievalMethod method, int concurrency = 8);

// Self-contained one-line JSON record for a query outcome; the unit consumed
// by the evaluation harness and printed by the CLI. Timing is volatile, so
// canonical (diffable) emissions exclude it.
std::string outcome_record(const QueryOutcome& outcome, bool include_timing = true,
                           bool include_trace = false);

}  // namespace erag
