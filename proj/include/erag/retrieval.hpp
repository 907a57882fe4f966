#pragma once
// The three retrieval strategies over a summarized forest: Semantic Match
// (single best leaf by embedding cosine), naive RAG (top-k leaves), and
// chain retrieval (per-tree greedy descents steered by the selector, with
// leaf exhaustion between descents and per-tree quotas).

#include <string>
#include <vector>

#include "erag/forest.hpp"
#include "erag/gateway.hpp"

namespace erag {

enum class QueryKind { explicit_target, implicit, global };

const char* query_kind_name(QueryKind kind);
QueryKind parse_query_kind(const std::string& name);  // throws UsageError

struct Query {
    std::string text;  // nonempty
    QueryKind kind = QueryKind::explicit_target;

    Query(std::string text_, QueryKind kind_);
};

// Leaf -> root path of forest nodes plus its prompt-ready rendering: one line
// per node, leaf first, formatted
//   level=<L> pos=(<x>, <y>, <z>) id=<node id>: <summary>
// with centroid coordinates at 2 decimal places. The format is byte-stable.
struct Chain {
    std::vector<std::string> node_ids;  // leaf first, root last
    std::string rendering;

    const std::string& leaf_id() const { return node_ids.front(); }
    const std::string& root_id() const { return node_ids.back(); }
};

enum class RetrievalMethod { semantic_match, rag, embodied_rag };

const char* retrieval_method_name(RetrievalMethod method);
RetrievalMethod parse_retrieval_method(const std::string& name);  // throws UsageError

struct ScoredLeaf {
    std::string leaf_id;
    double score;
};

struct DescentStep {
    std::string node_id;                     // visited node
    std::vector<std::string> candidate_ids;  // non-exhausted children offered
    std::string selected_id;
};

struct DescentTrace {
    std::string root_id;
    std::vector<DescentStep> steps;
    std::string leaf_id;
};

struct RetrievalResult {
    RetrievalMethod method = RetrievalMethod::semantic_match;
    std::vector<ScoredLeaf> leaves;    // semantic_match: 1; rag: <= k, ranked
    std::vector<Chain> chains;         // embodied_rag: <= k, distinct leaves
    std::vector<DescentTrace> traces;  // embodied_rag audit trail
};

Chain render_chain(const SemanticForest& forest, const std::string& leaf_id);

// Degenerate single-node chain for composing the baselines with generation.
Chain render_leaf_only(const SemanticForest& forest, const std::string& leaf_id);

// argmax over all leaves of cosine(embed(query), embed(caption)); ties go to
// the smallest leaf id.
RetrievalResult retrieve_semantic_match(const SemanticForest& forest, Gateway& gateway,
                                        const Query& query);

// Exact brute-force top-min(k, leaves) ranking by cosine, descending,
// ties by leaf id.
RetrievalResult retrieve_rag(const SemanticForest& forest, Gateway& gateway,
                             const Query& query, int k);

// Per-tree quotas: floor(k/N) each plus one for the remainder trees in
// descending-leaf-count order (ties by root id); quotas above a tree's leaf
// count spill over in the same order. Each descent walks root -> leaf through
// selector choices over non-exhausted children; selected leaves are exhausted
// and emptied subtrees pruned, so chains have pairwise-distinct leaves.
// Trees run concurrently; descents within a tree are sequential.
RetrievalResult retrieve_embodied(const SemanticForest& forest, Gateway& gateway,
                                  const Query& query, int k, int concurrency = 8);

// The documented quota rule by itself (exposed for audit and tests):
// returns per-root descent counts aligned with `roots` order.
std::vector<int> embodied_quotas(const std::vector<std::size_t>& tree_leaf_counts, int k);

// Serialized per-descent audit records, consumed by the CLI's inspect/trace.
std::string traces_to_json(const std::vector<DescentTrace>& traces);

}  // namespace erag
