#pragma once
// Synthetic benchmark worlds with machine-checkable gold labels, dataset
// ingestion, and the evaluation harness that scores retrieval/generation
// methods. Human judging is replaced by surrogates: gold leaf sets for
// navigation success, gold term coverage for global answers.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "erag/forest.hpp"
#include "erag/gateway.hpp"
#include "erag/generation.hpp"
#include "erag/retrieval.hpp"
#include "erag/topo_map.hpp"

namespace erag {

enum class EdgePolicy { exploration_chain, proximity_radius };

const char* edge_policy_name(EdgePolicy policy);
EdgePolicy parse_edge_policy(const std::string& name);  // throws InvalidSpec

struct CategorySpec {
    std::string name;
    std::string role;  // "filler" | "implicit_gold" | "implicit_trap"
    std::vector<std::string> captions;  // rotated across the category's nodes
};

struct RegionSpec {
    std::string label;
    std::vector<CategorySpec> categories;
};

struct ImplicitSuiteSpec {
    std::string gold_category;  // nodes of this category are the gold set
    std::vector<std::string> queries;
};

struct WorldSpec {
    std::uint64_t seed = 0;
    int node_count = 50;
    double extent = 100.0;  // square side in meters; regions are x-strips
    EdgePolicy edge_policy = EdgePolicy::exploration_chain;
    double proximity_radius = 0.0;  // 0 = auto (2 * extent / sqrt(n))

    std::vector<RegionSpec> regions;

    // Query synthesis. Explicit queries inject a unique "<adjective> <noun>"
    // phrase into one filler caption each; implicit suites target a category;
    // global queries expect every region label mentioned.
    int explicit_query_count = 10;
    std::vector<std::string> phrase_adjectives;
    std::vector<std::string> phrase_nouns;
    std::vector<ImplicitSuiteSpec> implicit_suites;
    std::vector<std::string> global_queries;

    void validate() const;  // throws InvalidSpec

    std::string to_json() const;
    static WorldSpec from_json(std::string_view text);
    static WorldSpec load_file(const std::string& path);

    // The bundled two-region market/garden benchmark world.
    static WorldSpec benchmark(std::uint64_t seed, int node_count);
};

struct GoldQuery {
    std::string id;
    Query query;
    std::set<std::string> gold_leaves;    // map node ids (explicit/implicit)
    std::vector<std::string> gold_terms;  // required answer mentions (global)
};

struct World {
    TopologicalMap map;
    std::vector<GoldQuery> queries;
};

// Deterministic for a given spec: same seed, same world, bit for bit.
World generate_world(const WorldSpec& spec);

// Map file plus optional gold-query sidecar (see save_gold_queries format).
World ingest_dataset(const std::string& map_path, const std::string& sidecar_path = "");
void export_world(const World& world, const std::string& map_path,
                  const std::string& sidecar_path);

std::string save_gold_queries(const std::vector<GoldQuery>& queries);
std::vector<GoldQuery> load_gold_queries(std::string_view bytes, const TopologicalMap& map);

struct QueryRecord {
    std::string query_id;
    std::string query_text;
    QueryKind kind = QueryKind::explicit_target;
    RetrievalMethod method = RetrievalMethod::semantic_match;
    bool success = false;    // navigation kinds
    double coverage = 0.0;   // global kind
    std::string map_node;    // navigation target reached
    std::string answer;      // global answer text
    std::vector<std::string> warnings;
    std::string error;       // nonempty when the query failed outright
    double timing_ms = 0.0;
};

struct Aggregate {
    int attempts = 0;
    int successes = 0;       // navigation kinds
    double coverage_sum = 0.0;

    double sr() const { return attempts == 0 ? 0.0 : double(successes) / attempts; }
    double mean_coverage() const { return attempts == 0 ? 0.0 : coverage_sum / attempts; }
};

struct EvalReport {
    int k = 1;
    std::vector<QueryRecord> records;  // sorted by (query id, method)
    // keyed by (method name, kind name)
    std::map<std::pair<std::string, std::string>, Aggregate> aggregates;
    double total_ms = 0.0;

    double sr(RetrievalMethod method, QueryKind kind) const;
    double mean_coverage(RetrievalMethod method) const;

    // Deterministic record stream: no timing, stable ordering. Two runs with
    // identical seeds and mock backends produce identical bytes.
    std::string canonical_jsonl() const;
    std::string table() const;  // human-readable, includes timing
};

// Runs every query through every method. Failing queries are recorded with
// their error and never abort the run.
EvalReport evaluate(const TopologicalMap& map, const SemanticForest& forest,
                    const std::vector<GoldQuery>& queries, Gateway& gateway,
                    const std::vector<RetrievalMethod>& methods, int k, int concurrency = 8);

// One evaluate() per k over a shared world; suitable for plotting.
std::vector<EvalReport> ablate_k(const TopologicalMap& map, const SemanticForest& forest,
                                 const std::vector<GoldQuery>& queries, Gateway& gateway,
                                 const std::vector<RetrievalMethod>& methods,
                                 const std::vector<int>& k_values, int concurrency = 8);

// Long-form "k<TAB>method<TAB>kind<TAB>score" rows for external plotting.
std::string ablation_tsv(const std::vector<int>& k_values,
                         const std::vector<EvalReport>& reports);

// True iff every content token of `term` occurs in the answer (case-insensitive).
bool answer_mentions(const std::string& answer, const std::string& term);

}  // namespace erag
