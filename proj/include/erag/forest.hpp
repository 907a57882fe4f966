#pragma once
// Semantic forest: a banded agglomerative hierarchy over the map nodes.
// Each threshold band merges the current top-level clusters whose linkage
// distance stays within the band's cutoff; merged groups become parent nodes
// carrying the mean position of their descendant leaves, and bottom-up
// summarization fills every non-leaf with an abstraction of its children.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "erag/gateway.hpp"
#include "erag/topo_map.hpp"

namespace erag {

struct ForestNode {
    std::string id;
    int level = 0;                        // 0 = leaf
    std::vector<std::string> children;    // sorted by id; empty iff leaf
    std::optional<std::string> parent;
    std::optional<std::string> map_node;  // present iff leaf
    Pose centroid;                        // leaf: map pose; else mean of descendant leaf xyz
    std::string summary;                  // leaf: caption verbatim; non-leaf: generated

    bool is_leaf() const { return children.empty(); }
};

struct ClusteringConfig {
    enum class Linkage { average, single, complete };
    enum class MetricDims { xy, xyz };

    Linkage linkage = Linkage::average;
    MetricDims metric_dims = MetricDims::xy;
    std::vector<double> threshold_schedule;  // nonempty, strictly increasing meters
    int max_children = 10;

    void validate() const;  // throws InvalidSpec
};

// Geometric ladder t, 2t, 4t, ... with t = 2x the median nearest-neighbor
// distance, extended past the map diameter so repeated top-level regroups
// can collapse to a single root. Bounded depth: O(log(diameter/spacing)).
std::vector<double> default_threshold_schedule(const TopologicalMap& map,
                                               ClusteringConfig::MetricDims dims);

// Per-band cluster memberships, for auditing the banding against an oracle.
// band_partitions[b] holds, after band b, every top-level cluster as its
// sorted list of map-node ids; clusters sorted by first member.
struct BuildTrace {
    std::vector<std::vector<std::vector<std::string>>> band_partitions;
};

class SemanticForest {
public:
    bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }
    const ForestNode& node(const std::string& id) const;  // throws UnknownNode
    const std::map<std::string, ForestNode>& nodes() const { return nodes_; }
    const std::vector<std::string>& roots() const { return roots_; }
    const std::map<std::string, std::string>& leaf_index() const { return leaf_index_; }
    const std::string& map_digest() const { return map_digest_; }

    // Leaf -> root inclusive, consecutive ids in child -> parent relation.
    // Throws NotALeaf / UnknownNode.
    std::vector<std::string> chain(const std::string& leaf_id) const;

    // Sorted map-node ids of all leaves under `id` (the node itself if leaf).
    std::vector<std::string> leaves_under(const std::string& id) const;

    int depth() const;  // longest leaf -> root chain length
    bool summarized() const;
    std::size_t leaf_count() const { return leaf_index_.size(); }

    void set_summary(const std::string& id, std::string summary);

    // Canonical text form (doubles at 17 significant digits, exact).
    std::string save() const;
    // Validates every structural invariant, including the centroid law;
    // rejects with InvariantViolation. Optionally pins the source map digest.
    static SemanticForest load(std::string_view bytes,
                               const std::string& expected_map_digest = "");
    static SemanticForest load_file(const std::string& path,
                                    const std::string& expected_map_digest = "");
    void save_file(const std::string& path) const;
    std::string digest() const;

    friend SemanticForest build_structure(const TopologicalMap&, const ClusteringConfig&,
                                          BuildTrace*);

private:
    void validate() const;
    void rebuild_indexes();

    std::map<std::string, ForestNode> nodes_;
    std::vector<std::string> roots_;                  // sorted by id
    std::map<std::string, std::string> leaf_index_;   // map node id -> leaf forest id
    std::string map_digest_;
};

// Clusters map nodes into the banded hierarchy; summaries stay unset on
// non-leaves (leaves carry their captions). Throws EmptyMap.
SemanticForest build_structure(const TopologicalMap& map, const ClusteringConfig& cfg,
                               BuildTrace* trace = nullptr);

struct SummarizeOptions {
    int budget = 65536;   // max tokens per generated summary
    int concurrency = 8;  // bounded fan-out within one level
};

// Fills every non-leaf summary bottom-up; nodes of one level run through the
// summarizer concurrently, levels synchronize. Deterministic for a
// deterministic summarizer. Errors carry the failing node id.
SemanticForest summarize_forest(SemanticForest forest, Summarizer& summarizer,
                                const SummarizeOptions& options = {});

}  // namespace erag
