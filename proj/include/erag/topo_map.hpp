#pragma once
// Topological experience graph: pose-stamped caption nodes joined by
// traversability edges, plus node-level shortest-path planning and the
// line-delimited text persistence format.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "erag/error.hpp"

namespace erag {

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;  // radians, normalized to [-pi, pi)

    bool finite() const;
};

// Maps any finite angle into [-pi, pi).
double normalize_yaw(double yaw);

struct MapNode {
    std::string id;
    Pose pose;
    std::optional<std::string> image_ref;  // carried opaquely, never dereferenced
    std::string caption;
};

double euclidean_distance(const Pose& a, const Pose& b);

class TopologicalMap {
public:
    using EdgeKey = std::pair<std::string, std::string>;  // ordered a < b

    // Throws DuplicateId, InvalidPose, InvariantViolation (empty id/caption).
    void add_node(MapNode node);

    // Cost defaults to the Euclidean distance between the endpoint poses.
    // Throws UnknownNode, SelfLoop, NegativeCost, DuplicateId (edge exists).
    void add_edge(const std::string& a, const std::string& b,
                  std::optional<double> cost = std::nullopt);

    bool has_node(const std::string& id) const;
    const MapNode& node(const std::string& id) const;  // throws UnknownNode

    const std::map<std::string, MapNode>& nodes() const { return nodes_; }
    const std::map<EdgeKey, double>& edges() const { return edges_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    // Neighbors of `id` with edge costs, sorted by neighbor id.
    std::vector<std::pair<std::string, double>> neighbors(const std::string& id) const;

    // Minimal-cost node path from `from` to `to`; among equal-cost paths the
    // lexicographically smallest id sequence wins. Throws Unreachable.
    std::vector<std::string> shortest_path(const std::string& from,
                                           const std::string& to) const;

    // True iff every consecutive pair in `path` is an edge of this map.
    bool valid_path(const std::vector<std::string>& path) const;
    double path_cost(const std::vector<std::string>& path) const;

    // Canonical text form: header, nodes sorted by id, edges sorted by key,
    // numbers at 9 significant digits. load(save(m)) == m on canonical maps.
    std::string save() const;
    static TopologicalMap load(std::string_view bytes);

    static TopologicalMap load_file(const std::string& path);
    void save_file(const std::string& path) const;

    // FNV-1a digest of the canonical serialization; binds forests to maps.
    std::string digest() const;

    bool operator==(const TopologicalMap& other) const;

private:
    std::map<std::string, MapNode> nodes_;
    std::map<EdgeKey, double> edges_;
    std::map<std::string, std::vector<std::pair<std::string, double>>> adjacency_;
};

}  // namespace erag
