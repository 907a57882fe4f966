#include "erag/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "erag/text.hpp"
#include "json.hpp"

namespace erag {

namespace {

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

struct Point {
    double x, y, z;
};

double point_distance(const Point& a, const Point& b, ClusteringConfig::MetricDims dims) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    if (dims == ClusteringConfig::MetricDims::xy) return std::sqrt(dx * dx + dy * dy);
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// A top-level cluster while banding runs. Leaves stay sorted by map-node id
// with positions aligned to that order.
struct WorkCluster {
    std::string node_id;
    std::vector<std::string> leaves;
    std::vector<Point> positions;
    Point centroid{0, 0, 0};
    int level = 0;
};

// Linkage between two clusters over their descendant leaf positions. The
// accumulation order is pinned (outer = cluster with the smaller first leaf,
// both sides ascending by leaf id) so independent implementations agree
// bit-for-bit.
double linkage_distance(const WorkCluster& a, const WorkCluster& b,
                        ClusteringConfig::Linkage linkage, ClusteringConfig::MetricDims dims) {
    const WorkCluster& outer = a.leaves.front() <= b.leaves.front() ? a : b;
    const WorkCluster& inner = a.leaves.front() <= b.leaves.front() ? b : a;
    double acc = linkage == ClusteringConfig::Linkage::single
                     ? std::numeric_limits<double>::infinity()
                     : linkage == ClusteringConfig::Linkage::complete ? 0.0 : 0.0;
    for (const Point& p : outer.positions) {
        for (const Point& q : inner.positions) {
            const double d = point_distance(p, q, dims);
            switch (linkage) {
                case ClusteringConfig::Linkage::single: acc = std::min(acc, d); break;
                case ClusteringConfig::Linkage::complete: acc = std::max(acc, d); break;
                case ClusteringConfig::Linkage::average: acc += d; break;
            }
        }
    }
    if (linkage == ClusteringConfig::Linkage::average) {
        acc /= static_cast<double>(outer.positions.size()) * static_cast<double>(inner.positions.size());
    }
    return acc;
}

void merge_sorted_leaves(const WorkCluster& a, const WorkCluster& b,
                         std::vector<std::string>& leaves, std::vector<Point>& positions) {
    leaves.clear();
    positions.clear();
    leaves.reserve(a.leaves.size() + b.leaves.size());
    positions.reserve(a.leaves.size() + b.leaves.size());
    std::size_t i = 0, j = 0;
    while (i < a.leaves.size() || j < b.leaves.size()) {
        const bool take_a =
            j >= b.leaves.size() || (i < a.leaves.size() && a.leaves[i] < b.leaves[j]);
        if (take_a) {
            leaves.push_back(a.leaves[i]);
            positions.push_back(a.positions[i]);
            ++i;
        } else {
            leaves.push_back(b.leaves[j]);
            positions.push_back(b.positions[j]);
            ++j;
        }
    }
}

}  // namespace

void ClusteringConfig::validate() const {
    if (threshold_schedule.empty()) {
        throw Error(ErrorCode::InvalidSpec, "threshold schedule must be nonempty");
    }
    for (std::size_t i = 0; i < threshold_schedule.size(); ++i) {
        if (!(threshold_schedule[i] > 0) || !std::isfinite(threshold_schedule[i])) {
            throw Error(ErrorCode::InvalidSpec, "threshold schedule entries must be positive");
        }
        if (i > 0 && !(threshold_schedule[i] > threshold_schedule[i - 1])) {
            throw Error(ErrorCode::InvalidSpec, "threshold schedule must be strictly increasing");
        }
    }
    if (max_children < 2) {
        throw Error(ErrorCode::InvalidSpec, "max_children must be at least 2");
    }
}

std::vector<double> default_threshold_schedule(const TopologicalMap& map,
                                               ClusteringConfig::MetricDims dims) {
    std::vector<Point> points;
    points.reserve(map.size());
    for (const auto& [id, node] : map.nodes()) {
        points.push_back({node.pose.x, node.pose.y, node.pose.z});
    }
    if (points.size() <= 1) return {1.0};

    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    double diameter = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double d = point_distance(points[i], points[j], dims);
            nearest[i] = std::min(nearest[i], d);
            nearest[j] = std::min(nearest[j], d);
            diameter = std::max(diameter, d);
        }
    }
    std::sort(nearest.begin(), nearest.end());
    double base = 2.0 * nearest[nearest.size() / 2];
    if (!(base > 0)) base = 1.0;
    if (!(diameter > 0)) diameter = base;

    // Climb past the diameter, then keep doubling a few more bands so that
    // oversize-split top clusters regroup into a single root.
    std::vector<double> schedule;
    double t = base;
    while (t < diameter && schedule.size() < 36) {
        schedule.push_back(t);
        t *= 2.0;
    }
    for (int extra = 0; extra < 4; ++extra) {
        schedule.push_back(t);
        t *= 2.0;
    }
    return schedule;
}

// --- SemanticForest ----------------------------------------------------------

const ForestNode& SemanticForest::node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "forest node '" + id + "'");
    return it->second;
}

std::vector<std::string> SemanticForest::chain(const std::string& leaf_id) const {
    const ForestNode* current = &node(leaf_id);
    if (!current->is_leaf()) {
        throw Error(ErrorCode::NotALeaf, "forest node '" + leaf_id + "' is not a leaf");
    }
    std::vector<std::string> ids{current->id};
    while (current->parent) {
        current = &node(*current->parent);
        ids.push_back(current->id);
    }
    return ids;
}

std::vector<std::string> SemanticForest::leaves_under(const std::string& id) const {
    std::vector<std::string> out;
    std::vector<const ForestNode*> stack{&node(id)};
    while (!stack.empty()) {
        const ForestNode* n = stack.back();
        stack.pop_back();
        if (n->is_leaf()) {
            out.push_back(*n->map_node);
            continue;
        }
        for (const auto& child : n->children) stack.push_back(&node(child));
    }
    std::sort(out.begin(), out.end());
    return out;
}

int SemanticForest::depth() const {
    int depth = 0;
    for (const auto& [map_id, leaf_id] : leaf_index_) {
        int length = 1;
        const ForestNode* n = &node(leaf_id);
        while (n->parent) {
            n = &node(*n->parent);
            ++length;
        }
        depth = std::max(depth, length);
    }
    return depth;
}

bool SemanticForest::summarized() const {
    for (const auto& [id, n] : nodes_) {
        if (n.summary.empty()) return false;
    }
    return !nodes_.empty();
}

void SemanticForest::set_summary(const std::string& id, std::string summary) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "forest node '" + id + "'");
    it->second.summary = std::move(summary);
}

void SemanticForest::rebuild_indexes() {
    roots_.clear();
    leaf_index_.clear();
    for (const auto& [id, n] : nodes_) {
        if (!n.parent) roots_.push_back(id);
        if (n.is_leaf()) {
            if (!n.map_node) {
                throw Error(ErrorCode::InvariantViolation, "leaf '" + id + "' lacks a map node");
            }
            if (!leaf_index_.emplace(*n.map_node, id).second) {
                throw Error(ErrorCode::InvariantViolation,
                            "map node '" + *n.map_node + "' appears in two leaves");
            }
        }
    }
}

void SemanticForest::validate() const {
    if (nodes_.empty() || roots_.empty()) {
        throw Error(ErrorCode::InvariantViolation, "forest has no nodes or no roots");
    }
    std::size_t reachable = 0;
    for (const auto& [id, n] : nodes_) {
        if (n.is_leaf() != n.map_node.has_value()) {
            throw Error(ErrorCode::InvariantViolation,
                        "node '" + id + "' violates leaf <-> map_node equivalence");
        }
        if (n.is_leaf() && n.level != 0) {
            throw Error(ErrorCode::InvariantViolation, "leaf '" + id + "' has nonzero level");
        }
        if (n.is_leaf() && n.summary.empty()) {
            throw Error(ErrorCode::InvariantViolation, "leaf '" + id + "' has no caption");
        }
        if (!n.is_leaf()) {
            if (!std::is_sorted(n.children.begin(), n.children.end()) ||
                std::adjacent_find(n.children.begin(), n.children.end()) != n.children.end()) {
                throw Error(ErrorCode::InvariantViolation,
                            "node '" + id + "' children not sorted/unique");
            }
            int max_child_level = -1;
            for (const auto& child_id : n.children) {
                auto it = nodes_.find(child_id);
                if (it == nodes_.end()) {
                    throw Error(ErrorCode::InvariantViolation,
                                "node '" + id + "' references missing child '" + child_id + "'");
                }
                if (!it->second.parent || *it->second.parent != id) {
                    throw Error(ErrorCode::InvariantViolation,
                                "child '" + child_id + "' does not point back to '" + id + "'");
                }
                max_child_level = std::max(max_child_level, it->second.level);
            }
            if (n.level != max_child_level + 1) {
                throw Error(ErrorCode::InvariantViolation,
                            "node '" + id + "' level is not 1 + max child level");
            }
            // Centroid law: mean of descendant leaf positions, 1e-9 per axis.
            auto leaves = leaves_under(id);
            double sx = 0, sy = 0, sz = 0;
            for (const auto& leaf_map_id : leaves) {
                const ForestNode& leaf = node(leaf_index_.at(leaf_map_id));
                sx += leaf.centroid.x;
                sy += leaf.centroid.y;
                sz += leaf.centroid.z;
            }
            const double count = static_cast<double>(leaves.size());
            if (std::abs(n.centroid.x - sx / count) > 1e-9 ||
                std::abs(n.centroid.y - sy / count) > 1e-9 ||
                std::abs(n.centroid.z - sz / count) > 1e-9) {
                throw Error(ErrorCode::InvariantViolation,
                            "node '" + id + "' centroid is not the mean of its leaves");
            }
        }
        if (n.parent && !nodes_.count(*n.parent)) {
            throw Error(ErrorCode::InvariantViolation,
                        "node '" + id + "' references missing parent '" + *n.parent + "'");
        }
    }
    // Reachability from roots covers every node exactly once (acyclic forest).
    std::vector<const ForestNode*> stack;
    for (const auto& root : roots_) stack.push_back(&node(root));
    while (!stack.empty()) {
        const ForestNode* n = stack.back();
        stack.pop_back();
        ++reachable;
        for (const auto& child : n->children) stack.push_back(&node(child));
    }
    if (reachable != nodes_.size()) {
        throw Error(ErrorCode::InvariantViolation, "forest has unreachable nodes or cycles");
    }
}

std::string SemanticForest::save() const {
    std::ostringstream out;
    out << "{\"format\":\"erag-forest\",\"version\":1,\"map_digest\":" << quote(map_digest_)
        << "}\n";
    for (const auto& [id, n] : nodes_) {
        out << "{\"type\":\"node\",\"id\":" << quote(id) << ",\"level\":" << n.level
            << ",\"children\":[";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            if (i > 0) out << ",";
            out << quote(n.children[i]);
        }
        out << "],\"parent\":" << (n.parent ? quote(*n.parent) : "null")
            << ",\"map_node\":" << (n.map_node ? quote(*n.map_node) : "null")
            << ",\"x\":" << format_g(n.centroid.x, 17) << ",\"y\":" << format_g(n.centroid.y, 17)
            << ",\"z\":" << format_g(n.centroid.z, 17)
            << ",\"yaw\":" << format_g(n.centroid.yaw, 17)
            << ",\"summary\":" << quote(n.summary) << "}\n";
    }
    return out.str();
}

SemanticForest SemanticForest::load(std::string_view bytes,
                                    const std::string& expected_map_digest) {
    SemanticForest forest;
    std::istringstream in{std::string(bytes)};
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!header_seen) {
                if (record.value("format", "") != "erag-forest" ||
                    record.value("version", 0) != 1) {
                    throw Error(ErrorCode::ParseError, "expected erag-forest v1 header");
                }
                forest.map_digest_ = record.value("map_digest", "");
                header_seen = true;
                continue;
            }
            if (record.value("type", "") != "node") {
                throw Error(ErrorCode::ParseError, "unknown record type");
            }
            ForestNode n;
            n.id = record.at("id").get<std::string>();
            n.level = record.at("level").get<int>();
            n.children = record.at("children").get<std::vector<std::string>>();
            if (!record.at("parent").is_null()) n.parent = record.at("parent").get<std::string>();
            if (!record.at("map_node").is_null()) {
                n.map_node = record.at("map_node").get<std::string>();
            }
            n.centroid.x = record.at("x").get<double>();
            n.centroid.y = record.at("y").get<double>();
            n.centroid.z = record.at("z").get<double>();
            n.centroid.yaw = record.at("yaw").get<double>();
            n.summary = record.at("summary").get<std::string>();
            if (!forest.nodes_.emplace(n.id, n).second) {
                throw Error(ErrorCode::ParseError, "duplicate forest node '" + n.id + "'");
            }
        } catch (const Error&) {
            throw;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) throw Error(ErrorCode::ParseError, "missing erag-forest header");
    if (!expected_map_digest.empty() && forest.map_digest_ != expected_map_digest) {
        throw Error(ErrorCode::DigestMismatch,
                    "forest was built from map digest " + forest.map_digest_ +
                        ", expected " + expected_map_digest);
    }
    forest.rebuild_indexes();
    forest.validate();
    return forest;
}

SemanticForest SemanticForest::load_file(const std::string& path,
                                         const std::string& expected_map_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open forest file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load(buffer.str(), expected_map_digest);
}

void SemanticForest::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write forest file '" + path + "'");
    out << save();
}

std::string SemanticForest::digest() const { return fnv1a_hex(save()); }

// --- build_structure ---------------------------------------------------------

namespace {

// Recursive farthest-point bisection: splits an oversized merge group into
// sibling parts of at most max_children members each. Members of size-1 parts
// pass through unchanged.
void split_group(std::vector<WorkCluster>& group, int max_children,
                 ClusteringConfig::MetricDims dims,
                 const std::function<WorkCluster(std::vector<WorkCluster>&)>& emit,
                 std::vector<WorkCluster>& out) {
    if (group.size() == 1) {
        out.push_back(std::move(group.front()));
        return;
    }
    if (static_cast<int>(group.size()) <= max_children) {
        out.push_back(emit(group));
        return;
    }
    std::size_t seed_a = 0, seed_b = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            const double d = point_distance(group[i].centroid, group[j].centroid, dims);
            const auto& lo = std::min(group[i].node_id, group[j].node_id);
            const auto& hi = std::max(group[i].node_id, group[j].node_id);
            if (d > best ||
                (d == best && std::make_pair(lo, hi) <
                                  std::make_pair(std::min(group[seed_a].node_id, group[seed_b].node_id),
                                                 std::max(group[seed_a].node_id, group[seed_b].node_id)))) {
                best = d;
                seed_a = i;
                seed_b = j;
            }
        }
    }
    if (group[seed_b].node_id < group[seed_a].node_id) std::swap(seed_a, seed_b);
    const Point anchor_a = group[seed_a].centroid;
    const Point anchor_b = group[seed_b].centroid;
    std::vector<WorkCluster> part_a, part_b;
    part_a.push_back(std::move(group[seed_a]));
    part_b.push_back(std::move(group[seed_b]));
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (i == seed_a || i == seed_b) continue;
        const double da = point_distance(group[i].centroid, anchor_a, dims);
        const double db = point_distance(group[i].centroid, anchor_b, dims);
        (da <= db ? part_a : part_b).push_back(std::move(group[i]));
    }
    split_group(part_a, max_children, dims, emit, out);
    split_group(part_b, max_children, dims, emit, out);
}

}  // namespace

SemanticForest build_structure(const TopologicalMap& map, const ClusteringConfig& cfg,
                               BuildTrace* trace) {
    if (map.empty()) throw Error(ErrorCode::EmptyMap, "cannot build a forest over an empty map");
    cfg.validate();

    SemanticForest forest;
    forest.map_digest_ = map.digest();

    std::vector<WorkCluster> clusters;
    clusters.reserve(map.size());
    for (const auto& [id, map_node] : map.nodes()) {
        ForestNode leaf;
        leaf.id = id;
        leaf.level = 0;
        leaf.map_node = id;
        leaf.centroid = map_node.pose;
        leaf.summary = map_node.caption;
        forest.nodes_.emplace(id, std::move(leaf));

        WorkCluster c;
        c.node_id = id;
        c.leaves = {id};
        c.positions = {{map_node.pose.x, map_node.pose.y, map_node.pose.z}};
        c.centroid = c.positions.front();
        c.level = 0;
        clusters.push_back(std::move(c));
    }

    long cluster_counter = 0;
    auto fresh_id = [&]() {
        while (true) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "c%06ld", ++cluster_counter);
            if (!forest.nodes_.count(buf)) return std::string(buf);
        }
    };

    // Builds the parent node for a merge-group part and returns its cluster.
    auto emit_node = [&](std::vector<WorkCluster>& members) {
        WorkCluster merged;
        merged.node_id = fresh_id();
        merged.level = 0;
        std::vector<std::string> child_ids;
        for (const auto& m : members) {
            merged.level = std::max(merged.level, m.level + 1);
            child_ids.push_back(m.node_id);
            std::vector<std::string> leaves;
            std::vector<Point> positions;
            merge_sorted_leaves(merged, m, leaves, positions);
            merged.leaves = std::move(leaves);
            merged.positions = std::move(positions);
        }
        std::sort(child_ids.begin(), child_ids.end());

        double sx = 0, sy = 0, sz = 0;
        for (const Point& p : merged.positions) {
            sx += p.x;
            sy += p.y;
            sz += p.z;
        }
        const double count = static_cast<double>(merged.positions.size());
        merged.centroid = {sx / count, sy / count, sz / count};

        ForestNode parent;
        parent.id = merged.node_id;
        parent.level = merged.level;
        parent.children = child_ids;
        parent.centroid.x = merged.centroid.x;
        parent.centroid.y = merged.centroid.y;
        parent.centroid.z = merged.centroid.z;
        parent.centroid.yaw = 0.0;
        for (const auto& child_id : child_ids) {
            forest.nodes_.at(child_id).parent = merged.node_id;
        }
        forest.nodes_.emplace(parent.id, std::move(parent));
        return merged;
    };

    for (double threshold : cfg.threshold_schedule) {
        if (clusters.size() >= 2) {
            // Merge groups of current clusters under this band's cutoff.
            struct Item {
                std::vector<std::size_t> members;  // indexes into `clusters`
                WorkCluster combined;              // leaves/positions of the union
                bool active = true;
            };
            std::vector<Item> items;
            items.reserve(clusters.size());
            for (std::size_t i = 0; i < clusters.size(); ++i) {
                items.push_back(Item{{i}, clusters[i], true});
            }
            const std::size_t m = items.size();
            std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = i + 1; j < m; ++j) {
                    dist[i][j] = linkage_distance(items[i].combined, items[j].combined,
                                                  cfg.linkage, cfg.metric_dims);
                }
            }
            while (true) {
                double best = std::numeric_limits<double>::infinity();
                std::size_t bi = m, bj = m;
                for (std::size_t i = 0; i < m; ++i) {
                    if (!items[i].active) continue;
                    for (std::size_t j = i + 1; j < m; ++j) {
                        if (!items[j].active) continue;
                        const double d = dist[i][j];
                        if (d > threshold) continue;
                        if (bi == m || d < best) {
                            best = d;
                            bi = i;
                            bj = j;
                        } else if (d == best) {
                            // Equal distances merge the lexicographically
                            // smallest (rep, rep) pair; rep = smallest leaf id.
                            auto key = [&](std::size_t x, std::size_t y) {
                                const auto& rx = items[x].combined.leaves.front();
                                const auto& ry = items[y].combined.leaves.front();
                                return rx <= ry ? std::make_pair(rx, ry) : std::make_pair(ry, rx);
                            };
                            if (key(i, j) < key(bi, bj)) {
                                bi = i;
                                bj = j;
                            }
                        }
                    }
                }
                if (bi == m) break;
                Item& lhs = items[bi];
                Item& rhs = items[bj];
                lhs.members.insert(lhs.members.end(), rhs.members.begin(), rhs.members.end());
                std::vector<std::string> leaves;
                std::vector<Point> positions;
                merge_sorted_leaves(lhs.combined, rhs.combined, leaves, positions);
                lhs.combined.leaves = std::move(leaves);
                lhs.combined.positions = std::move(positions);
                rhs.active = false;
                for (std::size_t x = 0; x < m; ++x) {
                    if (!items[x].active || x == bi) continue;
                    const double d = linkage_distance(items[bi].combined, items[x].combined,
                                                      cfg.linkage, cfg.metric_dims);
                    dist[std::min(x, bi)][std::max(x, bi)] = d;
                }
            }

            std::vector<WorkCluster> next;
            for (auto& item : items) {
                if (!item.active) continue;
                if (item.members.size() == 1) {
                    next.push_back(std::move(clusters[item.members.front()]));
                    continue;
                }
                std::vector<WorkCluster> group;
                group.reserve(item.members.size());
                for (std::size_t idx : item.members) group.push_back(std::move(clusters[idx]));
                std::sort(group.begin(), group.end(),
                          [](const WorkCluster& a, const WorkCluster& b) {
                              return a.node_id < b.node_id;
                          });
                split_group(group, cfg.max_children, cfg.metric_dims, emit_node, next);
            }
            clusters = std::move(next);
        }
        if (trace) {
            std::vector<std::vector<std::string>> partition;
            partition.reserve(clusters.size());
            for (const auto& c : clusters) partition.push_back(c.leaves);
            std::sort(partition.begin(), partition.end());
            trace->band_partitions.push_back(std::move(partition));
        }
    }

    forest.rebuild_indexes();
    forest.validate();
    return forest;
}

// --- summarize_forest ---------------------------------------------------------

SemanticForest summarize_forest(SemanticForest forest, Summarizer& summarizer,
                                const SummarizeOptions& options) {
    std::map<int, std::vector<std::string>> levels;
    for (const auto& [id, n] : forest.nodes()) {
        if (!n.is_leaf()) levels[n.level].push_back(id);
    }

    for (auto& [level, ids] : levels) {
        std::sort(ids.begin(), ids.end());
        std::vector<std::string> results(ids.size());
        std::vector<std::exception_ptr> errors(ids.size());
        std::atomic<std::size_t> cursor{0};

        auto worker = [&] {
            while (true) {
                const std::size_t idx = cursor.fetch_add(1);
                if (idx >= ids.size()) return;
                const ForestNode& n = forest.node(ids[idx]);
                try {
                    std::vector<std::string> child_summaries;
                    child_summaries.reserve(n.children.size());
                    for (const auto& child : n.children) {
                        child_summaries.push_back(forest.node(child).summary);
                    }
                    SummaryRequest req(std::move(child_summaries), level, options.budget);
                    results[idx] = summarizer.summarize(req);
                } catch (...) {
                    errors[idx] = std::current_exception();
                }
            }
        };

        const int worker_count =
            std::max(1, std::min<int>(options.concurrency, static_cast<int>(ids.size())));
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(worker_count));
        for (int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();

        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (errors[i]) {
                try {
                    std::rethrow_exception(errors[i]);
                } catch (const std::exception& e) {
                    throw Error(ErrorCode::SummarizerError,
                                "node '" + ids[i] + "': " + e.what());
                }
            }
        }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            forest.set_summary(ids[i], std::move(results[i]));
        }
    }
    return forest;
}

}  // namespace erag
