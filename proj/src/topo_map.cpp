#include "erag/topo_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "erag/text.hpp"
#include "json.hpp"

namespace erag {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace

bool Pose::finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(yaw);
}

double normalize_yaw(double yaw) {
    double r = std::fmod(yaw + kPi, 2.0 * kPi);
    if (r < 0) r += 2.0 * kPi;
    return r - kPi;
}

double euclidean_distance(const Pose& a, const Pose& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void TopologicalMap::add_node(MapNode node) {
    if (node.id.empty()) {
        throw Error(ErrorCode::InvariantViolation, "node id must be nonempty");
    }
    if (node.caption.empty()) {
        throw Error(ErrorCode::InvariantViolation, "node '" + node.id + "' has an empty caption");
    }
    if (!node.pose.finite()) {
        throw Error(ErrorCode::InvalidPose, "node '" + node.id + "' has a non-finite pose");
    }
    if (nodes_.count(node.id)) {
        throw Error(ErrorCode::DuplicateId, "node '" + node.id + "' already present");
    }
    node.pose.yaw = normalize_yaw(node.pose.yaw);
    adjacency_.emplace(node.id, std::vector<std::pair<std::string, double>>{});
    nodes_.emplace(node.id, std::move(node));
}

void TopologicalMap::add_edge(const std::string& a, const std::string& b,
                              std::optional<double> cost) {
    if (a == b) {
        throw Error(ErrorCode::SelfLoop, "edge endpoints are both '" + a + "'");
    }
    if (!nodes_.count(a)) throw Error(ErrorCode::UnknownNode, "edge endpoint '" + a + "'");
    if (!nodes_.count(b)) throw Error(ErrorCode::UnknownNode, "edge endpoint '" + b + "'");

    const double c = cost ? *cost : euclidean_distance(nodes_.at(a).pose, nodes_.at(b).pose);
    if (!(c >= 0.0)) {
        throw Error(ErrorCode::NegativeCost,
                    "edge " + a + "-" + b + " has cost " + std::to_string(c));
    }
    EdgeKey key = a < b ? EdgeKey{a, b} : EdgeKey{b, a};
    if (edges_.count(key)) {
        throw Error(ErrorCode::DuplicateId, "edge " + key.first + "-" + key.second + " already present");
    }
    edges_.emplace(key, c);
    adjacency_[a].emplace_back(b, c);
    adjacency_[b].emplace_back(a, c);
    std::sort(adjacency_[a].begin(), adjacency_[a].end());
    std::sort(adjacency_[b].begin(), adjacency_[b].end());
}

bool TopologicalMap::has_node(const std::string& id) const { return nodes_.count(id) > 0; }

const MapNode& TopologicalMap::node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "node '" + id + "'");
    return it->second;
}

std::vector<std::pair<std::string, double>> TopologicalMap::neighbors(const std::string& id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) throw Error(ErrorCode::UnknownNode, "node '" + id + "'");
    return it->second;
}

std::vector<std::string> TopologicalMap::shortest_path(const std::string& from,
                                                       const std::string& to) const {
    if (!has_node(from)) throw Error(ErrorCode::UnknownNode, "node '" + from + "'");
    if (!has_node(to)) throw Error(ErrorCode::UnknownNode, "node '" + to + "'");

    // Label-setting Dijkstra over (cost, id-sequence) labels. The queue orders
    // equal costs by the full path sequence, so the first finalized label per
    // node is the minimal-cost lexicographically-smallest path to it.
    struct Label {
        double cost;
        std::vector<std::string> path;
    };
    struct LabelGreater {
        bool operator()(const Label& lhs, const Label& rhs) const {
            if (lhs.cost != rhs.cost) return lhs.cost > rhs.cost;
            return std::lexicographical_compare(rhs.path.begin(), rhs.path.end(),
                                                lhs.path.begin(), lhs.path.end());
        }
    };
    std::priority_queue<Label, std::vector<Label>, LabelGreater> queue;
    std::map<std::string, bool> finalized;
    queue.push(Label{0.0, {from}});

    while (!queue.empty()) {
        Label label = queue.top();
        queue.pop();
        const std::string& current = label.path.back();
        if (finalized[current]) continue;
        finalized[current] = true;
        if (current == to) return label.path;
        for (const auto& [next, cost] : adjacency_.at(current)) {
            if (finalized[next]) continue;
            Label extended{label.cost + cost, label.path};
            extended.path.push_back(next);
            queue.push(std::move(extended));
        }
    }
    throw Error(ErrorCode::Unreachable, "no path from '" + from + "' to '" + to + "'");
}

bool TopologicalMap::valid_path(const std::vector<std::string>& path) const {
    if (path.empty()) return false;
    for (const auto& id : path) {
        if (!has_node(id)) return false;
    }
    for (std::size_t i = 1; i < path.size(); ++i) {
        EdgeKey key = path[i - 1] < path[i] ? EdgeKey{path[i - 1], path[i]}
                                            : EdgeKey{path[i], path[i - 1]};
        if (!edges_.count(key)) return false;
    }
    return true;
}

double TopologicalMap::path_cost(const std::vector<std::string>& path) const {
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        EdgeKey key = path[i - 1] < path[i] ? EdgeKey{path[i - 1], path[i]}
                                            : EdgeKey{path[i], path[i - 1]};
        auto it = edges_.find(key);
        if (it == edges_.end()) {
            throw Error(ErrorCode::UnknownNode,
                        "path step " + path[i - 1] + "-" + path[i] + " is not an edge");
        }
        total += it->second;
    }
    return total;
}

std::string TopologicalMap::save() const {
    std::ostringstream out;
    out << "{\"format\":\"erag-map\",\"version\":1}\n";
    for (const auto& [id, node] : nodes_) {
        out << "{\"type\":\"node\",\"id\":" << quote(id)
            << ",\"x\":" << format_g(node.pose.x, 9)
            << ",\"y\":" << format_g(node.pose.y, 9)
            << ",\"z\":" << format_g(node.pose.z, 9)
            << ",\"yaw\":" << format_g(node.pose.yaw, 9);
        if (node.image_ref) out << ",\"image_ref\":" << quote(*node.image_ref);
        out << ",\"caption\":" << quote(node.caption) << "}\n";
    }
    for (const auto& [key, cost] : edges_) {
        out << "{\"type\":\"edge\",\"a\":" << quote(key.first)
            << ",\"b\":" << quote(key.second)
            << ",\"cost\":" << format_g(cost, 9) << "}\n";
    }
    return out.str();
}

TopologicalMap TopologicalMap::load(std::string_view bytes) {
    TopologicalMap map;
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
                if (record.value("format", "") != "erag-map" || record.value("version", 0) != 1) {
                    throw Error(ErrorCode::ParseError, "expected erag-map v1 header");
                }
                header_seen = true;
                continue;
            }
            const std::string type = record.value("type", "");
            if (type == "node") {
                MapNode node;
                node.id = record.at("id").get<std::string>();
                node.pose.x = record.at("x").get<double>();
                node.pose.y = record.at("y").get<double>();
                node.pose.z = record.at("z").get<double>();
                node.pose.yaw = record.at("yaw").get<double>();
                if (record.contains("image_ref")) {
                    node.image_ref = record.at("image_ref").get<std::string>();
                }
                node.caption = record.at("caption").get<std::string>();
                map.add_node(std::move(node));
            } else if (type == "edge") {
                std::optional<double> cost;
                if (record.contains("cost")) cost = record.at("cost").get<double>();
                map.add_edge(record.at("a").get<std::string>(),
                             record.at("b").get<std::string>(), cost);
            } else {
                throw Error(ErrorCode::ParseError, "unknown record type '" + type + "'");
            }
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) {
        throw Error(ErrorCode::ParseError, "missing erag-map header");
    }
    return map;
}

TopologicalMap TopologicalMap::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open map file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load(buffer.str());
}

void TopologicalMap::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write map file '" + path + "'");
    out << save();
}

std::string TopologicalMap::digest() const { return fnv1a_hex(save()); }

bool TopologicalMap::operator==(const TopologicalMap& other) const {
    if (edges_ != other.edges_) return false;
    if (nodes_.size() != other.nodes_.size()) return false;
    for (const auto& [id, node] : nodes_) {
        auto it = other.nodes_.find(id);
        if (it == other.nodes_.end()) return false;
        const MapNode& o = it->second;
        if (node.pose.x != o.pose.x || node.pose.y != o.pose.y || node.pose.z != o.pose.z ||
            node.pose.yaw != o.pose.yaw || node.image_ref != o.image_ref ||
            node.caption != o.caption) {
            return false;
        }
    }
    return true;
}

}  // namespace erag
