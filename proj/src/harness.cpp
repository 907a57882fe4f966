#include "erag/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "erag/text.hpp"
#include "json.hpp"

namespace erag {

namespace {

// All world randomness flows through this wrapper: raw mt19937_64 draws with
// explicit arithmetic, so generated worlds are bit-identical across standard
// library implementations.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return (engine_() >> 11) * (1.0 / 9007199254740992.0); }  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (int i = static_cast<int>(values.size()) - 1; i > 0; --i) {
            std::swap(values[static_cast<std::size_t>(i)],
                      values[static_cast<std::size_t>(uniform_int(i + 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
};

double quantize(double v) { return std::round(v * 10000.0) / 10000.0; }

}  // namespace

const char* edge_policy_name(EdgePolicy policy) {
    return policy == EdgePolicy::exploration_chain ? "exploration_chain" : "proximity_radius";
}

EdgePolicy parse_edge_policy(const std::string& name) {
    if (name == "exploration_chain") return EdgePolicy::exploration_chain;
    if (name == "proximity_radius") return EdgePolicy::proximity_radius;
    throw Error(ErrorCode::InvalidSpec, "unknown edge policy '" + name + "'");
}

void WorldSpec::validate() const {
    if (node_count < 1) throw Error(ErrorCode::InvalidSpec, "node_count must be at least 1");
    if (!(extent > 0)) throw Error(ErrorCode::InvalidSpec, "extent must be positive");
    if (regions.empty()) throw Error(ErrorCode::InvalidSpec, "at least one region required");
    std::unordered_set<std::string> labels, categories;
    for (const auto& region : regions) {
        if (region.label.empty() || !labels.insert(region.label).second) {
            throw Error(ErrorCode::InvalidSpec, "region labels must be nonempty and unique");
        }
        if (region.categories.empty()) {
            throw Error(ErrorCode::InvalidSpec, "region '" + region.label + "' has no categories");
        }
        for (const auto& cat : region.categories) {
            if (cat.captions.empty()) {
                throw Error(ErrorCode::InvalidSpec, "category '" + cat.name + "' has no captions");
            }
            if (!categories.insert(cat.name).second) {
                throw Error(ErrorCode::InvalidSpec, "duplicate category '" + cat.name + "'");
            }
        }
    }
    for (const auto& suite : implicit_suites) {
        if (!categories.count(suite.gold_category)) {
            throw Error(ErrorCode::InvalidSpec,
                        "implicit suite targets unknown category '" + suite.gold_category + "'");
        }
        if (suite.queries.empty()) {
            throw Error(ErrorCode::InvalidSpec, "implicit suite has no queries");
        }
    }
    if (explicit_query_count > 0 && (phrase_adjectives.empty() || phrase_nouns.empty())) {
        throw Error(ErrorCode::InvalidSpec, "explicit queries need phrase word pools");
    }
}

std::string WorldSpec::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["node_count"] = node_count;
    j["extent"] = extent;
    j["edge_policy"] = edge_policy_name(edge_policy);
    j["proximity_radius"] = proximity_radius;
    j["explicit_query_count"] = explicit_query_count;
    j["phrase_adjectives"] = phrase_adjectives;
    j["phrase_nouns"] = phrase_nouns;
    j["global_queries"] = global_queries;
    j["regions"] = nlohmann::json::array();
    for (const auto& region : regions) {
        nlohmann::json cats = nlohmann::json::array();
        for (const auto& cat : region.categories) {
            cats.push_back({{"name", cat.name}, {"role", cat.role}, {"captions", cat.captions}});
        }
        j["regions"].push_back({{"label", region.label}, {"categories", cats}});
    }
    j["implicit_suites"] = nlohmann::json::array();
    for (const auto& suite : implicit_suites) {
        j["implicit_suites"].push_back(
            {{"gold_category", suite.gold_category}, {"queries", suite.queries}});
    }
    return j.dump(2);
}

WorldSpec WorldSpec::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("world spec: ") + e.what());
    }
    try {
        WorldSpec spec;
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.node_count = j.value("node_count", 50);
        spec.extent = j.value("extent", 100.0);
        spec.edge_policy = parse_edge_policy(j.value("edge_policy", "exploration_chain"));
        spec.proximity_radius = j.value("proximity_radius", 0.0);
        spec.explicit_query_count = j.value("explicit_query_count", 0);
        if (j.contains("phrase_adjectives")) {
            spec.phrase_adjectives = j["phrase_adjectives"].get<std::vector<std::string>>();
        }
        if (j.contains("phrase_nouns")) {
            spec.phrase_nouns = j["phrase_nouns"].get<std::vector<std::string>>();
        }
        if (j.contains("global_queries")) {
            spec.global_queries = j["global_queries"].get<std::vector<std::string>>();
        }
        for (const auto& r : j.value("regions", nlohmann::json::array())) {
            RegionSpec region;
            region.label = r.at("label").get<std::string>();
            for (const auto& c : r.value("categories", nlohmann::json::array())) {
                CategorySpec cat;
                cat.name = c.at("name").get<std::string>();
                cat.role = c.value("role", "filler");
                cat.captions = c.at("captions").get<std::vector<std::string>>();
                region.categories.push_back(std::move(cat));
            }
            spec.regions.push_back(std::move(region));
        }
        for (const auto& s : j.value("implicit_suites", nlohmann::json::array())) {
            ImplicitSuiteSpec suite;
            suite.gold_category = s.at("gold_category").get<std::string>();
            suite.queries = s.at("queries").get<std::vector<std::string>>();
            spec.implicit_suites.push_back(std::move(suite));
        }
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("world spec: ") + e.what());
    }
}

WorldSpec WorldSpec::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open world spec '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

WorldSpec WorldSpec::benchmark(std::uint64_t seed, int node_count) {
    WorldSpec spec;
    spec.seed = seed;
    spec.node_count = node_count;
    spec.extent = 100.0;
    spec.edge_policy = EdgePolicy::exploration_chain;

    RegionSpec market;
    market.label = "market";
    market.categories.push_back(CategorySpec{
        "vendor_counter",
        "implicit_gold",
        {
            "a busy service counter by the market stalls where visitors buy bottled drinks, "
            "hot coffee, fresh snacks and small souvenirs from a cheerful vendor at the register",
            "a staffed kiosk near the market stalls where customers buy cold drinks, roasted "
            "coffee, packaged snacks and painted souvenirs across a wooden counter from the vendor",
            "a long trade counter beside the market stalls where shoppers buy chilled drinks, "
            "brewed coffee, salty snacks and carved souvenirs paying the vendor directly",
        }});
    market.categories.push_back(CategorySpec{"water_fountain",
                                             "implicit_trap",
                                             {
                                                 "a fountain of drinks",
                                                 "a stand of snacks",
                                                 "a case of souvenirs",
                                                 "a pot of coffee",
                                             }});
    market.categories.push_back(CategorySpec{
        "market_bench",
        "filler",
        {
            "a shaded wooden bench beside the busy market stalls under a striped awning",
            "a cobbled walkway through the market stalls lined with crates and empty pallets",
            "a painted notice board near the market stalls listing prices and opening hours",
        }});
    spec.regions.push_back(std::move(market));

    RegionSpec garden;
    garden.label = "garden";
    garden.categories.push_back(CategorySpec{
        "flower_bed",
        "filler",
        {
            "rows of tulips and roses along a gravel path in the quiet garden",
            "a trimmed hedge and blooming flower beds inside the walled garden",
        }});
    garden.categories.push_back(CategorySpec{
        "pond_side",
        "filler",
        {
            "a still pond with ducks and lily pads at the center of the garden",
            "a mossy stone bridge crossing the narrow pond stream in the garden",
        }});
    garden.categories.push_back(CategorySpec{
        "lawn",
        "filler",
        {
            "an open mowed lawn with scattered deck chairs at the edge of the garden",
            "a tool shed with rakes and watering cans behind the garden lawn",
        }});
    spec.regions.push_back(std::move(garden));

    spec.explicit_query_count = 10;
    spec.phrase_adjectives = {"crimson", "teal",    "amber",  "cobalt", "ivory",
                              "maroon",  "violet",  "indigo", "scarlet", "bronze",
                              "copper",  "golden",  "silver", "emerald", "lilac",
                              "coral",   "mint",    "navy",   "plum",    "umber"};
    spec.phrase_nouns = {"kettle",     "lantern", "easel",   "globe",  "tricycle",
                         "banjo",      "telescope", "typewriter", "compass", "figurine",
                         "umbrella",   "ladder",  "mailbox", "barrel", "crate",
                         "kite",       "drum",    "anchor",  "wagon",  "whistle"};

    for (const char* noun : {"drinks", "snacks", "souvenirs"}) {
        ImplicitSuiteSpec suite;
        suite.gold_category = "vendor_counter";
        const std::string n = noun;
        suite.queries = {
            "where can I buy some " + n,
            "I want to buy " + n,
            "can I buy " + n + " here",
            "where could I buy " + n,
            "I would like to buy " + n,
            "is there anywhere to buy " + n,
            "who can I buy " + n + " from",
            "we should buy " + n,
            "buy " + n,
            "where do we buy " + n,
        };
        spec.implicit_suites.push_back(std::move(suite));
    }

    spec.global_queries = {
        "tell me about the market stalls",
        "describe the surroundings of the market stalls",
        "what does the area around the market stalls contain",
        "give an overview of the market stalls district",
        "summarize the environment near the market stalls",
    };
    return spec;
}

World generate_world(const WorldSpec& spec) {
    spec.validate();
    SeededRng rng(spec.seed);
    World world;

    const int region_count = static_cast<int>(spec.regions.size());
    const int id_width = std::max(4, static_cast<int>(std::to_string(spec.node_count).size()));

    struct NodePlan {
        std::string id;
        int region;
        const CategorySpec* category;
        std::string caption;
    };
    std::vector<NodePlan> plans;
    plans.reserve(static_cast<std::size_t>(spec.node_count));

    int node_index = 0;
    for (int r = 0; r < region_count; ++r) {
        const int share = spec.node_count / region_count +
                          (r < spec.node_count % region_count ? 1 : 0);
        const auto& cats = spec.regions[static_cast<std::size_t>(r)].categories;
        std::vector<int> per_category_count(cats.size(), 0);
        for (int i = 0; i < share; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "n%0*d", id_width, ++node_index);
            const std::size_t cat_idx = static_cast<std::size_t>(i) % cats.size();
            const CategorySpec& cat = cats[cat_idx];
            const int nth = per_category_count[cat_idx]++;
            plans.push_back(NodePlan{
                buf, r, &cat,
                cat.captions[static_cast<std::size_t>(nth) % cat.captions.size()]});
        }
    }

    // Explicit targets: filler-category nodes tagged with a unique phrase.
    std::vector<GoldQuery> explicit_queries;
    if (spec.explicit_query_count > 0) {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < plans.size(); ++i) {
            if (plans[i].category->role == "filler") eligible.push_back(i);
        }
        std::vector<std::string> adjectives = spec.phrase_adjectives;
        std::vector<std::string> nouns = spec.phrase_nouns;
        rng.shuffle(adjectives);
        rng.shuffle(nouns);
        rng.shuffle(eligible);
        const int count = std::min({spec.explicit_query_count, static_cast<int>(eligible.size()),
                                    static_cast<int>(adjectives.size()),
                                    static_cast<int>(nouns.size())});
        for (int q = 0; q < count; ++q) {
            NodePlan& plan = plans[eligible[static_cast<std::size_t>(q)]];
            const std::string phrase = adjectives[static_cast<std::size_t>(q)] + " " +
                                       nouns[static_cast<std::size_t>(q)];
            plan.caption += ", and a " + phrase + " nearby";
            char qid[32];
            std::snprintf(qid, sizeof(qid), "q-ex-%03d", q + 1);
            explicit_queries.push_back(GoldQuery{
                qid, Query("find the " + phrase, QueryKind::explicit_target), {plan.id}, {}});
        }
    }

    // Poses: uniform within the region's x-strip, quantized so the canonical
    // map serialization round-trips exactly.
    const double strip = spec.extent / region_count;
    for (const auto& plan : plans) {
        MapNode node;
        node.id = plan.id;
        node.pose.x = quantize(rng.uniform(plan.region * strip, (plan.region + 1) * strip));
        node.pose.y = quantize(rng.uniform(0.0, spec.extent));
        node.pose.z = 0.0;
        node.pose.yaw = quantize(rng.uniform(-3.1, 3.1));
        node.caption = plan.caption;
        world.map.add_node(std::move(node));
    }

    if (spec.node_count > 1) {
        if (spec.edge_policy == EdgePolicy::exploration_chain) {
            std::vector<std::string> order;
            order.reserve(plans.size());
            for (const auto& plan : plans) order.push_back(plan.id);
            rng.shuffle(order);
            for (std::size_t i = 1; i < order.size(); ++i) {
                const double cost = quantize(euclidean_distance(
                    world.map.node(order[i - 1]).pose, world.map.node(order[i]).pose));
                world.map.add_edge(order[i - 1], order[i], cost);
            }
        } else {
            const double radius = spec.proximity_radius > 0
                                      ? spec.proximity_radius
                                      : 2.0 * spec.extent / std::sqrt(double(spec.node_count));
            for (std::size_t i = 0; i < plans.size(); ++i) {
                for (std::size_t j = i + 1; j < plans.size(); ++j) {
                    const double d = euclidean_distance(world.map.node(plans[i].id).pose,
                                                        world.map.node(plans[j].id).pose);
                    if (d <= radius) world.map.add_edge(plans[i].id, plans[j].id, quantize(d));
                }
            }
        }
    }

    for (auto& q : explicit_queries) world.queries.push_back(std::move(q));

    int suite_index = 0;
    for (const auto& suite : spec.implicit_suites) {
        std::set<std::string> gold;
        for (const auto& plan : plans) {
            if (plan.category->name == suite.gold_category) gold.insert(plan.id);
        }
        if (gold.empty()) {
            throw Error(ErrorCode::InvalidSpec,
                        "implicit gold category '" + suite.gold_category +
                            "' received no nodes; increase node_count");
        }
        int variant = 0;
        for (const auto& text : suite.queries) {
            char qid[32];
            std::snprintf(qid, sizeof(qid), "q-im-%02d-%02d", suite_index + 1, ++variant);
            world.queries.push_back(
                GoldQuery{qid, Query(text, QueryKind::implicit), gold, {}});
        }
        ++suite_index;
    }

    std::vector<std::string> labels;
    for (const auto& region : spec.regions) labels.push_back(region.label);
    int global_index = 0;
    for (const auto& text : spec.global_queries) {
        char qid[32];
        std::snprintf(qid, sizeof(qid), "q-gl-%02d", ++global_index);
        world.queries.push_back(GoldQuery{qid, Query(text, QueryKind::global), {}, labels});
    }
    return world;
}

// --- gold sidecar -------------------------------------------------------------

std::string save_gold_queries(const std::vector<GoldQuery>& queries) {
    std::ostringstream out;
    out << "{\"format\":\"erag-gold\",\"version\":1}\n";
    std::vector<const GoldQuery*> ordered;
    ordered.reserve(queries.size());
    for (const auto& q : queries) ordered.push_back(&q);
    std::sort(ordered.begin(), ordered.end(),
              [](const GoldQuery* a, const GoldQuery* b) { return a->id < b->id; });
    for (const GoldQuery* q : ordered) {
        nlohmann::json record{{"id", q->id},
                              {"query", q->query.text},
                              {"kind", query_kind_name(q->query.kind)},
                              {"gold_leaves", q->gold_leaves},
                              {"gold_terms", q->gold_terms}};
        out << record.dump() << "\n";
    }
    return out.str();
}

std::vector<GoldQuery> load_gold_queries(std::string_view bytes, const TopologicalMap& map) {
    std::vector<GoldQuery> queries;
    std::istringstream in{std::string(bytes)};
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    std::unordered_set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            throw Error(ErrorCode::ParseError,
                        "gold line " + std::to_string(line_no) + ": invalid JSON");
        }
        if (!header_seen) {
            if (record.value("format", "") != "erag-gold" || record.value("version", 0) != 1) {
                throw Error(ErrorCode::ParseError, "expected erag-gold v1 header");
            }
            header_seen = true;
            continue;
        }
        try {
            GoldQuery q{record.at("id").get<std::string>(),
                        Query(record.at("query").get<std::string>(),
                              parse_query_kind(record.at("kind").get<std::string>())),
                        {},
                        {}};
            for (const auto& leaf : record.value("gold_leaves", nlohmann::json::array())) {
                const std::string id = leaf.get<std::string>();
                if (!map.has_node(id)) {
                    throw Error(ErrorCode::ParseError, "gold line " + std::to_string(line_no) +
                                                           ": unknown node '" + id + "'");
                }
                q.gold_leaves.insert(id);
            }
            if (record.contains("gold_terms")) {
                q.gold_terms = record["gold_terms"].get<std::vector<std::string>>();
            }
            if (q.query.kind == QueryKind::global) {
                if (q.gold_terms.empty()) {
                    throw Error(ErrorCode::ParseError, "gold line " + std::to_string(line_no) +
                                                           ": global query needs gold_terms");
                }
            } else if (q.gold_leaves.empty()) {
                throw Error(ErrorCode::ParseError, "gold line " + std::to_string(line_no) +
                                                       ": navigation query needs gold_leaves");
            }
            if (!ids.insert(q.id).second) {
                throw Error(ErrorCode::ParseError,
                            "gold line " + std::to_string(line_no) + ": duplicate id");
            }
            queries.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "gold line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) throw Error(ErrorCode::ParseError, "missing erag-gold header");
    return queries;
}

World ingest_dataset(const std::string& map_path, const std::string& sidecar_path) {
    World world;
    world.map = TopologicalMap::load_file(map_path);
    if (!sidecar_path.empty()) {
        std::ifstream in(sidecar_path, std::ios::binary);
        if (!in) throw Error(ErrorCode::IoError, "cannot open gold sidecar '" + sidecar_path + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        world.queries = load_gold_queries(buffer.str(), world.map);
    }
    return world;
}

void export_world(const World& world, const std::string& map_path,
                  const std::string& sidecar_path) {
    world.map.save_file(map_path);
    if (!sidecar_path.empty()) {
        std::ofstream out(sidecar_path, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write gold sidecar '" + sidecar_path + "'");
        out << save_gold_queries(world.queries);
    }
}

// --- evaluation ----------------------------------------------------------------

bool answer_mentions(const std::string& answer, const std::string& term) {
    auto needles = content_tokens(term);
    if (needles.empty()) needles = tokenize(term);
    if (needles.empty()) return false;
    const auto words = tokenize(answer);
    const std::unordered_set<std::string> have(words.begin(), words.end());
    for (const auto& needle : needles) {
        if (!have.count(needle)) return false;
    }
    return true;
}

double EvalReport::sr(RetrievalMethod method, QueryKind kind) const {
    auto it = aggregates.find({retrieval_method_name(method), query_kind_name(kind)});
    return it == aggregates.end() ? 0.0 : it->second.sr();
}

double EvalReport::mean_coverage(RetrievalMethod method) const {
    auto it = aggregates.find({retrieval_method_name(method), query_kind_name(QueryKind::global)});
    return it == aggregates.end() ? 0.0 : it->second.mean_coverage();
}

std::string EvalReport::canonical_jsonl() const {
    std::ostringstream out;
    for (const auto& r : records) {
        nlohmann::json j{{"type", "record"},
                         {"id", r.query_id},
                         {"query", r.query_text},
                         {"kind", query_kind_name(r.kind)},
                         {"method", retrieval_method_name(r.method)},
                         {"k", k},
                         {"warnings", r.warnings},
                         {"error", r.error}};
        if (r.kind == QueryKind::global) {
            j["coverage"] = r.coverage;
            j["answer"] = r.answer;
        } else {
            j["success"] = r.success;
            j["map_node"] = r.map_node;
        }
        out << j.dump() << "\n";
    }
    for (const auto& [key, agg] : aggregates) {
        nlohmann::json j{{"type", "summary"}, {"method", key.first}, {"kind", key.second},
                         {"k", k},            {"attempts", agg.attempts}};
        if (key.second == query_kind_name(QueryKind::global)) {
            j["mean_coverage"] = agg.mean_coverage();
        } else {
            j["successes"] = agg.successes;
            j["sr"] = agg.sr();
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string EvalReport::table() const {
    std::ostringstream out;
    out << "k=" << k << "  (" << records.size() << " records, " << total_ms << " ms)\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %-10s %10s %10s %10s\n", "method", "kind",
                  "attempts", "successes", "score");
    out << line;
    for (const auto& [key, agg] : aggregates) {
        const bool global = key.second == query_kind_name(QueryKind::global);
        std::snprintf(line, sizeof(line), "%-16s %-10s %10d %10d %10.4f\n", key.first.c_str(),
                      key.second.c_str(), agg.attempts, agg.successes,
                      global ? agg.mean_coverage() : agg.sr());
        out << line;
    }
    return out.str();
}

EvalReport evaluate(const TopologicalMap& map, const SemanticForest& forest,
                    const std::vector<GoldQuery>& queries, Gateway& gateway,
                    const std::vector<RetrievalMethod>& methods, int k, int concurrency) {
    if (queries.empty()) throw Error(ErrorCode::UsageError, "no queries to evaluate");
    if (methods.empty()) throw Error(ErrorCode::UsageError, "no methods to evaluate");

    const auto start = std::chrono::steady_clock::now();
    EvalReport report;
    report.k = k;
    const AgentState agent{map.nodes().begin()->first};

    std::vector<const GoldQuery*> ordered;
    ordered.reserve(queries.size());
    for (const auto& q : queries) ordered.push_back(&q);
    std::sort(ordered.begin(), ordered.end(),
              [](const GoldQuery* a, const GoldQuery* b) { return a->id < b->id; });

    for (const GoldQuery* gold : ordered) {
        for (const auto method : methods) {
            QueryRecord record;
            record.query_id = gold->id;
            record.query_text = gold->query.text;
            record.kind = gold->query.kind;
            record.method = method;
            try {
                QueryOutcome outcome =
                    run_query(gold->query, k, agent, map, forest, gateway, method, concurrency);
                record.warnings = outcome.warnings;
                record.timing_ms = outcome.timing_ms;
                if (outcome.navigation) {
                    record.map_node = outcome.navigation->map_node;
                    record.success = gold->gold_leaves.count(record.map_node) > 0;
                } else if (outcome.answer) {
                    record.answer = outcome.answer->answer;
                    int matched = 0;
                    for (const auto& term : gold->gold_terms) {
                        if (answer_mentions(record.answer, term)) ++matched;
                    }
                    record.coverage = gold->gold_terms.empty()
                                          ? 0.0
                                          : double(matched) / double(gold->gold_terms.size());
                }
            } catch (const std::exception& e) {
                // One failing query never suppresses the others.
                record.error = e.what();
                record.success = false;
                record.coverage = 0.0;
            }
            report.records.push_back(std::move(record));
        }
    }

    std::sort(report.records.begin(), report.records.end(),
              [](const QueryRecord& a, const QueryRecord& b) {
                  if (a.query_id != b.query_id) return a.query_id < b.query_id;
                  return std::string(retrieval_method_name(a.method)) <
                         std::string(retrieval_method_name(b.method));
              });
    for (const auto& r : report.records) {
        auto& agg = report.aggregates[{retrieval_method_name(r.method), query_kind_name(r.kind)}];
        ++agg.attempts;
        if (r.kind == QueryKind::global) {
            agg.coverage_sum += r.coverage;
        } else if (r.success) {
            ++agg.successes;
        }
    }
    report.total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return report;
}

std::vector<EvalReport> ablate_k(const TopologicalMap& map, const SemanticForest& forest,
                                 const std::vector<GoldQuery>& queries, Gateway& gateway,
                                 const std::vector<RetrievalMethod>& methods,
                                 const std::vector<int>& k_values, int concurrency) {
    if (k_values.empty()) throw Error(ErrorCode::UsageError, "k sweep needs at least one value");
    std::vector<EvalReport> reports;
    reports.reserve(k_values.size());
    for (int k : k_values) {
        reports.push_back(evaluate(map, forest, queries, gateway, methods, k, concurrency));
    }
    return reports;
}

std::string ablation_tsv(const std::vector<int>& k_values,
                         const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "k\tmethod\tkind\tscore\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (const auto& [key, agg] : reports[i].aggregates) {
            const bool global = key.second == query_kind_name(QueryKind::global);
            out << k_values[i] << "\t" << key.first << "\t" << key.second << "\t"
                << (global ? agg.mean_coverage() : agg.sr()) << "\n";
        }
    }
    return out.str();
}

}  // namespace erag
