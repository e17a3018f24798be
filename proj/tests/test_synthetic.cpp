#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/synthetic.hpp"

using namespace gnnrisk;

namespace {

SynthConfig small(std::uint64_t seed = 3) {
    SynthConfig c;
    c.num_nodes = 2000;
    c.target_edges = 6400;
    c.seed = seed;
    return c;
}

std::string serialize(const Dataset& d) {
    std::ostringstream os;
    write_edge_list(d.graph, os);
    write_node_table(d.table, os);
    os << archetypes_json(d.archetypes);
    return os.str();
}

std::set<std::pair<NodeIndex, NodeIndex>> edge_set(const Graph& g) {
    std::set<std::pair<NodeIndex, NodeIndex>> s;
    for (std::size_t u = 0; u < g.num_nodes(); ++u) {
        for (NodeIndex v : g.neighbors(u)) {
            if (u < v) s.emplace(static_cast<NodeIndex>(u), v);
        }
    }
    return s;
}

double median_normal_degree(const Dataset& d) {
    std::vector<std::size_t> deg;
    for (std::size_t u = 0; u < d.graph.num_nodes(); ++u) {
        if (d.archetypes[u] == Archetype::none) deg.push_back(d.graph.degree(u));
    }
    std::nth_element(deg.begin(), deg.begin() + deg.size() / 2, deg.end());
    return double(deg[deg.size() / 2]);
}

void check_structure(const Dataset& d, const SynthConfig& c) {
    const Graph& g = d.graph;
    CHECK(g.num_nodes() == c.num_nodes);
    CHECK(!g.directed());
    const double band = 0.05 * double(c.target_edges);
    CHECK(std::abs(double(g.num_edges()) - double(c.target_edges)) <= band);

    std::size_t risk = 0;
    for (std::size_t u = 0; u < c.num_nodes; ++u) {
        const bool tagged = d.archetypes[u] != Archetype::none;
        CHECK(tagged == (d.table.labels[u] == Label::risk));
        risk += tagged;
    }
    const double expected = c.anomaly_rate * double(c.num_nodes);
    // ring sizes round the count by at most a few nodes
    CHECK(std::abs(double(risk) - expected) <= double(8));

    // every labeled node sits in exactly one split
    CHECK_NOTHROW(d.table.validate(c.num_nodes));
    CHECK(d.table.features.cols() == c.feature_dim);
    CHECK(d.table.features.all_finite());
}

}  // namespace

TEST_CASE("default dataset matches the reference scale") {
    const SynthConfig c;
    CHECK(c.num_nodes == 10000);
    CHECK(c.target_edges == 32019);
    CHECK(c.anomaly_rate == 0.05);
    CHECK(c.feature_dim == 16);
    CHECK(c.signal_strength == 1.0);
    const Dataset d = generate(c);
    CHECK(d.graph.num_edges() >= 30418);
    CHECK(d.graph.num_edges() <= 33620);
    check_structure(d, c);
}

TEST_CASE("planted structures") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SynthConfig c = small(seed);
        const Dataset d = generate(c);
        check_structure(d, c);
        const Graph& g = d.graph;
        const double median = median_normal_degree(d);

        std::size_t hubs = 0, bridges = 0, ring_nodes = 0;
        for (std::size_t u = 0; u < c.num_nodes; ++u) {
            switch (d.archetypes[u]) {
                case Archetype::hub:
                    ++hubs;
                    CHECK(double(g.degree(u)) >= 10.0 * median);
                    break;
                case Archetype::bridge: ++bridges; break;
                case Archetype::ring: ++ring_nodes; break;
                default: break;
            }
        }
        CHECK(hubs > 0);
        CHECK(bridges > 0);
        CHECK(ring_nodes > 0);

        // rings: connected components of ring-tagged nodes over ring-ring edges
        std::vector<int> comp(c.num_nodes, -1);
        std::vector<std::vector<NodeIndex>> rings;
        for (std::size_t s = 0; s < c.num_nodes; ++s) {
            if (d.archetypes[s] != Archetype::ring || comp[s] >= 0) continue;
            rings.emplace_back();
            std::vector<NodeIndex> stack{static_cast<NodeIndex>(s)};
            comp[s] = int(rings.size()) - 1;
            while (!stack.empty()) {
                const NodeIndex u = stack.back();
                stack.pop_back();
                rings.back().push_back(u);
                for (NodeIndex v : g.neighbors(u)) {
                    if (d.archetypes[v] == Archetype::ring && comp[v] < 0) {
                        comp[v] = comp[s];
                        stack.push_back(v);
                    }
                }
            }
        }
        for (const auto& r : rings) {
            // neighbouring rings may touch through the backbone, so check density per group
            if (r.size() > 8) continue;
            CHECK(r.size() >= 4);
            std::size_t internal = 0;
            for (NodeIndex u : r) {
                for (NodeIndex v : g.neighbors(u)) internal += comp[v] == comp[u];
            }
            const double full = double(r.size() * (r.size() - 1));
            CHECK(double(internal) >= 0.8 * full);
        }

        // bridges reach far: most of their neighbors would be >= 3 hops away without them
        for (std::size_t u = 0; u < c.num_nodes; ++u) {
            if (d.archetypes[u] != Archetype::bridge) continue;
            CHECK(double(g.degree(u)) >= 2.0 * median);
        }
    }
}

TEST_CASE("generation is deterministic") {
    const SynthConfig c = small(9);
    CHECK(serialize(generate(c)) == serialize(generate(c)));
    SynthConfig other = c;
    other.seed = 10;
    CHECK(serialize(generate(other)) != serialize(generate(c)));
}

TEST_CASE("zero anomaly rate gives an all-normal dataset") {
    SynthConfig c = small();
    c.anomaly_rate = 0.0;
    const Dataset d = generate(c);
    for (Label l : d.table.labels) CHECK(l == Label::normal);
    for (Archetype a : d.archetypes) CHECK(a == Archetype::none);
    CHECK(archetypes_json(d.archetypes) == "{}\n");
}

TEST_CASE("signal sweep") {
    const SynthConfig c = small(4);
    const auto sweep = signal_sweep(c, {0.0, 0.5, 1.0, 2.0});
    REQUIRE(sweep.size() == 4);

    SUBCASE("risk nodes and labels are shared") {
        for (const auto& d : sweep) CHECK(d.archetypes == sweep[0].archetypes);
        for (const auto& d : sweep) CHECK(d.table.splits == sweep[0].table.splits);
    }
    SUBCASE("from full strength on only features change") {
        CHECK(edge_set(sweep[2].graph) == edge_set(sweep[3].graph));
        CHECK(sweep[2].table.features != sweep[3].table.features);
    }
    SUBCASE("planted structure grows with the signal") {
        const auto hub_degree = [](const Dataset& d) {
            std::size_t total = 0;
            for (std::size_t u = 0; u < d.graph.num_nodes(); ++u) {
                if (d.archetypes[u] == Archetype::hub) total += d.graph.degree(u);
            }
            return total;
        };
        CHECK(hub_degree(sweep[0]) < hub_degree(sweep[1]));
        CHECK(hub_degree(sweep[1]) < hub_degree(sweep[2]));
    }
    SUBCASE("zero strength leaves risk and normal features alike") {
        const Dataset& d = sweep[0];
        const Matrix& f = d.table.features;
        for (std::size_t col = 0; col < f.cols(); ++col) {
            double sum[2] = {0, 0}, sq[2] = {0, 0};
            double count[2] = {0, 0};
            for (std::size_t u = 0; u < f.rows(); ++u) {
                const int k = d.table.labels[u] == Label::risk;
                sum[k] += f(u, col);
                sq[k] += f(u, col) * f(u, col);
                count[k] += 1;
            }
            const double m0 = sum[0] / count[0], m1 = sum[1] / count[1];
            const double v0 = sq[0] / count[0] - m0 * m0, v1 = sq[1] / count[1] - m1 * m1;
            const double se = std::sqrt(v0 / count[0] + v1 / count[1]);
            INFO("feature column " << col);
            CHECK(std::abs(m1 - m0) <= 4.0 * se);
        }
    }
    CHECK_THROWS_AS(signal_sweep(c, {-1.0}), ConfigError);
}

TEST_CASE("block-model backbone") {
    SynthConfig c = small(6);
    c.backbone = Backbone::block_model;
    const Dataset d = generate(c);
    check_structure(d, c);
    CHECK(parse_backbone("sbm") == Backbone::block_model);
    CHECK(parse_backbone("pa") == Backbone::preferential_attachment);
    CHECK_THROWS_AS(parse_backbone("lattice"), ConfigError);
}

TEST_CASE("config validation") {
    const auto rejects = [](auto mutate) {
        SynthConfig c = small();
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    rejects([](SynthConfig& c) { c.anomaly_rate = 0.5; });
    rejects([](SynthConfig& c) { c.anomaly_rate = -0.1; });
    rejects([](SynthConfig& c) { c.mix = {0.5, 0.5, 0.5}; });
    rejects([](SynthConfig& c) { c.mix = {1.5, -0.5, 0.0}; });
    rejects([](SynthConfig& c) { c.feature_dim = 4; });
    rejects([](SynthConfig& c) { c.signal_strength = -1; });
    rejects([](SynthConfig& c) { c.signal_strength = std::nan(""); });
    rejects([](SynthConfig& c) { c.target_edges = 10; });
    rejects([](SynthConfig& c) { c.target_edges = 5'000'000; });
    rejects([](SynthConfig& c) { c.num_nodes = 1; });

    SynthConfig tight = small();
    tight.anomaly_rate = 0.45;
    tight.mix = {0.0, 1.0, 0.0};
    tight.target_edges = 1000;
    CHECK_THROWS_AS(generate(tight), GenerationError);

    CHECK(parse_archetype("hub") == Archetype::hub);
    CHECK_THROWS_AS(parse_archetype("spiral"), Error);
}
