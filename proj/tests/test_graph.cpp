#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/graph.hpp"
#include "oracles.hpp"

using namespace gnnrisk;

namespace {

Graph parse(const std::string& text, std::size_t n, bool directed = false) {
    std::istringstream in(text);
    return load_edge_list(in, n, directed);
}

std::vector<NodeIndex> as_vec(std::span<const NodeIndex> s) { return {s.begin(), s.end()}; }

NodeTable labeled_table(std::size_t normals, std::size_t risks) {
    NodeTable t;
    const std::size_t n = normals + risks;
    t.features = Matrix(n, 1);
    t.labels.assign(n, Label::normal);
    for (std::size_t i = 0; i < risks; ++i) t.labels[i * (n / risks)] = Label::risk;
    t.splits.assign(n, Split::none);
    return t;
}

}  // namespace

TEST_CASE("edge list ingestion builds sorted symmetric CSR") {
    const Graph g = parse("0 1\n1 2\n", 3);
    CHECK(std::vector<std::size_t>(g.offsets().begin(), g.offsets().end()) ==
          std::vector<std::size_t>{0, 1, 3, 4});
    CHECK(as_vec(g.targets()) == std::vector<NodeIndex>{1, 0, 2, 1});
    CHECK(g.num_edges() == 2);

    const Graph empty = parse("", 5);
    CHECK(std::vector<std::size_t>(empty.offsets().begin(), empty.offsets().end()) ==
          std::vector<std::size_t>(6, 0));
    CHECK(empty.num_entries() == 0);
}

TEST_CASE("neighbors") {
    const Graph path = parse("0 1\n1 2\n", 3);
    CHECK(as_vec(neighbors(path, 1)) == std::vector<NodeIndex>{0, 2});

    const Graph isolated = parse("0 1\n", 3);
    CHECK(isolated.neighbors(2).empty());

    const Graph k4 = parse("0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n", 4);
    CHECK(as_vec(k4.neighbors(0)) == std::vector<NodeIndex>{1, 2, 3});
    CHECK_THROWS_AS(k4.neighbors(4), BoundsError);
}

TEST_CASE("duplicates collapse with summed weight") {
    const Graph g = parse("0 1 2.5\n1 0 1.5\n0 1\n", 2);
    CHECK(g.num_entries() == 2);
    CHECK(g.neighbor_weights(0)[0] == 5.0);
    CHECK(g.neighbor_weights(1)[0] == 5.0);

    const Graph d = parse("0 1 2\n1 0 3\n0 1 1\n", 2, true);
    CHECK(d.num_entries() == 2);
    CHECK(d.neighbor_weights(0)[0] == 3.0);
    CHECK(d.neighbor_weights(1)[0] == 3.0);
}

TEST_CASE("ingestion errors carry the line number") {
    auto message = [](const std::string& text) -> std::string {
        try {
            parse(text, 3);
        } catch (const Error& e) {
            return e.what();
        }
        return "";
    };
    CHECK_THROWS_AS(parse("0 1\n# note\n2 3\n", 3), IngestionError);
    CHECK(message("0 1\n# note\n2 3\n").find("line 3") != std::string::npos);
    CHECK_THROWS_AS(parse("0 x\n", 3), ParseError);
    CHECK(message("0 1\n\n1 two\n").find("line 3") != std::string::npos);
    CHECK_THROWS_AS(parse("0 1 nan\n", 3), ParseError);
    CHECK_THROWS_AS(parse("-1 1\n", 3), Error);
    CHECK_THROWS_AS(parse("1 1\n", 3), IngestionError);
    CHECK_THROWS_AS(parse("0 1 2 3\n", 3), ParseError);
}

TEST_CASE("graph constructor validates CSR invariants") {
    CHECK_THROWS_AS(Graph(2, {0, 1, 1}, {1}, {}, false), IngestionError);  // asymmetric
    CHECK_THROWS_AS(Graph(2, {0, 1}, {1}, {}, true), IngestionError);      // short offsets
    CHECK_THROWS_AS(Graph(2, {0, 1, 1}, {2}, {}, true), IngestionError);   // target range
    CHECK_THROWS_AS(Graph(2, {0, 1, 1}, {0}, {}, true), IngestionError);   // self-loop
    CHECK_THROWS_AS(Graph(3, {0, 2, 2, 2}, {2, 1}, {}, true), IngestionError);  // unsorted
    CHECK_NOTHROW(Graph(2, {0, 1, 2}, {1, 0}, {}, false));
}

TEST_CASE("CSR invariants on random graphs") {
    SeededRng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        const bool directed = trial % 2 == 1;
        const Graph g = oracle::random_graph(n, rng.uniform(0.0, 0.4), rng, false, directed);

        std::size_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = g.neighbors(i);
            total += row.size();
            CHECK(std::is_sorted(row.begin(), row.end()));
            if (!directed) {
                for (NodeIndex j : row) {
                    const auto back = g.neighbors(j);
                    CHECK(std::binary_search(back.begin(), back.end(), static_cast<NodeIndex>(i)));
                }
            }
        }
        CHECK(total == g.num_entries());

        // write and re-ingest gives the identical CSR
        std::ostringstream out;
        write_edge_list(g, out);
        std::istringstream in(out.str());
        CHECK(load_edge_list(in, n, directed) == g);
    }
}

TEST_CASE("transpose reverses edges") {
    const Graph d = parse("0 1\n0 2\n2 1\n", 3, true);
    const Graph t = d.transposed();
    CHECK(as_vec(t.neighbors(1)) == std::vector<NodeIndex>{0, 2});
    CHECK(t.neighbors(0).empty());
    CHECK(t.transposed() == d);
}

TEST_CASE("ingestion at 10k nodes and 32k edges") {
    // 32,019 undirected input lines with some repeats
    SeededRng rng(17);
    std::ostringstream text;
    std::vector<std::pair<NodeIndex, NodeIndex>> seen;
    for (int i = 0; i < 32019; ++i) {
        NodeIndex a, b;
        if (i % 1000 == 999) {
            std::tie(a, b) = seen[rng.below(seen.size())];
            std::swap(a, b);
        } else {
            do {
                a = static_cast<NodeIndex>(rng.below(10000));
                b = static_cast<NodeIndex>(rng.below(10000));
            } while (a == b);
        }
        seen.emplace_back(a, b);
        text << a << ' ' << b << '\n';
    }
    std::vector<std::pair<NodeIndex, NodeIndex>> keys;
    for (auto [a, b] : seen) keys.emplace_back(std::min(a, b), std::max(a, b));
    std::sort(keys.begin(), keys.end());
    const std::size_t collapsed = keys.size() - (std::unique(keys.begin(), keys.end()) - keys.begin());
    CHECK(collapsed >= 32);

    const Graph g = parse(text.str(), 10000);
    CHECK(g.num_entries() == 64038 - 2 * collapsed);
}

TEST_CASE("stratified split") {
    NodeTable t = labeled_table(90, 10);
    const NodeTable s = split_nodes(t, {0.7, 0.15, 0.15}, 7);
    CHECK(s.nodes_in(Split::train).size() == 70);
    CHECK(s.nodes_in(Split::val).size() == 15);
    CHECK(s.nodes_in(Split::test).size() == 15);
    CHECK(s.nodes_in(Split::train, Label::risk).size() == 7);
    for (Split sp : {Split::val, Split::test}) {
        const auto r = s.nodes_in(sp, Label::risk).size();
        CHECK((r >= 1 && r <= 2));
    }
    CHECK(split_nodes(t, {0.7, 0.15, 0.15}, 7) == s);
    CHECK(split_nodes(t, {0.7, 0.15, 0.15}, 8) != s);

    const NodeTable all = split_nodes(t, {1.0, 0.0, 0.0}, 1);
    CHECK(all.nodes_in(Split::train).size() == 100);

    CHECK_THROWS_AS(split_nodes(t, {0.5, 0.2, 0.2}, 1), ConfigError);
    CHECK_THROWS_AS(split_nodes(t, {1.2, -0.1, -0.1}, 1), ConfigError);

    SUBCASE("tiny stratum is rejected") {
        NodeTable tiny = labeled_table(50, 2);
        try {
            split_nodes(tiny, {0.6, 0.2, 0.2}, 1);
            FAIL("expected SplitError");
        } catch (const SplitError& e) {
            CHECK(std::string(e.what()).find("risk") != std::string::npos);
        }
    }

    SUBCASE("unknown labels stay unassigned") {
        NodeTable u = labeled_table(90, 10);
        u.labels[1] = Label::unknown;
        const NodeTable su = split_nodes(u, {0.7, 0.15, 0.15}, 3);
        CHECK(su.splits[1] == Split::none);
        CHECK(su.nodes_in(Split::train).size() + su.nodes_in(Split::val).size() +
                  su.nodes_in(Split::test).size() == 99);
    }
}

TEST_CASE("stratification holds for random tables") {
    SeededRng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t risks = 3 + rng.below(30), normals = 3 + rng.below(300);
        const NodeTable s = split_nodes(labeled_table(normals, risks), {0.7, 0.15, 0.15}, rng.next_u64());
        for (Label l : {Label::normal, Label::risk}) {
            const double total = l == Label::risk ? double(risks) : double(normals);
            const double fr[3] = {0.7, 0.15, 0.15};
            for (int sp = 0; sp < 3; ++sp) {
                const double got = double(s.nodes_in(static_cast<Split>(sp), l).size());
                CHECK(std::abs(got - fr[sp] * total) <= 1.0 + 1e-9);
            }
        }
    }
}

TEST_CASE("node table csv round trip") {
    NodeTable t;
    t.features = Matrix{{0.1, -2.0}, {1e-300, 3.0}, {0.3333333333333333, 7.0}};
    t.labels = {Label::normal, Label::risk, Label::unknown};
    t.splits = {Split::train, Split::test, Split::none};
    std::ostringstream out;
    write_node_table(t, out);
    CHECK(out.str().rfind("node_id,label,split,f0,f1\n", 0) == 0);
    std::istringstream in(out.str());
    CHECK(read_node_table(in) == t);

    std::istringstream bad("node_id,label,split,f0\n0,normal,train,1\n2,risk,test,1\n");
    CHECK_THROWS_AS(read_node_table(bad), ParseError);
    std::istringstream bad_label("node_id,label,split,f0\n0,odd,train,1\n");
    CHECK_THROWS_AS(read_node_table(bad_label), ParseError);

    NodeTable orphan = t;
    orphan.splits[0] = Split::none;
    CHECK_THROWS_AS(orphan.validate(3), SplitError);
    CHECK_THROWS_AS(t.validate(4), ShapeError);
}
