#include "gnnrisk/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(std::size_t num_nodes, std::vector<std::size_t> offsets,
             std::vector<NodeIndex> targets, std::vector<double> weights, bool directed)
    : num_nodes_(num_nodes),
      offsets_(std::move(offsets)),
      targets_(std::move(targets)),
      weights_(std::move(weights)),
      directed_(directed) {
    if (offsets_.size() != num_nodes_ + 1 || offsets_.front() != 0 ||
        offsets_.back() != targets_.size()) {
        throw IngestionError("CSR offsets inconsistent with node count or target array");
    }
    if (!weights_.empty() && weights_.size() != targets_.size()) {
        throw IngestionError("CSR weight array length differs from target array");
    }
    for (std::size_t i = 0; i < num_nodes_; ++i) {
        if (offsets_[i] > offsets_[i + 1]) throw IngestionError("CSR offsets decrease");
        for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            if (targets_[e] >= num_nodes_) throw IngestionError("CSR target out of range");
            if (targets_[e] == i) throw IngestionError("CSR contains a self-loop");
            if (e > offsets_[i] && targets_[e] <= targets_[e - 1]) {
                throw IngestionError("CSR row not strictly ascending");
            }
        }
    }
    if (!directed_) {
        for (std::size_t i = 0; i < num_nodes_; ++i) {
            for (NodeIndex j : neighbors(i)) {
                auto row = neighbors(j);
                if (!std::binary_search(row.begin(), row.end(), static_cast<NodeIndex>(i))) {
                    throw IngestionError("undirected CSR is not symmetric");
                }
            }
        }
    }
}

std::span<const NodeIndex> Graph::neighbors(std::size_t i) const {
    if (i >= num_nodes_) {
        throw BoundsError("node index " + std::to_string(i) + " out of range for " +
                          std::to_string(num_nodes_) + " nodes");
    }
    return std::span<const NodeIndex>(targets_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> Graph::neighbor_weights(std::size_t i) const {
    if (i >= num_nodes_) throw BoundsError("node index " + std::to_string(i) + " out of range");
    if (weights_.empty()) return {};
    return std::span<const double>(weights_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

Graph Graph::transposed() const {
    if (!directed_) return *this;
    std::vector<WeightedEdge> edges;
    edges.reserve(targets_.size());
    for (std::size_t i = 0; i < num_nodes_; ++i) {
        for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            edges.push_back({targets_[e], static_cast<NodeIndex>(i),
                             weights_.empty() ? 1.0 : weights_[e]});
        }
    }
    Graph g = build_graph(num_nodes_, edges, true);
    if (weights_.empty()) g.weights_.clear();
    return g;
}

std::span<const NodeIndex> neighbors(const Graph& g, std::size_t i) { return g.neighbors(i); }

Graph build_graph(std::size_t num_nodes, std::span<const WeightedEdge> edges, bool directed) {
    std::vector<WeightedEdge> list;
    list.reserve(directed ? edges.size() : 2 * edges.size());
    for (const auto& e : edges) {
        if (e.src >= num_nodes || e.dst >= num_nodes) {
            throw IngestionError("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                 ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (e.src == e.dst) {
            throw IngestionError("self-loop on node " + std::to_string(e.src));
        }
        if (directed) {
            list.push_back(e);
        } else {
            // Canonical orientation first so duplicates in either direction collapse.
            list.push_back({std::min(e.src, e.dst), std::max(e.src, e.dst), e.weight});
        }
    }
    std::sort(list.begin(), list.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    std::vector<WeightedEdge> unique;
    unique.reserve(list.size());
    for (const auto& e : list) {
        if (!unique.empty() && unique.back().src == e.src && unique.back().dst == e.dst) {
            unique.back().weight += e.weight;
        } else {
            unique.push_back(e);
        }
    }
    if (!directed) {
        const std::size_t n = unique.size();
        for (std::size_t k = 0; k < n; ++k) {
            unique.push_back({unique[k].dst, unique[k].src, unique[k].weight});
        }
        std::sort(unique.begin(), unique.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
            return a.src != b.src ? a.src < b.src : a.dst < b.dst;
        });
    }
    std::vector<std::size_t> offsets(num_nodes + 1, 0);
    std::vector<NodeIndex> targets;
    std::vector<double> weights;
    targets.reserve(unique.size());
    weights.reserve(unique.size());
    for (const auto& e : unique) {
        ++offsets[e.src + 1];
        targets.push_back(e.dst);
        weights.push_back(e.weight);
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return Graph(num_nodes, std::move(offsets), std::move(targets), std::move(weights), directed);
}

Graph load_edge_list(std::istream& in, std::size_t num_nodes, bool directed) {
    std::vector<WeightedEdge> edges;
    bool any_weight = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = split_whitespace(line);
        if (tokens.empty() || tokens.front().front() == '#') continue;
        const std::string where = "edge list line " + std::to_string(line_no);
        if (tokens.size() < 2 || tokens.size() > 3) {
            throw ParseError(where + ": expected `src dst [weight]`");
        }
        const std::int64_t src = parse_int(tokens[0], where);
        const std::int64_t dst = parse_int(tokens[1], where);
        double weight = 1.0;
        if (tokens.size() == 3) {
            weight = parse_double(tokens[2], where);
            any_weight = true;
        }
        for (std::int64_t v : {src, dst}) {
            if (v < 0 || static_cast<std::uint64_t>(v) >= num_nodes) {
                throw IngestionError(where + ": node index " + std::to_string(v) +
                                     " outside [0, " + std::to_string(num_nodes) + ")");
            }
        }
        if (src == dst) throw IngestionError(where + ": self-loop on node " + std::to_string(src));
        edges.push_back({static_cast<NodeIndex>(src), static_cast<NodeIndex>(dst), weight});
    }
    Graph g = build_graph(num_nodes, edges, directed);
    if (!any_weight) {
        return Graph(g.num_nodes(), {g.offsets().begin(), g.offsets().end()},
                     {g.targets().begin(), g.targets().end()}, {}, directed);
    }
    return g;
}

void write_edge_list(const Graph& g, std::ostream& out) {
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const auto row = g.neighbors(i);
        const auto w = g.neighbor_weights(i);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (!g.directed() && row[k] < i) continue;
            out << i << ' ' << row[k];
            if (g.weighted()) out << ' ' << format_double(w[k]);
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// NodeTable

const char* to_string(Label label) noexcept {
    switch (label) {
        case Label::normal: return "normal";
        case Label::risk: return "risk";
        case Label::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::none: return "none";
    }
    return "none";
}

Label parse_label(const std::string& text) {
    if (text == "normal") return Label::normal;
    if (text == "risk") return Label::risk;
    if (text == "unknown") return Label::unknown;
    throw ParseError("unknown label '" + text + "' (expected normal, risk or unknown)");
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    if (text == "none" || text.empty()) return Split::none;
    throw ParseError("unknown split '" + text + "' (expected train, val, test or none)");
}

std::vector<NodeIndex> NodeTable::nodes_in(Split split) const {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (splits[i] == split && labels[i] != Label::unknown) out.push_back(static_cast<NodeIndex>(i));
    }
    return out;
}

std::vector<NodeIndex> NodeTable::nodes_in(Split split, Label label) const {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (splits[i] == split && labels[i] == label) out.push_back(static_cast<NodeIndex>(i));
    }
    return out;
}

void NodeTable::validate(std::size_t expected_nodes) const {
    if (features.rows() != expected_nodes || labels.size() != expected_nodes ||
        splits.size() != expected_nodes) {
        throw ShapeError("node table has " + std::to_string(features.rows()) +
                         " feature rows and " + std::to_string(labels.size()) +
                         " labels, expected " + std::to_string(expected_nodes));
    }
    for (std::size_t i = 0; i < expected_nodes; ++i) {
        if (labels[i] != Label::unknown && splits[i] == Split::none) {
            throw SplitError("labeled node " + std::to_string(i) + " has no split");
        }
    }
}

NodeTable read_node_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("node table: missing header");
    const auto header = split_csv(line);
    if (header.size() < 3 || header[0] != "node_id" || header[1] != "label" || header[2] != "split") {
        throw ParseError("node table: header must start with node_id,label,split");
    }
    const std::size_t dim = header.size() - 3;
    for (std::size_t c = 0; c < dim; ++c) {
        if (header[3 + c] != "f" + std::to_string(c)) {
            throw ParseError("node table: expected feature column f" + std::to_string(c));
        }
    }
    NodeTable t;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "node table line " + std::to_string(line_no);
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) throw ParseError(where + ": wrong column count");
        const std::int64_t id = parse_int(cells[0], where);
        if (id != static_cast<std::int64_t>(t.labels.size())) {
            throw ParseError(where + ": node ids must be consecutive from 0");
        }
        t.labels.push_back(parse_label(cells[1]));
        t.splits.push_back(parse_split(cells[2]));
        for (std::size_t c = 0; c < dim; ++c) values.push_back(parse_double(cells[3 + c], where));
    }
    t.features = Matrix(t.labels.size(), dim, std::move(values));
    t.validate(t.labels.size());
    return t;
}

void write_node_table(const NodeTable& table, std::ostream& out) {
    out << "node_id,label,split";
    for (std::size_t c = 0; c < table.features.cols(); ++c) out << ",f" << c;
    out << '\n';
    for (std::size_t i = 0; i < table.num_nodes(); ++i) {
        out << i << ',' << to_string(table.labels[i]) << ',' << to_string(table.splits[i]);
        for (double v : table.features.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Splitting

namespace {

// Largest-remainder apportionment of `total` items by `fractions`.
std::array<std::size_t, 3> apportion(std::size_t total, const SplitFractions& fractions) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double ideal = fractions[k] * static_cast<double>(total);
        counts[k] = static_cast<std::size_t>(std::floor(ideal));
        rem[k] = ideal - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int k : order) {
        if (assigned >= total) break;
        if (fractions[k] > 0.0) {
            ++counts[k];
            ++assigned;
        }
    }
    return counts;
}

}  // namespace

NodeTable split_nodes(NodeTable table, SplitFractions fractions, std::uint64_t seed) {
    double sum = 0.0;
    int active = 0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
        sum += f;
        active += f > 0.0 ? 1 : 0;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + format_double(sum));
    }

    std::array<std::vector<NodeIndex>, 2> strata;
    for (std::size_t i = 0; i < table.labels.size(); ++i) {
        if (table.labels[i] != Label::unknown) {
            strata[static_cast<int>(table.labels[i])].push_back(static_cast<NodeIndex>(i));
        }
    }
    std::string short_strata;
    for (int s = 0; s < 2; ++s) {
        if (!strata[s].empty() && strata[s].size() < static_cast<std::size_t>(active)) {
            short_strata += std::string(short_strata.empty() ? "" : ", ") +
                            to_string(static_cast<Label>(s)) + " (" +
                            std::to_string(strata[s].size()) + " nodes)";
        }
    }
    if (!short_strata.empty()) {
        throw SplitError("strata with fewer nodes than active splits (" + std::to_string(active) +
                         "): " + short_strata);
    }

    // Controlled rounding of the 2 x 3 count table: rows sum to stratum
    // sizes, columns to the global largest-remainder totals, and every cell is
    // the floor or ceiling of its ideal count. With two rows each column needs
    // 0, 1 or 2 extra units; a 2 forces both rows up, and the 1s go to the
    // normal row by largest remainder until it is full.
    const auto totals = apportion(strata[0].size() + strata[1].size(), fractions);
    std::array<std::array<std::size_t, 3>, 2> cells{};
    std::array<std::array<double, 3>, 2> rem{};
    std::array<std::size_t, 2> row_left{};
    for (int s = 0; s < 2; ++s) {
        row_left[s] = strata[s].size();
        for (int k = 0; k < 3; ++k) {
            const double ideal = fractions[k] * static_cast<double>(strata[s].size());
            cells[s][k] = static_cast<std::size_t>(std::floor(ideal));
            rem[s][k] = ideal - static_cast<double>(cells[s][k]);
            row_left[s] -= cells[s][k];
        }
    }
    std::vector<int> single;
    for (int k = 0; k < 3; ++k) {
        const std::size_t have = cells[0][k] + cells[1][k];
        const std::size_t extra = totals[k] > have ? totals[k] - have : 0;
        if (extra >= 2) {
            for (int s = 0; s < 2; ++s) {
                if (row_left[s] > 0) {
                    ++cells[s][k];
                    --row_left[s];
                }
            }
        } else if (extra == 1) {
            single.push_back(k);
        }
    }
    std::stable_sort(single.begin(), single.end(), [&](int a, int b) { return rem[0][a] > rem[0][b]; });
    for (int k : single) {
        const int s = row_left[0] > 0 ? 0 : 1;
        if (row_left[s] == 0) break;
        ++cells[s][k];
        --row_left[s];
    }
    for (int s = 0; s < 2; ++s) {
        // Any leftover (only possible through floating slop) goes to the
        // largest active split.
        while (row_left[s] > 0) {
            int best = 0;
            for (int k = 1; k < 3; ++k) best = fractions[k] > fractions[best] ? k : best;
            ++cells[s][best];
            --row_left[s];
        }
    }

    SeededRng rng(seed);
    table.splits.assign(table.labels.size(), Split::none);
    for (int s = 0; s < 2; ++s) {
        SeededRng stream = rng.derive(static_cast<std::uint64_t>(s));
        auto& members = strata[s];
        stream.shuffle(std::span<NodeIndex>(members));
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k) {
            for (std::size_t c = 0; c < cells[s][k]; ++c) {
                table.splits[members[pos++]] = static_cast<Split>(k);
            }
        }
    }
    return table;
}

}  // namespace gnnrisk
