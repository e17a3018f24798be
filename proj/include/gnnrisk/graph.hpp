#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnnrisk/numerics.hpp"

namespace gnnrisk {

using NodeIndex = std::uint32_t;

/// Immutable CSR adjacency. For undirected graphs every edge is stored in
/// both directions; rows are sorted ascending and carry no self-loops.
class Graph {
public:
    Graph() = default;
    /// Validates all CSR invariants; throws IngestionError on violation.
    Graph(std::size_t num_nodes, std::vector<std::size_t> offsets, std::vector<NodeIndex> targets,
          std::vector<double> weights, bool directed);

    std::size_t num_nodes() const noexcept { return num_nodes_; }
    std::size_t num_entries() const noexcept { return targets_.size(); }
    bool directed() const noexcept { return directed_; }
    bool weighted() const noexcept { return !weights_.empty(); }

    std::span<const std::size_t> offsets() const noexcept { return offsets_; }
    std::span<const NodeIndex> targets() const noexcept { return targets_; }
    std::span<const double> weights() const noexcept { return weights_; }

    /// Row i of the CSR. Throws BoundsError for i >= num_nodes.
    std::span<const NodeIndex> neighbors(std::size_t i) const;
    std::span<const double> neighbor_weights(std::size_t i) const;
    std::size_t degree(std::size_t i) const { return neighbors(i).size(); }

    /// Number of distinct edges: stored entries, halved for undirected graphs.
    std::size_t num_edges() const noexcept {
        return directed_ ? targets_.size() : targets_.size() / 2;
    }

    /// Reverse every edge. Rows of the result list in-neighbors.
    Graph transposed() const;

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    std::size_t num_nodes_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeIndex> targets_;
    std::vector<double> weights_;
    bool directed_ = false;
};

struct WeightedEdge {
    NodeIndex src;
    NodeIndex dst;
    double weight = 1.0;
};

/// Builds a CSR graph. Undirected input is materialized in both directions;
/// duplicate (src, dst) pairs collapse into one edge with summed weight.
/// Self-loops are rejected.
Graph build_graph(std::size_t num_nodes, std::span<const WeightedEdge> edges, bool directed);

/// Parses `src dst [weight]` lines. Blank lines and lines starting with '#'
/// are skipped. Errors name the 1-based line number.
Graph load_edge_list(std::istream& in, std::size_t num_nodes, bool directed);

/// Writes each stored edge once (src < dst for undirected graphs) as
/// `src dst weight`, in CSR order. Re-ingesting gives back the same CSR.
void write_edge_list(const Graph& g, std::ostream& out);

std::span<const NodeIndex> neighbors(const Graph& g, std::size_t i);

// ---------------------------------------------------------------------------

enum class Label : std::uint8_t { normal = 0, risk = 1, unknown = 2 };
enum class Split : std::uint8_t { train = 0, val = 1, test = 2, none = 3 };

const char* to_string(Label label) noexcept;
const char* to_string(Split split) noexcept;
Label parse_label(const std::string& text);
Split parse_split(const std::string& text);

/// Per-node features, risk labels and split assignment.
struct NodeTable {
    Matrix features;
    std::vector<Label> labels;
    std::vector<Split> splits;

    std::size_t num_nodes() const noexcept { return labels.size(); }

    /// Nodes carrying `split` and a known label, ascending.
    std::vector<NodeIndex> nodes_in(Split split) const;
    /// Nodes in `split` whose label is `label`, ascending.
    std::vector<NodeIndex> nodes_in(Split split, Label label) const;

    /// Throws on row-count or split/label inconsistencies.
    void validate(std::size_t expected_nodes) const;

    friend bool operator==(const NodeTable&, const NodeTable&) = default;
};

/// CSV with header `node_id,label,split,f0..f{d-1}`. Rows must be in node order.
NodeTable read_node_table(std::istream& in);
void write_node_table(const NodeTable& table, std::ostream& out);

using SplitFractions = std::array<double, 3>;

/// Stratified assignment of labeled nodes to train/val/test. Global split
/// sizes follow largest-remainder rounding; per-label counts stay within one
/// node of their proportional share. Unknown-label nodes get Split::none.
NodeTable split_nodes(NodeTable table, SplitFractions fractions, std::uint64_t seed);

}  // namespace gnnrisk
