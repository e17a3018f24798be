#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"

namespace gnnrisk {

enum class Archetype : std::uint8_t { none = 0, ring = 1, hub = 2, bridge = 3 };
enum class Backbone : std::uint8_t { preferential_attachment = 0, block_model = 1 };

const char* to_string(Archetype a) noexcept;
Archetype parse_archetype(const std::string& text);
Backbone parse_backbone(const std::string& text);

/// Synthetic financial network with planted risk structures:
///   ring   - clique of 4-8 risk nodes (a tightly connected risk group)
///   hub    - risk node whose degree is at least 10x the median normal degree,
///            with elevated transaction amounts
///   bridge - risk node wired to many nodes at distance >= 3
struct SynthConfig {
    std::size_t num_nodes = 10000;
    std::size_t target_edges = 32019;
    double anomaly_rate = 0.05;
    /// Weights over ring, hub, bridge.
    std::array<double, 3> mix{0.5, 0.25, 0.25};
    std::size_t feature_dim = 16;
    double signal_strength = 1.0;
    std::uint64_t seed = 42;
    Backbone backbone = Backbone::preferential_attachment;
    SplitFractions split{0.7, 0.15, 0.15};

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

/// Number of structural and amount-aggregate feature columns that precede
/// the per-node profile columns.
inline constexpr std::size_t kDerivedFeatureColumns = 8;

struct Dataset {
    Graph graph;
    NodeTable table;
    std::vector<Archetype> archetypes;
};

/// Deterministic for a fixed config. The backbone depends only on the seed and
/// the structural settings. Planted structure scales with min(signal_strength, 1):
/// at 0 risk nodes are ordinary backbone nodes, from 1 upward the edge set is
/// fixed and only amounts and profile features change.
Dataset generate(const SynthConfig& cfg);

/// One dataset per strength, sharing the backbone and the risk-node choice.
std::vector<Dataset> signal_sweep(const SynthConfig& cfg, const std::vector<double>& strengths);

/// `{"<node_id>": "<archetype>", ...}` for every planted node.
std::string archetypes_json(const std::vector<Archetype>& archetypes);

}  // namespace gnnrisk
