#include "gnnrisk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

namespace {

// RNG stream ids. Topology never reads the amount or profile streams, which
// keeps edge sets identical across signal strengths.
constexpr std::uint64_t kTopologyStream = 11;
constexpr std::uint64_t kAmountStream = 12;
constexpr std::uint64_t kProfileStream = 13;
constexpr std::uint64_t kSplitStream = 14;

constexpr std::size_t kSeedClique = 5;
constexpr std::size_t kRingMin = 4;
constexpr std::size_t kRingMax = 8;
constexpr double kHubDegreeFactor = 10.0;
constexpr double kBridgeDegreeFactor = 5.0;
constexpr std::size_t kBlockSize = 200;
constexpr double kBlockInternal = 0.8;

// Signal calibration at strength 1. Mean aggregation dilutes a hub's own
// features by its degree, so the per-node shifts are large in raw units.
constexpr double kAmountNoise = 0.75;  // sd of log amounts
constexpr double kProfileShift = 5.0;  // per profile column, in noise sd
// Standardized features are stretched to this sd. At lr 3e-5 the weights
// barely move in 640 steps, so input scale sets how far the logits can travel.
constexpr double kFeatureScale = 4.0;

double amount_shift(Archetype a) {
    switch (a) {
        // hubs and bridges both move money in bursts; ring members are
        // also helped by their neighbors, who share the shift
        case Archetype::hub: return 3.0;
        case Archetype::ring: return 1.8;
        case Archetype::bridge: return 3.0;
        case Archetype::none: return 0.0;
    }
    return 0.0;
}

std::uint64_t edge_key(NodeIndex u, NodeIndex v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | v;
}

class EdgeBuilder {
public:
    explicit EdgeBuilder(std::size_t n) : adj_(n) {}

    bool has(NodeIndex u, NodeIndex v) const { return keys_.count(key(u, v)) != 0; }

    bool add(NodeIndex u, NodeIndex v) {
        if (u == v || has(u, v)) return false;
        keys_.insert(key(u, v));
        adj_[u].push_back(v);
        adj_[v].push_back(u);
        return true;
    }

    void remove(NodeIndex u, NodeIndex v) {
        keys_.erase(key(u, v));
        adj_[u].erase(std::find(adj_[u].begin(), adj_[u].end(), v));
        adj_[v].erase(std::find(adj_[v].begin(), adj_[v].end(), u));
    }

    std::size_t degree(NodeIndex u) const { return adj_[u].size(); }
    std::size_t edges() const { return keys_.size(); }
    const std::vector<NodeIndex>& adjacent(NodeIndex u) const { return adj_[u]; }
    std::size_t nodes() const { return adj_.size(); }

    /// Canonical (u < v) edges, sorted.
    std::vector<std::pair<NodeIndex, NodeIndex>> canonical() const {
        std::vector<std::pair<NodeIndex, NodeIndex>> out;
        out.reserve(keys_.size());
        for (std::size_t u = 0; u < adj_.size(); ++u) {
            std::vector<NodeIndex> row;
            for (NodeIndex v : adj_[u]) {
                if (v > u) row.push_back(v);
            }
            std::sort(row.begin(), row.end());
            for (NodeIndex v : row) out.emplace_back(static_cast<NodeIndex>(u), v);
        }
        return out;
    }

private:
    static std::uint64_t key(NodeIndex u, NodeIndex v) { return edge_key(u, v); }
    std::vector<std::vector<NodeIndex>> adj_;
    std::unordered_set<std::uint64_t> keys_;
};

std::size_t median_degree(const EdgeBuilder& b, const std::vector<Archetype>& tags) {
    std::vector<std::size_t> deg;
    for (std::size_t u = 0; u < b.nodes(); ++u) {
        if (tags[u] == Archetype::none) deg.push_back(b.degree(static_cast<NodeIndex>(u)));
    }
    if (deg.empty()) return 0;
    std::nth_element(deg.begin(), deg.begin() + deg.size() / 2, deg.end());
    return deg[deg.size() / 2];
}

// Backbone of roughly `budget` edges. Preferential attachment grows from a
// small clique; each arriving node links to existing nodes sampled in
// proportion to their degree.
void build_preferential(EdgeBuilder& b, std::size_t budget, SeededRng& rng) {
    const std::size_t n = b.nodes();
    const std::size_t clique = std::min(kSeedClique, n);
    std::vector<NodeIndex> endpoints;
    for (NodeIndex u = 0; u < clique; ++u) {
        for (NodeIndex v = u + 1; v < clique; ++v) {
            b.add(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    }
    if (n <= clique) return;
    const double remaining = budget > b.edges() ? double(budget - b.edges()) : 0.0;
    const double per_node = std::max(1.0, remaining / double(n - clique));
    const std::size_t base = static_cast<std::size_t>(per_node);
    const double frac = per_node - double(base);
    for (std::size_t t = clique; t < n; ++t) {
        const std::size_t want = std::min(t, base + (rng.bernoulli(frac) ? 1 : 0));
        std::size_t made = 0;
        std::size_t attempts = 0;
        std::vector<NodeIndex> fresh;
        while (made < want && attempts < 64 * want) {
            ++attempts;
            const NodeIndex v = endpoints.empty() ? static_cast<NodeIndex>(rng.below(t))
                                                  : endpoints[rng.below(endpoints.size())];
            if (b.add(static_cast<NodeIndex>(t), v)) {
                fresh.push_back(v);
                ++made;
            }
        }
        for (NodeIndex v : fresh) {
            endpoints.push_back(static_cast<NodeIndex>(t));
            endpoints.push_back(v);
        }
    }
}

// Block model: consecutive blocks of kBlockSize nodes, most edges internal.
void build_block_model(EdgeBuilder& b, std::size_t budget, SeededRng& rng) {
    const std::size_t n = b.nodes();
    if (n < 2) return;
    std::size_t attempts = 0;
    while (b.edges() < budget && attempts < 100 * budget) {
        ++attempts;
        const auto u = static_cast<NodeIndex>(rng.below(n));
        NodeIndex v;
        if (rng.bernoulli(kBlockInternal)) {
            const std::size_t start = (u / kBlockSize) * kBlockSize;
            const std::size_t size = std::min(kBlockSize, n - start);
            v = static_cast<NodeIndex>(start + rng.below(size));
        } else {
            v = static_cast<NodeIndex>(rng.below(n));
        }
        b.add(u, v);
    }
}

struct Plan {
    std::vector<Archetype> tags;
    std::vector<std::vector<NodeIndex>> rings;
    std::vector<NodeIndex> hubs;
    std::vector<NodeIndex> bridges;
};

Plan plan_anomalies(const SynthConfig& cfg, SeededRng& rng) {
    Plan plan;
    plan.tags.assign(cfg.num_nodes, Archetype::none);
    const auto total = static_cast<std::size_t>(std::llround(cfg.anomaly_rate * double(cfg.num_nodes)));
    if (total == 0) return plan;
    std::size_t ring_nodes = static_cast<std::size_t>(std::llround(cfg.mix[0] * double(total)));
    std::size_t hub_nodes = static_cast<std::size_t>(std::llround(cfg.mix[1] * double(total)));
    ring_nodes = std::min(ring_nodes, total);
    hub_nodes = std::min(hub_nodes, total - ring_nodes);
    if (ring_nodes < kRingMin) ring_nodes = 0;
    const std::size_t bridge_nodes = total - ring_nodes - hub_nodes;

    // Ring sizes in [4, 8] summing to ring_nodes.
    std::vector<std::size_t> sizes;
    std::size_t left = ring_nodes;
    while (left > 0) {
        if (left <= kRingMax) {
            sizes.push_back(left);
            break;
        }
        std::size_t s = kRingMin + rng.below(kRingMax - kRingMin + 1);
        if (left - s < kRingMin) s = left - kRingMin;
        sizes.push_back(s);
        left -= s;
    }

    std::vector<NodeIndex> nodes(cfg.num_nodes);
    std::iota(nodes.begin(), nodes.end(), NodeIndex{0});
    rng.shuffle(std::span<NodeIndex>(nodes));
    std::size_t pos = 0;
    for (std::size_t s : sizes) {
        std::vector<NodeIndex> group(nodes.begin() + pos, nodes.begin() + pos + s);
        std::sort(group.begin(), group.end());
        for (NodeIndex u : group) plan.tags[u] = Archetype::ring;
        plan.rings.push_back(std::move(group));
        pos += s;
    }
    for (std::size_t k = 0; k < hub_nodes; ++k) {
        plan.hubs.push_back(nodes[pos]);
        plan.tags[nodes[pos++]] = Archetype::hub;
    }
    for (std::size_t k = 0; k < bridge_nodes; ++k) {
        plan.bridges.push_back(nodes[pos]);
        plan.tags[nodes[pos++]] = Archetype::bridge;
    }
    std::sort(plan.hubs.begin(), plan.hubs.end());
    std::sort(plan.bridges.begin(), plan.bridges.end());
    return plan;
}

std::size_t estimate_planted(const Plan& plan, std::size_t assumed_median) {
    std::size_t edges = 0;
    for (const auto& r : plan.rings) edges += r.size() * (r.size() - 1) / 2;
    edges += plan.hubs.size() * static_cast<std::size_t>(kHubDegreeFactor * double(assumed_median + 1));
    edges += plan.bridges.size() * static_cast<std::size_t>(kBridgeDegreeFactor * double(assumed_median));
    return edges;
}

// Random new neighbors for `hub` until its degree would reach `target_degree`.
std::vector<NodeIndex> hub_targets(const EdgeBuilder& b, NodeIndex hub, std::size_t target_degree,
                                   SeededRng& rng) {
    const std::size_t n = b.nodes();
    std::vector<NodeIndex> out;
    if (target_degree <= b.degree(hub)) return out;
    const std::size_t want = target_degree - b.degree(hub);
    std::unordered_set<NodeIndex> taken(b.adjacent(hub).begin(), b.adjacent(hub).end());
    taken.insert(hub);
    std::size_t attempts = 0;
    while (out.size() < want && attempts < 100 * want + 1000) {
        ++attempts;
        const auto v = static_cast<NodeIndex>(rng.below(n));
        if (taken.insert(v).second) out.push_back(v);
    }
    return out;
}

// Random nodes at distance >= 3 from `bridge`.
std::vector<NodeIndex> distant_targets(const EdgeBuilder& b, NodeIndex bridge, std::size_t links,
                                       SeededRng& rng) {
    const std::size_t n = b.nodes();
    std::vector<std::uint8_t> near(n, 0);
    near[bridge] = 1;
    for (NodeIndex v : b.adjacent(bridge)) {
        near[v] = 1;
        for (NodeIndex w : b.adjacent(v)) near[w] = 1;
    }
    std::vector<NodeIndex> out;
    std::size_t attempts = 0;
    while (out.size() < links && attempts < 100 * links + 1000) {
        ++attempts;
        const auto v = static_cast<NodeIndex>(rng.below(n));
        if (near[v]) continue;
        near[v] = 1;
        out.push_back(v);
    }
    return out;
}

// Adds random edges, or removes backbone edges, until the count equals
// `target`. Neither step looks at labels. Removal keeps both endpoints at
// degree >= 2 and never touches planted edges.
void adjust_to_target(EdgeBuilder& b, std::size_t target,
                      const std::unordered_set<std::uint64_t>& planted, SeededRng& rng) {
    const std::size_t n = b.nodes();
    std::size_t attempts = 0;
    while (b.edges() < target && attempts < 100 * target) {
        ++attempts;
        b.add(static_cast<NodeIndex>(rng.below(n)), static_cast<NodeIndex>(rng.below(n)));
    }
    if (b.edges() <= target) return;
    auto candidates = b.canonical();
    rng.shuffle(std::span<std::pair<NodeIndex, NodeIndex>>(candidates));
    for (const auto& [u, v] : candidates) {
        if (b.edges() <= target) break;
        if (planted.count(edge_key(u, v)) != 0) continue;
        if (b.degree(u) < 3 || b.degree(v) < 3) continue;
        b.remove(u, v);
    }
}

void standardize_columns(Matrix& m) {
    const double rows = static_cast<double>(m.rows());
    if (m.rows() == 0) return;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
        mean /= rows;
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
        const double sd = std::sqrt(var / rows);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            m(r, c) = kFeatureScale * (sd > 0.0 ? (m(r, c) - mean) / sd : m(r, c) - mean);
        }
    }
}

}  // namespace

const char* to_string(Archetype a) noexcept {
    switch (a) {
        case Archetype::none: return "none";
        case Archetype::ring: return "ring";
        case Archetype::hub: return "hub";
        case Archetype::bridge: return "bridge";
    }
    return "none";
}

Archetype parse_archetype(const std::string& text) {
    for (auto a : {Archetype::none, Archetype::ring, Archetype::hub, Archetype::bridge}) {
        if (text == to_string(a)) return a;
    }
    throw ParseError("unknown archetype '" + text + "'");
}

Backbone parse_backbone(const std::string& text) {
    if (text == "pa" || text == "preferential") return Backbone::preferential_attachment;
    if (text == "sbm" || text == "block") return Backbone::block_model;
    throw ConfigError("unknown backbone '" + text + "' (expected pa or sbm)");
}

void SynthConfig::validate() const {
    if (num_nodes < 2) throw ConfigError("num_nodes must be >= 2");
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 0.5)) {
        throw ConfigError("anomaly_rate must lie in [0, 0.5)");
    }
    double total = 0.0;
    for (double w : mix) {
        if (!(w >= 0.0)) throw ConfigError("archetype mix weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("archetype mix weights must sum to 1");
    if (feature_dim < kDerivedFeatureColumns) {
        throw ConfigError("feature_dim must be >= " + std::to_string(kDerivedFeatureColumns));
    }
    if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength)) {
        throw ConfigError("signal_strength must be a finite value >= 0");
    }
    const double max_edges = double(num_nodes) * double(num_nodes - 1) / 2.0;
    if (target_edges < num_nodes / 2 || double(target_edges) > 0.5 * max_edges) {
        throw ConfigError("target_edges " + std::to_string(target_edges) +
                          " is not achievable for " + std::to_string(num_nodes) + " nodes");
    }
}

Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.num_nodes;
    SeededRng root(cfg.seed);
    SeededRng topo = root.derive(kTopologyStream);

    Plan plan = plan_anomalies(cfg, topo);
    // Planted edges are estimated with the typical median degree of the
    // backbone (about the mean edges per arriving node).
    const std::size_t guess_median = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(0.8 * double(cfg.target_edges) / double(n))));
    const std::size_t planted = estimate_planted(plan, guess_median);
    if (planted >= cfg.target_edges) {
        throw GenerationError("planted anomaly structures alone need about " +
                              std::to_string(planted) + " edges, more than target_edges " +
                              std::to_string(cfg.target_edges));
    }

    EdgeBuilder b(n);
    if (cfg.backbone == Backbone::preferential_attachment) {
        build_preferential(b, cfg.target_edges - planted, topo);
    } else {
        build_block_model(b, cfg.target_edges - planted, topo);
    }

    // Planted structure grows with the signal up to full strength at 1, so a
    // zero-signal dataset hides nothing in its topology either. The backbone
    // is built first and is the same for every strength.
    const double structure = std::min(1.0, cfg.signal_strength);
    auto scaled = [structure](std::size_t full) {
        return static_cast<std::size_t>(std::llround(structure * double(full)));
    };
    std::unordered_set<std::uint64_t> planted_keys;
    auto plant = [&](NodeIndex u, NodeIndex v) {
        if (b.add(u, v)) planted_keys.insert(edge_key(u, v));
    };
    for (const auto& ring : plan.rings) {
        std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
        for (std::size_t i = 0; i < ring.size(); ++i) {
            for (std::size_t j = i + 1; j < ring.size(); ++j) pairs.emplace_back(ring[i], ring[j]);
        }
        topo.shuffle(std::span<std::pair<NodeIndex, NodeIndex>>(pairs));
        pairs.resize(scaled(pairs.size()));
        for (const auto& [u, v] : pairs) plant(u, v);
    }
    const std::size_t backbone_median = std::max<std::size_t>(1, median_degree(b, plan.tags));
    for (NodeIndex u : plan.bridges) {
        const auto links = scaled(static_cast<std::size_t>(kBridgeDegreeFactor * double(backbone_median)));
        for (NodeIndex v : distant_targets(b, u, links, topo)) plant(u, v);
    }
    // Hubs are planted with margin above the current median, then topped up
    // after the edge count is settled in case the median moved.
    for (NodeIndex u : plan.hubs) {
        const std::size_t extra = topo.below(2 * backbone_median + 1);
        const auto full = static_cast<std::size_t>(kHubDegreeFactor * double(backbone_median + 1)) + extra;
        const std::size_t want = b.degree(u) + scaled(full > b.degree(u) ? full - b.degree(u) : 0);
        for (NodeIndex v : hub_targets(b, u, want, topo)) plant(u, v);
    }
    for (int round = 0; round < 8; ++round) {
        adjust_to_target(b, cfg.target_edges, planted_keys, topo);
        if (structure < 1.0) break;
        const std::size_t med = median_degree(b, plan.tags);
        const auto need = static_cast<std::size_t>(kHubDegreeFactor * double(med));
        bool topped = false;
        for (NodeIndex u : plan.hubs) {
            if (b.degree(u) < need) {
                for (NodeIndex v : hub_targets(b, u, need, topo)) plant(u, v);
                topped = true;
            }
        }
        if (!topped && b.edges() == cfg.target_edges) break;
    }
    const double band = 0.05 * double(cfg.target_edges);
    if (std::abs(double(b.edges()) - double(cfg.target_edges)) > band) {
        throw GenerationError("could not reach target_edges " + std::to_string(cfg.target_edges) +
                              " (got " + std::to_string(b.edges()) + ")");
    }

    // Transaction amounts: log-normal, shifted upward on edges touching risk
    // nodes in proportion to signal_strength.
    const auto edges = b.canonical();
    SeededRng amounts = root.derive(kAmountStream);
    std::vector<WeightedEdge> weighted;
    weighted.reserve(edges.size());
    std::vector<double> log_amount(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        const double shift = std::max(amount_shift(plan.tags[u]), amount_shift(plan.tags[v]));
        log_amount[e] = cfg.signal_strength * shift + kAmountNoise * amounts.normal();
        weighted.push_back({u, v, std::exp(log_amount[e])});
    }

    Dataset ds;
    ds.graph = build_graph(n, weighted, false);
    ds.archetypes = plan.tags;

    // Features: degree statistics, amount aggregates, then per-node profile
    // columns whose mean shifts for risk nodes.
    const Graph& g = ds.graph;
    Matrix f(n, cfg.feature_dim);
    for (std::size_t u = 0; u < n; ++u) {
        const auto row = g.neighbors(u);
        const auto w = g.neighbor_weights(u);
        const double deg = double(row.size());
        double nbr_deg_sum = 0.0;
        double nbr_deg_max = 0.0;
        for (NodeIndex v : row) {
            nbr_deg_sum += double(g.degree(v));
            nbr_deg_max = std::max(nbr_deg_max, double(g.degree(v)));
        }
        std::size_t links = 0;
        for (std::size_t a = 0; a < row.size(); ++a) {
            const auto va = g.neighbors(row[a]);
            for (std::size_t c = a + 1; c < row.size(); ++c) {
                links += std::binary_search(va.begin(), va.end(), row[c]) ? 1 : 0;
            }
        }
        double la_sum = 0.0;
        double la_max = 0.0;
        double total = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double la = std::log(w[k]);
            la_sum += la;
            la_max = k == 0 ? la : std::max(la_max, la);
            total += w[k];
        }
        const double la_mean = deg > 0 ? la_sum / deg : 0.0;
        double la_var = 0.0;
        for (double wk : w) la_var += (std::log(wk) - la_mean) * (std::log(wk) - la_mean);
        f(u, 0) = std::log1p(deg);
        f(u, 1) = std::log1p(deg > 0 ? nbr_deg_sum / deg : 0.0);
        f(u, 2) = deg > 1 ? 2.0 * double(links) / (deg * (deg - 1.0)) : 0.0;
        f(u, 3) = std::log1p(nbr_deg_max);
        f(u, 4) = la_mean;
        f(u, 5) = la_max;
        f(u, 6) = deg > 1 ? std::sqrt(la_var / (deg - 1.0)) : 0.0;
        f(u, 7) = std::log1p(total);
    }
    SeededRng profile = root.derive(kProfileStream);
    for (std::size_t u = 0; u < n; ++u) {
        const bool risk = plan.tags[u] != Archetype::none;
        for (std::size_t c = kDerivedFeatureColumns; c < cfg.feature_dim; ++c) {
            const double direction = (c - kDerivedFeatureColumns) % 2 == 0 ? 1.0 : -1.0;
            const double mu = risk ? cfg.signal_strength * kProfileShift * direction : 0.0;
            // log of a log-normal draw
            f(u, c) = mu + profile.normal();
        }
    }
    standardize_columns(f);

    ds.table.features = std::move(f);
    ds.table.labels.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        ds.table.labels[u] = plan.tags[u] == Archetype::none ? Label::normal : Label::risk;
    }
    ds.table.splits.assign(n, Split::none);
    ds.table = split_nodes(std::move(ds.table), cfg.split, root.derive(kSplitStream).seed());
    return ds;
}

std::vector<Dataset> signal_sweep(const SynthConfig& cfg, const std::vector<double>& strengths) {
    std::vector<Dataset> out;
    for (double s : strengths) {
        if (!(s >= 0.0)) throw ConfigError("signal strengths must be >= 0");
        SynthConfig c = cfg;
        c.signal_strength = s;
        out.push_back(generate(c));
    }
    return out;
}

std::string archetypes_json(const std::vector<Archetype>& archetypes) {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (std::size_t i = 0; i < archetypes.size(); ++i) {
        if (archetypes[i] == Archetype::none) continue;
        os << (first ? "" : ",") << "\n  \"" << i << "\": \"" << to_string(archetypes[i]) << "\"";
        first = false;
    }
    os << (first ? "}" : "\n}") << "\n";
    return os.str();
}

}  // namespace gnnrisk
