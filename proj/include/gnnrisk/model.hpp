#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/numerics.hpp"

namespace gnnrisk {

enum class LayerKind : std::uint8_t { gcn = 0, attention = 1 };
enum class Aggregation : std::uint8_t { mean = 0, sum = 1 };
/// How attention heads are combined: concatenated (hidden layers) or averaged.
enum class HeadMode : std::uint8_t { concat = 0, mean = 1 };

const char* to_string(Aggregation agg) noexcept;
Aggregation parse_aggregation(const std::string& text);

/// Parameters of one layer.
///
/// gcn:       out_i = act(W m_i), m_i = AGG of h_j over the neighborhood of i.
/// attention: per head k, z_j = W_k h_j, e_ij = leaky_relu(a_k . [z_i || z_j], 0.2),
///            alpha_ij = softmax_j(e_ij), agg_i^k = sum_j alpha_ij z_j. Heads are
///            concatenated or averaged (activation applied per head), or, when
///            `projection` is present, concatenated and mapped through it before
///            the activation.
struct LayerParams {
    LayerKind kind = LayerKind::gcn;
    Activation activation = Activation::relu;
    HeadMode head_mode = HeadMode::concat;
    std::size_t heads = 1;
    std::size_t head_dim = 0;
    /// gcn: d_out x d_in. attention: (heads * head_dim) x d_in, head k owns
    /// rows [k * head_dim, (k + 1) * head_dim).
    Matrix weight;
    /// attention only: heads x (2 * head_dim); the first half scores the
    /// receiving node, the second half the neighbor.
    Matrix attention;
    /// Optional attention output map: d_out x (heads * head_dim).
    Matrix projection;

    std::size_t input_dim() const noexcept { return weight.cols(); }
    std::size_t output_dim() const noexcept;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
    Aggregation aggregation = Aggregation::mean;
    bool self_loops = true;
    std::vector<LayerParams> layers;
    /// num_classes x embedding_dim, no bias.
    Matrix classifier;

    std::size_t input_dim() const noexcept;
    std::size_t embedding_dim() const noexcept;
    std::size_t num_classes() const noexcept { return classifier.rows(); }

    /// Throws ShapeError if dimensions do not chain or heads are inconsistent.
    void validate() const;

    /// Visits every parameter matrix in a fixed order with a stable name.
    void for_each_matrix(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each_matrix(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    ModelParams zeros_like() const;
    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> values);

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Stacked architecture: `gcn_layers` GCN layers, then hidden attention
/// layers with concatenated heads, then one attention layer that averages
/// heads of width embed_size. When heads * head_dim differs from
/// embed_size the hidden attention layers project back to embed_size.
struct Architecture {
    std::size_t input_dim = 0;
    std::size_t embed_size = 128;
    std::size_t attention_heads = 8;
    std::size_t head_dim = 16;
    std::size_t num_classes = 2;
    std::size_t gcn_layers = 1;
    std::size_t attention_layers = 2;
    Aggregation aggregation = Aggregation::mean;
    bool self_loops = true;
};

/// Glorot-uniform initialization, bound sqrt(6 / (fan_in + fan_out)) per matrix.
ModelParams init_params(const Architecture& arch, SeededRng& rng);

/// Aggregation sets per node: the node itself first (when self-loops are
/// enabled), then its CSR row. Directed graphs use in-neighbors.
struct Neighborhoods {
    std::vector<std::size_t> offsets;
    std::vector<NodeIndex> members;
    bool self_loops = true;

    Neighborhoods(const Graph& g, bool self_loops);
    std::size_t num_nodes() const noexcept { return offsets.size() - 1; }
    std::span<const NodeIndex> of(std::size_t i) const noexcept {
        return {members.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
};

/// Nonzero entries select rows; an empty mask means every row.
using RowMask = std::vector<std::uint8_t>;

struct LayerTrace {
    Matrix input;         // after dropout
    Matrix dropout_mask;  // empty when no dropout was applied
    RowMask active;       // output rows computed
    Matrix aggregated;    // gcn: n x d_in; attention: per-head aggregates, one row per agg_rows entry
    Matrix pre;           // pre-activation for gcn (n rows) and projected attention layers (agg_rows)
    Matrix z;             // attention: heads*head_dim wide, one row per z_rows entry
    std::vector<NodeIndex> z_rows;    // attention: nodes whose projections were needed, ascending
    std::vector<NodeIndex> agg_rows;  // attention: nodes whose outputs were computed, ascending
    std::vector<double> scores;  // attention: raw a.[z_i||z_j], slot-major, heads inner
    std::vector<double> alpha;   // attention weights, same layout
};

struct ForwardTrace {
    std::shared_ptr<const Neighborhoods> hood;
    std::vector<LayerTrace> layers;
    Matrix features;    // raw input X
    Matrix embeddings;  // H_L (rows outside the requested set are zero)
    Matrix logits;
    std::string signature;  // architecture fingerprint checked by backward
};

struct LayerOutput {
    Matrix output;
    LayerTrace trace;
};

LayerOutput gcn_layer_forward(const Matrix& h, const Neighborhoods& hood, const LayerParams& p,
                              Aggregation agg, const RowMask& active = {});
LayerOutput gcn_layer_forward(const Matrix& h, const Graph& g, const LayerParams& p,
                              Aggregation agg, bool self_loops);

LayerOutput attention_layer_forward(const Matrix& h, const Neighborhoods& hood,
                                    const LayerParams& p, const RowMask& active = {});
LayerOutput attention_layer_forward(const Matrix& h, const Graph& g, const LayerParams& p,
                                    bool self_loops = true);

/// Returns dL/dh and adds parameter gradients into `grad`.
Matrix gcn_layer_backward(const LayerTrace& trace, const Neighborhoods& hood,
                          const LayerParams& p, Aggregation agg, const Matrix& d_out,
                          LayerParams& grad);
Matrix attention_layer_backward(const LayerTrace& trace, const Neighborhoods& hood,
                                const LayerParams& p, const Matrix& d_out, LayerParams& grad);

struct ForwardOptions {
    Mode mode = Mode::eval;
    /// Applied between layers in train mode.
    double dropout = 0.0;
    /// When non-empty, only these rows of the embeddings and logits are
    /// computed (together with whatever they depend on). Values on these
    /// rows are identical to a full pass.
    std::span<const NodeIndex> output_rows = {};
};

ForwardTrace model_forward(const Matrix& x, std::shared_ptr<const Neighborhoods> hood,
                           const ModelParams& params, const ForwardOptions& options,
                           SeededRng& rng);
ForwardTrace model_forward(const Matrix& x, const Graph& g, const ModelParams& params,
                           const ForwardOptions& options, SeededRng& rng);

/// Exact gradients of a loss given dL/dlogits. Throws TraceError when the
/// trace does not belong to `params`.
ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace,
                           const Matrix& d_logits);

}  // namespace gnnrisk
