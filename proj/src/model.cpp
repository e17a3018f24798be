#include "gnnrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gnnrisk/errors.hpp"

namespace gnnrisk {

namespace {

constexpr double kLeakySlope = 0.2;

void add_into(Matrix& dst, const Matrix& src) {
    if (!dst.same_shape(src)) {
        throw ShapeError("gradient accumulation shape mismatch: " + dst.shape_string() + " vs " +
                         src.shape_string());
    }
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

bool is_active(const RowMask& mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

bool row_is_zero(std::span<const double> row) {
    return std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
}

// Rows needed as layer input to produce `active` output rows.
RowMask expand_mask(const RowMask& active, const Neighborhoods& hood) {
    if (active.empty()) return {};
    RowMask need = active;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (!active[i]) continue;
        for (NodeIndex j : hood.of(i)) need[j] = 1;
    }
    return need;
}

// Rows selected by `mask` in ascending order (all rows for an empty mask).
std::vector<NodeIndex> mask_rows(const RowMask& mask, std::size_t n) {
    std::vector<NodeIndex> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_active(mask, i)) rows.push_back(static_cast<NodeIndex>(i));
    }
    return rows;
}

// Inverse of a row list: node -> position, or UINT32_MAX when absent.
std::vector<std::uint32_t> positions(const std::vector<NodeIndex>& rows, std::size_t n) {
    std::vector<std::uint32_t> pos(n, UINT32_MAX);
    for (std::size_t r = 0; r < rows.size(); ++r) pos[rows[r]] = static_cast<std::uint32_t>(r);
    return pos;
}

Matrix gather(const Matrix& m, const std::vector<NodeIndex>& rows) {
    if (rows.size() == m.rows()) return m;
    Matrix out(rows.size(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
    }
    return out;
}

void scatter(const Matrix& compact, const std::vector<NodeIndex>& rows, Matrix& full) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(compact.row(r).begin(), compact.row(r).end(), full.row(rows[r]).begin());
    }
}

Matrix keep_rows(const Matrix& m, const RowMask& mask) {
    if (mask.empty()) return m;
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (mask[i]) std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin());
    }
    return out;
}

void check_input(const Matrix& h, const Neighborhoods& hood, const LayerParams& p,
                 const RowMask& active, const char* what) {
    if (h.rows() != hood.num_nodes()) {
        throw ShapeError(std::string(what) + ": input has " + std::to_string(h.rows()) +
                         " rows for a graph of " + std::to_string(hood.num_nodes()) + " nodes");
    }
    if (h.cols() != p.input_dim()) {
        throw ShapeError(std::string(what) + ": input width " + std::to_string(h.cols()) +
                         " does not match weight " + p.weight.shape_string());
    }
    if (!active.empty() && active.size() != h.rows()) {
        throw ShapeError(std::string(what) + ": row mask length mismatch");
    }
}

std::string make_signature(const ModelParams& params, std::size_t num_nodes) {
    std::ostringstream os;
    os << "n=" << num_nodes << ";agg=" << static_cast<int>(params.aggregation)
       << ";self=" << params.self_loops;
    for (const auto& l : params.layers) {
        os << "|" << static_cast<int>(l.kind) << ":" << l.weight.shape_string() << ":"
           << l.attention.shape_string() << ":" << l.projection.shape_string() << ":"
           << static_cast<int>(l.head_mode) << ":" << static_cast<int>(l.activation);
    }
    os << "|c:" << params.classifier.shape_string();
    return os.str();
}

Matrix glorot(std::size_t rows, std::size_t cols, double fan_in, double fan_out, SeededRng& rng) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : m.values()) v = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

const char* to_string(Aggregation agg) noexcept { return agg == Aggregation::mean ? "mean" : "sum"; }

Aggregation parse_aggregation(const std::string& text) {
    if (text == "mean") return Aggregation::mean;
    if (text == "sum") return Aggregation::sum;
    throw ConfigError("unknown aggregation '" + text + "' (expected mean or sum)");
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t LayerParams::output_dim() const noexcept {
    if (kind == LayerKind::gcn) return weight.rows();
    if (!projection.empty()) return projection.rows();
    return head_mode == HeadMode::concat ? heads * head_dim : head_dim;
}

std::size_t ModelParams::input_dim() const noexcept {
    return layers.empty() ? classifier.cols() : layers.front().input_dim();
}

std::size_t ModelParams::embedding_dim() const noexcept {
    return layers.empty() ? classifier.cols() : layers.back().output_dim();
}

void ModelParams::validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& p = layers[l];
        const std::string where = "layer " + std::to_string(l);
        if (p.weight.empty()) throw ShapeError(where + ": empty weight matrix");
        if (p.kind == LayerKind::attention) {
            if (p.heads == 0 || p.head_dim == 0 || p.weight.rows() != p.heads * p.head_dim) {
                throw ShapeError(where + ": attention weight " + p.weight.shape_string() +
                                 " inconsistent with " + std::to_string(p.heads) + " heads of " +
                                 std::to_string(p.head_dim));
            }
            if (p.attention.rows() != p.heads || p.attention.cols() != 2 * p.head_dim) {
                throw ShapeError(where + ": attention vectors " + p.attention.shape_string() +
                                 " expected " + std::to_string(p.heads) + "x" +
                                 std::to_string(2 * p.head_dim));
            }
            if (!p.projection.empty() && p.projection.cols() != p.heads * p.head_dim) {
                throw ShapeError(where + ": projection " + p.projection.shape_string() +
                                 " does not accept " + std::to_string(p.heads * p.head_dim) +
                                 " inputs");
            }
        } else if (!p.attention.empty() || !p.projection.empty()) {
            throw ShapeError(where + ": gcn layer carries attention parameters");
        }
        if (l > 0 && layers[l - 1].output_dim() != p.input_dim()) {
            throw ShapeError(where + ": input dim " + std::to_string(p.input_dim()) +
                             " does not match previous output dim " +
                             std::to_string(layers[l - 1].output_dim()));
        }
    }
    if (classifier.empty()) throw ShapeError("empty classifier");
    if (!layers.empty() && classifier.cols() != layers.back().output_dim()) {
        throw ShapeError("classifier " + classifier.shape_string() +
                         " does not match embedding dim " +
                         std::to_string(layers.back().output_dim()));
    }
}

void ModelParams::for_each_matrix(const std::function<void(const std::string&, Matrix&)>& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l) + ".";
        fn(prefix + "weight", layers[l].weight);
        if (!layers[l].attention.empty()) fn(prefix + "attention", layers[l].attention);
        if (!layers[l].projection.empty()) fn(prefix + "projection", layers[l].projection);
    }
    fn("classifier", classifier);
}

void ModelParams::for_each_matrix(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<ModelParams*>(this)->for_each_matrix(
        [&](const std::string& name, Matrix& m) { fn(name, m); });
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    z.for_each_matrix([](const std::string&, Matrix& m) { m.fill(0.0); });
    return z;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t total = 0;
    for_each_matrix([&](const std::string&, const Matrix& m) { total += m.size(); });
    return total;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for_each_matrix([&](const std::string&, const Matrix& m) {
        out.insert(out.end(), m.values().begin(), m.values().end());
    });
    return out;
}

void ModelParams::assign_flat(std::span<const double> values) {
    if (values.size() != parameter_count()) {
        throw ShapeError("flat parameter vector has " + std::to_string(values.size()) +
                         " entries, model has " + std::to_string(parameter_count()));
    }
    std::size_t pos = 0;
    for_each_matrix([&](const std::string&, Matrix& m) {
        std::copy(values.begin() + pos, values.begin() + pos + m.size(), m.values().begin());
        pos += m.size();
    });
}

ModelParams init_params(const Architecture& arch, SeededRng& rng) {
    if (arch.input_dim == 0 || arch.embed_size == 0 || arch.num_classes == 0) {
        throw ConfigError("architecture dimensions must be positive");
    }
    if (arch.attention_layers > 0 && (arch.attention_heads == 0 || arch.head_dim == 0)) {
        throw ConfigError("attention layers need at least one head of positive width");
    }
    ModelParams p;
    p.aggregation = arch.aggregation;
    p.self_loops = arch.self_loops;
    std::size_t dim = arch.input_dim;
    for (std::size_t l = 0; l < arch.gcn_layers; ++l) {
        LayerParams layer;
        layer.kind = LayerKind::gcn;
        const bool last = arch.attention_layers == 0 && l + 1 == arch.gcn_layers;
        layer.activation = last ? Activation::identity : Activation::relu;
        layer.weight = glorot(arch.embed_size, dim, double(dim), double(arch.embed_size), rng);
        p.layers.push_back(std::move(layer));
        dim = arch.embed_size;
    }
    for (std::size_t l = 0; l < arch.attention_layers; ++l) {
        const bool last = l + 1 == arch.attention_layers;
        LayerParams layer;
        layer.kind = LayerKind::attention;
        layer.heads = arch.attention_heads;
        layer.head_mode = last ? HeadMode::mean : HeadMode::concat;
        layer.head_dim = last ? arch.embed_size : arch.head_dim;
        layer.activation = last ? Activation::identity : Activation::relu;
        const std::size_t width = layer.heads * layer.head_dim;
        layer.weight = Matrix(width, dim);
        // Each head's W_k is its own matrix for initialization purposes.
        for (std::size_t k = 0; k < layer.heads; ++k) {
            const Matrix wk = glorot(layer.head_dim, dim, double(dim), double(layer.head_dim), rng);
            for (std::size_t r = 0; r < layer.head_dim; ++r) {
                std::copy(wk.row(r).begin(), wk.row(r).end(), layer.weight.row(k * layer.head_dim + r).begin());
            }
        }
        layer.attention = Matrix(layer.heads, 2 * layer.head_dim);
        for (std::size_t k = 0; k < layer.heads; ++k) {
            const Matrix ak = glorot(1, 2 * layer.head_dim, 1.0, double(2 * layer.head_dim), rng);
            std::copy(ak.row(0).begin(), ak.row(0).end(), layer.attention.row(k).begin());
        }
        if (!last && width != arch.embed_size) {
            layer.projection = glorot(arch.embed_size, width, double(width), double(arch.embed_size), rng);
        }
        dim = layer.output_dim();
        p.layers.push_back(std::move(layer));
    }
    p.classifier = glorot(arch.num_classes, dim, double(dim), double(arch.num_classes), rng);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Neighborhoods

Neighborhoods::Neighborhoods(const Graph& graph, bool self) : self_loops(self) {
    // directed edges carry influence from source to target: aggregate in-neighbors
    const Graph g = graph.directed() ? graph.transposed() : graph;
    const std::size_t n = g.num_nodes();
    offsets.resize(n + 1);
    members.reserve(g.num_entries() + (self ? n : 0));
    offsets[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (self) members.push_back(static_cast<NodeIndex>(i));
        const auto row = g.neighbors(i);
        members.insert(members.end(), row.begin(), row.end());
        offsets[i + 1] = members.size();
    }
}

// ---------------------------------------------------------------------------
// GCN layer

LayerOutput gcn_layer_forward(const Matrix& h, const Neighborhoods& hood, const LayerParams& p,
                              Aggregation agg, const RowMask& active) {
    check_input(h, hood, p, active, "gcn_layer_forward");
    const std::size_t n = h.rows();
    const std::size_t d = h.cols();
    LayerTrace t;
    t.active = active;
    t.aggregated = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_active(active, i)) continue;
        const auto members = hood.of(i);
        if (members.empty()) continue;
        auto m = t.aggregated.row(i);
        for (NodeIndex j : members) {
            const auto hj = h.row(j);
            for (std::size_t c = 0; c < d; ++c) m[c] += hj[c];
        }
        if (agg == Aggregation::mean) {
            const double count = static_cast<double>(members.size());
            for (double& v : m) v /= count;
        }
    }
    t.pre = matmul_nt(t.aggregated, p.weight);
    Matrix out = activation(t.pre, p.activation);
    return {std::move(out), std::move(t)};
}

LayerOutput gcn_layer_forward(const Matrix& h, const Graph& g, const LayerParams& p,
                              Aggregation agg, bool self_loops) {
    const Neighborhoods hood(g, self_loops);
    LayerOutput r = gcn_layer_forward(h, hood, p, agg);
    r.trace.input = h;
    return r;
}

Matrix gcn_layer_backward(const LayerTrace& t, const Neighborhoods& hood, const LayerParams& p,
                          Aggregation agg, const Matrix& d_out, LayerParams& grad) {
    if (!d_out.same_shape(t.pre)) {
        throw ShapeError("gcn backward: upstream " + d_out.shape_string() + " vs output " +
                         t.pre.shape_string());
    }
    const Matrix d_pre = activation_backward(t.pre, d_out, p.activation);
    add_into(grad.weight, matmul_tn(d_pre, t.aggregated));
    const Matrix d_agg = matmul(d_pre, p.weight);
    Matrix d_h(d_agg.rows(), d_agg.cols());
    const std::size_t d = d_agg.cols();
    for (std::size_t i = 0; i < d_agg.rows(); ++i) {
        const auto gi = d_agg.row(i);
        if (row_is_zero(gi)) continue;
        const auto members = hood.of(i);
        const double count = static_cast<double>(members.size());
        for (NodeIndex j : members) {
            auto dj = d_h.row(j);
            if (agg == Aggregation::mean) {
                for (std::size_t c = 0; c < d; ++c) dj[c] += gi[c] / count;
            } else {
                for (std::size_t c = 0; c < d; ++c) dj[c] += gi[c];
            }
        }
    }
    return d_h;
}

// ---------------------------------------------------------------------------
// Attention layer

LayerOutput attention_layer_forward(const Matrix& h, const Neighborhoods& hood,
                                    const LayerParams& p, const RowMask& active) {
    check_input(h, hood, p, active, "attention_layer_forward");
    if (p.kind != LayerKind::attention || p.attention.empty()) {
        throw ConfigError("attention_layer_forward: layer has no attention parameters");
    }
    const std::size_t n = h.rows();
    const std::size_t heads = p.heads;
    const std::size_t dh = p.head_dim;
    const std::size_t width = heads * dh;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_active(active, i) && hood.of(i).empty()) {
            throw ConfigError("attention layer: node " + std::to_string(i) +
                              " has an empty neighborhood (enable self-loops)");
        }
    }

    LayerTrace t;
    t.active = active;
    t.z_rows = mask_rows(expand_mask(active, hood), n);
    t.agg_rows = mask_rows(active, n);
    const std::vector<std::uint32_t> zpos = positions(t.z_rows, n);
    t.z = matmul_nt(gather(h, t.z_rows), p.weight);

    // Per-node halves of the additive score: a_k[:dh].z_i and a_k[dh:].z_j,
    // indexed like the rows of z.
    const std::size_t zn = t.z_rows.size();
    std::vector<double> src(zn * heads, 0.0);
    std::vector<double> dst(zn * heads, 0.0);
    for (std::size_t r = 0; r < zn; ++r) {
        const auto zi = t.z.row(r);
        for (std::size_t k = 0; k < heads; ++k) {
            const auto a = p.attention.row(k);
            double s = 0.0;
            double q = 0.0;
            for (std::size_t c = 0; c < dh; ++c) {
                s += a[c] * zi[k * dh + c];
                q += a[dh + c] * zi[k * dh + c];
            }
            src[r * heads + k] = s;
            dst[r * heads + k] = q;
        }
    }

    const std::size_t slots = hood.members.size();
    t.scores.assign(slots * heads, 0.0);
    t.alpha.assign(slots * heads, 0.0);
    t.aggregated = Matrix(t.agg_rows.size(), width);
    std::vector<double> buf;
    for (std::size_t ai = 0; ai < t.agg_rows.size(); ++ai) {
        const NodeIndex i = t.agg_rows[ai];
        const std::size_t begin = hood.offsets[i];
        const auto members = hood.of(i);
        const std::size_t zi = zpos[i];
        buf.resize(members.size());
        auto out = t.aggregated.row(ai);
        for (std::size_t k = 0; k < heads; ++k) {
            for (std::size_t s = 0; s < members.size(); ++s) {
                const double u = src[zi * heads + k] + dst[zpos[members[s]] * heads + k];
                t.scores[(begin + s) * heads + k] = u;
                buf[s] = u > 0.0 ? u : kLeakySlope * u;
            }
            softmax_inplace(buf);
            for (std::size_t s = 0; s < members.size(); ++s) {
                const double a = buf[s];
                t.alpha[(begin + s) * heads + k] = a;
                const auto zj = t.z.row(zpos[members[s]]);
                for (std::size_t c = 0; c < dh; ++c) out[k * dh + c] += a * zj[k * dh + c];
            }
        }
    }

    Matrix result(n, p.output_dim());
    if (!p.projection.empty()) {
        t.pre = matmul_nt(t.aggregated, p.projection);
        scatter(activation(t.pre, p.activation), t.agg_rows, result);
    } else if (p.head_mode == HeadMode::concat) {
        scatter(activation(t.aggregated, p.activation), t.agg_rows, result);
    } else {
        const double kheads = static_cast<double>(heads);
        for (std::size_t ai = 0; ai < t.agg_rows.size(); ++ai) {
            const auto agg = t.aggregated.row(ai);
            auto o = result.row(t.agg_rows[ai]);
            for (std::size_t k = 0; k < heads; ++k) {
                for (std::size_t c = 0; c < dh; ++c) {
                    const double v = agg[k * dh + c];
                    o[c] += p.activation == Activation::relu ? (v > 0.0 ? v : 0.0) : v;
                }
            }
            for (double& v : o) v /= kheads;
        }
    }
    return {std::move(result), std::move(t)};
}

LayerOutput attention_layer_forward(const Matrix& h, const Graph& g, const LayerParams& p,
                                    bool self_loops) {
    const Neighborhoods hood(g, self_loops);
    LayerOutput r = attention_layer_forward(h, hood, p);
    r.trace.input = h;
    return r;
}

Matrix attention_layer_backward(const LayerTrace& t, const Neighborhoods& hood,
                                const LayerParams& p, const Matrix& d_out, LayerParams& grad) {
    const std::size_t n = t.input.rows();
    const std::size_t heads = p.heads;
    const std::size_t dh = p.head_dim;
    const std::size_t width = heads * dh;
    if (d_out.rows() != n || d_out.cols() != p.output_dim()) {
        throw ShapeError("attention backward: upstream " + d_out.shape_string() +
                         " does not match layer output");
    }
    const std::vector<std::uint32_t> zpos = positions(t.z_rows, n);
    const std::size_t an = t.agg_rows.size();

    // Gradient with respect to the per-head aggregates, one row per
    // computed output row.
    Matrix d_agg;
    if (!p.projection.empty()) {
        const Matrix d_pre = activation_backward(t.pre, gather(d_out, t.agg_rows), p.activation);
        add_into(grad.projection, matmul_tn(d_pre, t.aggregated));
        d_agg = matmul(d_pre, p.projection);
    } else if (p.head_mode == HeadMode::concat) {
        d_agg = activation_backward(t.aggregated, gather(d_out, t.agg_rows), p.activation);
    } else {
        d_agg = Matrix(an, width);
        const double kheads = static_cast<double>(heads);
        for (std::size_t ai = 0; ai < an; ++ai) {
            const auto g = d_out.row(t.agg_rows[ai]);
            if (row_is_zero(g)) continue;
            const auto agg = t.aggregated.row(ai);
            auto da = d_agg.row(ai);
            for (std::size_t k = 0; k < heads; ++k) {
                for (std::size_t c = 0; c < dh; ++c) {
                    const bool pass = p.activation == Activation::identity || agg[k * dh + c] > 0.0;
                    da[k * dh + c] = pass ? g[c] / kheads : 0.0;
                }
            }
        }
    }

    const std::size_t zn = t.z_rows.size();
    Matrix d_z(zn, width);
    std::vector<double> d_src(zn * heads, 0.0);
    std::vector<double> d_dst(zn * heads, 0.0);
    std::vector<double> d_alpha;
    for (std::size_t ai = 0; ai < an; ++ai) {
        const auto gi = d_agg.row(ai);
        if (row_is_zero(gi)) continue;
        const NodeIndex i = t.agg_rows[ai];
        const std::size_t begin = hood.offsets[i];
        const auto members = hood.of(i);
        d_alpha.resize(members.size());
        for (std::size_t k = 0; k < heads; ++k) {
            const double* g = gi.data() + k * dh;
            double weighted = 0.0;
            for (std::size_t s = 0; s < members.size(); ++s) {
                const auto zj = t.z.row(zpos[members[s]]);
                double dot = 0.0;
                for (std::size_t c = 0; c < dh; ++c) dot += g[c] * zj[k * dh + c];
                d_alpha[s] = dot;
                weighted += t.alpha[(begin + s) * heads + k] * dot;
            }
            for (std::size_t s = 0; s < members.size(); ++s) {
                const std::size_t slot = (begin + s) * heads + k;
                const double a = t.alpha[slot];
                auto dzj = d_z.row(zpos[members[s]]);
                for (std::size_t c = 0; c < dh; ++c) dzj[k * dh + c] += a * g[c];
                const double de = a * (d_alpha[s] - weighted);
                const double du = t.scores[slot] > 0.0 ? de : kLeakySlope * de;
                d_src[zpos[i] * heads + k] += du;
                d_dst[zpos[members[s]] * heads + k] += du;
            }
        }
    }

    // Score halves: u_ij = a_left . z_i + a_right . z_j.
    for (std::size_t r = 0; r < zn; ++r) {
        const auto zi = t.z.row(r);
        auto dzi = d_z.row(r);
        for (std::size_t k = 0; k < heads; ++k) {
            const double gs = d_src[r * heads + k];
            const double gd = d_dst[r * heads + k];
            if (gs == 0.0 && gd == 0.0) continue;
            const auto a = p.attention.row(k);
            auto ga = grad.attention.row(k);
            for (std::size_t c = 0; c < dh; ++c) {
                ga[c] += gs * zi[k * dh + c];
                ga[dh + c] += gd * zi[k * dh + c];
                dzi[k * dh + c] += gs * a[c] + gd * a[dh + c];
            }
        }
    }

    add_into(grad.weight, matmul_tn(d_z, gather(t.input, t.z_rows)));
    Matrix d_h(n, p.input_dim());
    scatter(matmul(d_z, p.weight), t.z_rows, d_h);
    return d_h;
}

// ---------------------------------------------------------------------------
// Full model

ForwardTrace model_forward(const Matrix& x, std::shared_ptr<const Neighborhoods> hood,
                           const ModelParams& params, const ForwardOptions& options,
                           SeededRng& rng) {
    params.validate();
    if (!hood) throw ConfigError("model_forward: missing neighborhoods");
    if (x.rows() != hood->num_nodes() || x.cols() != params.input_dim()) {
        throw ShapeError("model_forward: features " + x.shape_string() + " expected " +
                         std::to_string(hood->num_nodes()) + "x" +
                         std::to_string(params.input_dim()));
    }
    if (hood->self_loops != params.self_loops) {
        throw ConfigError("model_forward: neighborhood self-loop setting differs from model");
    }
    const std::size_t n = x.rows();
    const std::size_t depth = params.layers.size();

    // masks[l] = rows of layer l's input that must be computed; masks[depth]
    // = requested output rows.
    std::vector<RowMask> masks(depth + 1);
    if (!options.output_rows.empty()) {
        masks[depth].assign(n, 0);
        for (NodeIndex r : options.output_rows) {
            if (r >= n) throw BoundsError("output row " + std::to_string(r) + " out of range");
            masks[depth][r] = 1;
        }
        for (std::size_t l = depth; l-- > 0;) masks[l] = expand_mask(masks[l + 1], *hood);
    }

    ForwardTrace trace;
    trace.hood = hood;
    trace.features = x;
    trace.signature = make_signature(params, n);
    trace.layers.reserve(depth);
    Matrix h = x;
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& p = params.layers[l];
        Matrix dropout_mask;
        if (l > 0 && options.mode == Mode::train && options.dropout > 0.0) {
            DropoutResult dr = dropout(h, options.dropout, Mode::train, rng);
            h = std::move(dr.output);
            dropout_mask = std::move(dr.mask);
        }
        LayerOutput out = p.kind == LayerKind::gcn
                              ? gcn_layer_forward(h, *hood, p, params.aggregation, masks[l + 1])
                              : attention_layer_forward(h, *hood, p, masks[l + 1]);
        out.trace.input = std::move(h);
        out.trace.dropout_mask = std::move(dropout_mask);
        trace.layers.push_back(std::move(out.trace));
        h = std::move(out.output);
    }
    trace.embeddings = depth == 0 ? keep_rows(h, masks[0]) : std::move(h);
    trace.logits = matmul_nt(trace.embeddings, params.classifier);
    require_finite(trace.logits, "model logits");
    return trace;
}

ForwardTrace model_forward(const Matrix& x, const Graph& g, const ModelParams& params,
                           const ForwardOptions& options, SeededRng& rng) {
    return model_forward(x, std::make_shared<const Neighborhoods>(g, params.self_loops), params,
                         options, rng);
}

ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace,
                           const Matrix& d_logits) {
    if (!trace.hood || trace.layers.size() != params.layers.size() ||
        trace.signature != make_signature(params, trace.hood->num_nodes())) {
        throw TraceError("model_backward: trace was produced by a different model or graph");
    }
    if (!d_logits.same_shape(trace.logits)) {
        throw TraceError("model_backward: upstream gradient " + d_logits.shape_string() +
                         " does not match logits " + trace.logits.shape_string());
    }
    const RowMask* output_mask = trace.layers.empty() ? nullptr : &trace.layers.back().active;
    if (output_mask && !output_mask->empty()) {
        for (std::size_t i = 0; i < d_logits.rows(); ++i) {
            if (!(*output_mask)[i] && !row_is_zero(d_logits.row(i))) {
                throw TraceError("model_backward: gradient on row " + std::to_string(i) +
                                 " which the forward pass did not compute");
            }
        }
    }

    ModelParams grads = params.zeros_like();
    grads.classifier = matmul_tn(d_logits, trace.embeddings);
    Matrix d_h = matmul(d_logits, params.classifier);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& p = params.layers[l];
        const auto& t = trace.layers[l];
        Matrix d_in = p.kind == LayerKind::gcn
                          ? gcn_layer_backward(t, *trace.hood, p, params.aggregation, d_h,
                                               grads.layers[l])
                          : attention_layer_backward(t, *trace.hood, p, d_h, grads.layers[l]);
        if (!t.dropout_mask.empty()) {
            auto d = d_in.values();
            auto m = t.dropout_mask.values();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i];
        }
        d_h = std::move(d_in);
    }
    grads.for_each_matrix([](const std::string& name, const Matrix& m) {
        require_finite(m, "gradient of " + name);
    });
    return grads;
}

}  // namespace gnnrisk
