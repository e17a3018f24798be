#include "gnnrisk/training.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

namespace {

// Stream ids for SeededRng::derive.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0, got " + format_double(lr));
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("dropout must lie in [0, 1), got " + format_double(dropout));
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batches_per_epoch < 1) throw ConfigError("batches_per_epoch must be >= 1");
    if (embed_size < 1) throw ConfigError("embed_size must be >= 1");
    if (attention_layers > 0) {
        if (attention_heads < 1) throw ConfigError("attention_heads must be >= 1");
        if (head_dim < 1) throw ConfigError("head_dim must be >= 1");
    }
    if (gcn_layers + attention_layers == 0) throw ConfigError("model needs at least one layer");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("Adam eps must be > 0");
}

Architecture TrainConfig::architecture(std::size_t input_dim) const {
    Architecture a;
    a.input_dim = input_dim;
    a.embed_size = embed_size;
    a.attention_heads = attention_heads;
    a.head_dim = head_dim;
    a.num_classes = 2;
    a.gcn_layers = gcn_layers;
    a.attention_layers = attention_layers;
    a.aggregation = agg;
    a.self_loops = self_loops;
    return a;
}

bool operator==(const LossLog& a, const LossLog& b) {
    auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() == y.size() &&
               (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
    };
    return same(a.train_loss, b.train_loss) && same(a.val_loss, b.val_loss);
}

AdamState AdamState::zeros_like(const ModelParams& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels,
                         std::span<const NodeIndex> rows, std::span<const double> class_weights) {
    const std::size_t classes = logits.cols();
    if (labels.size() != logits.rows()) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " logit rows");
    }
    if (!class_weights.empty() && class_weights.size() != classes) {
        throw ShapeError("cross_entropy: class weight count differs from class count");
    }
    std::vector<NodeIndex> all;
    if (rows.empty()) {
        all.resize(logits.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<NodeIndex>(i);
        rows = all;
    }
    if (rows.empty()) throw ShapeError("cross_entropy: empty batch");

    LossResult r;
    r.grad_logits = Matrix(logits.rows(), classes);
    double weight_total = 0.0;
    double loss_total = 0.0;
    std::vector<double> prob(classes);
    for (NodeIndex i : rows) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw LabelError("cross_entropy: label " + std::to_string(y) + " on row " +
                             std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
        }
        const auto z = logits.row(i);
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            prob[c] = std::exp(z[c] - mx);
            sum += prob[c];
        }
        const double lse = mx + std::log(sum);
        const double w = class_weights.empty() ? 1.0 : class_weights[y];
        loss_total += w * (lse - z[y]);
        weight_total += w;
        auto g = r.grad_logits.row(i);
        for (std::size_t c = 0; c < classes; ++c) {
            g[c] = w * (prob[c] / sum - (static_cast<int>(c) == y ? 1.0 : 0.0));
        }
    }
    if (!(weight_total > 0.0)) throw NumericError("cross_entropy: zero total class weight");
    r.loss = loss_total / weight_total;
    for (NodeIndex i : rows) {
        for (double& v : r.grad_logits.row(i)) v /= weight_total;
    }
    return r;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
    std::vector<std::pair<std::string, const Matrix*>> g;
    grads.for_each_matrix([&](const std::string& name, const Matrix& m) {
        g.emplace_back(name, &m);
    });
    for (const auto& [name, m] : g) {
        if (!m->all_finite()) {
            throw NumericError("non-finite gradient in parameter " + name + "; training aborted");
        }
    }
    std::vector<Matrix*> m_state;
    std::vector<Matrix*> v_state;
    state.m.for_each_matrix([&](const std::string&, Matrix& m) { m_state.push_back(&m); });
    state.v.for_each_matrix([&](const std::string&, Matrix& m) { v_state.push_back(&m); });
    std::size_t idx = 0;
    bool shapes_ok = m_state.size() == g.size() && v_state.size() == g.size();
    params.for_each_matrix([&](const std::string&, Matrix& p) {
        if (idx >= g.size() || !p.same_shape(*g[idx].second)) shapes_ok = false;
        ++idx;
    });
    if (!shapes_ok || idx != g.size()) throw ShapeError("adam_step: parameter/gradient/state shapes differ");

    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    idx = 0;
    params.for_each_matrix([&](const std::string&, Matrix& p) {
        auto pv = p.values();
        auto gv = g[idx].second->values();
        auto mv = m_state[idx]->values();
        auto vv = v_state[idx]->values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
            const double m_hat = mv[i] / c1;
            const double v_hat = vv[i] / c2;
            pv[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        ++idx;
    });
}

std::vector<std::size_t> batch_bounds(std::size_t count, std::size_t batches) {
    if (batches == 0) throw ConfigError("batch count must be >= 1");
    std::vector<std::size_t> bounds(batches + 1, 0);
    const std::size_t base = count / batches;
    const std::size_t extra = count % batches;
    for (std::size_t b = 0; b < batches; ++b) {
        bounds[b + 1] = bounds[b] + base + (b < extra ? 1 : 0);
    }
    return bounds;
}

std::array<double, 2> inverse_frequency_weights(std::span<const int> labels,
                                                std::span<const NodeIndex> rows) {
    std::array<double, 2> counts{0.0, 0.0};
    for (NodeIndex i : rows) {
        if (labels[i] == 0 || labels[i] == 1) counts[labels[i]] += 1.0;
    }
    const double total = counts[0] + counts[1];
    if (counts[0] == 0.0 || counts[1] == 0.0) {
        throw ConfigError("class weights need both classes among the training nodes");
    }
    return {total / (2.0 * counts[0]), total / (2.0 * counts[1])};
}

std::vector<int> class_indices(const NodeTable& table) {
    std::vector<int> out(table.labels.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = table.labels[i] == Label::normal ? 0 : table.labels[i] == Label::risk ? 1 : -1;
    }
    return out;
}

FitResult fit(const Graph& g, const NodeTable& table, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
    cfg.validate();
    table.validate(g.num_nodes());
    if (cfg.entity_num != 0 && cfg.entity_num != g.num_nodes()) {
        throw ConfigError("entity_num " + std::to_string(cfg.entity_num) +
                          " does not match the dataset's " + std::to_string(g.num_nodes()) +
                          " nodes");
    }
    const std::vector<int> labels = class_indices(table);
    std::vector<NodeIndex> train = table.nodes_in(Split::train);
    const std::vector<NodeIndex> val = table.nodes_in(Split::val);
    std::size_t positives = 0;
    for (NodeIndex i : train) positives += labels[i] == 1 ? 1 : 0;
    if (train.empty() || positives == 0 || positives == train.size()) {
        throw ConfigError("training split must contain both normal and risk nodes");
    }
    if (train.size() < cfg.batches_per_epoch) {
        throw ConfigError("training split has " + std::to_string(train.size()) +
                          " nodes, fewer than batches_per_epoch=" +
                          std::to_string(cfg.batches_per_epoch));
    }

    SeededRng root(cfg.seed);
    SeededRng init_rng = root.derive(kInitStream);
    SeededRng shuffle_rng = root.derive(kShuffleStream);
    SeededRng dropout_rng = root.derive(kDropoutStream);

    FitResult result;
    result.params = init_params(cfg.architecture(table.features.cols()), init_rng);
    AdamState adam = AdamState::zeros_like(result.params);

    std::vector<double> weights;
    if (cfg.class_weights) {
        const auto w = inverse_frequency_weights(labels, train);
        weights.assign(w.begin(), w.end());
    }
    const auto hood = std::make_shared<const Neighborhoods>(g, cfg.self_loops);
    const auto bounds = batch_bounds(train.size(), cfg.batches_per_epoch);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<NodeIndex>(train));
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
            const std::span<const NodeIndex> batch(train.data() + bounds[b], bounds[b + 1] - bounds[b]);
            ForwardOptions opts;
            opts.mode = Mode::train;
            opts.dropout = cfg.dropout;
            opts.output_rows = batch;
            const ForwardTrace trace = model_forward(table.features, hood, result.params, opts, dropout_rng);
            const LossResult loss = cross_entropy(trace.logits, labels, batch, weights);
            if (!std::isfinite(loss.loss)) throw NumericError("non-finite training loss");
            const ModelParams grads = model_backward(result.params, trace, loss.grad_logits);
            adam_step(result.params, grads, adam, cfg);
            epoch_loss += loss.loss;
        }
        epoch_loss /= static_cast<double>(cfg.batches_per_epoch);

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val.empty()) {
            ForwardOptions opts;
            opts.mode = Mode::eval;
            opts.output_rows = val;
            const ForwardTrace trace = model_forward(table.features, hood, result.params, opts, dropout_rng);
            val_loss = cross_entropy(trace.logits, labels, val, weights).loss;
        }
        result.log.train_loss.push_back(epoch_loss);
        result.log.val_loss.push_back(val_loss);
        if (on_epoch) on_epoch(epoch + 1, epoch_loss, val_loss);
    }
    return result;
}

}  // namespace gnnrisk
