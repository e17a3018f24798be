#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"

namespace gnnrisk {

/// Training hyperparameters. Defaults follow the reference setup: 128-wide
/// embeddings, 8 attention heads, dropout 0.2, Adam at lr 3e-5, 20 epochs of
/// 32 mini-batches each.
struct TrainConfig {
    std::size_t entity_num = 0;  // 0: take the node count from the data
    std::size_t embed_size = 128;
    std::size_t attention_heads = 8;
    std::size_t head_dim = 16;
    double dropout = 0.2;
    double lr = 0.00003;
    std::size_t epochs = 20;
    std::size_t batches_per_epoch = 32;
    std::uint64_t seed = 42;
    Aggregation agg = Aggregation::mean;
    bool self_loops = true;
    bool class_weights = true;
    std::size_t gcn_layers = 1;
    std::size_t attention_layers = 2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
    Architecture architecture(std::size_t input_dim) const;
};

struct AdamState {
    ModelParams m;
    ModelParams v;
    std::uint64_t t = 0;

    static AdamState zeros_like(const ModelParams& params);
};

struct LossLog {
    std::vector<double> train_loss;
    std::vector<double> val_loss;  // NaN when there is no validation split

    std::size_t epochs() const noexcept { return train_loss.size(); }
    /// Bitwise comparison, so logs holding NaN compare equal to themselves.
    friend bool operator==(const LossLog& a, const LossLog& b);
};

struct LossResult {
    double loss = 0.0;
    Matrix grad_logits;
};

/// Mean cross-entropy over `rows` of `logits` (all rows when empty), with
/// optional per-class weights (weighted mean, normalized by the weight sum).
/// Labels are class indices; rows of the gradient outside `rows` are zero.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels,
                         std::span<const NodeIndex> rows = {},
                         std::span<const double> class_weights = {});

/// One bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

/// Splits `count` items into `batches` contiguous runs whose sizes differ
/// by at most one. Returns batch start offsets (batches + 1 entries).
std::vector<std::size_t> batch_bounds(std::size_t count, std::size_t batches);

struct FitResult {
    ModelParams params;
    LossLog log;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Transductive training: each step runs the whole graph forward and takes
/// the loss over one mini-batch of labeled training nodes.
FitResult fit(const Graph& g, const NodeTable& table, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// Inverse-frequency class weights n / (2 n_c) over the given labels.
std::array<double, 2> inverse_frequency_weights(std::span<const int> labels,
                                                std::span<const NodeIndex> rows);

/// Class index per node (0 normal, 1 risk, -1 unknown).
std::vector<int> class_indices(const NodeTable& table);

}  // namespace gnnrisk
