#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cellgraph/heads/metrics.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/numerics/tape.hpp"

namespace cellgraph::heads {

enum class MilVariant {
    abmil,  // g(sum_j a_j h_j)
    add,    // sum_j g(a_j h_j)
    conj,   // sum_j a_j g(h_j)
};

MilVariant parse_variant(const std::string& s);
std::string to_string(MilVariant v);
inline constexpr MilVariant kMilVariants[] = {MilVariant::abmil, MilVariant::add, MilVariant::conj};

/// Bags stacked row-wise: bag b owns instance rows [offsets[b], offsets[b+1]).
struct Bags {
    Matrix instances;
    std::vector<std::size_t> offsets{0};
    Labels labels;

    std::size_t count() const noexcept { return offsets.size() - 1; }
    std::size_t dim() const noexcept { return instances.cols(); }
    /// Copy of the listed bags in the given order.
    Bags subset(std::span<const std::size_t> bags) const;
    /// Gathers instance rows into bags keyed by `bag_ids`, in order of first
    /// appearance. Throws if the rows of one bag carry different labels.
    static Bags group(const Matrix& x, std::span<const std::size_t> bag_ids, std::span<const std::uint32_t> labels);
    /// Throws unless offsets are consistent, every bag is nonempty and labels align.
    void validate() const;
};

/// One grid point.
struct MilHyper {
    double learning_rate = 1e-3;
    double dropout = 0.2;
    std::size_t attention_dim = 128;
    int classifier_layers = 1;  // 1: linear; 2: linear-ReLU-dropout-linear with width attention_dim
    friend bool operator==(const MilHyper&, const MilHyper&) = default;
};

/// The 16-point grid lr x dropout x attention dim x classifier depth.
std::vector<MilHyper> default_mil_grid();
std::string describe(const MilHyper& h);

/// Attention pooling plus classifier g. Attention is
/// softmax_j(w^T tanh(V h_j)) within each bag.
class MilModel {
public:
    MilModel(MilVariant variant, std::size_t in_dim, std::size_t classes, const MilHyper& hyper, Rng& rng,
             bool classifier_bias = true);

    /// N x 1 attention weights.
    Var attention(Tape& tape, Var h, std::span<const std::size_t> offsets);
    /// B x classes logits. Dropout is active only when `rng` is given.
    Var forward(Tape& tape, Var h, std::span<const std::size_t> offsets, Rng* rng = nullptr);
    Matrix logits(const Bags& bags);

    std::vector<Parameter*> parameters();
    MilVariant variant() const noexcept { return variant_; }
    const MilHyper& hyper() const noexcept { return hyper_; }

    // Exposed for reference checks.
    Parameter v;  // in x attention_dim
    Parameter w;  // attention_dim x 1
    std::vector<Parameter> g_weights;
    std::vector<Parameter> g_biases;  // empty without classifier bias

private:
    Var classifier(Tape& tape, Var x, Rng* rng);

    MilVariant variant_;
    MilHyper hyper_;
};

struct MilTrainConfig {
    MilVariant variant = MilVariant::abmil;
    std::vector<MilHyper> grid = default_mil_grid();
    int folds = 5;
    int epochs = 100;
    int patience = 20;  // epochs without a better validation macro-F1 (ties: lower validation loss)
    std::size_t batch_bags = 16;
    std::uint64_t seed = 0;
    int threads = 1;  // grid cells trained concurrently; results do not depend on it
};

struct FoldResult {
    double val_macro_f1 = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
};

struct GridCellResult {
    MilHyper hyper;
    std::vector<FoldResult> folds;
    double mean_val_macro_f1 = 0.0;
};

struct MilResult {
    std::vector<GridCellResult> grid;
    std::size_t best = 0;                // index into grid
    std::vector<MilModel> fold_models;   // of the best cell
    Matrix test_logits;                  // fold-model average
    ClassificationMetrics test;
};

/// Stratified assignment of items to `folds` folds: within each class the
/// items are shuffled and dealt round-robin.
std::vector<int> stratified_folds(std::span<const std::uint32_t> labels, int folds, Rng& rng);

/// Grid search by mean validation macro-F1 across stratified folds. Each fold
/// model keeps the parameters of its best validation epoch. The best cell's
/// fold models are ensembled by averaging logits on `test` (if nonempty).
MilResult mil_train(const Bags& train, const Bags& test, std::size_t classes, const MilTrainConfig& config);

/// Averages the logits of several models.
Matrix ensemble_logits(std::vector<MilModel>& models, const Bags& bags);

}  // namespace cellgraph::heads
