#include "cellgraph/heads/mil.hpp"

#include <atomic>
#include <limits>
#include <map>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cellgraph/numerics/adam.hpp"
#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/ops.hpp"

namespace cellgraph::heads {

MilVariant parse_variant(const std::string& s) {
    if (s == "abmil") return MilVariant::abmil;
    if (s == "add" || s == "add_abmil") return MilVariant::add;
    if (s == "conj" || s == "conj_abmil") return MilVariant::conj;
    throw std::invalid_argument("unknown MIL variant '" + s + "' (expected abmil, add or conj)");
}

std::string to_string(MilVariant v) {
    switch (v) {
        case MilVariant::abmil: return "abmil";
        case MilVariant::add: return "add";
        case MilVariant::conj: return "conj";
    }
    return "?";
}

Bags Bags::subset(std::span<const std::size_t> bags) const {
    Bags out;
    std::size_t rows = 0;
    for (auto b : bags) rows += offsets.at(b + 1) - offsets[b];
    out.instances = Matrix(rows, dim());
    std::size_t r = 0;
    for (auto b : bags) {
        for (std::size_t i = offsets[b]; i < offsets[b + 1]; ++i, ++r)
            std::copy(instances.row(i).begin(), instances.row(i).end(), out.instances.row(r).begin());
        out.offsets.push_back(r);
        out.labels.push_back(labels[b]);
    }
    return out;
}

Bags Bags::group(const Matrix& x, std::span<const std::size_t> bag_ids, std::span<const std::uint32_t> labels) {
    if (bag_ids.size() != x.rows() || labels.size() != x.rows())
        throw std::invalid_argument("bags: " + std::to_string(x.rows()) + " rows but " + std::to_string(bag_ids.size()) +
                                    " bag ids and " + std::to_string(labels.size()) + " labels");
    std::vector<std::size_t> order;
    std::map<std::size_t, std::vector<std::size_t>> rows;
    for (std::size_t r = 0; r < bag_ids.size(); ++r) {
        auto [it, fresh] = rows.try_emplace(bag_ids[r]);
        if (fresh) order.push_back(bag_ids[r]);
        else if (labels[it->second.front()] != labels[r])
            throw std::invalid_argument("bags: bag " + std::to_string(bag_ids[r]) + " mixes labels");
        it->second.push_back(r);
    }
    Bags out;
    out.instances = Matrix(x.rows(), x.cols());
    std::size_t k = 0;
    for (auto id : order) {
        for (auto r : rows[id]) {
            std::copy(x.row(r).begin(), x.row(r).end(), out.instances.row(k).begin());
            ++k;
        }
        out.offsets.push_back(k);
        out.labels.push_back(labels[rows[id].front()]);
    }
    return out;
}

void Bags::validate() const {
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != instances.rows())
        throw std::invalid_argument("bags: offsets do not cover the instance rows");
    if (labels.size() != count())
        throw std::invalid_argument("bags: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(count()) + " bags");
    for (std::size_t b = 0; b < count(); ++b)
        if (offsets[b + 1] <= offsets[b]) throw std::invalid_argument("bags: bag " + std::to_string(b) + " is empty");
}

std::vector<MilHyper> default_mil_grid() {
    std::vector<MilHyper> grid;
    for (double lr : {1e-3, 1e-2})
        for (double dropout : {0.2, 0.5})
            for (std::size_t att : {128, 256})
                for (int layers : {1, 2}) grid.push_back({lr, dropout, att, layers});
    return grid;
}

std::string describe(const MilHyper& h) {
    std::ostringstream s;
    s << "lr=" << h.learning_rate << ";dropout=" << h.dropout << ";d_att=" << h.attention_dim
      << ";g_layers=" << h.classifier_layers;
    return s.str();
}

MilModel::MilModel(MilVariant variant, std::size_t in_dim, std::size_t classes, const MilHyper& hyper, Rng& rng,
                   bool classifier_bias)
    : v{"attention.v", xavier_uniform(in_dim, hyper.attention_dim, rng)},
      w{"attention.w", xavier_uniform(hyper.attention_dim, 1, rng)},
      variant_(variant),
      hyper_(hyper) {
    if (hyper.classifier_layers != 1 && hyper.classifier_layers != 2)
        throw std::invalid_argument("mil: classifier must have 1 or 2 layers");
    if (!(hyper.dropout >= 0.0 && hyper.dropout < 1.0)) throw std::invalid_argument("mil: dropout must lie in [0, 1)");
    if (classes < 2) throw std::invalid_argument("mil: need at least 2 classes");
    std::vector<std::size_t> dims{in_dim};
    if (hyper.classifier_layers == 2) dims.push_back(hyper.attention_dim);
    dims.push_back(classes);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const std::string name = "classifier" + std::to_string(k);
        g_weights.push_back({name + ".weight", xavier_uniform(dims[k], dims[k + 1], rng)});
        if (classifier_bias) g_biases.push_back({name + ".bias", Matrix(1, dims[k + 1])});
    }
}

std::vector<Parameter*> MilModel::parameters() {
    std::vector<Parameter*> out{&v, &w};
    for (std::size_t k = 0; k < g_weights.size(); ++k) {
        out.push_back(&g_weights[k]);
        if (!g_biases.empty()) out.push_back(&g_biases[k]);
    }
    return out;
}

Var MilModel::attention(Tape& tape, Var h, std::span<const std::size_t> offsets) {
    const Var scores = ops::matmul(ops::tanh(ops::matmul(h, tape.parameter(v))), tape.parameter(w));
    return ops::segment_softmax(scores, offsets);
}

Var MilModel::classifier(Tape& tape, Var x, Rng* rng) {
    const auto rate = static_cast<float>(hyper_.dropout);
    Var out = x;
    for (std::size_t k = 0; k < g_weights.size(); ++k) {
        if (rng && rate > 0.0f) out = ops::dropout(out, rate, *rng, true);
        out = ops::matmul(out, tape.parameter(g_weights[k]));
        if (!g_biases.empty()) out = ops::add(out, tape.parameter(g_biases[k]));
        if (k + 1 < g_weights.size()) out = ops::relu(out);
    }
    return out;
}

Var MilModel::forward(Tape& tape, Var h, std::span<const std::size_t> offsets, Rng* rng) {
    const Var a = attention(tape, h, offsets);
    switch (variant_) {
        case MilVariant::abmil: return classifier(tape, ops::segment_sum(ops::mul(h, a), offsets), rng);
        case MilVariant::add: return ops::segment_sum(classifier(tape, ops::mul(h, a), rng), offsets);
        case MilVariant::conj: return ops::segment_sum(ops::mul(classifier(tape, h, rng), a), offsets);
    }
    throw std::logic_error("mil: bad variant");
}

Matrix MilModel::logits(const Bags& bags) {
    Tape tape;
    return forward(tape, tape.constant(bags.instances), bags.offsets).value();
}

Matrix ensemble_logits(std::vector<MilModel>& models, const Bags& bags) {
    if (models.empty()) throw std::invalid_argument("ensemble: no models");
    Matrix sum = models[0].logits(bags);
    for (std::size_t k = 1; k < models.size(); ++k) {
        const Matrix l = models[k].logits(bags);
        for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += l.data()[i];
    }
    for (auto& x : sum.data()) x /= static_cast<float>(models.size());
    return sum;
}

std::vector<int> stratified_folds(std::span<const std::uint32_t> labels, int folds, Rng& rng) {
    if (folds < 2) throw std::invalid_argument("stratified folds: need at least 2 folds");
    std::vector<int> out(labels.size(), 0);
    const std::uint32_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    int next = 0;
    for (std::uint32_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        rng.shuffle(members);
        // continue dealing where the previous class stopped so fold sizes stay even
        for (auto i : members) {
            out[i] = next;
            next = (next + 1) % folds;
        }
    }
    return out;
}

namespace {

struct TrainedFold {
    MilModel model;
    FoldResult result;
};

Var cross_entropy(Var logits, std::span<const std::uint32_t> labels) {
    return ops::scale(ops::mean(ops::pick(ops::row_log_softmax(logits), labels)), -1.0f);
}

double validation_loss(const Matrix& logits, std::span<const std::uint32_t> labels) {
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (float v : row) z += std::exp(v - m);
        sum += m + std::log(z) - row[labels[i]];
    }
    return sum / static_cast<double>(logits.rows());
}

TrainedFold train_fold(const Bags& train, const Bags& val, std::size_t classes, const MilHyper& hyper,
                       const MilTrainConfig& config, std::uint64_t stream) {
    Rng init = Rng::derive(config.seed, stream, 1);
    Rng rng = Rng::derive(config.seed, stream, 2);
    TrainedFold out{MilModel(config.variant, train.dim(), classes, hyper, init), {}};
    MilModel& model = out.model;
    AdamConfig ac;
    ac.learning_rate = static_cast<float>(hyper.learning_rate);
    Adam adam(ac);
    const auto params = model.parameters();
    std::vector<Matrix> best;
    double best_f1 = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += config.batch_bags) {
            const auto end = std::min(order.size(), b + config.batch_bags);
            const Bags batch = train.subset(std::span(order).subspan(b, end - b));
            Tape tape;
            const Var loss = cross_entropy(model.forward(tape, tape.constant(batch.instances), batch.offsets, &rng),
                                           batch.labels);
            adam.step(params, gradients(tape, loss, params));
        }
        out.result.epochs_run = epoch;
        const Matrix logits = model.logits(val);
        const double f1 = macro_f1(val.labels, argmax_rows(logits), classes);
        // on an F1 plateau a falling validation loss still counts as progress
        const double loss = validation_loss(logits, val.labels);
        if (f1 > best_f1 || (f1 == best_f1 && loss < best_loss)) {
            best_f1 = f1;
            best_loss = loss;
            out.result.best_epoch = epoch;
            best.clear();
            for (const auto* p : params) best.push_back(p->value);
        } else if (epoch - out.result.best_epoch >= config.patience) {
            break;
        }
    }
    for (std::size_t k = 0; k < params.size() && !best.empty(); ++k) params[k]->value = best[k];
    out.result.val_macro_f1 = std::max(best_f1, 0.0);
    return out;
}

}  // namespace

MilResult mil_train(const Bags& train, const Bags& test, std::size_t classes, const MilTrainConfig& config) {
    train.validate();
    if (test.count() > 0) test.validate();
    if (config.grid.empty()) throw std::invalid_argument("mil: empty hyperparameter grid");
    if (config.epochs < 1 || config.batch_bags == 0) throw std::invalid_argument("mil: epochs and batch size must be positive");
    std::vector<bool> seen(classes, false);
    for (auto l : train.labels) {
        if (l >= classes) throw std::invalid_argument("mil: label " + std::to_string(l) + " out of range");
        seen[l] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) throw std::invalid_argument("mil: training bags hold a single class");

    Rng fold_rng = Rng::derive(config.seed, 0, 0);
    const std::vector<int> fold_of = stratified_folds(train.labels, config.folds, fold_rng);
    std::vector<Bags> fold_train, fold_val;
    for (int f = 0; f < config.folds; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? va : tr).push_back(i);
        if (va.empty() || tr.empty()) throw std::invalid_argument("mil: too few bags for " + std::to_string(config.folds) + " folds");
        fold_train.push_back(train.subset(tr));
        fold_val.push_back(train.subset(va));
    }

    const std::size_t cells = config.grid.size();
    const auto folds = static_cast<std::size_t>(config.folds);
    std::vector<std::optional<TrainedFold>> trained(cells * folds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t task = next++; task < trained.size(); task = next++) {
            const std::size_t cell = task / folds, fold = task % folds;
            trained[task] = train_fold(fold_train[fold], fold_val[fold], classes, config.grid[cell], config, task + 1);
        }
    };
    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    MilResult result;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        GridCellResult g{config.grid[cell], {}, 0.0};
        for (std::size_t f = 0; f < folds; ++f) {
            g.folds.push_back(trained[cell * folds + f]->result);
            g.mean_val_macro_f1 += g.folds.back().val_macro_f1 / static_cast<double>(folds);
        }
        // first cell wins ties
        if (cell == 0 || g.mean_val_macro_f1 > result.grid[result.best].mean_val_macro_f1) result.best = cell;
        result.grid.push_back(std::move(g));
    }
    for (std::size_t f = 0; f < folds; ++f) result.fold_models.push_back(std::move(trained[result.best * folds + f]->model));
    if (test.count() > 0) {
        result.test_logits = ensemble_logits(result.fold_models, test);
        result.test = evaluate(test.labels, result.test_logits);
    }
    return result;
}

}  // namespace cellgraph::heads
