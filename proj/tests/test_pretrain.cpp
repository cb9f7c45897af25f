#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "cellgraph/acm/filters.hpp"
#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/ops.hpp"
#include "cellgraph/pretrain/embed.hpp"
#include "cellgraph/pretrain/mask.hpp"
#include "cellgraph/pretrain/train.hpp"
#include "support/random_graphs.hpp"

using namespace cellgraph;
using namespace cellgraph::pretrain;
using cellgraph::testing::random_cell_graph;

namespace {

PretrainConfig small_config() {
    PretrainConfig c;
    c.hidden_dim = 12;
    c.encoder_layers = 2;
    c.epochs = 3;
    c.batch_size = 3;
    c.seed = 11;
    return c;
}

std::vector<graph::CellGraph> corpus(std::size_t count, std::uint64_t seed) {
    std::vector<graph::CellGraph> gs;
    for (std::size_t k = 0; k < count; ++k) gs.push_back(random_cell_graph(4 + (k * 3) % 9, 5, seed + k));
    return gs;
}

double loss_value(Var v) { return v.value()(0, 0); }

std::vector<Matrix> values(GraphMae& m) {
    std::vector<Matrix> out;
    for (auto* p : m.parameters()) out.push_back(p->value);
    return out;
}

}  // namespace

TEST_CASE("mask plan examples") {
    Rng rng(1);
    CHECK(make_mask_plan(10, 0.0, 0.5, rng).empty());
    const MaskPlan all = make_mask_plan(7, 1.0, 0.0, rng);
    REQUIRE(all.nodes.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(all.nodes[i].node == i);
        CHECK_FALSE(all.nodes[i].source);
    }
    const MaskPlan one = make_mask_plan(1, 1.0, 1.0, rng);
    REQUIRE(one.nodes.size() == 1);
    CHECK_FALSE(one.nodes[0].source);
    CHECK(make_mask_plan(5, 0.5, 0.0, rng).nodes.size() == 3);  // lround(2.5)
    CHECK_THROWS(make_mask_plan(5, 1.5, 0.0, rng));
    CHECK_THROWS(make_mask_plan(5, 0.5, -0.1, rng));
}

TEST_CASE("mask plan statistics over 10k trials") {
    Rng rng(2024);
    const double r_r = 0.1;
    std::size_t replaced = 0, total = 0;
    bool counts_exact = true, sources_valid = true;
    for (int t = 0; t < 10000; ++t) {
        const MaskPlan p = make_mask_plan(1000, 0.5, r_r, rng);
        counts_exact = counts_exact && p.nodes.size() == 500;
        for (std::size_t k = 0; k < p.nodes.size(); ++k) {
            const auto& m = p.nodes[k];
            if (k > 0) sources_valid = sources_valid && p.nodes[k - 1].node < m.node;
            if (m.source) {
                ++replaced;
                sources_valid = sources_valid && *m.source != m.node && *m.source < 1000;
            }
        }
        total += p.nodes.size();
    }
    CHECK(counts_exact);
    CHECK(sources_valid);
    const double n = static_cast<double>(total);
    const double sigma = std::sqrt(n * r_r * (1 - r_r));
    CHECK(std::abs(static_cast<double>(replaced) - n * r_r) < 3 * sigma);
}

TEST_CASE("batch mask plan never touches virtual nodes") {
    std::vector<graph::CellGraph> gs = corpus(5, 3);
    std::vector<graph::GraphBlock> blocks;
    for (const auto& g : gs) blocks.push_back(acm::add_virtual_node(g, 10.0f));
    const graph::GraphBatch b = graph::batch_blocks(blocks);
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const MaskPlan p = make_batch_mask_plan(b, 1.0, 1.0, rng);
        CHECK(p.nodes.size() == b.node_count() - gs.size());
        for (const auto& m : p.nodes) {
            CHECK_FALSE(b.is_virtual(m.node));
            if (m.source) {
                CHECK_FALSE(b.is_virtual(*m.source));
                // the source comes from the same graph
                const auto g = std::upper_bound(b.offsets.begin(), b.offsets.end(), m.node) - b.offsets.begin();
                CHECK(*m.source >= b.offsets[g - 1]);
                CHECK(*m.source < b.offsets[g]);
            }
        }
    }
}

TEST_CASE("apply_mask examples") {
    Rng rng(3);
    const Matrix x = normal_matrix(5, 3, rng);
    const Matrix token = Matrix::from_rows({{7, 8, 9}});
    CHECK(apply_mask(x, MaskPlan{}, token) == x);
    const Matrix t0 = apply_mask(x, MaskPlan{{{0, std::nullopt}}}, token);
    CHECK(t0(0, 0) == 7.0f);
    CHECK(t0(0, 2) == 9.0f);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(t0(r, c) == x(r, c));
    const Matrix r0 = apply_mask(x, MaskPlan{{{0, 3}}}, token);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(r0(0, c) == x(3, c));
        CHECK(r0(3, c) == x(3, c));
    }
    CHECK_THROWS_AS(apply_mask(x, MaskPlan{{{5, std::nullopt}}}, token), std::out_of_range);
    CHECK_THROWS_AS(apply_mask(x, MaskPlan{{{1, 9}}}, token), std::out_of_range);

    Tape tape;
    Var tok = tape.variable(token);
    const Var masked = apply_mask(tape, x, MaskPlan{{{1, std::nullopt}, {2, 0}}}, tok);
    CHECK(masked.value() == apply_mask(x, MaskPlan{{{1, std::nullopt}, {2, 0}}}, token));
    tape.backward(ops::sum(masked));
    CHECK(tape.grad(tok) == Matrix::from_rows({{1, 1, 1}}));
}

TEST_CASE("scaled cosine error analytic cases") {
    Rng rng(4);
    const Matrix x = normal_matrix(6, 4, rng);
    const std::vector<std::size_t> rows{0, 2, 5};
    auto sce = [&](const Matrix& h, double gamma) {
        Tape tape;
        return loss_value(sce_loss(tape.constant(x), tape.constant(h), rows, gamma));
    };
    Matrix scaled = x, negated = x, orthogonal(6, 4);
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            scaled(r, c) = 2.5f * x(r, c);
            negated(r, c) = -x(r, c);
        }
    for (std::size_t r = 0; r < 6; ++r) {
        // (-b, a, -d, c) is orthogonal to (a, b, c, d)
        orthogonal(r, 0) = -x(r, 1);
        orthogonal(r, 1) = x(r, 0);
        orthogonal(r, 2) = -x(r, 3);
        orthogonal(r, 3) = x(r, 2);
    }
    CHECK(std::abs(sce(scaled, 2.0)) < 1e-6);
    CHECK(std::abs(sce(negated, 1.0) - 2.0) < 1e-6);
    CHECK(std::abs(sce(negated, 2.0) - 4.0) < 1e-6);
    CHECK(std::abs(sce(orthogonal, 2.0) - 1.0) < 1e-6);

    SUBCASE("zero rows count as 1 and are reported") {
        Matrix h = scaled;
        for (std::size_t c = 0; c < 4; ++c) h(2, c) = 0.0f;
        Tape tape;
        std::size_t zero = 0;
        const double l = loss_value(sce_loss(tape.constant(x), tape.constant(h), rows, 2.0, &zero));
        CHECK(zero == 1);
        CHECK(l == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    }
    SUBCASE("errors") {
        Tape tape;
        CHECK_THROWS(sce_loss(tape.constant(x), tape.constant(x), {}, 2.0));
        CHECK_THROWS(sce_loss(tape.constant(x), tape.constant(x), rows, 0.5));
    }
}

TEST_CASE("scaled cosine error range and gradient support") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const Matrix x = normal_matrix(8, 5, rng);
        const Matrix h = normal_matrix(8, 5, rng);
        const std::vector<std::size_t> rows{1, 4, 6};
        Tape tape;
        Var hv = tape.variable(h);
        const double gamma = 1.0 + rng.uniform(0.0, 2.0);
        const Var l = sce_loss(tape.constant(x), hv, rows, gamma);
        CHECK(loss_value(l) >= 0.0);
        CHECK(loss_value(l) <= std::pow(2.0, gamma));
        tape.backward(l);
        const Matrix g = tape.grad(hv);
        for (std::size_t r : {0, 2, 3, 5, 7})
            for (std::size_t c = 0; c < 5; ++c) CHECK(g(r, c) == 0.0f);
    }
}

TEST_CASE("re-masked isolated nodes ignore the encoder") {
    // Without edges or a virtual node each decoder row sees only its own
    // input, which at masked rows is the decoder token.
    PretrainConfig cfg = small_config();
    GraphMae a(cfg, 5);
    cfg.seed = 99;
    GraphMae b(cfg, 5);
    auto pa = a.parameters(), pb = b.parameters();
    // share the decoder and its token, keep encoders different
    for (std::size_t k = 0; k < pa.size(); ++k)
        if (pa[k]->name.rfind("encoder.", 0) != 0 && pa[k]->name != "encoder_token") pb[k]->value = pa[k]->value;
    Rng rng(2);
    graph::GraphBlock blk{normal_matrix(9, 5, rng), {}, std::nullopt};
    const graph::GraphBatch batch = graph::batch_blocks(std::span(&blk, 1));
    const auto filters = acm::batch_filters(batch);
    Rng mrng(3);
    const MaskPlan plan = make_batch_mask_plan(batch, 0.5, 0.0, mrng);
    Tape ta, tb;
    const Var la = a.loss(ta, batch, filters, plan);
    const Var lb = b.loss(tb, batch, filters, plan);
    CHECK(loss_value(la) == loss_value(lb));
    ta.backward(la);
    for (auto* p : pa)
        if (p->name.rfind("encoder", 0) == 0) {
            const Matrix g = ta.grad(*p);
            for (float v : g.data()) CHECK(v == 0.0f);
        }
}

TEST_CASE("pretrain config") {
    const PretrainConfig c = small_config();
    const auto j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);
    PretrainConfig bad = c;
    bad.gamma = 0.5;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("gamma"));
    bad = c;
    bad.mask_ratio = 2;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("mask_ratio"));
    bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("batch_size"));
}

TEST_CASE("feature scaler") {
    std::vector<graph::CellGraph> gs = corpus(4, 21);
    for (auto& g : gs)
        for (std::size_t r = 0; r < g.node_count(); ++r) g.features(r, 2) = 3.0f;
    const FeatureScaler s = FeatureScaler::fit(gs);
    CHECK(s.scale(0, 2) == 1.0f);
    CHECK(s.mean(0, 2) == 3.0f);
    double sum = 0, sq = 0, n = 0;
    for (const auto& g : gs) {
        const Matrix z = s.apply(g.features);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            sum += z(r, 0);
            sq += z(r, 0) * z(r, 0);
            n += 1;
        }
    }
    CHECK(std::abs(sum / n) < 1e-5);
    CHECK(std::abs(sq / n - 1.0) < 1e-4);
    CHECK_THROWS(FeatureScaler::fit(std::span<const graph::CellGraph>{}));
}

TEST_CASE("pretrainer batching") {
    const auto gs = corpus(7, 1);
    Pretrainer t(small_config(), gs);
    const auto batches = t.epoch_batches(1);
    // 7 graphs in batches of 3: the trailing single graph is dropped
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 3);
    CHECK(batches[1].size() == 3);
    CHECK(t.epoch_batches(1) == batches);
    CHECK(t.epoch_batches(2) != batches);
    const auto one = corpus(1, 1);
    Pretrainer single(small_config(), one);
    CHECK(single.epoch_batches(1).size() == 1);
    CHECK_THROWS(Pretrainer(small_config(), std::span<const graph::CellGraph>{}));
}

TEST_CASE("pretraining is deterministic and resumable") {
    const auto gs = corpus(8, 40);
    const PretrainConfig cfg = small_config();
    Pretrainer a(cfg, gs), b(cfg, gs);
    for (int e = 0; e < 4; ++e) {
        a.run_epoch();
        b.run_epoch();
    }
    CHECK(a.losses() == b.losses());
    CHECK(values(a.model()) == values(b.model()));

    Pretrainer first(cfg, gs);
    first.run_epoch();
    first.run_epoch();
    const auto bytes = acm::serialize_checkpoint(first.checkpoint());
    Pretrainer resumed(acm::deserialize_checkpoint(bytes), gs);
    CHECK(resumed.epochs_done() == 2);
    resumed.run_epoch();
    resumed.run_epoch();
    CHECK(resumed.losses() == a.losses());
    CHECK(values(resumed.model()) == values(a.model()));

    const auto other = corpus(5, 40);
    CHECK_THROWS(Pretrainer(acm::deserialize_checkpoint(bytes), other));
}

TEST_CASE("frozen parameters give a constant loss") {
    const auto gs = corpus(4, 50);
    PretrainConfig cfg = small_config();
    cfg.learning_rate = 0.0;
    Pretrainer t(cfg, gs);
    const auto blocks = prepare_blocks(gs, t.scaler(), t.virtual_edge_weight());
    const graph::GraphBatch batch = graph::batch_blocks(blocks);
    std::vector<double> seen;
    for (int k = 0; k < 3; ++k) {
        Rng rng(77);
        seen.push_back(*t.step(batch, rng));
    }
    CHECK(seen[0] == seen[1]);
    CHECK(seen[1] == seen[2]);
}

TEST_CASE("empty mask plan skips the step") {
    const auto gs = corpus(3, 60);
    PretrainConfig cfg = small_config();
    cfg.mask_ratio = 0.0;
    Pretrainer t(cfg, gs);
    const auto before = values(t.model());
    const EpochReport r = t.run_epoch();
    CHECK(r.steps == 0);
    CHECK(r.skipped == 1);
    CHECK(values(t.model()) == before);
}

TEST_CASE("training reduces the reconstruction error") {
    const auto gs = corpus(6, 70);
    PretrainConfig cfg = small_config();
    cfg.batch_size = 6;
    cfg.learning_rate = 1e-2;
    Pretrainer t(cfg, gs);
    for (int e = 0; e < 60; ++e) t.run_epoch();
    const auto& l = t.losses();
    CHECK(l.back() < 0.7 * l.front());
}

TEST_CASE("embeddings") {
    auto gs = corpus(5, 80);
    gs.push_back(random_cell_graph(1, 5, 3));
    Pretrainer t(small_config(), gs);
    t.run_epoch();
    const acm::Checkpoint ckpt = t.checkpoint();
    PretrainedModel m = PretrainedModel::from_checkpoint(ckpt);
    const EmbeddingTable cells = embed_graphs(m, gs, EmbeddingLevel::cell);
    const EmbeddingTable regions = embed_graphs(m, gs, EmbeddingLevel::region);
    CHECK(regions.values.rows() == gs.size());
    CHECK(regions.dim() == 12);
    std::size_t total = 0;
    for (const auto& g : gs) total += g.node_count();
    CHECK(cells.values.rows() == total);

    SUBCASE("region rows are means of cell rows") {
        std::size_t row = 0;
        for (std::size_t k = 0; k < gs.size(); ++k) {
            std::vector<double> mean(12, 0.0);
            for (std::size_t i = 0; i < gs[k].node_count(); ++i, ++row) {
                CHECK(cells.records[row] == k);
                CHECK(cells.nodes[row] == i);
                for (std::size_t c = 0; c < 12; ++c) mean[c] += cells.values(row, c);
            }
            for (std::size_t c = 0; c < 12; ++c)
                CHECK(std::abs(mean[c] / gs[k].node_count() - regions.values(k, c)) < 1e-6);
        }
        // the 1-cell graph is last
        for (std::size_t c = 0; c < 12; ++c) CHECK(regions.values(5, c) == cells.values(total - 1, c));
    }
    SUBCASE("record order does not matter") {
        std::vector<graph::CellGraph> reversed(gs.rbegin(), gs.rend());
        const EmbeddingTable r = embed_graphs(m, reversed, EmbeddingLevel::region);
        for (std::size_t k = 0; k < gs.size(); ++k)
            for (std::size_t c = 0; c < 12; ++c) CHECK(r.values(gs.size() - 1 - k, c) == regions.values(k, c));
    }
    SUBCASE("csv roundtrip is exact") {
        const auto dir = std::filesystem::temp_directory_path() / "cellgraph_embed_test";
        std::filesystem::create_directories(dir);
        write_embeddings(dir / "cells.csv", cells);
        write_embeddings(dir / "regions.csv", regions);
        CHECK(read_embeddings(dir / "cells.csv") == cells);
        CHECK(read_embeddings(dir / "regions.csv") == regions);
        std::filesystem::remove_all(dir);
    }
    SUBCASE("feature dimension mismatch") {
        const std::vector<graph::CellGraph> wrong{random_cell_graph(4, 6, 1)};
        CHECK_THROWS_AS(embed_graphs(m, wrong, EmbeddingLevel::region), ShapeError);
    }
}

TEST_CASE("full-size parameter count") {
    PretrainConfig cfg;
    GraphMae m(cfg, 73);
    const auto n = m.parameter_count();
    CHECK(n >= 8'000'000);
    CHECK(n <= 11'000'000);
}
