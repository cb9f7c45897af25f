#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cellgraph/acm/checkpoint.hpp"
#include "cellgraph/acm/filters.hpp"
#include "cellgraph/acm/model.hpp"
#include "cellgraph/graph/batch.hpp"
#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/ops.hpp"
#include "cellgraph/util/bytes.hpp"
#include "support/acm_reference.hpp"
#include "support/gradcheck.hpp"
#include "support/random_graphs.hpp"

using namespace cellgraph;
using namespace cellgraph::acm;
using cellgraph::testing::random_cell_graph;

namespace {

SparseMatrix adjacency(std::size_t n, const std::vector<graph::Edge>& edges) {
    std::vector<Triplet> t;
    for (const auto& e : edges) {
        t.push_back({e.i, e.j, e.weight});
        t.push_back({e.j, e.i, e.weight});
    }
    return SparseMatrix::from_triplets(n, n, t);
}

Matrix run_layer(AcmLayer& layer, const Matrix& x, const ChannelFilters& f, Matrix* alpha = nullptr) {
    Tape tape;
    return layer.forward(tape, tape.constant(x), f, alpha).value();
}

Matrix run_encoder(AcmEncoder& enc, const graph::GraphBatch& b) {
    Tape tape;
    const ChannelFilters f = batch_filters(b);
    return enc.forward(tape, tape.constant(b.features), f).value();
}

}  // namespace

TEST_CASE("random_walk and channel filters") {
    SUBCASE("single edge") {
        const auto rw = random_walk(adjacency(2, {{0, 1, 50.0f}}));
        CHECK(rw.to_dense() == Matrix::from_rows({{0, 1}, {1, 0}}));
        const auto f = channel_filters(rw);
        CHECK(f.low.to_dense() == Matrix::from_rows({{0.5f, 0.5f}, {0.5f, 0.5f}}));
        CHECK(f.high.to_dense() == Matrix::from_rows({{0.5f, -0.5f}, {-0.5f, 0.5f}}));
    }
    SUBCASE("weights 10 and 30") {
        const auto rw = random_walk(adjacency(3, {{0, 1, 10.0f}, {0, 2, 30.0f}}));
        CHECK(rw.at(0, 1) == 0.25f);
        CHECK(rw.at(0, 2) == 0.75f);
    }
    SUBCASE("isolated node") {
        const auto rw = random_walk(adjacency(3, {{0, 1, 5.0f}}));
        for (std::size_t c = 0; c < 3; ++c) CHECK(rw.at(2, c) == 0.0f);
        const auto f = channel_filters(rw);
        CHECK(f.low.at(2, 2) == 0.5f);
        CHECK(f.high.at(2, 2) == 0.5f);
        CHECK(f.low.at(2, 0) == 0.0f);
    }
    SUBCASE("low + high = I exactly on random graphs") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto g = random_cell_graph(3 + s, 2, s);
            const auto f = channel_filters(random_walk(adjacency(g.node_count(), g.edges)));
            const Matrix lo = f.low.to_dense(), hi = f.high.to_dense();
            for (std::size_t r = 0; r < lo.rows(); ++r)
                for (std::size_t c = 0; c < lo.cols(); ++c) CHECK(lo(r, c) + hi(r, c) == (r == c ? 1.0f : 0.0f));
            const auto rw = random_walk(adjacency(g.node_count(), g.edges)).to_dense();
            for (std::size_t r = 0; r < rw.rows(); ++r) {
                double s2 = 0.0;
                for (std::size_t c = 0; c < rw.cols(); ++c) s2 += rw(r, c);
                if (s2 != 0.0) CHECK(s2 == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }
    SUBCASE("negative weight rejected") {
        CHECK_THROWS(random_walk(SparseMatrix::from_triplets(2, 2, {{0, 1, -1.0f}, {1, 0, -1.0f}})));
    }
}

TEST_CASE("add_virtual_node") {
    const auto g = random_cell_graph(3, 4, 1);
    const auto b = add_virtual_node(g, 42.0f);
    CHECK(b.node_count() == 4);
    CHECK(b.virtual_index == std::size_t{3});
    std::size_t virtual_edges = 0;
    for (const auto& e : b.edges)
        if (e.j == 3) {
            ++virtual_edges;
            CHECK(e.weight == 42.0f);
        }
    CHECK(virtual_edges == 3);
    for (std::size_t f = 0; f < 4; ++f) CHECK(b.features(3, f) == 0.0f);
    CHECK(std::equal(g.edges.begin(), g.edges.end(), b.edges.begin()));

    graph::CellGraph empty;
    empty.features = Matrix(0, 4);
    const auto e = add_virtual_node(empty, 42.0f);
    CHECK(e.node_count() == 1);
    CHECK(e.edges.empty());
    CHECK_THROWS(add_virtual_node(g, 0.0f));
}

TEST_CASE("acm layer limiting cases") {
    Rng rng(5);
    LayerConfig cfg{4, 6, 5, 2, true, 1.0, ChannelMode::adaptive};
    AcmLayer layer(cfg, rng, "l");
    const auto g = random_cell_graph(7, 4, 3);
    const auto f = channel_filters(random_walk(adjacency(7, g.edges)));
    auto params = layer.parameters();
    Parameter& mix = *params.back();

    SUBCASE("equal scores give the channel mean") {
        mix.value.fill(0.0f);
        Matrix alpha;
        const Matrix out = run_layer(layer, g.features, f, &alpha);
        for (std::size_t r = 0; r < 7; ++r)
            for (int c = 0; c < 3; ++c) CHECK(alpha(r, c) == doctest::Approx(1.0 / 3.0));
        // channel outputs with only one channel active at a time
        Matrix sum(out.rows(), out.cols());
        for (int keep = 0; keep < 3; ++keep) {
            mix.value.fill(0.0f);
            for (int k = 0; k < 3; ++k) mix.value(k, keep) = 200.0f;
            const Matrix one = run_layer(layer, g.features, f);
            for (std::size_t i = 0; i < one.size(); ++i) sum.data()[i] += one.data()[i] / 3.0f;
        }
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == doctest::Approx(sum.data()[i]).epsilon(1e-4));
    }
    SUBCASE("a dominant column selects that channel") {
        mix.value.fill(0.0f);
        for (int k = 0; k < 3; ++k) mix.value(k, 2) = 500.0f;
        Matrix alpha;
        const Matrix out = run_layer(layer, g.features, f, &alpha);
        for (std::size_t r = 0; r < 7; ++r) CHECK(alpha(r, 2) == doctest::Approx(1.0));
        // identity channel: MLP of the raw features
        testing::Rows x = testing::dense_rows(g.features);
        const auto ref = testing::reference_acm_layer(x, g.edges, params, cfg);
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t c = 0; c < 5; ++c) CHECK(out(r, c) == doctest::Approx(ref.h[r][c]).epsilon(1e-5));
    }
    SUBCASE("isolated node mixes equal low and high inputs") {
        graph::CellGraph lone = g;
        lone.edges.clear();
        const auto fl = channel_filters(random_walk(adjacency(7, lone.edges)));
        Matrix alpha;
        const Matrix out = run_layer(layer, g.features, fl, &alpha);
        CHECK(out.all_finite());
    }
    SUBCASE("low-pass-only forces the mix") {
        LayerConfig lp = cfg;
        lp.mode = ChannelMode::low_pass_only;
        Rng r2(5);
        AcmLayer low(lp, r2, "l");
        Matrix alpha;
        run_layer(low, g.features, f, &alpha);
        for (std::size_t r = 0; r < 7; ++r) CHECK(alpha(r, 0) == 1.0f);
    }
}

TEST_CASE("acm layer matches the loop-based reference") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.index(30);
        const LayerConfig cfg{5, 7, 6, 1 + static_cast<int>(rng.index(2)), rng.bernoulli(0.5), 0.5 + rng.uniform(), ChannelMode::adaptive};
        AcmLayer layer(cfg, rng, "l");
        const auto g = random_cell_graph(n, 5, rng.next_u64());
        const auto f = channel_filters(random_walk(adjacency(n, g.edges)));
        Matrix alpha;
        const Matrix out = run_layer(layer, g.features, f, &alpha);
        const auto ref = testing::reference_acm_layer(testing::dense_rows(g.features), g.edges, layer.parameters(), cfg);
        double worst = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double asum = 0.0;
            for (int c = 0; c < 3; ++c) {
                worst = std::max(worst, std::abs(alpha(r, c) - ref.alpha[r][c]));
                asum += alpha(r, c);
                CHECK(alpha(r, c) > 0.0f);
                CHECK(alpha(r, c) < 1.0f);
            }
            CHECK(std::abs(asum - 1.0) < 1e-6);
            for (std::size_t c = 0; c < cfg.out_dim; ++c) worst = std::max(worst, std::abs(out(r, c) - ref.h[r][c]));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("encoder") {
    Rng rng(23);
    EncoderConfig cfg;
    cfg.in_dim = 4;
    cfg.hidden_dim = cfg.layer_dim = cfg.out_dim = 8;
    cfg.layers = 3;
    AcmEncoder enc(cfg, rng, "enc");

    SUBCASE("single layer reduces to layer then linear") {
        EncoderConfig one = cfg;
        one.layers = 1;
        Rng r1(1), r2(1);
        AcmEncoder e(one, r1, "e");
        AcmLayer l(LayerConfig{4, 8, 8, 2, true, 1.0, ChannelMode::adaptive}, r2, "x");
        const auto g = random_cell_graph(6, 4, 2);
        const auto b = graph::batch_graphs(std::span(&g, 1));
        const Matrix h = run_layer(l, g.features, batch_filters(b));
        auto p = e.parameters();
        const Matrix expect = matmul(h, p[p.size() - 2]->value);
        const Matrix got = run_encoder(e, b);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-5));
    }
    SUBCASE("node permutation permutes outputs") {
        const auto g = random_cell_graph(9, 4, 8);
        std::vector<std::uint32_t> perm{4, 0, 7, 1, 8, 3, 2, 6, 5};  // new index of old node i
        graph::CellGraph p = g;
        for (std::size_t i = 0; i < 9; ++i) {
            p.positions[perm[i]] = g.positions[i];
            for (std::size_t c = 0; c < 4; ++c) p.features(perm[i], c) = g.features(i, c);
        }
        p.edges.clear();
        for (const auto& e : g.edges)
            p.edges.push_back({std::min(perm[e.i], perm[e.j]), std::max(perm[e.i], perm[e.j]), e.weight});
        graph::canonicalize_edges(p.edges);
        const Matrix a = run_encoder(enc, graph::batch_graphs(std::span(&g, 1)));
        const Matrix b = run_encoder(enc, graph::batch_graphs(std::span(&p, 1)));
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t c = 0; c < 8; ++c) CHECK(a(i, c) == doctest::Approx(b(perm[i], c)).epsilon(1e-5));
    }
    SUBCASE("batched equals separate") {
        std::vector<graph::GraphBlock> blocks;
        for (std::uint64_t s = 0; s < 4; ++s) blocks.push_back(add_virtual_node(random_cell_graph(2 + 3 * s, 4, 40 + s), 30.0f));
        const auto all = graph::batch_blocks(blocks);
        const Matrix h = run_encoder(enc, all);
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const Matrix one = run_encoder(enc, graph::batch_blocks(std::span(&blocks[k], 1)));
            for (std::size_t r = 0; r < one.rows(); ++r)
                for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(one(r, c) - h(all.offsets[k] + r, c)) < 1e-5);
        }
    }
}

TEST_CASE("two-layer encoder passes finite differences") {
    Rng rng(31);
    EncoderConfig cfg;
    cfg.in_dim = 3;
    cfg.hidden_dim = cfg.layer_dim = cfg.out_dim = 4;
    cfg.layers = 2;
    AcmEncoder enc(cfg, rng, "enc");
    // zero-initialised biases put ReLU inputs exactly on the kink for all-zero rows
    for (auto* p : enc.parameters())
        for (auto& v : p->value.data()) v += static_cast<float>(rng.normal(0.0, 0.2));
    const auto g = random_cell_graph(6, 3, 12);
    const auto b = graph::batch_graphs(std::span(&g, 1));
    const auto f = batch_filters(b);
    const Matrix proj = normal_matrix(6, 4, rng);
    auto build = [&](Tape& t) {
        Var h = enc.forward(t, t.constant(b.features), f);
        return ops::sum(ops::mul(h, t.constant(proj)));
    };
    const auto res = testing::gradcheck_parameters(build, enc.parameters());
    CHECK(res.rel_error < 1e-3);
    CHECK(res.kinks * 20 < res.checked);

    // and with respect to the input features
    const auto in = testing::gradcheck(
        [&](Tape& t, const std::vector<Var>& v) { return ops::sum(ops::mul(enc.forward(t, v[0], f), t.constant(proj))); },
        {b.features});
    CHECK(in.max_rel_error < 1e-3);
}

TEST_CASE("region_embedding") {
    std::vector<graph::GraphBlock> blocks{add_virtual_node(random_cell_graph(2, 3, 1), 10.0f),
                                          add_virtual_node(random_cell_graph(1, 3, 2), 10.0f)};
    const auto b = graph::batch_blocks(blocks);
    Matrix h = Matrix::from_rows({{1, 2, 3}, {3, 4, 5}, {1e30f, 1e30f, 1e30f}, {7, 8, 9}, {-1e30f, 0, 0}});
    const Matrix r = region_embedding(h, b);
    CHECK(r == Matrix::from_rows({{2, 3, 4}, {7, 8, 9}}));

    graph::CellGraph empty;
    empty.features = Matrix(0, 3);
    const std::vector<graph::GraphBlock> eb{add_virtual_node(empty, 1.0f)};
    const auto bb = graph::batch_blocks(eb);
    CHECK(region_embedding(Matrix::from_rows({{5, 5, 5}}), bb) == Matrix(1, 3));
}

TEST_CASE("parameter count at d=512") {
    Rng rng(1);
    EncoderConfig e;
    e.in_dim = 73;
    e.hidden_dim = e.layer_dim = e.out_dim = 512;
    e.layers = 5;
    AcmEncoder enc(e, rng, "enc");
    EncoderConfig d;
    d.in_dim = 512;
    d.hidden_dim = 512;
    d.layer_dim = d.out_dim = 73;
    d.layers = 1;
    d.final_activation = false;
    AcmEncoder dec(d, rng, "dec");
    const std::size_t total = enc.parameter_count() + dec.parameter_count() + 73 + 512;
    MESSAGE("parameters: " << total);
    CHECK(total >= 8'000'000);
    CHECK(total <= 11'000'000);
}

TEST_CASE("checkpoint container") {
    Checkpoint c;
    c.meta["epoch"] = 3;
    c.meta["config"] = {{"hidden_dim", 64}};
    Rng rng(2);
    c.put("a", normal_matrix(3, 4, rng));
    c.put("b", Matrix(0, 5));
    const auto bytes = serialize_checkpoint(c);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.meta == c.meta);
    CHECK(back.tensors == c.tensors);
    CHECK(serialize_checkpoint(back) == bytes);

    auto bad = bytes;
    bad[bad.size() - 30] ^= 1;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("checksum"), FormatError);
    bad = bytes;
    bad[7] = '2';
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("version"), FormatError);
    bad = bytes;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(deserialize_checkpoint(bad), FormatError);

    EncoderConfig cfg;
    cfg.in_dim = 3;
    cfg.layers = 2;
    cfg.hidden_dim = cfg.layer_dim = cfg.out_dim = 4;
    Rng r1(1), r2(2);
    AcmEncoder a(cfg, r1, "enc"), b(cfg, r2, "enc");
    Checkpoint pc;
    pc.put_parameters("p/", a.parameters());
    pc.load_parameters("p/", b.parameters());
    auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->value == pb[k]->value);
}
