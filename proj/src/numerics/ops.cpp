#include "cellgraph/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace cellgraph::ops {

namespace {

enum class Bcast { same, row, col, scalar };

Bcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
    if (a.same_shape(b)) return Bcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::col;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
}

inline std::size_t bidx(Bcast k, std::size_t i, std::size_t j, std::size_t cols) {
    switch (k) {
        case Bcast::same: return i * cols + j;
        case Bcast::row: return j;
        case Bcast::col: return i;
        case Bcast::scalar: return 0;
    }
    return 0;
}

/// Reduce a full-shape gradient onto the broadcast operand's shape.
Matrix reduce_to(const Matrix& g, Bcast k, const Matrix& shape) {
    if (k == Bcast::same) return g;
    std::vector<double> acc(shape.size(), 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) acc[bidx(k, i, j, g.cols())] += g(i, j);
    Matrix out(shape.rows(), shape.cols());
    std::transform(acc.begin(), acc.end(), out.data().begin(), [](double v) { return static_cast<float>(v); });
    return out;
}

template <typename F>
Matrix map(const Matrix& a, F f) {
    Matrix out(a.rows(), a.cols());
    std::transform(a.data().begin(), a.data().end(), out.data().begin(), f);
    return out;
}

}  // namespace

Var matmul(Var a, Var b) {
    Matrix out = cellgraph::matmul(a.value(), b.value());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate(a, matmul_nt(g, b.value()));
        if (t.needs_grad(b)) t.accumulate(b, matmul_tn(a.value(), g));
    });
}

Var add(Var a, Var b) {
    const Bcast k = broadcast_kind(a.value(), b.value(), "add");
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) + bv.data()[bidx(k, i, j, av.cols())];
    return a.tape().record(std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(b)) t.accumulate(b, reduce_to(g, k, b.value()));
    });
}

Var sub(Var a, Var b) {
    const Bcast k = broadcast_kind(a.value(), b.value(), "sub");
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) - bv.data()[bidx(k, i, j, av.cols())];
    return a.tape().record(std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(b)) {
            Matrix r = reduce_to(g, k, b.value());
            for (float& v : r.data()) v = -v;
            t.accumulate(b, r);
        }
    });
}

Var mul(Var a, Var b) {
    const Bcast k = broadcast_kind(a.value(), b.value(), "mul");
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) * bv.data()[bidx(k, i, j, av.cols())];
    return a.tape().record(std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
        const Matrix& av = a.value();
        const Matrix& bv = b.value();
        if (t.needs_grad(a)) {
            Matrix ga(av.rows(), av.cols());
            for (std::size_t i = 0; i < av.rows(); ++i)
                for (std::size_t j = 0; j < av.cols(); ++j) ga(i, j) = g(i, j) * bv.data()[bidx(k, i, j, av.cols())];
            t.accumulate(a, ga);
        }
        if (t.needs_grad(b)) {
            Matrix full(av.rows(), av.cols());
            for (std::size_t i = 0; i < av.size(); ++i) full.data()[i] = g.data()[i] * av.data()[i];
            t.accumulate(b, reduce_to(full, k, bv));
        }
    });
}

Var scale(Var a, float s) {
    Matrix out = map(a.value(), [s](float v) { return v * s; });
    return a.tape().record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) {
        t.accumulate(a, map(g, [s](float v) { return v * s; }));
    });
}

Var add_scalar(Var a, float s) {
    Matrix out = map(a.value(), [s](float v) { return v + s; });
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var sigmoid(Var a) {
    Matrix out = map(a.value(), [](float v) {
        // split on sign so exp never overflows
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
    });
    auto y = std::make_shared<Matrix>(out);
    return a.tape().record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const float s = y->data()[i];
            ga.data()[i] = g.data()[i] * s * (1.0f - s);
        }
        t.accumulate(a, ga);
    });
}

Var tanh(Var a) {
    Matrix out = map(a.value(), [](float v) { return std::tanh(v); });
    auto y = std::make_shared<Matrix>(out);
    return a.tape().record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const float th = y->data()[i];
            ga.data()[i] = g.data()[i] * (1.0f - th * th);
        }
        t.accumulate(a, ga);
    });
}

Var relu(Var a) {
    Matrix out = map(a.value(), [](float v) { return v > 0.0f ? v : 0.0f; });
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] = x.data()[i] > 0.0f ? g.data()[i] : 0.0f;
        t.accumulate(a, ga);
    });
}

Var pow(Var a, float p) {
    Matrix out = map(a.value(), [p](float v) { return std::pow(v, p); });
    return a.tape().record(std::move(out), {a}, [a, p](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
            ga.data()[i] = g.data()[i] * p * std::pow(x.data()[i], p - 1.0f);
        t.accumulate(a, ga);
    });
}

Var row_softmax(Var a) {
    const Matrix& x = a.value();
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        const float mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) z += std::exp(static_cast<double>(r[j] - mx));
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = static_cast<float>(std::exp(static_cast<double>(r[j] - mx)) / z);
    }
    auto y = std::make_shared<Matrix>(out);
    return a.tape().record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) dot += static_cast<double>(g(i, j)) * (*y)(i, j);
            for (std::size_t j = 0; j < g.cols(); ++j)
                ga(i, j) = static_cast<float>((*y)(i, j) * (g(i, j) - dot));
        }
        t.accumulate(a, ga);
    });
}

Var row_log_softmax(Var a) {
    const Matrix& x = a.value();
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        const float mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) z += std::exp(static_cast<double>(r[j] - mx));
        const double lz = std::log(z) + mx;
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = static_cast<float>(r[j] - lz);
    }
    auto y = std::make_shared<Matrix>(out);
    return a.tape().record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double gs = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) gs += g(i, j);
            for (std::size_t j = 0; j < g.cols(); ++j)
                ga(i, j) = static_cast<float>(g(i, j) - std::exp(static_cast<double>((*y)(i, j))) * gs);
        }
        t.accumulate(a, ga);
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Matrix& v = p.value();
        for (std::size_t i = 0; i < rows; ++i) std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
        off += v.cols();
    }
    return parts.front().tape().record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
        std::size_t off = 0;
        for (const Var& p : parts) {
            const std::size_t c = p.cols();
            if (t.needs_grad(p)) {
                Matrix gp(g.rows(), c);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    std::copy_n(g.row(i).begin() + off, c, gp.row(i).begin());
                t.accumulate(p, gp);
            }
            off += c;
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    const Matrix& x = a.value();
    if (begin + count > x.cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(x));
    Matrix out(x.rows(), count);
    for (std::size_t i = 0; i < x.rows(); ++i) std::copy_n(x.row(i).begin() + begin, count, out.row(i).begin());
    return a.tape().record(std::move(out), {a}, [a, begin, count](Tape& t, const Matrix& g) {
        Matrix& slot = t.grad_slot(a);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < count; ++j) slot(i, begin + j) += g(i, j);
    });
}

Var mean_rows(Var a) {
    const Matrix& x = a.value();
    if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
    std::vector<double> acc(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) acc[j] += x(i, j);
    Matrix out(1, x.cols());
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) = static_cast<float>(acc[j] / n);
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        const float inv = 1.0f / static_cast<float>(x.rows());
        Matrix ga(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) = g(0, j) * inv;
        t.accumulate(a, ga);
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (float v : a.value().data()) s += v;
    Matrix out(1, 1, static_cast<float>(s));
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix(a.rows(), a.cols(), g(0, 0)));
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw ShapeError("mean: empty matrix");
    double s = 0.0;
    for (float v : a.value().data()) s += v;
    Matrix out(1, 1, static_cast<float>(s / static_cast<double>(n)));
    return a.tape().record(std::move(out), {a}, [a, n](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix(a.rows(), a.cols(), g(0, 0) / static_cast<float>(n)));
    });
}

Var cosine_rows(Var a, Var b, std::size_t* zero_rows) {
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    if (!x.same_shape(y)) throw ShapeError("cosine_rows: " + shape_string(x) + " vs " + shape_string(y));
    const std::size_t n = x.rows(), c = x.cols();
    // per row: dot, |x|, |y|
    auto stats = std::make_shared<std::vector<double>>(3 * n, 0.0);
    Matrix out(n, 1);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0, nx = 0.0, ny = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            dot += static_cast<double>(x(i, j)) * y(i, j);
            nx += static_cast<double>(x(i, j)) * x(i, j);
            ny += static_cast<double>(y(i, j)) * y(i, j);
        }
        nx = std::sqrt(nx);
        ny = std::sqrt(ny);
        (*stats)[3 * i] = dot;
        (*stats)[3 * i + 1] = nx;
        (*stats)[3 * i + 2] = ny;
        if (nx == 0.0 || ny == 0.0) {
            ++zeros;
            out(i, 0) = 0.0f;
        } else {
            // rounding can push |cos| a hair past 1
            out(i, 0) = static_cast<float>(std::clamp(dot / (nx * ny), -1.0, 1.0));
        }
    }
    if (zero_rows != nullptr) *zero_rows = zeros;
    return a.tape().record(std::move(out), {a, b}, [a, b, stats](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        const Matrix& y = b.value();
        const std::size_t n = x.rows(), c = x.cols();
        Matrix gx(n, c), gy(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            const double dot = (*stats)[3 * i], nx = (*stats)[3 * i + 1], ny = (*stats)[3 * i + 2];
            if (nx == 0.0 || ny == 0.0) continue;
            const double cosv = dot / (nx * ny);
            const double gi = g(i, 0);
            for (std::size_t j = 0; j < c; ++j) {
                gx(i, j) = static_cast<float>(gi * (y(i, j) / (nx * ny) - cosv * x(i, j) / (nx * nx)));
                gy(i, j) = static_cast<float>(gi * (x(i, j) / (nx * ny) - cosv * y(i, j) / (ny * ny)));
            }
        }
        t.accumulate(a, gx);
        t.accumulate(b, gy);
    });
}

Var dropout(Var a, float rate, Rng& rng, bool training) {
    if (!training || rate <= 0.0f) return a;
    if (rate >= 1.0f) throw std::invalid_argument("dropout: rate must be < 1");
    const Matrix& x = a.value();
    auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
    const float keep = 1.0f / (1.0f - rate);
    for (float& m : mask->data()) m = rng.uniform() < rate ? 0.0f : keep;
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * mask->data()[i];
    return a.tape().record(std::move(out), {a}, [a, mask](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] = g.data()[i] * mask->data()[i];
        t.accumulate(a, ga);
    });
}

Var spmm(const SparseMatrix& s, Var a) {
    Matrix out = cellgraph::spmm(s, a.value());
    // the sparse operand is shared by all layers of a step and outlives the tape
    const SparseMatrix* sp = &s;
    return a.tape().record(std::move(out), {a}, [a, sp](Tape& t, const Matrix& g) {
        t.accumulate(a, spmm_t(*sp, g));
    });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
    const Matrix& x = a.value();
    auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
    Matrix out(idx->size(), x.cols());
    for (std::size_t k = 0; k < idx->size(); ++k) {
        if ((*idx)[k] >= x.rows()) throw std::out_of_range("gather_rows: row index out of range");
        std::copy(x.row((*idx)[k]).begin(), x.row((*idx)[k]).end(), out.row(k).begin());
    }
    return a.tape().record(std::move(out), {a}, [a, idx](Tape& t, const Matrix& g) {
        Matrix& slot = t.grad_slot(a);
        for (std::size_t k = 0; k < idx->size(); ++k)
            for (std::size_t j = 0; j < g.cols(); ++j) slot((*idx)[k], j) += g(k, j);
    });
}

Var replace_rows(Var a, std::span<const std::size_t> rows, Var token) {
    const Matrix& x = a.value();
    const Matrix& tok = token.value();
    if (tok.rows() != 1 || tok.cols() != x.cols())
        throw ShapeError("replace_rows: token " + shape_string(tok) + " does not fit rows of " + shape_string(x));
    auto replaced = std::make_shared<std::vector<char>>(x.rows(), 0);
    Matrix out = x;
    for (std::size_t r : rows) {
        if (r >= x.rows()) throw std::out_of_range("replace_rows: row index out of range");
        (*replaced)[r] = 1;
        std::copy(tok.row(0).begin(), tok.row(0).end(), out.row(r).begin());
    }
    return a.tape().record(std::move(out), {a, token}, [a, token, replaced](Tape& t, const Matrix& g) {
        const std::size_t c = g.cols();
        if (t.needs_grad(a)) {
            Matrix ga = g;
            for (std::size_t i = 0; i < g.rows(); ++i)
                if ((*replaced)[i]) std::fill(ga.row(i).begin(), ga.row(i).end(), 0.0f);
            t.accumulate(a, ga);
        }
        if (t.needs_grad(token)) {
            std::vector<double> acc(c, 0.0);
            for (std::size_t i = 0; i < g.rows(); ++i)
                if ((*replaced)[i])
                    for (std::size_t j = 0; j < c; ++j) acc[j] += g(i, j);
            Matrix gt(1, c);
            for (std::size_t j = 0; j < c; ++j) gt(0, j) = static_cast<float>(acc[j]);
            t.accumulate(token, gt);
        }
    });
}

Var pick(Var a, std::span<const std::uint32_t> labels) {
    const Matrix& x = a.value();
    if (labels.size() != x.rows()) throw ShapeError("pick: label count != rows");
    auto lab = std::make_shared<std::vector<std::uint32_t>>(labels.begin(), labels.end());
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if ((*lab)[i] >= x.cols()) throw std::out_of_range("pick: label out of range");
        out(i, 0) = x(i, (*lab)[i]);
    }
    return a.tape().record(std::move(out), {a}, [a, lab](Tape& t, const Matrix& g) {
        Matrix& slot = t.grad_slot(a);
        for (std::size_t i = 0; i < g.rows(); ++i) slot(i, (*lab)[i]) += g(i, 0);
    });
}

namespace {
void check_offsets(std::span<const std::size_t> offsets, std::size_t rows, const char* op) {
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows)
        throw ShapeError(std::string(op) + ": offsets must span all rows");
    for (std::size_t s = 1; s < offsets.size(); ++s)
        if (offsets[s] < offsets[s - 1]) throw ShapeError(std::string(op) + ": offsets not monotone");
}
}  // namespace

Var segment_softmax(Var scores, std::span<const std::size_t> offsets) {
    const Matrix& x = scores.value();
    if (x.cols() != 1) throw ShapeError("segment_softmax: scores must be a column");
    check_offsets(offsets, x.rows(), "segment_softmax");
    auto off = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
    Matrix out(x.rows(), 1);
    for (std::size_t s = 0; s + 1 < off->size(); ++s) {
        const std::size_t b = (*off)[s], e = (*off)[s + 1];
        if (b == e) continue;
        float mx = x(b, 0);
        for (std::size_t i = b; i < e; ++i) mx = std::max(mx, x(i, 0));
        double z = 0.0;
        for (std::size_t i = b; i < e; ++i) z += std::exp(static_cast<double>(x(i, 0) - mx));
        for (std::size_t i = b; i < e; ++i) out(i, 0) = static_cast<float>(std::exp(static_cast<double>(x(i, 0) - mx)) / z);
    }
    auto y = std::make_shared<Matrix>(out);
    return scores.tape().record(std::move(out), {scores}, [scores, off, y](Tape& t, const Matrix& g) {
        Matrix gs(g.rows(), 1);
        for (std::size_t s = 0; s + 1 < off->size(); ++s) {
            const std::size_t b = (*off)[s], e = (*off)[s + 1];
            double dot = 0.0;
            for (std::size_t i = b; i < e; ++i) dot += static_cast<double>(g(i, 0)) * (*y)(i, 0);
            for (std::size_t i = b; i < e; ++i) gs(i, 0) = static_cast<float>((*y)(i, 0) * (g(i, 0) - dot));
        }
        t.accumulate(scores, gs);
    });
}

Var segment_sum(Var a, std::span<const std::size_t> offsets) {
    const Matrix& x = a.value();
    check_offsets(offsets, x.rows(), "segment_sum");
    auto off = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
    const std::size_t segs = off->size() - 1;
    Matrix out(segs, x.cols());
    std::vector<double> acc(x.cols());
    for (std::size_t s = 0; s < segs; ++s) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = (*off)[s]; i < (*off)[s + 1]; ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) acc[j] += x(i, j);
        for (std::size_t j = 0; j < x.cols(); ++j) out(s, j) = static_cast<float>(acc[j]);
    }
    return a.tape().record(std::move(out), {a}, [a, off](Tape& t, const Matrix& g) {
        const Matrix& x = a.value();
        Matrix ga(x.rows(), x.cols());
        for (std::size_t s = 0; s + 1 < off->size(); ++s)
            for (std::size_t i = (*off)[s]; i < (*off)[s + 1]; ++i)
                std::copy(g.row(s).begin(), g.row(s).end(), ga.row(i).begin());
        t.accumulate(a, ga);
    });
}

}  // namespace cellgraph::ops
