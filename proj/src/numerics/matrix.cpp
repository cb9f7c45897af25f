#include "cellgraph/numerics/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cellgraph {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw ShapeError("ragged rows in Matrix::from_rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void Matrix::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

namespace {
void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
    if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul", a, b);
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Matrix c(n, m);
    std::vector<double> acc(m);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* arow = a.data().data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const float* brow = b.data().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        float* crow = c.data().data() + i * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] = static_cast<float>(acc[j]);
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_nt", a, b);
    // row-times-row dot products do not vectorize; the transposed copy lets
    // matmul stream contiguous rows instead
    return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_tn", a, b);
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<double> acc(k * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float* arow = a.data().data() + i * k;
        const float* brow = b.data().data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* out = acc.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) out[j] += av * static_cast<double>(brow[j]);
        }
    }
    Matrix c(k, m);
    std::transform(acc.begin(), acc.end(), c.data().begin(), [](double v) { return static_cast<float>(v); });
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) throw ShapeError("sparse triplet out of bounds");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix s(rows, cols);
    for (std::size_t i = 0; i < triplets.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < triplets.size() && triplets[j].row == triplets[i].row && triplets[j].col == triplets[i].col) {
            sum += triplets[j].value;
            ++j;
        }
        const auto v = static_cast<float>(sum);
        if (v != 0.0f) {
            s.col_idx_.push_back(triplets[i].col);
            s.values_.push_back(v);
            ++s.row_ptr_[triplets[i].row + 1];
        }
        i = j;
    }
    for (std::size_t r = 0; r < rows; ++r) s.row_ptr_[r + 1] += s.row_ptr_[r];
    return s;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    SparseMatrix s(n, n);
    s.col_idx_.resize(n);
    s.values_.assign(n, 1.0f);
    for (std::size_t i = 0; i < n; ++i) {
        s.col_idx_[i] = static_cast<std::uint32_t>(i);
        s.row_ptr_[i + 1] = static_cast<std::uint32_t>(i + 1);
    }
    return s;
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> row_ptr,
                                    std::vector<std::uint32_t> col_idx, std::vector<float> values) {
    SparseMatrix s;
    s.rows_ = rows;
    s.cols_ = cols;
    s.row_ptr_ = std::move(row_ptr);
    s.col_idx_ = std::move(col_idx);
    s.values_ = std::move(values);
    s.validate();
    return s;
}

void SparseMatrix::validate() const {
    if (row_ptr_.size() != rows_ + 1) throw std::logic_error("csr: row pointer length != rows + 1");
    if (row_ptr_.front() != 0) throw std::logic_error("csr: row pointer must start at 0");
    if (row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size())
        throw std::logic_error("csr: array lengths disagree");
    for (std::size_t r = 0; r < rows_; ++r) {
        if (row_ptr_[r] > row_ptr_[r + 1]) throw std::logic_error("csr: row pointers not monotone");
        for (std::uint32_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (col_idx_[k] >= cols_) throw std::logic_error("csr: column index out of bounds");
            if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
                throw std::logic_error("csr: column indices not strictly increasing");
            if (values_[k] == 0.0f) throw std::logic_error("csr: explicit zero stored");
        }
    }
}

Matrix SparseMatrix::to_dense() const {
    Matrix d(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::uint32_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
    return d;
}

float SparseMatrix::at(std::size_t r, std::size_t c) const {
    const auto begin = col_idx_.begin() + row_ptr_[r];
    const auto end = col_idx_.begin() + row_ptr_[r + 1];
    const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
    if (it == end || *it != c) return 0.0f;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Matrix spmm(const SparseMatrix& s, const Matrix& d) {
    if (s.cols() != d.rows())
        throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                         " times dense " + shape_string(d));
    const std::size_t m = d.cols();
    Matrix out(s.rows(), m);
    std::vector<double> acc(m);
    const auto& rp = s.row_ptr();
    const auto& ci = s.col_idx();
    const auto& v = s.values();
    for (std::size_t r = 0; r < s.rows(); ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::uint32_t k = rp[r]; k < rp[r + 1]; ++k) {
            const double w = v[k];
            const float* src = d.data().data() + static_cast<std::size_t>(ci[k]) * m;
            for (std::size_t j = 0; j < m; ++j) acc[j] += w * static_cast<double>(src[j]);
        }
        float* dst = out.data().data() + r * m;
        for (std::size_t j = 0; j < m; ++j) dst[j] = static_cast<float>(acc[j]);
    }
    return out;
}

Matrix spmm_t(const SparseMatrix& s, const Matrix& d) {
    if (s.rows() != d.rows())
        throw ShapeError("spmm_t: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                         " transposed times dense " + shape_string(d));
    const std::size_t m = d.cols();
    std::vector<double> acc(s.cols() * m, 0.0);
    const auto& rp = s.row_ptr();
    const auto& ci = s.col_idx();
    const auto& v = s.values();
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const float* src = d.data().data() + r * m;
        for (std::uint32_t k = rp[r]; k < rp[r + 1]; ++k) {
            const double w = v[k];
            double* dst = acc.data() + static_cast<std::size_t>(ci[k]) * m;
            for (std::size_t j = 0; j < m; ++j) dst[j] += w * static_cast<double>(src[j]);
        }
    }
    Matrix out(s.cols(), m);
    std::transform(acc.begin(), acc.end(), out.data().begin(), [](double x) { return static_cast<float>(x); });
    return out;
}

}  // namespace cellgraph
