#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellgraph {

/// Thrown when operand shapes do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major float matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<float>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<float>& data() noexcept { return data_; }
    const std::vector<float>& data() const noexcept { return data_; }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const noexcept;
    void fill(float v);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

std::string shape_string(const Matrix& m);

/// C = A * B, accumulated in double.
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A * B^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// C = A^T * B.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    float value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing per
/// row and no explicit zeros are stored.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    /// Duplicate coordinates are summed; entries that end up zero are dropped.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
    static SparseMatrix identity(std::size_t n);
    /// Takes ownership of raw CSR arrays and validates them.
    static SparseMatrix from_csr(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> row_ptr,
                                 std::vector<std::uint32_t> col_idx, std::vector<float> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    const std::vector<std::uint32_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::uint32_t>& col_idx() const noexcept { return col_idx_; }
    const std::vector<float>& values() const noexcept { return values_; }

    /// Throws std::logic_error describing the first violated CSR invariant.
    void validate() const;
    Matrix to_dense() const;
    float at(std::size_t r, std::size_t c) const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint32_t> row_ptr_{0};
    std::vector<std::uint32_t> col_idx_;
    std::vector<float> values_;
};

/// S * D with cost proportional to nnz(S) * D.cols().
Matrix spmm(const SparseMatrix& s, const Matrix& d);
/// S^T * D without materializing the transpose.
Matrix spmm_t(const SparseMatrix& s, const Matrix& d);

}  // namespace cellgraph
