#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sista {

/// Dense row-major matrix of 64-bit floats. Row vectors are 1 x n.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols); // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix constant(std::size_t rows, std::size_t cols, double value);
    static Matrix row_vector(std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool operator==(const Matrix& other) const {
        return same_shape(other) && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Untracked arithmetic, used by corpus generation, target construction and
// evaluation. The tape in tape.hpp reuses these for its forward passes.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Softmax of each row of m / temperature, computed with max-subtraction.
Matrix row_softmax(const Matrix& m, double temperature);

/// Rescales every row to unit L2 norm. Throws DegenerateInputError on a
/// (near-)zero row.
Matrix row_l2_normalize(const Matrix& m);

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* context);

} // namespace sista
