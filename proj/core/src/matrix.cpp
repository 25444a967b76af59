#include "sista/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sista/errors.hpp"

namespace sista {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not equal rows*cols = " + std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::constant(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), value);
    return m;
}

Matrix Matrix::row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Matrix(1, n, std::move(values));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix row_softmax(const Matrix& m, double temperature) {
    if (!(temperature > 0.0)) {
        throw ConfigError("row_softmax: temperature must be positive, got " +
                          std::to_string(temperature));
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto x = m.row(i);
        double mx = x[0] / temperature;
        for (std::size_t j = 1; j < x.size(); ++j) mx = std::max(mx, x[j] / temperature);
        double denom = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            out(i, j) = std::exp(x[j] / temperature - mx);
            denom += out(i, j);
        }
        for (std::size_t j = 0; j < x.size(); ++j) out(i, j) /= denom;
    }
    return out;
}

Matrix row_l2_normalize(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double n = l2_norm(m.row(i));
        if (!(n > 1e-300) || !std::isfinite(n)) {
            throw DegenerateInputError("row_l2_normalize: row " + std::to_string(i) +
                                       " has zero or non-finite norm");
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) / n;
    }
    return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ShapeError("dot: length mismatch " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(),
                       [](double x) { return std::isfinite(x); });
}

void require_finite(const Matrix& m, const char* context) {
    if (!all_finite(m)) {
        throw NumericError(std::string(context) + ": non-finite entries");
    }
}

} // namespace sista
