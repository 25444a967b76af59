#include "sista/feature_space.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sista/errors.hpp"

namespace sista {

FeatureVector FeatureVector::from_row(const Matrix& m, std::size_t row) {
    const auto r = m.row(row);
    return FeatureVector(std::vector<double>(r.begin(), r.end()));
}

FeatureVector normalize(const FeatureVector& v) {
    const double n = l2_norm(v.span());
    if (!(n > 1e-300) || !std::isfinite(n)) {
        throw DegenerateInputError("normalize: zero or non-finite vector");
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return FeatureVector(std::move(out));
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (!(nu > 1e-300) || !(nv > 1e-300)) {
        throw DegenerateInputError("cosine_sim: zero vector argument");
    }
    return dot(u, v) / (nu * nv);
}

double cosine_sim(const FeatureVector& u, const FeatureVector& v) {
    return cosine_sim(u.span(), v.span());
}

Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("cosine_sim_matrix: feature dimensions differ");
    }
    return matmul(row_l2_normalize(a), transpose(row_l2_normalize(b)));
}

ProjectionHead::ProjectionHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                               std::uint64_t seed)
    : w1_(in_dim, hidden_dim), b1_(1, hidden_dim), w2_(hidden_dim, out_dim), b2_(1, out_dim) {
    if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) {
        throw ConfigError("ProjectionHead: dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& x : w1_.data()) x = s1 * gauss(rng);
    for (double& x : w2_.data()) x = s2 * gauss(rng);
}

ProjectionHead ProjectionHead::identity(std::size_t in_dim, std::size_t out_dim) {
    ProjectionHead head;
    head.w1_ = Matrix(in_dim, in_dim);
    for (std::size_t i = 0; i < in_dim; ++i) head.w1_(i, i) = 1.0;
    head.b1_ = Matrix(1, in_dim);
    head.w2_ = Matrix(in_dim, out_dim);
    for (std::size_t i = 0; i < std::min(in_dim, out_dim); ++i) head.w2_(i, i) = 1.0;
    head.b2_ = Matrix(1, out_dim);
    return head;
}

Matrix ProjectionHead::forward(const Matrix& raw) const {
    if (raw.cols() != in_dim()) {
        throw ShapeError("ProjectionHead::forward: input has " + std::to_string(raw.cols()) +
                         " columns, head expects " + std::to_string(in_dim()));
    }
    Matrix h = matmul(raw, w1_);
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = std::tanh(h(i, j) + b1_(0, j));
    Matrix out = matmul(h, w2_);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b2_(0, j);
    return row_l2_normalize(out);
}

FeatureVector ProjectionHead::forward(const FeatureVector& raw) const {
    return FeatureVector::from_row(forward(raw.as_row_matrix()), 0);
}

FeatureVector project(const FeatureVector& raw, const ProjectionHead& head) {
    return head.forward(raw);
}

HeadVars register_head(ad::Tape& tape, const ProjectionHead& head) {
    return HeadVars{tape.input(head.w1()), tape.input(head.b1()), tape.input(head.w2()),
                    tape.input(head.b2())};
}

ad::Var project_on_tape(ad::Tape& tape, ad::Var raw_rows, const HeadVars& head) {
    ad::Var h = ad::tanh(ad::add_rowvec(ad::matmul(raw_rows, head.w1), head.b1));
    ad::Var out = ad::add_rowvec(ad::matmul(h, head.w2), head.b2);
    return ad::row_l2_normalize(out);
}

void InstancePair::validate() const {
    if (patches.rows() < 1) throw ContractError("InstancePair: needs at least one patch");
    if (tokens.rows() < 1) throw ContractError("InstancePair: needs at least one token");
    if (token_importance.size() != tokens.rows()) {
        throw ContractError("InstancePair: token_importance length != token count");
    }
    double sum = 0.0;
    for (double u : token_importance) {
        if (u < 0.0) throw ContractError("InstancePair: negative token importance");
        sum += u;
    }
    const double expected = static_cast<double>(tokens.rows());
    if (std::abs(sum - expected) > 1e-6 * expected) {
        throw ContractError("InstancePair: token importance must sum to the token count");
    }
}

} // namespace sista
