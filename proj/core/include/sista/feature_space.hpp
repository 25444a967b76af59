#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sista/matrix.hpp"
#include "sista/tape.hpp"

namespace sista {

/// A point in the shared embedding space. Unit L2 norm after normalize().
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::span<const double> span() const { return values_; }
    std::span<double> span() { return values_; }
    const std::vector<double>& values() const { return values_; }

    Matrix as_row_matrix() const { return Matrix::row_vector(values_); }
    static FeatureVector from_row(const Matrix& m, std::size_t row);

    bool operator==(const FeatureVector& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

/// Rescales v to unit L2 norm, preserving direction.
/// Throws DegenerateInputError on a zero vector.
FeatureVector normalize(const FeatureVector& v);

/// Cosine similarity: dot product of the normalized inputs. Symmetric,
/// in [-1, 1]. Throws DegenerateInputError when either input is zero.
double cosine_sim(std::span<const double> u, std::span<const double> v);
double cosine_sim(const FeatureVector& u, const FeatureVector& v);

/// Pairwise cosine similarities between the rows of a and the rows of b.
Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b);

/// Two-layer projection from raw feature space into the shared d-dimensional
/// space: affine -> tanh -> affine, followed by L2 normalization. Stands in
/// for an encoder's projection layers; the smooth nonlinearity keeps
/// finite-difference gradient checks clean.
class ProjectionHead {
public:
    ProjectionHead() = default;
    ProjectionHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                   std::uint64_t seed);

    /// Head whose affine maps are identity blocks (truncated or zero-padded):
    /// hidden width equals in_dim, biases zero.
    static ProjectionHead identity(std::size_t in_dim, std::size_t out_dim);

    std::size_t in_dim() const { return w1_.rows(); }
    std::size_t hidden_dim() const { return w1_.cols(); }
    std::size_t out_dim() const { return w2_.cols(); }

    /// Projects each row of `raw` into the shared space; every output row has
    /// unit norm. Throws ShapeError when raw.cols() != in_dim().
    Matrix forward(const Matrix& raw) const;
    FeatureVector forward(const FeatureVector& raw) const;

    // Parameters, exposed for the optimizer and checkpointing.
    Matrix& w1() { return w1_; }
    Matrix& b1() { return b1_; }
    Matrix& w2() { return w2_; }
    Matrix& b2() { return b2_; }
    const Matrix& w1() const { return w1_; }
    const Matrix& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const Matrix& b2() const { return b2_; }

private:
    Matrix w1_; // in x hidden
    Matrix b1_; // 1 x hidden
    Matrix w2_; // hidden x out
    Matrix b2_; // 1 x out
};

/// Projects raw as the vector spec op: raw -> d-dimensional unit-norm output.
FeatureVector project(const FeatureVector& raw, const ProjectionHead& head);

/// Tape handles for one head's parameters.
struct HeadVars {
    ad::Var w1, b1, w2, b2;
};

/// Registers the head's parameters as tracked tape inputs.
HeadVars register_head(ad::Tape& tape, const ProjectionHead& head);

/// Tape version of ProjectionHead::forward for a rows-of-samples input.
ad::Var project_on_tape(ad::Tape& tape, ad::Var raw_rows, const HeadVars& head);

/// One image-report sample in the shared space.
struct InstancePair {
    FeatureVector image_global;      // v
    FeatureVector report_global;     // t
    FeatureVector image_global_aug;  // augmented v
    FeatureVector report_global_aug; // augmented t
    Matrix patches;                  // M x d
    Matrix tokens;                   // L x d
    std::vector<double> token_importance; // size L, >= 0, sums to L

    std::size_t num_patches() const { return patches.rows(); }
    std::size_t num_tokens() const { return tokens.rows(); }

    /// Checks M >= 1, L >= 1 and the token_importance contract.
    void validate() const;
};

} // namespace sista
