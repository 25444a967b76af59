#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "sista/feature_space.hpp"
#include "sista/matrix.hpp"
#include "sista/tape.hpp"

namespace sista {

struct StaConfig {
    double sparsity_threshold = 0.3;
    double temperature = 0.2;
    double degenerate_epsilon = 1e-9;

    /// Throws ConfigError unless threshold in [0, 1), temperature > 0 and
    /// degenerate_epsilon > 0.
    void validate() const;
};

/// Sparse patch alignment computed for one token.
struct TokenAlignment {
    std::vector<double> raw_similarities; // M inner products
    std::vector<double> normalized;       // M values in [0, 1]
    std::vector<std::size_t> retained;    // ascending patch indices
    std::vector<double> weights;          // per retained patch, sums to 1
};

/// Per-instance alignment structure: one entry per token.
struct AlignmentMap {
    std::size_t num_patches = 0;
    std::vector<TokenAlignment> tokens;
};

/// s[k] = dot(token, patch_k). Raw inner products, deliberately not cosine.
std::vector<double> token_patch_similarities(std::span<const double> token,
                                             const Matrix& patches);

/// Affine rescale of s into [0, 1]: min maps to 0, max to 1. When
/// max - min < eps every entry maps to 1 (degenerate rule).
std::vector<double> minmax_normalize(std::span<const double> s, double eps);

/// Indices with normalized similarity >= threshold, ascending. Nonempty for
/// any threshold < 1 because the argmax normalizes to exactly 1.
std::vector<std::size_t> sparse_select(std::span<const double> normalized, double threshold);

/// Weights proportional to the retained normalized similarities, summing
/// to 1. A zero retained sum (possible only with threshold 0 on degenerate
/// input) yields uniform weights.
std::vector<double> alignment_weights(std::span<const double> normalized,
                                      std::span<const std::size_t> retained);

/// Convex combination of the retained patch rows under the given weights.
std::vector<double> cross_modal_embedding(std::span<const double> weights,
                                          std::span<const std::size_t> retained,
                                          const Matrix& patches);

/// Runs the full per-token pipeline for every token of one instance.
AlignmentMap compute_alignment_map(const Matrix& tokens, const Matrix& patches,
                                   const StaConfig& cfg);

/// Dense L x M matrix: row l holds the alignment weight at each retained
/// patch index and 0 elsewhere; every row sums to 1.
Matrix export_alignment_map(const AlignmentMap& map);

/// Plain-text matrix file: header line "L M", then one row of space-separated
/// decimal weights per token.
void write_alignment_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_alignment_matrix(const std::filesystem::path& path);

/// Token-level contrastive loss over a batch of instances: each token is
/// contrasted against its cross-modal embedding within its own instance,
/// bidirectionally, weighted by token importance. Nonnegative; gradients flow
/// through the retained weights but not through the selection decision.
double sta_loss(const std::vector<InstancePair>& batch, const StaConfig& cfg);

/// Per-instance feature handles for the tape form of sta_loss.
struct InstanceTokenVars {
    ad::Var tokens;  // L x d
    ad::Var patches; // M x d
    std::vector<double> token_importance; // size L, sums to L
};

ad::Var sta_loss_on_tape(ad::Tape& tape, std::span<const InstanceTokenVars> batch,
                         const StaConfig& cfg);

/// Importance fallback when a corpus supplies no weights: softmax over tokens
/// of cosine_sim(token, report_global), rescaled to sum to the token count.
std::vector<double> fallback_token_importance(const Matrix& tokens,
                                              const FeatureVector& report_global);

} // namespace sista
