#pragma once

#include <cstddef>
#include <span>

#include "sista/feature_space.hpp"
#include "sista/matrix.hpp"
#include "sista/tape.hpp"

namespace sista {

/// Loss formulation for the language-guided score matrix.
///
/// canonical: the target matrix is row-normalized into a distribution and the
///   loss is the soft-target cross entropy -sum_k s_hat[i,k] * log softmax_k.
///   Degenerates exactly to InfoNCE when no pseudo-positives exist.
/// literal: the unnormalized scores weight the partition function directly
///   (diagonal 1, pseudo-positives soft_label_value, negatives 1), shipped for
///   comparison.
enum class NceForm { canonical, literal };

/// hard: unpaired samples are strict negatives (identity target matrix).
/// soft: reports whose similarity crosses the threshold become pseudo-positives.
enum class LabelMode { soft, hard };

struct InstanceLossConfig {
    double temperature = 0.2;
    double pseudo_positive_threshold = 0.9;
    double soft_label_value = 0.1;
    LabelMode label_mode = LabelMode::soft;
    NceForm nce_form = NceForm::canonical;

    /// Throws ConfigError unless temperature > 0, threshold in (0, 1] and
    /// soft_label_value in (0, 1).
    void validate() const;
};

/// Language-guided B x B target structure for one batch.
struct SemanticMatrix {
    std::size_t size = 0;
    /// Row-stochastic soft targets: diagonal dominant, rows sum to 1.
    Matrix targets;
    /// Unnormalized scores: 1 on the diagonal, soft_label_value at
    /// pseudo-positives, 0 elsewhere.
    Matrix raw_scores;
    /// 1 where an off-diagonal pair crossed the similarity threshold.
    Matrix pseudo_positive_mask;
    NceForm nce_form = NceForm::canonical;

    std::size_t pseudo_positive_count() const;
};

/// Builds the semantic matrix from the batch's global report features.
/// Pairs with cosine similarity >= threshold (ties included) become
/// pseudo-positives; in hard label mode the matrix is the identity.
SemanticMatrix build_semantic_matrix(const Matrix& report_globals,
                                     const InstanceLossConfig& cfg);

/// Soft-target cross entropy of one similarity row against one target row:
/// -sum_k target[k] * log softmax_k(sim / temperature). Equals standard
/// InfoNCE when the target row is one-hot. The target row must sum to 1
/// within 1e-6 (ContractError otherwise).
double soft_infonce(std::span<const double> sim_row, std::span<const double> target_row,
                    double temperature);

// The four instance-level losses. Inputs are B x d feature matrices whose
// rows correspond to the batch order used to build the semantic matrix.
// Each loss averages the two directional terms over the batch. The semantic
// matrix is treated as a constant: no gradient flows through it.

double sia_loss(const Matrix& image_globals, const Matrix& report_globals,
                const SemanticMatrix& s, const InstanceLossConfig& cfg);
double sia_aug_loss(const Matrix& image_globals_aug, const Matrix& report_globals_aug,
                    const SemanticMatrix& s, const InstanceLossConfig& cfg);
double siva_loss(const Matrix& image_globals, const Matrix& image_globals_aug,
                 const SemanticMatrix& s, const InstanceLossConfig& cfg);
double sila_loss(const Matrix& report_globals, const Matrix& report_globals_aug,
                 const SemanticMatrix& s, const InstanceLossConfig& cfg);

/// Tape form shared by all four instance losses: `lhs` and `rhs` are B x d
/// feature matrices on the tape; the loss contrasts lhs rows against rhs rows
/// bidirectionally under the semantic targets.
ad::Var bidirectional_instance_loss(ad::Tape& tape, ad::Var lhs, ad::Var rhs,
                                    const SemanticMatrix& s, const InstanceLossConfig& cfg);

} // namespace sista
