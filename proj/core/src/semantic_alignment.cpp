#include "sista/semantic_alignment.hpp"

#include <cmath>
#include <string>

#include "sista/errors.hpp"

namespace sista {

void InstanceLossConfig::validate() const {
    if (!(temperature > 0.0)) {
        throw ConfigError("InstanceLossConfig: temperature must be positive");
    }
    if (!(pseudo_positive_threshold > 0.0 && pseudo_positive_threshold <= 1.0)) {
        throw ConfigError("InstanceLossConfig: pseudo_positive_threshold must lie in (0, 1]");
    }
    if (!(soft_label_value > 0.0 && soft_label_value < 1.0)) {
        throw ConfigError("InstanceLossConfig: soft_label_value must lie in (0, 1)");
    }
}

std::size_t SemanticMatrix::pseudo_positive_count() const {
    std::size_t n = 0;
    for (double x : pseudo_positive_mask.data()) n += (x != 0.0) ? 1 : 0;
    return n;
}

SemanticMatrix build_semantic_matrix(const Matrix& report_globals,
                                     const InstanceLossConfig& cfg) {
    cfg.validate();
    const std::size_t b = report_globals.rows();
    if (b < 1) throw ContractError("build_semantic_matrix: empty batch");

    SemanticMatrix s;
    s.size = b;
    s.nce_form = cfg.nce_form;
    s.raw_scores = Matrix::identity(b);
    s.pseudo_positive_mask = Matrix(b, b);

    if (cfg.label_mode == LabelMode::soft && b > 1) {
        // cosine_sim throws DegenerateInputError on zero report rows
        const Matrix sims = cosine_sim_matrix(report_globals, report_globals);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t k = 0; k < b; ++k) {
                if (i == k) continue;
                if (sims(i, k) >= cfg.pseudo_positive_threshold) {
                    s.raw_scores(i, k) = cfg.soft_label_value;
                    s.pseudo_positive_mask(i, k) = 1.0;
                }
            }
        }
    }

    s.targets = s.raw_scores;
    for (std::size_t i = 0; i < b; ++i) {
        double row_sum = 0.0;
        for (std::size_t k = 0; k < b; ++k) row_sum += s.targets(i, k);
        for (std::size_t k = 0; k < b; ++k) s.targets(i, k) /= row_sum;
    }
    return s;
}

double soft_infonce(std::span<const double> sim_row, std::span<const double> target_row,
                    double temperature) {
    if (sim_row.size() != target_row.size()) {
        throw ShapeError("soft_infonce: row lengths differ");
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("soft_infonce: temperature must be positive");
    }
    double tsum = 0.0;
    for (double t : target_row) tsum += t;
    if (std::abs(tsum - 1.0) > 1e-6) {
        throw ContractError("soft_infonce: target row sums to " + std::to_string(tsum) +
                            ", expected 1");
    }
    const Matrix logp = [&] {
        Matrix m(1, sim_row.size(), std::vector<double>(sim_row.begin(), sim_row.end()));
        double mx = m(0, 0) / temperature;
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(0, j) / temperature);
        double denom = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j)
            denom += std::exp(m(0, j) / temperature - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < m.cols(); ++j) m(0, j) = m(0, j) / temperature - lse;
        return m;
    }();
    double loss = 0.0;
    for (std::size_t k = 0; k < target_row.size(); ++k) loss -= target_row[k] * logp(0, k);
    return loss;
}

namespace {

/// Mean over rows of the soft cross entropy of `sims` rows against the
/// semantic targets, or of the literal weighted-denominator form.
ad::Var directional_loss(ad::Tape& tape, ad::Var sims, const SemanticMatrix& s,
                         const InstanceLossConfig& cfg) {
    const std::size_t b = s.size;
    if (cfg.nce_form == NceForm::canonical) {
        ad::Var logp = ad::log_row_softmax(sims, cfg.temperature);
        ad::Var weighted = ad::hadamard_const(logp, s.targets);
        return ad::scale(ad::sum(weighted), -1.0 / static_cast<double>(b));
    }
    // literal: -log( exp(z_ii / tau) / sum_k u_ik exp(z_ik / tau) ) with
    // u = 1 on the diagonal, soft_label_value at pseudo-positives, 1 at
    // negatives. Stable via a weighted logsumexp.
    Matrix weights = Matrix::constant(b, b, 1.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < b; ++k)
            if (s.pseudo_positive_mask(i, k) != 0.0) weights(i, k) = cfg.soft_label_value;
    ad::Var lse = ad::row_weighted_logsumexp(sims, weights, cfg.temperature); // B x 1
    ad::Var diag = ad::row_sum(ad::hadamard_const(sims, Matrix::identity(b))); // B x 1 of z_ii
    ad::Var per_row = ad::sub(lse, ad::scale(diag, 1.0 / cfg.temperature));
    return ad::mean(per_row);
}

void require_batch_shapes(const Matrix& lhs, const Matrix& rhs, const SemanticMatrix& s,
                          const char* name) {
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) {
        throw ShapeError(std::string(name) + ": feature matrices must share shape");
    }
    if (lhs.rows() != s.size) {
        throw ShapeError(std::string(name) + ": batch size " + std::to_string(lhs.rows()) +
                         " does not match semantic matrix size " + std::to_string(s.size));
    }
}

double plain_loss(const Matrix& lhs, const Matrix& rhs, const SemanticMatrix& s,
                  const InstanceLossConfig& cfg, const char* name) {
    require_batch_shapes(lhs, rhs, s, name);
    ad::Tape tape;
    ad::Var l = tape.constant(lhs);
    ad::Var r = tape.constant(rhs);
    ad::Var loss = bidirectional_instance_loss(tape, l, r, s, cfg);
    return tape.value(loss)(0, 0);
}

} // namespace

ad::Var bidirectional_instance_loss(ad::Tape& tape, ad::Var lhs, ad::Var rhs,
                                    const SemanticMatrix& s, const InstanceLossConfig& cfg) {
    cfg.validate();
    // z[i,k] = cosine similarity of lhs_i and rhs_k
    ad::Var z = ad::matmul(ad::row_l2_normalize(lhs), ad::transpose(ad::row_l2_normalize(rhs)));
    ad::Var dir_lhs = directional_loss(tape, z, s, cfg);
    ad::Var dir_rhs = directional_loss(tape, ad::transpose(z), s, cfg);
    return ad::scale(ad::add(dir_lhs, dir_rhs), 0.5);
}

double sia_loss(const Matrix& image_globals, const Matrix& report_globals,
                const SemanticMatrix& s, const InstanceLossConfig& cfg) {
    return plain_loss(image_globals, report_globals, s, cfg, "sia_loss");
}

double sia_aug_loss(const Matrix& image_globals_aug, const Matrix& report_globals_aug,
                    const SemanticMatrix& s, const InstanceLossConfig& cfg) {
    return plain_loss(image_globals_aug, report_globals_aug, s, cfg, "sia_aug_loss");
}

double siva_loss(const Matrix& image_globals, const Matrix& image_globals_aug,
                 const SemanticMatrix& s, const InstanceLossConfig& cfg) {
    return plain_loss(image_globals, image_globals_aug, s, cfg, "siva_loss");
}

double sila_loss(const Matrix& report_globals, const Matrix& report_globals_aug,
                 const SemanticMatrix& s, const InstanceLossConfig& cfg) {
    return plain_loss(report_globals, report_globals_aug, s, cfg, "sila_loss");
}

} // namespace sista
