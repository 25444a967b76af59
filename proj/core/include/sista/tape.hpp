#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sista/matrix.hpp"

namespace sista::ad {

class Tape;

/// Handle to a node on a specific tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

/// Reverse-mode automatic differentiation over Matrix values.
///
/// A tape records one forward evaluation as a topologically ordered list of
/// primitive operations. backward() seeds the adjoint of a scalar output with
/// 1 and accumulates adjoints into every tracked node in reverse order. Tapes
/// are built fresh per loss evaluation and never reused across steps.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& out_adjoint)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Tracked leaf: gradients w.r.t. this node are available after backward().
    Var input(Matrix value);

    /// Untracked leaf: treated as a constant, no gradient flows into it.
    Var constant(Matrix value);

    const Matrix& value(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    bool tracked(Var v) const { return nodes_[v.id].requires_grad; }

    /// Accumulates d(output)/d(node) for every tracked node. `output` must be
    /// a 1x1 node on this tape; otherwise throws ContractError. Adjoints are
    /// reset at the start of every call.
    void backward(Var output);

    /// Gradient of the last backward() output w.r.t. v. Zero matrix of v's
    /// shape when no gradient reached v.
    Matrix grad(Var v) const;

    // Op-author API: record a node and accumulate into a parent's adjoint.
    Var record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward_fn);
    void accumulate(std::size_t node_id, const Matrix& contribution);
    const Matrix& adjoint(std::size_t node_id) const { return adjoints_[node_id]; }

private:
    struct Node {
        Matrix value;
        bool requires_grad = false;
        BackwardFn backward_fn;
    };
    std::vector<Node> nodes_;
    std::vector<Matrix> adjoints_;
    bool ran_backward_ = false;
};

// ---- primitive operations ------------------------------------------------
// Each op runs its forward pass immediately and records a closure computing
// vector-Jacobian products for the parents.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var hadamard(Var a, Var b);
/// Elementwise product with an untracked weight matrix.
Var hadamard_const(Var a, const Matrix& weights);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var sum(Var a);      // 1x1
Var mean(Var a);     // 1x1
Var row_sum(Var a);  // n x 1
/// out[i,j] = a[i,j] * s[i,0] for s of shape n x 1.
Var rowwise_scale(Var a, Var s);
Var reciprocal(Var a);
Var log(Var a);
Var exp(Var a);
Var tanh(Var a);
/// Broadcast-add a 1 x m row vector to every row of a.
Var add_rowvec(Var a, Var b);
Var row_softmax(Var a, double temperature);
Var log_row_softmax(Var a, double temperature);
Var row_l2_normalize(Var a);
/// Per row: (x - min) / (max - min), mapping the row into [0, 1]. Rows whose
/// range is below `degenerate_epsilon` map to all-ones and pass no gradient
/// (piecewise-constant plateau). Min/max positions act as local selections.
Var minmax_row_normalize(Var a, double degenerate_epsilon);
Var gather_rows(Var a, std::vector<std::size_t> indices);
/// Per row i: log sum_k weights[i,k] * exp(a[i,k] / temperature), max-shifted.
/// Weights are untracked and must be nonnegative with a positive row sum.
Var row_weighted_logsumexp(Var a, const Matrix& weights, double temperature);

} // namespace sista::ad
