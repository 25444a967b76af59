#include "sista/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sista/errors.hpp"

namespace sista::ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw ContractError(std::string(op) + ": operands live on different tapes");
    }
    return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

} // namespace

Var Tape::input(Matrix value) {
    nodes_.push_back(Node{std::move(value), true, nullptr});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), false, nullptr});
    return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
    return nodes_[v.id].value;
}

Var Tape::record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward_fn) {
    bool requires = false;
    for (std::size_t p : parents) requires = requires || nodes_[p].requires_grad;
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires;
    if (requires) node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t node_id, const Matrix& contribution) {
    if (!nodes_[node_id].requires_grad) return;
    Matrix& adj = adjoints_[node_id];
    if (adj.empty()) {
        adj = contribution;
        return;
    }
    require_same_shape(adj, contribution, "Tape::accumulate");
    for (std::size_t i = 0; i < adj.size(); ++i) adj.data()[i] += contribution.data()[i];
}

void Tape::backward(Var output) {
    if (output.tape != this) {
        throw ContractError("Tape::backward: output belongs to a different tape");
    }
    const Matrix& out = nodes_[output.id].value;
    if (out.rows() != 1 || out.cols() != 1) {
        throw ContractError("Tape::backward: output must be a 1x1 scalar node, got " +
                            std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
    }
    adjoints_.assign(nodes_.size(), Matrix{});
    adjoints_[output.id] = Matrix::constant(1, 1, 1.0);
    for (std::size_t i = output.id + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (!node.requires_grad || !node.backward_fn) continue;
        if (adjoints_[i].empty()) continue;
        node.backward_fn(*this, adjoints_[i]);
    }
    ran_backward_ = true;
}

Matrix Tape::grad(Var v) const {
    if (!ran_backward_) {
        throw ContractError("Tape::grad: backward() has not been run");
    }
    const Matrix& adj = adjoints_[v.id];
    if (adj.empty()) {
        const Matrix& val = nodes_[v.id].value;
        return Matrix(val.rows(), val.cols());
    }
    return adj;
}

// ---- ops -------------------------------------------------------------------

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b, "add");
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    require_same_shape(av, bv, "add");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a.id, g);
        tp.accumulate(b.id, g);
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b, "sub");
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    require_same_shape(av, bv, "sub");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a.id, g);
        Matrix ng = g;
        for (double& x : ng.data()) x = -x;
        tp.accumulate(b.id, ng);
    });
}

Var neg(Var a) {
    return scale(a, -1.0);
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) x *= c;
    return t.record(std::move(out), {a.id}, [a, c](Tape& tp, const Matrix& g) {
        Matrix ga = g;
        for (double& x : ga.data()) x *= c;
        tp.accumulate(a.id, ga);
    });
}

Var add_scalar(Var a, double c) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) x += c;
    return t.record(std::move(out), {a.id},
                    [a](Tape& tp, const Matrix& g) { tp.accumulate(a.id, g); });
}

Var hadamard(Var a, Var b) {
    Tape& t = same_tape(a, b, "hadamard");
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    require_same_shape(av, bv, "hadamard");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Matrix& g) {
        const Matrix& av2 = tp.value(a);
        const Matrix& bv2 = tp.value(b);
        Matrix ga = g;
        Matrix gb = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data()[i] *= bv2.data()[i];
            gb.data()[i] *= av2.data()[i];
        }
        tp.accumulate(a.id, ga);
        tp.accumulate(b.id, gb);
    });
}

Var hadamard_const(Var a, const Matrix& weights) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    require_same_shape(av, weights, "hadamard_const");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= weights.data()[i];
    Matrix w = weights;
    return t.record(std::move(out), {a.id}, [a, w = std::move(w)](Tape& tp, const Matrix& g) {
        Matrix ga = g;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] *= w.data()[i];
        tp.accumulate(a.id, ga);
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    Matrix out = sista::matmul(t.value(a), t.value(b));
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Matrix& g) {
        // dA = g * B^T, dB = A^T * g
        tp.accumulate(a.id, sista::matmul(g, sista::transpose(tp.value(b))));
        tp.accumulate(b.id, sista::matmul(sista::transpose(tp.value(a)), g));
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    Matrix out = sista::transpose(t.value(a));
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a.id, sista::transpose(g));
    });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : t.value(a).data()) s += x;
    return t.record(Matrix::constant(1, 1, s), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av = tp.value(a);
        tp.accumulate(a.id, Matrix::constant(av.rows(), av.cols(), g(0, 0)));
    });
}

Var mean(Var a) {
    const std::size_t n = a.tape->value(a).size();
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    Matrix out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j);
        out(i, 0) = s;
    }
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av2 = tp.value(a);
        Matrix ga(av2.rows(), av2.cols());
        for (std::size_t i = 0; i < av2.rows(); ++i)
            for (std::size_t j = 0; j < av2.cols(); ++j) ga(i, j) = g(i, 0);
        tp.accumulate(a.id, ga);
    });
}

Var rowwise_scale(Var a, Var s) {
    Tape& t = same_tape(a, s, "rowwise_scale");
    const Matrix& av = t.value(a);
    const Matrix& sv = t.value(s);
    if (sv.cols() != 1 || sv.rows() != av.rows()) {
        throw ShapeError("rowwise_scale: scale must be " + std::to_string(av.rows()) + "x1");
    }
    Matrix out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) *= sv(i, 0);
    return t.record(std::move(out), {a.id, s.id}, [a, s](Tape& tp, const Matrix& g) {
        const Matrix& av2 = tp.value(a);
        const Matrix& sv2 = tp.value(s);
        Matrix ga = g;
        Matrix gs(sv2.rows(), 1);
        for (std::size_t i = 0; i < av2.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < av2.cols(); ++j) {
                ga(i, j) *= sv2(i, 0);
                acc += g(i, j) * av2(i, j);
            }
            gs(i, 0) = acc;
        }
        tp.accumulate(a.id, ga);
        tp.accumulate(s.id, gs);
    });
}

Var reciprocal(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) {
        if (x == 0.0) throw NumericError("reciprocal: division by zero");
        x = 1.0 / x;
    }
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av = tp.value(a);
        Matrix ga = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = av.data()[i];
            ga.data()[i] *= -1.0 / (x * x);
        }
        tp.accumulate(a.id, ga);
    });
}

Var log(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) {
        if (!(x > 0.0)) throw NumericError("log: non-positive argument");
        x = std::log(x);
    }
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av = tp.value(a);
        Matrix ga = g;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] /= av.data()[i];
        tp.accumulate(a.id, ga);
    });
}

Var exp(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) x = std::exp(x);
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av = tp.value(a);
        Matrix ga = g;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] *= std::exp(av.data()[i]);
        tp.accumulate(a.id, ga);
    });
}

Var tanh(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (double& x : out.data()) x = std::tanh(x);
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& av = tp.value(a);
        Matrix ga = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double th = std::tanh(av.data()[i]);
            ga.data()[i] *= 1.0 - th * th;
        }
        tp.accumulate(a.id, ga);
    });
}

Var add_rowvec(Var a, Var b) {
    Tape& t = same_tape(a, b, "add_rowvec");
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
        throw ShapeError("add_rowvec: bias must be 1x" + std::to_string(av.cols()));
    }
    Matrix out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) += bv(0, j);
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a.id, g);
        Matrix gb(1, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
        tp.accumulate(b.id, gb);
    });
}

Var row_softmax(Var a, double temperature) {
    Tape& t = *a.tape;
    Matrix out = sista::row_softmax(t.value(a), temperature);
    return t.record(std::move(out), {a.id}, [a, temperature](Tape& tp, const Matrix& g) {
        // recompute p from the recorded forward value of this node's parent
        const Matrix p = sista::row_softmax(tp.value(a), temperature);
        Matrix ga(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double inner = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) inner += g(i, j) * p(i, j);
            for (std::size_t j = 0; j < p.cols(); ++j)
                ga(i, j) = p(i, j) * (g(i, j) - inner) / temperature;
        }
        tp.accumulate(a.id, ga);
    });
}

Var log_row_softmax(Var a, double temperature) {
    Tape& t = *a.tape;
    if (!(temperature > 0.0)) {
        throw ConfigError("log_row_softmax: temperature must be positive");
    }
    const Matrix& av = t.value(a);
    Matrix out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double mx = av(i, 0) / temperature;
        for (std::size_t j = 1; j < av.cols(); ++j) mx = std::max(mx, av(i, j) / temperature);
        double denom = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) denom += std::exp(av(i, j) / temperature - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) / temperature - lse;
    }
    return t.record(std::move(out), {a.id}, [a, temperature](Tape& tp, const Matrix& g) {
        const Matrix p = sista::row_softmax(tp.value(a), temperature);
        Matrix ga(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) gsum += g(i, j);
            for (std::size_t j = 0; j < p.cols(); ++j)
                ga(i, j) = (g(i, j) - p(i, j) * gsum) / temperature;
        }
        tp.accumulate(a.id, ga);
    });
}

Var row_l2_normalize(Var a) {
    Tape& t = *a.tape;
    Matrix out = sista::row_l2_normalize(t.value(a));
    return t.record(std::move(out), {a.id}, [a](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        Matrix ga(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double n = sista::l2_norm(x.row(i));
            double gy = 0.0; // g . y with y = x / n
            for (std::size_t j = 0; j < x.cols(); ++j) gy += g(i, j) * x(i, j) / n;
            for (std::size_t j = 0; j < x.cols(); ++j)
                ga(i, j) = (g(i, j) - gy * x(i, j) / n) / n;
        }
        tp.accumulate(a.id, ga);
    });
}

Var minmax_row_normalize(Var a, double degenerate_epsilon) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    const std::size_t rows = av.rows();
    const std::size_t cols = av.cols();
    Matrix out(rows, cols);
    std::vector<std::size_t> argmin(rows), argmax(rows);
    std::vector<bool> degenerate(rows, false);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t lo = 0, hi = 0;
        for (std::size_t j = 1; j < cols; ++j) {
            if (av(i, j) < av(i, lo)) lo = j;
            if (av(i, j) > av(i, hi)) hi = j;
        }
        argmin[i] = lo;
        argmax[i] = hi;
        const double range = av(i, hi) - av(i, lo);
        if (range < degenerate_epsilon) {
            degenerate[i] = true;
            for (std::size_t j = 0; j < cols; ++j) out(i, j) = 1.0;
        } else {
            for (std::size_t j = 0; j < cols; ++j) out(i, j) = (av(i, j) - av(i, lo)) / range;
        }
    }
    return t.record(std::move(out), {a.id},
                    [a, argmin = std::move(argmin), argmax = std::move(argmax),
                     degenerate = std::move(degenerate)](Tape& tp, const Matrix& g) {
                        const Matrix& x = tp.value(a);
                        Matrix ga(x.rows(), x.cols());
                        for (std::size_t i = 0; i < x.rows(); ++i) {
                            if (degenerate[i]) continue; // constant plateau
                            const std::size_t lo = argmin[i];
                            const std::size_t hi = argmax[i];
                            const double range = x(i, hi) - x(i, lo);
                            double glo = 0.0, ghi = 0.0;
                            for (std::size_t j = 0; j < x.cols(); ++j) {
                                const double y = (x(i, j) - x(i, lo)) / range;
                                ga(i, j) += g(i, j) / range;
                                glo += g(i, j) * (y - 1.0) / range;
                                ghi += g(i, j) * (-y) / range;
                            }
                            ga(i, lo) += glo;
                            ga(i, hi) += ghi;
                        }
                        tp.accumulate(a.id, ga);
                    });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    Matrix out(indices.size(), av.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= av.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " out of range");
        }
        for (std::size_t j = 0; j < av.cols(); ++j) out(r, j) = av(indices[r], j);
    }
    return t.record(std::move(out), {a.id},
                    [a, indices = std::move(indices)](Tape& tp, const Matrix& g) {
                        const Matrix& av2 = tp.value(a);
                        Matrix ga(av2.rows(), av2.cols());
                        for (std::size_t r = 0; r < indices.size(); ++r)
                            for (std::size_t j = 0; j < g.cols(); ++j)
                                ga(indices[r], j) += g(r, j);
                        tp.accumulate(a.id, ga);
                    });
}

Var row_weighted_logsumexp(Var a, const Matrix& weights, double temperature) {
    Tape& t = *a.tape;
    if (!(temperature > 0.0)) {
        throw ConfigError("row_weighted_logsumexp: temperature must be positive");
    }
    const Matrix& av = t.value(a);
    require_same_shape(av, weights, "row_weighted_logsumexp");
    Matrix out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double mx = av(i, 0) / temperature;
        for (std::size_t j = 1; j < av.cols(); ++j) mx = std::max(mx, av(i, j) / temperature);
        double denom = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j)
            denom += weights(i, j) * std::exp(av(i, j) / temperature - mx);
        if (!(denom > 0.0)) {
            throw NumericError("row_weighted_logsumexp: nonpositive weighted sum in row " +
                               std::to_string(i));
        }
        out(i, 0) = mx + std::log(denom);
    }
    Matrix w = weights;
    return t.record(std::move(out), {a.id},
                    [a, w = std::move(w), temperature](Tape& tp, const Matrix& g) {
                        const Matrix& x = tp.value(a);
                        Matrix ga(x.rows(), x.cols());
                        for (std::size_t i = 0; i < x.rows(); ++i) {
                            double mx = x(i, 0) / temperature;
                            for (std::size_t j = 1; j < x.cols(); ++j)
                                mx = std::max(mx, x(i, j) / temperature);
                            double denom = 0.0;
                            for (std::size_t j = 0; j < x.cols(); ++j)
                                denom += w(i, j) * std::exp(x(i, j) / temperature - mx);
                            for (std::size_t j = 0; j < x.cols(); ++j) {
                                const double q =
                                    w(i, j) * std::exp(x(i, j) / temperature - mx) / denom;
                                ga(i, j) = g(i, 0) * q / temperature;
                            }
                        }
                        tp.accumulate(a.id, ga);
                    });
}

} // namespace sista::ad
