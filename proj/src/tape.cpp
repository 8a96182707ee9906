#include "lab/tape.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>

namespace lab {

namespace {
std::atomic<std::uint64_t> g_tape_counter{1};
}

Tape::Tape() : tape_id_(g_tape_counter.fetch_add(1)) {
    nodes_.reserve(64);
}

Var Tape::make_var(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return Var{tape_id_, id, n.rows, n.cols};
}

void Tape::check(Var v) const {
    if (v.tape_id != tape_id_ || v.id < 0 || v.id >= size())
        throw DomainError("variable does not belong to this tape");
}

Var Tape::push(Op op, int a, int b, int rows, int cols, double attr) {
    if (sealed_) throw DomainError("tape is sealed; cannot record");
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.rows = rows;
    n.cols = cols;
    n.attr = attr;
    nodes_.push_back(std::move(n));
    eval_node(nodes_.back());
    return make_var(size() - 1);
}

void Tape::eval_node(Node& n) {
    const std::size_t count = static_cast<std::size_t>(n.rows) * n.cols;
    if (n.op == Op::kConst || n.op == Op::kInput) return;  // value preset by caller
    n.val.assign(count, 0.0);
    const std::vector<double>* av = n.a >= 0 ? &nodes_[n.a].val : nullptr;
    const std::vector<double>* bv = n.b >= 0 ? &nodes_[n.b].val : nullptr;
    double* out = n.val.data();
    switch (n.op) {
        case Op::kAdd:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] + (*bv)[i];
            break;
        case Op::kSub:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] - (*bv)[i];
            break;
        case Op::kMul:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] * (*bv)[i];
            break;
        case Op::kMatVec: {
            const Node& m = nodes_[n.a];
            for (int i = 0; i < m.rows; ++i) {
                double acc = 0.0;
                const double* row = av->data() + static_cast<std::size_t>(i) * m.cols;
                for (int j = 0; j < m.cols; ++j) acc += row[j] * (*bv)[j];
                out[i] = acc;
            }
            break;
        }
        case Op::kMatMul: {
            const Node& a = nodes_[n.a];
            matmul_kernel(av->data(), a.rows, a.cols, bv->data(), n.cols, out);
            break;
        }
        case Op::kTranspose: {
            const Node& a = nodes_[n.a];
            for (int i = 0; i < a.rows; ++i)
                for (int j = 0; j < a.cols; ++j)
                    out[static_cast<std::size_t>(j) * n.cols + i] = (*av)[static_cast<std::size_t>(i) * a.cols + j];
            break;
        }
        case Op::kOuter:
            for (int i = 0; i < n.rows; ++i)
                for (int j = 0; j < n.cols; ++j)
                    out[static_cast<std::size_t>(i) * n.cols + j] = (*av)[i] * (*bv)[j];
            break;
        case Op::kRelu:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] > 0.0 ? (*av)[i] : 0.0;
            break;
        case Op::kStep:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] > 0.0 ? 1.0 : 0.0;
            break;
        case Op::kSum: {
            double acc = 0.0;
            for (double x : *av) acc += x;
            out[0] = acc;
            break;
        }
        case Op::kMean: {
            double acc = 0.0;
            for (double x : *av) acc += x;
            out[0] = acc / static_cast<double>(av->size());
            break;
        }
        case Op::kPow:
            for (std::size_t i = 0; i < count; ++i) out[i] = std::pow((*av)[i], n.attr);
            break;
        case Op::kSqrt:
            for (std::size_t i = 0; i < count; ++i) out[i] = std::sqrt((*av)[i]);
            break;
        case Op::kSquare:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] * (*av)[i];
            break;
        case Op::kBiasAdd: {
            for (int i = 0; i < n.rows; ++i)
                for (int j = 0; j < n.cols; ++j)
                    out[static_cast<std::size_t>(i) * n.cols + j] =
                        (*av)[static_cast<std::size_t>(i) * n.cols + j] + (*bv)[j];
            break;
        }
        case Op::kDot: {
            double acc = 0.0;
            for (std::size_t i = 0; i < av->size(); ++i) acc += (*av)[i] * (*bv)[i];
            out[0] = acc;
            break;
        }
        case Op::kL2Norm: {
            double acc = n.attr;
            for (double x : *av) acc += x * x;
            out[0] = std::sqrt(acc);
            break;
        }
        case Op::kRowL2Norm: {
            const Node& a = nodes_[n.a];
            for (int i = 0; i < a.rows; ++i) {
                double acc = n.attr;
                const double* row = av->data() + static_cast<std::size_t>(i) * a.cols;
                for (int j = 0; j < a.cols; ++j) acc += row[j] * row[j];
                out[i] = std::sqrt(acc);
            }
            break;
        }
        case Op::kScale:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[i] * n.attr;
            break;
        case Op::kBcastScalar:
            for (std::size_t i = 0; i < count; ++i) out[i] = (*av)[0];
            break;
        case Op::kBcastRow:
            for (int i = 0; i < n.rows; ++i)
                for (int j = 0; j < n.cols; ++j) out[static_cast<std::size_t>(i) * n.cols + j] = (*av)[j];
            break;
        case Op::kBcastCol:
            for (int i = 0; i < n.rows; ++i)
                for (int j = 0; j < n.cols; ++j) out[static_cast<std::size_t>(i) * n.cols + j] = (*av)[i];
            break;
        case Op::kColSum: {
            const Node& a = nodes_[n.a];
            for (int i = 0; i < a.rows; ++i) {
                const double* row = av->data() + static_cast<std::size_t>(i) * a.cols;
                for (int j = 0; j < a.cols; ++j) out[j] += row[j];
            }
            break;
        }
        case Op::kRowSum: {
            const Node& a = nodes_[n.a];
            for (int i = 0; i < a.rows; ++i) {
                double acc = 0.0;
                const double* row = av->data() + static_cast<std::size_t>(i) * a.cols;
                for (int j = 0; j < a.cols; ++j) acc += row[j];
                out[i] = acc;
            }
            break;
        }
        case Op::kConst:
        case Op::kInput:
            break;
    }
}

Var Tape::input(const Matrix& value) {
    return input(std::span<const double>(value.values()), value.rows(), value.cols());
}

Var Tape::input(std::span<const double> values, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != values.size())
        throw DimensionError("input: value size does not match shape");
    Var v = push(Op::kInput, -1, -1, rows, cols, 0.0);
    nodes_.back().val.assign(values.begin(), values.end());
    return v;
}

Var Tape::constant(const Matrix& value) {
    return constant(std::span<const double>(value.values()), value.rows(), value.cols());
}

Var Tape::constant(std::span<const double> values, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != values.size())
        throw DimensionError("constant: value size does not match shape");
    Var v = push(Op::kConst, -1, -1, rows, cols, 0.0);
    nodes_.back().val.assign(values.begin(), values.end());
    return v;
}

Var Tape::constant_scalar(double value) {
    Var v = push(Op::kConst, -1, -1, 1, 1, 0.0);
    nodes_.back().val.assign(1, value);
    return v;
}

namespace {
void require_same_shape(Var a, Var b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw DimensionError(std::string(what) + ": shape mismatch");
}
}  // namespace

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    require_same_shape(a, b, "add");
    return push(Op::kAdd, a.id, b.id, a.rows, a.cols, 0.0);
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    require_same_shape(a, b, "sub");
    return push(Op::kSub, a.id, b.id, a.rows, a.cols, 0.0);
}

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    require_same_shape(a, b, "mul");
    return push(Op::kMul, a.id, b.id, a.rows, a.cols, 0.0);
}

Var Tape::matvec(Var m, Var x) {
    check(m);
    check(x);
    if (x.cols != 1 || m.cols != x.rows) throw DimensionError("matvec: shape mismatch");
    return push(Op::kMatVec, m.id, x.id, m.rows, 1, 0.0);
}

Var Tape::matmul(Var a, Var b) {
    check(a);
    check(b);
    if (a.cols != b.rows) throw DimensionError("matmul: shape mismatch");
    return push(Op::kMatMul, a.id, b.id, a.rows, b.cols, 0.0);
}

Var Tape::transpose(Var a) {
    check(a);
    return push(Op::kTranspose, a.id, -1, a.cols, a.rows, 0.0);
}

Var Tape::outer(Var u, Var v) {
    check(u);
    check(v);
    if (u.cols != 1 || v.cols != 1) throw DimensionError("outer: expects column vectors");
    return push(Op::kOuter, u.id, v.id, u.rows, v.rows, 0.0);
}

Var Tape::relu(Var a) {
    check(a);
    return push(Op::kRelu, a.id, -1, a.rows, a.cols, 0.0);
}

Var Tape::step_mask(Var a) {
    check(a);
    return push(Op::kStep, a.id, -1, a.rows, a.cols, 0.0);
}

Var Tape::sum(Var a) {
    check(a);
    return push(Op::kSum, a.id, -1, 1, 1, 0.0);
}

Var Tape::mean(Var a) {
    check(a);
    return push(Op::kMean, a.id, -1, 1, 1, 0.0);
}

Var Tape::pow_scalar(Var a, double exponent) {
    check(a);
    return push(Op::kPow, a.id, -1, a.rows, a.cols, exponent);
}

Var Tape::sqrt_elem(Var a) {
    check(a);
    return push(Op::kSqrt, a.id, -1, a.rows, a.cols, 0.0);
}

Var Tape::square(Var a) {
    check(a);
    return push(Op::kSquare, a.id, -1, a.rows, a.cols, 0.0);
}

Var Tape::bias_add(Var m, Var bias) {
    check(m);
    check(bias);
    if (bias.cols != 1 || bias.rows != m.cols) throw DimensionError("bias_add: shape mismatch");
    return push(Op::kBiasAdd, m.id, bias.id, m.rows, m.cols, 0.0);
}

Var Tape::dot(Var u, Var v) {
    check(u);
    check(v);
    require_same_shape(u, v, "dot");
    if (u.cols != 1) throw DimensionError("dot: expects column vectors");
    return push(Op::kDot, u.id, v.id, 1, 1, 0.0);
}

Var Tape::l2norm(Var a, double eps) {
    check(a);
    if (eps < 0.0) throw DomainError("l2norm: eps must be >= 0");
    return push(Op::kL2Norm, a.id, -1, 1, 1, eps);
}

Var Tape::row_l2norm(Var a, double eps) {
    check(a);
    if (eps < 0.0) throw DomainError("row_l2norm: eps must be >= 0");
    return push(Op::kRowL2Norm, a.id, -1, a.rows, 1, eps);
}

Var Tape::scale(Var a, double factor) {
    check(a);
    return push(Op::kScale, a.id, -1, a.rows, a.cols, factor);
}

Var Tape::bcast_scalar(Var s, int rows, int cols) {
    check(s);
    if (!s.is_scalar()) throw DimensionError("bcast_scalar: input must be scalar");
    return push(Op::kBcastScalar, s.id, -1, rows, cols, 0.0);
}

Var Tape::bcast_row(Var v, int n_rows) {
    check(v);
    if (v.cols != 1) throw DimensionError("bcast_row: expects a column vector");
    return push(Op::kBcastRow, v.id, -1, n_rows, v.rows, 0.0);
}

Var Tape::bcast_col(Var v, int n_cols) {
    check(v);
    if (v.cols != 1) throw DimensionError("bcast_col: expects a column vector");
    return push(Op::kBcastCol, v.id, -1, v.rows, n_cols, 0.0);
}

Var Tape::col_sum(Var m) {
    check(m);
    return push(Op::kColSum, m.id, -1, m.cols, 1, 0.0);
}

Var Tape::row_sum(Var m) {
    check(m);
    return push(Op::kRowSum, m.id, -1, m.rows, 1, 0.0);
}

const std::vector<double>& Tape::value(Var v) const {
    check(v);
    return nodes_[v.id].val;
}

double Tape::scalar_value(Var v) const {
    check(v);
    if (!v.is_scalar()) throw DimensionError("scalar_value: variable is not scalar");
    return nodes_[v.id].val[0];
}

Matrix Tape::value_matrix(Var v) const {
    check(v);
    return Matrix(v.rows, v.cols, nodes_[v.id].val);
}

std::vector<double> Tape::forward_eval(Var output) const {
    if (!sealed_) throw DomainError("forward_eval requires a sealed tape");
    check(output);
    return nodes_[output.id].val;
}

void Tape::accumulate_numeric(const Node& n, int id, std::vector<std::vector<double>>& adj) const {
    const std::vector<double>& g = adj[id];
    auto grad_of = [&](int node_id) -> std::vector<double>& {
        std::vector<double>& slot = adj[node_id];
        if (slot.empty()) slot.assign(nodes_[node_id].val.size(), 0.0);
        return slot;
    };
    switch (n.op) {
        case Op::kConst:
        case Op::kInput:
        case Op::kStep:
            break;
        case Op::kAdd: {
            auto& ga = grad_of(n.a);
            auto& gb = grad_of(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
            break;
        }
        case Op::kSub: {
            auto& ga = grad_of(n.a);
            auto& gb = grad_of(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
            break;
        }
        case Op::kMul: {
            auto& ga = grad_of(n.a);
            auto& gb = grad_of(n.b);
            const auto& av = nodes_[n.a].val;
            const auto& bv = nodes_[n.b].val;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv[i];
                gb[i] += g[i] * av[i];
            }
            break;
        }
        case Op::kMatVec: {
            const Node& m = nodes_[n.a];
            auto& gm = grad_of(n.a);
            auto& gx = grad_of(n.b);
            const auto& mv = m.val;
            const auto& xv = nodes_[n.b].val;
            for (int i = 0; i < m.rows; ++i) {
                const double gi = g[i];
                if (gi == 0.0) continue;
                double* gmrow = gm.data() + static_cast<std::size_t>(i) * m.cols;
                const double* mrow = mv.data() + static_cast<std::size_t>(i) * m.cols;
                for (int j = 0; j < m.cols; ++j) {
                    gmrow[j] += gi * xv[j];
                    gx[j] += mrow[j] * gi;
                }
            }
            break;
        }
        case Op::kMatMul: {
            const Node& a = nodes_[n.a];
            const Node& b = nodes_[n.b];
            auto& ga = grad_of(n.a);
            auto& gb = grad_of(n.b);
            const auto& av = a.val;
            const auto& bv = b.val;
            // dA = g  B^T, dB = A^T g
            for (int i = 0; i < a.rows; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n.cols;
                double* garow = ga.data() + static_cast<std::size_t>(i) * a.cols;
                const double* arow = av.data() + static_cast<std::size_t>(i) * a.cols;
                for (int p = 0; p < a.cols; ++p) {
                    const double* brow = bv.data() + static_cast<std::size_t>(p) * n.cols;
                    double acc = 0.0;
                    for (int j = 0; j < n.cols; ++j) acc += grow[j] * brow[j];
                    garow[p] += acc;
                    const double aip = arow[p];
                    if (aip != 0.0) {
                        double* gbrow = gb.data() + static_cast<std::size_t>(p) * n.cols;
                        for (int j = 0; j < n.cols; ++j) gbrow[j] += aip * grow[j];
                    }
                }
            }
            break;
        }
        case Op::kTranspose: {
            const Node& a = nodes_[n.a];
            auto& ga = grad_of(n.a);
            for (int i = 0; i < a.rows; ++i)
                for (int j = 0; j < a.cols; ++j)
                    ga[static_cast<std::size_t>(i) * a.cols + j] += g[static_cast<std::size_t>(j) * n.cols + i];
            break;
        }
        case Op::kOuter: {
            auto& gu = grad_of(n.a);
            auto& gv = grad_of(n.b);
            const auto& uv = nodes_[n.a].val;
            const auto& vv = nodes_[n.b].val;
            for (int i = 0; i < n.rows; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n.cols;
                double acc = 0.0;
                for (int j = 0; j < n.cols; ++j) {
                    acc += grow[j] * vv[j];
                    gv[j] += grow[j] * uv[i];
                }
                gu[i] += acc;
            }
            break;
        }
        case Op::kRelu: {
            auto& ga = grad_of(n.a);
            const auto& av = nodes_[n.a].val;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (av[i] > 0.0) ga[i] += g[i];
            break;
        }
        case Op::kSum: {
            auto& ga = grad_of(n.a);
            for (double& x : ga) x += g[0];
            break;
        }
        case Op::kMean: {
            auto& ga = grad_of(n.a);
            const double s = g[0] / static_cast<double>(ga.size());
            for (double& x : ga) x += s;
            break;
        }
        case Op::kPow: {
            auto& ga = grad_of(n.a);
            const auto& av = nodes_[n.a].val;
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * n.attr * std::pow(av[i], n.attr - 1.0);
            break;
        }
        case Op::kSqrt: {
            auto& ga = grad_of(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / n.val[i];
            break;
        }
        case Op::kSquare: {
            auto& ga = grad_of(n.a);
            const auto& av = nodes_[n.a].val;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * av[i];
            break;
        }
        case Op::kBiasAdd: {
            auto& gm = grad_of(n.a);
            auto& gb = grad_of(n.b);
            for (int i = 0; i < n.rows; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n.cols;
                double* gmrow = gm.data() + static_cast<std::size_t>(i) * n.cols;
                for (int j = 0; j < n.cols; ++j) {
                    gmrow[j] += grow[j];
                    gb[j] += grow[j];
                }
            }
            break;
        }
        case Op::kDot: {
            auto& gu = grad_of(n.a);
            auto& gv = grad_of(n.b);
            const auto& uv = nodes_[n.a].val;
            const auto& vv = nodes_[n.b].val;
            for (std::size_t i = 0; i < uv.size(); ++i) {
                gu[i] += g[0] * vv[i];
                gv[i] += g[0] * uv[i];
            }
            break;
        }
        case Op::kL2Norm: {
            auto& ga = grad_of(n.a);
            const auto& av = nodes_[n.a].val;
            const double s = g[0] / n.val[0];
            for (std::size_t i = 0; i < av.size(); ++i) ga[i] += s * av[i];
            break;
        }
        case Op::kRowL2Norm: {
            const Node& a = nodes_[n.a];
            auto& ga = grad_of(n.a);
            const auto& av = a.val;
            for (int i = 0; i < a.rows; ++i) {
                const double s = g[i] / n.val[i];
                if (s == 0.0) continue;
                const double* arow = av.data() + static_cast<std::size_t>(i) * a.cols;
                double* garow = ga.data() + static_cast<std::size_t>(i) * a.cols;
                for (int j = 0; j < a.cols; ++j) garow[j] += s * arow[j];
            }
            break;
        }
        case Op::kScale: {
            auto& ga = grad_of(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.attr * g[i];
            break;
        }
        case Op::kBcastScalar: {
            auto& ga = grad_of(n.a);
            double acc = 0.0;
            for (double x : g) acc += x;
            ga[0] += acc;
            break;
        }
        case Op::kBcastRow: {
            auto& gv = grad_of(n.a);
            for (int i = 0; i < n.rows; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n.cols;
                for (int j = 0; j < n.cols; ++j) gv[j] += grow[j];
            }
            break;
        }
        case Op::kBcastCol: {
            auto& gv = grad_of(n.a);
            for (int i = 0; i < n.rows; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n.cols;
                double acc = 0.0;
                for (int j = 0; j < n.cols; ++j) acc += grow[j];
                gv[i] += acc;
            }
            break;
        }
        case Op::kColSum: {
            const Node& m = nodes_[n.a];
            auto& gm = grad_of(n.a);
            for (int i = 0; i < m.rows; ++i) {
                double* gmrow = gm.data() + static_cast<std::size_t>(i) * m.cols;
                for (int j = 0; j < m.cols; ++j) gmrow[j] += g[j];
            }
            break;
        }
        case Op::kRowSum: {
            const Node& m = nodes_[n.a];
            auto& gm = grad_of(n.a);
            for (int i = 0; i < m.rows; ++i) {
                double* gmrow = gm.data() + static_cast<std::size_t>(i) * m.cols;
                for (int j = 0; j < m.cols; ++j) gmrow[j] += g[i];
            }
            break;
        }
    }
}

std::vector<std::vector<double>> Tape::backward_grad(Var output, std::span<const Var> wrt) const {
    if (!sealed_) throw DomainError("backward_grad requires a sealed tape");
    check(output);
    if (!output.is_scalar()) throw DimensionError("backward_grad: output must be scalar");
    for (Var v : wrt) check(v);

    std::vector<std::vector<double>> adj(nodes_.size());
    adj[output.id].assign(1, 1.0);
    for (int id = output.id; id >= 0; --id) {
        if (adj[id].empty()) continue;
        accumulate_numeric(nodes_[id], id, adj);
    }

    std::vector<std::vector<double>> out;
    out.reserve(wrt.size());
    for (Var v : wrt) {
        if (adj[v.id].empty())
            out.emplace_back(nodes_[v.id].val.size(), 0.0);
        else
            out.push_back(std::move(adj[v.id]));
    }
    return out;
}

std::vector<double> Tape::backward_grad(Var output, Var wrt) const {
    const Var wrts[1] = {wrt};
    return backward_grad(output, std::span<const Var>(wrts, 1))[0];
}

Var Tape::grad_graph(Var output, Var wrt) {
    if (sealed_) throw DomainError("grad_graph requires an unsealed tape");
    check(output);
    check(wrt);
    if (!output.is_scalar()) throw DimensionError("grad_graph: output must be scalar");

    const int start_size = size();
    std::vector<int> adj(static_cast<std::size_t>(start_size), -1);
    auto contribute = [&](int node_id, Var g) {
        if (adj[node_id] < 0)
            adj[node_id] = g.id;
        else
            adj[node_id] = add(make_var(adj[node_id]), g).id;
    };

    adj[output.id] = constant_scalar(1.0).id;
    for (int id = output.id; id >= 0; --id) {
        if (adj[id] < 0) continue;
        // plain copies only: recording below reallocates nodes_
        const Op op = nodes_[id].op;
        const int na = nodes_[id].a;
        const int nb = nodes_[id].b;
        const double attr = nodes_[id].attr;
        const int ar = na >= 0 ? nodes_[na].rows : 0;
        const int ac = na >= 0 ? nodes_[na].cols : 0;
        const Var g = make_var(adj[id]);
        switch (op) {
            case Op::kConst:
            case Op::kInput:
            case Op::kStep:
                break;
            case Op::kAdd:
                contribute(na, g);
                contribute(nb, g);
                break;
            case Op::kSub:
                contribute(na, g);
                contribute(nb, scale(g, -1.0));
                break;
            case Op::kMul:
                contribute(na, mul(g, make_var(nb)));
                contribute(nb, mul(g, make_var(na)));
                break;
            case Op::kMatVec:
                contribute(na, outer(g, make_var(nb)));
                contribute(nb, matvec(transpose(make_var(na)), g));
                break;
            case Op::kMatMul:
                contribute(na, matmul(g, transpose(make_var(nb))));
                contribute(nb, matmul(transpose(make_var(na)), g));
                break;
            case Op::kTranspose:
                contribute(na, transpose(g));
                break;
            case Op::kOuter:
                contribute(na, matvec(g, make_var(nb)));
                contribute(nb, matvec(transpose(g), make_var(na)));
                break;
            case Op::kRelu:
                contribute(na, mul(g, step_mask(make_var(na))));
                break;
            case Op::kSum:
                contribute(na, bcast_scalar(g, ar, ac));
                break;
            case Op::kMean: {
                const double inv = 1.0 / (static_cast<double>(ar) * ac);
                contribute(na, scale(bcast_scalar(g, ar, ac), inv));
                break;
            }
            case Op::kPow:
                contribute(na, scale(mul(g, pow_scalar(make_var(na), attr - 1.0)), attr));
                break;
            case Op::kSqrt:
                contribute(na, scale(mul(g, pow_scalar(make_var(na), -0.5)), 0.5));
                break;
            case Op::kSquare:
                contribute(na, scale(mul(g, make_var(na)), 2.0));
                break;
            case Op::kBiasAdd:
                contribute(na, g);
                contribute(nb, col_sum(g));
                break;
            case Op::kDot:
                contribute(na, mul(bcast_scalar(g, ar, 1), make_var(nb)));
                contribute(nb, mul(bcast_scalar(g, ar, 1), make_var(na)));
                break;
            case Op::kL2Norm: {
                Var s = mul(g, pow_scalar(make_var(id), -1.0));
                contribute(na, mul(bcast_scalar(s, ar, ac), make_var(na)));
                break;
            }
            case Op::kRowL2Norm: {
                Var s = mul(g, pow_scalar(make_var(id), -1.0));  // B x 1
                contribute(na, mul(bcast_col(s, ac), make_var(na)));
                break;
            }
            case Op::kScale:
                contribute(na, scale(g, attr));
                break;
            case Op::kBcastScalar:
                contribute(na, sum(g));
                break;
            case Op::kBcastRow:
                contribute(na, col_sum(g));
                break;
            case Op::kBcastCol:
                contribute(na, row_sum(g));
                break;
            case Op::kColSum:
                contribute(na, bcast_row(g, ar));
                break;
            case Op::kRowSum:
                contribute(na, bcast_col(g, ac));
                break;
        }
    }

    if (adj[wrt.id] < 0) return constant(Matrix(wrt.rows, wrt.cols));
    return make_var(adj[wrt.id]);
}

std::vector<std::vector<double>> grad_of_gradnorm(Tape& tape, Var output, Var input_point,
                                                  std::span<const Var> wrt_params, double eps) {
    if (eps <= 0.0) throw DomainError("grad_of_gradnorm: eps must be > 0");
    Var gx = tape.grad_graph(output, input_point);
    Var g = tape.l2norm(gx, eps);
    tape.seal();
    return tape.backward_grad(g, wrt_params);
}

GradCheckReport gradcheck(const GraphBuilder& builder, const std::vector<GradCheckInput>& input_specs,
                          double tolerance, int n_trials, RngStream rng, double h,
                          const std::function<void(std::vector<std::vector<double>>&)>& tamper) {
    GradCheckReport report;
    auto draw = [&](std::vector<Matrix>& values) {
        values.clear();
        for (const GradCheckInput& spec : input_specs) {
            Matrix m(spec.rows, spec.cols);
            for (int i = 0; i < spec.rows; ++i)
                for (int j = 0; j < spec.cols; ++j) {
                    double x;
                    do {
                        x = rng.uniform_range(spec.lo, spec.hi);
                    } while (std::fabs(x) < spec.min_abs);
                    m(i, j) = x;
                }
            values.push_back(std::move(m));
        }
    };
    auto eval_output = [&](const std::vector<Matrix>& values) {
        Tape t;
        GradCheckGraph g = builder(t, values);
        return t.scalar_value(g.output);
    };

    std::vector<Matrix> values;
    for (int trial = 0; trial < n_trials; ++trial) {
        GradCheckGraph graph;
        std::unique_ptr<Tape> tape;
        int attempts = 0;
        for (;;) {
            draw(values);
            tape = std::make_unique<Tape>();
            graph = builder(*tape, values);
            if (graph.valid) break;
            if (++attempts > 1000) throw DomainError("gradcheck: builder rejected all draws");
        }
        tape->seal();
        std::vector<std::vector<double>> analytic =
            tape->backward_grad(graph.output, std::span<const Var>(graph.inputs));
        if (tamper) tamper(analytic);

        for (std::size_t in = 0; in < graph.inputs.size(); ++in) {
            Matrix& m = values[in];
            for (std::size_t c = 0; c < m.size(); ++c) {
                const double saved = m.data()[c];
                m.data()[c] = saved + h;
                const double fp = eval_output(values);
                m.data()[c] = saved - h;
                const double fm = eval_output(values);
                m.data()[c] = saved;
                const double fd = (fp - fm) / (2.0 * h);
                const double ad = analytic[in][c];
                const double rel = std::fabs(ad - fd) / std::max({1.0, std::fabs(ad), std::fabs(fd)});
                if (rel > report.worst_rel_err) {
                    report.worst_rel_err = rel;
                    char buf[128];
                    std::snprintf(buf, sizeof(buf), "trial %d input %zu coord %zu: ad=%.6g fd=%.6g", trial,
                                  in, c, ad, fd);
                    report.worst_case = buf;
                }
            }
        }
    }
    report.pass = report.worst_rel_err <= tolerance;
    return report;
}

}  // namespace lab
