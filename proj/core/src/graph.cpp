#include "flowlab/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

namespace {

double sigmoid_val(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_val(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

[[noreturn]] void shape_error(Op op, int node, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()) +
                                " at node " + std::to_string(node));
}

bool row_broadcastable(const Tensor& a, const Tensor& b) {
    // b is one row repeated down a's rows
    return a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols();
}

bool col_broadcastable(const Tensor& a, const Tensor& b) {
    // b is one column stretched across a's columns
    return a.rank() == 2 && b.rank() == 2 && b.cols() == 1 && b.rows() == a.rows();
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kMatMul: return "matmul";
        case Op::kScale: return "scale";
        case Op::kAddScalar: return "add_scalar";
        case Op::kNeg: return "neg";
        case Op::kTanh: return "tanh";
        case Op::kSilu: return "silu";
        case Op::kSigmoid: return "sigmoid";
        case Op::kSoftplus: return "softplus";
        case Op::kSquare: return "square";
        case Op::kSum: return "sum";
        case Op::kMean: return "mean";
        case Op::kRowSum: return "row_sum";
        case Op::kConcatCols: return "concat_cols";
        case Op::kStopGrad: return "stop_grad";
        case Op::kTranspose: return "transpose";
        case Op::kRowsGather: return "rows_gather";
    }
    return "?";
}

Var Graph::add_leaf(const std::string& name, Tensor value, LeafKind kind) {
    if (value.empty()) throw std::invalid_argument("graph leaf '" + name + "' is empty");
    if (kind != LeafKind::kConst) {
        if (input_index_.count(name) || param_index_.count(name))
            throw std::invalid_argument("graph: duplicate leaf name '" + name + "'");
        check_finite(value, "graph leaf '" + name + "'");
    } else {
        check_finite(value, "graph constant");
    }
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    n.name = name;
    n.leaf = kind;
    nodes_.push_back(std::move(n));
    const int idx = static_cast<int>(nodes_.size()) - 1;
    if (kind == LeafKind::kInput) input_index_[name] = idx;
    if (kind == LeafKind::kParam) param_index_[name] = idx;
    return Var{this, idx};
}

Var Graph::input(const std::string& name, Tensor value) {
    return add_leaf(name, std::move(value), LeafKind::kInput);
}

Var Graph::param(const std::string& name, Tensor value) {
    return add_leaf(name, std::move(value), LeafKind::kParam);
}

Var Graph::constant(Tensor value) {
    return add_leaf("", std::move(value), LeafKind::kConst);
}

void Graph::check_var(Var v) const {
    if (v.graph != this || v.node < 0 || v.node >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("graph: var does not belong to this graph");
}

void Graph::mark_output(const std::string& name, Var v) {
    check_var(v);
    if (output_index_.count(name))
        throw std::invalid_argument("graph: duplicate output name '" + name + "'");
    output_index_[name] = v.node;
}

void Graph::set_input(const std::string& name, Tensor value) {
    auto it = input_index_.find(name);
    if (it == input_index_.end())
        throw std::invalid_argument("graph: no input named '" + name + "'");
    check_finite(value, "graph input '" + name + "'");
    nodes_[static_cast<std::size_t>(it->second)].value = std::move(value);
    stale_ = true;
}

const Tensor& Graph::value(Var v) const {
    check_var(v);
    return nodes_[static_cast<std::size_t>(v.node)].value;
}

const Tensor& Graph::output(const std::string& name) const {
    auto it = output_index_.find(name);
    if (it == output_index_.end())
        throw std::invalid_argument("graph: no output named '" + name + "'");
    return nodes_[static_cast<std::size_t>(it->second)].value;
}

Var Graph::emit(Op op, const std::vector<Var>& args, double scalar, std::vector<int64_t> rows) {
    for (Var a : args) check_var(a);
    Node n;
    n.op = op;
    n.scalar = scalar;
    n.rows = std::move(rows);
    n.args.reserve(args.size());
    for (Var a : args) n.args.push_back(a.node);
    nodes_.push_back(std::move(n));
    const int idx = static_cast<int>(nodes_.size()) - 1;
    eval_node(idx);
    return Var{this, idx};
}

void Graph::eval_node(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::kLeaf) return;
    auto arg = [&](std::size_t k) -> const Tensor& {
        return nodes_[static_cast<std::size_t>(n.args[k])].value;
    };
    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kAdd:
        case Op::kSub: {
            const Tensor& a = arg(0);
            const Tensor& b = arg(1);
            const double sgn = n.op == Op::kAdd ? 1.0 : -1.0;
            if (a.same_shape(b)) {
                n.value = a;
                for (std::int64_t k = 0; k < a.size(); ++k) n.value[k] += sgn * b[k];
            } else if (row_broadcastable(a, b)) {
                n.value = a;
                for (std::int64_t r = 0; r < a.rows(); ++r)
                    for (std::int64_t c = 0; c < a.cols(); ++c)
                        n.value.at(r, c) += sgn * b[c];
            } else {
                shape_error(n.op, i, a, b);
            }
            break;
        }
        case Op::kMul: {
            const Tensor& a = arg(0);
            const Tensor& b = arg(1);
            if (a.same_shape(b)) {
                n.value = a;
                for (std::int64_t k = 0; k < a.size(); ++k) n.value[k] *= b[k];
            } else if (col_broadcastable(a, b)) {
                n.value = a;
                for (std::int64_t r = 0; r < a.rows(); ++r)
                    for (std::int64_t c = 0; c < a.cols(); ++c)
                        n.value.at(r, c) *= b[r];
            } else {
                shape_error(n.op, i, a, b);
            }
            break;
        }
        case Op::kMatMul: {
            const Tensor& a = arg(0);
            const Tensor& b = arg(1);
            if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
                shape_error(n.op, i, a, b);
            n.value = matmul(a, b);
            break;
        }
        case Op::kScale: {
            n.value = arg(0);
            for (double& v : n.value.values()) v *= n.scalar;
            break;
        }
        case Op::kAddScalar: {
            n.value = arg(0);
            for (double& v : n.value.values()) v += n.scalar;
            break;
        }
        case Op::kNeg: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = -v;
            break;
        }
        case Op::kTanh: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = std::tanh(v);
            break;
        }
        case Op::kSilu: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = v * sigmoid_val(v);
            break;
        }
        case Op::kSigmoid: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = sigmoid_val(v);
            break;
        }
        case Op::kSoftplus: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = softplus_val(v);
            break;
        }
        case Op::kSquare: {
            n.value = arg(0);
            for (double& v : n.value.values()) v = v * v;
            break;
        }
        case Op::kSum:
        case Op::kMean: {
            const Tensor& a = arg(0);
            double acc = 0.0;
            for (std::int64_t k = 0; k < a.size(); ++k) acc += a[k];
            if (n.op == Op::kMean) acc /= static_cast<double>(a.size());
            n.value = Tensor::scalar(acc);
            break;
        }
        case Op::kRowSum: {
            const Tensor& a = arg(0);
            if (a.rank() != 2)
                throw std::invalid_argument(std::string("row_sum: want rank 2, got ") +
                                            shape_str(a.shape()) + " at node " + std::to_string(i));
            n.value = Tensor::zeros({a.rows(), 1});
            for (std::int64_t r = 0; r < a.rows(); ++r) {
                double acc = 0.0;
                for (std::int64_t c = 0; c < a.cols(); ++c) acc += a.at(r, c);
                n.value.at(r, 0) = acc;
            }
            break;
        }
        case Op::kConcatCols: {
            const Tensor& a = arg(0);
            const Tensor& b = arg(1);
            if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
                shape_error(n.op, i, a, b);
            n.value = concat_cols(a, b);
            break;
        }
        case Op::kStopGrad: {
            n.value = arg(0);
            break;
        }
        case Op::kTranspose: {
            const Tensor& a = arg(0);
            if (a.rank() != 2)
                throw std::invalid_argument(std::string("transpose: want rank 2, got ") +
                                            shape_str(a.shape()) + " at node " + std::to_string(i));
            n.value = transpose(a);
            break;
        }
        case Op::kRowsGather: {
            const Tensor& tab = arg(0);
            if (tab.rank() != 2)
                throw std::invalid_argument(std::string("rows_gather: want rank-2 table, got ") +
                                            shape_str(tab.shape()) + " at node " + std::to_string(i));
            const auto nrows = static_cast<std::int64_t>(n.rows.size());
            if (nrows == 0)
                throw std::invalid_argument("rows_gather: empty row list at node " +
                                            std::to_string(i));
            n.value = Tensor::zeros({nrows, tab.cols()});
            for (std::int64_t r = 0; r < nrows; ++r) {
                const std::int64_t src = n.rows[static_cast<std::size_t>(r)];
                if (src < 0 || src >= tab.rows())
                    throw std::invalid_argument(
                        "rows_gather: row id " + std::to_string(src) + " outside table " +
                        shape_str(tab.shape()) + " at node " + std::to_string(i));
                for (std::int64_t c = 0; c < tab.cols(); ++c)
                    n.value.at(r, c) = tab.at(src, c);
            }
            break;
        }
    }
}

std::map<std::string, Tensor> Graph::forward(const std::map<std::string, Tensor>& inputs) {
    for (const auto& [name, value] : inputs) set_input(name, value);
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) eval_node(i);
    stale_ = false;
    std::map<std::string, Tensor> out;
    for (const auto& [name, idx] : output_index_) {
        const Tensor& v = nodes_[static_cast<std::size_t>(idx)].value;
        check_finite(v, "graph output '" + name + "'");
        out.emplace(name, v);
    }
    return out;
}

std::map<std::string, Tensor> Graph::backward(const std::string& output_name,
                                              const Tensor& seed_grad) {
    if (stale_)
        throw std::runtime_error(
            "graph: backward before forward (inputs were rebound without re-evaluation)");
    auto it = output_index_.find(output_name);
    if (it == output_index_.end())
        throw std::invalid_argument("graph: no output named '" + output_name + "'");
    const int out = it->second;
    const Tensor& out_val = nodes_[static_cast<std::size_t>(out)].value;
    if (!seed_grad.same_shape(out_val))
        throw std::invalid_argument("graph: seed grad shape " + shape_str(seed_grad.shape()) +
                                    " does not match output shape " + shape_str(out_val.shape()));
    check_finite(seed_grad, "seed grad");

    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> has(nodes_.size(), 0);
    auto acc = [&](int idx) -> Tensor& {
        auto u = static_cast<std::size_t>(idx);
        if (!has[u]) {
            grads[u] = Tensor::zeros(nodes_[u].value.shape());
            has[u] = 1;
        }
        return grads[u];
    };

    acc(out) = seed_grad;
    for (int i = out; i >= 0; --i) {
        if (!has[static_cast<std::size_t>(i)]) continue;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.op == Op::kLeaf || n.op == Op::kStopGrad) continue;
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        auto arg_val = [&](std::size_t k) -> const Tensor& {
            return nodes_[static_cast<std::size_t>(n.args[k])].value;
        };
        switch (n.op) {
            case Op::kLeaf:
            case Op::kStopGrad:
                break;
            case Op::kAdd:
            case Op::kSub: {
                const double sgn = n.op == Op::kAdd ? 1.0 : -1.0;
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                Tensor& gb = acc(n.args[1]);
                if (gb.same_shape(g)) {
                    for (std::int64_t k = 0; k < g.size(); ++k) gb[k] += sgn * g[k];
                } else {
                    for (std::int64_t r = 0; r < g.rows(); ++r)
                        for (std::int64_t c = 0; c < g.cols(); ++c)
                            gb[c] += sgn * g.at(r, c);
                }
                break;
            }
            case Op::kMul: {
                const Tensor& a = arg_val(0);
                const Tensor& b = arg_val(1);
                Tensor& ga = acc(n.args[0]);
                Tensor& gb = acc(n.args[1]);
                if (a.same_shape(b)) {
                    for (std::int64_t k = 0; k < g.size(); ++k) {
                        ga[k] += g[k] * b[k];
                        gb[k] += g[k] * a[k];
                    }
                } else {
                    for (std::int64_t r = 0; r < a.rows(); ++r) {
                        double acc_b = 0.0;
                        for (std::int64_t c = 0; c < a.cols(); ++c) {
                            ga.at(r, c) += g.at(r, c) * b[r];
                            acc_b += g.at(r, c) * a.at(r, c);
                        }
                        gb[r] += acc_b;
                    }
                }
                break;
            }
            case Op::kMatMul: {
                matmul_acc(g, false, arg_val(1), true, acc(n.args[0]));
                matmul_acc(arg_val(0), true, g, false, acc(n.args[1]));
                break;
            }
            case Op::kScale: {
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) ga[k] += n.scalar * g[k];
                break;
            }
            case Op::kAddScalar: {
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                break;
            }
            case Op::kNeg: {
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) ga[k] -= g[k];
                break;
            }
            case Op::kTanh: {
                const Tensor& y = n.value;
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k)
                    ga[k] += g[k] * (1.0 - y[k] * y[k]);
                break;
            }
            case Op::kSilu: {
                const Tensor& x = arg_val(0);
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) {
                    const double s = sigmoid_val(x[k]);
                    ga[k] += g[k] * s * (1.0 + x[k] * (1.0 - s));
                }
                break;
            }
            case Op::kSigmoid: {
                const Tensor& y = n.value;
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k)
                    ga[k] += g[k] * y[k] * (1.0 - y[k]);
                break;
            }
            case Op::kSoftplus: {
                const Tensor& x = arg_val(0);
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k)
                    ga[k] += g[k] * sigmoid_val(x[k]);
                break;
            }
            case Op::kSquare: {
                const Tensor& x = arg_val(0);
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < g.size(); ++k) ga[k] += 2.0 * g[k] * x[k];
                break;
            }
            case Op::kSum:
            case Op::kMean: {
                const Tensor& a = arg_val(0);
                const double go =
                    n.op == Op::kSum ? g.item() : g.item() / static_cast<double>(a.size());
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t k = 0; k < a.size(); ++k) ga[k] += go;
                break;
            }
            case Op::kRowSum: {
                const Tensor& a = arg_val(0);
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t r = 0; r < a.rows(); ++r)
                    for (std::int64_t c = 0; c < a.cols(); ++c)
                        ga.at(r, c) += g.at(r, 0);
                break;
            }
            case Op::kConcatCols: {
                const Tensor& a = arg_val(0);
                Tensor& ga = acc(n.args[0]);
                Tensor& gb = acc(n.args[1]);
                for (std::int64_t r = 0; r < g.rows(); ++r) {
                    for (std::int64_t c = 0; c < a.cols(); ++c)
                        ga.at(r, c) += g.at(r, c);
                    for (std::int64_t c = a.cols(); c < g.cols(); ++c)
                        gb.at(r, c - a.cols()) += g.at(r, c);
                }
                break;
            }
            case Op::kTranspose: {
                Tensor& ga = acc(n.args[0]);
                for (std::int64_t r = 0; r < g.rows(); ++r)
                    for (std::int64_t c = 0; c < g.cols(); ++c)
                        ga.at(c, r) += g.at(r, c);
                break;
            }
            case Op::kRowsGather: {
                Tensor& gt = acc(n.args[0]);
                for (std::int64_t r = 0; r < g.rows(); ++r) {
                    const std::int64_t dst = n.rows[static_cast<std::size_t>(r)];
                    for (std::int64_t c = 0; c < g.cols(); ++c)
                        gt.at(dst, c) += g.at(r, c);
                }
                break;
            }
        }
    }

    std::map<std::string, Tensor> result;
    for (const auto& [name, idx] : param_index_) {
        auto u = static_cast<std::size_t>(idx);
        if (has[u])
            result.emplace(name, std::move(grads[u]));
        else
            result.emplace(name, Tensor::zeros(nodes_[u].value.shape()));
    }
    return result;
}

std::map<std::string, Tensor> Graph::backward(const std::string& output_name) {
    auto it = output_index_.find(output_name);
    if (it == output_index_.end())
        throw std::invalid_argument("graph: no output named '" + output_name + "'");
    const Tensor& out_val = nodes_[static_cast<std::size_t>(it->second)].value;
    return backward(output_name, Tensor::full(out_val.shape(), 1.0));
}

namespace {

Graph& same_graph(Var a, Var b, const char* what) {
    if (a.graph == nullptr || a.graph != b.graph)
        throw std::invalid_argument(std::string(what) + ": vars from different graphs");
    return *a.graph;
}

Graph& own_graph(Var a, const char* what) {
    if (a.graph == nullptr)
        throw std::invalid_argument(std::string(what) + ": null var");
    return *a.graph;
}

}  // namespace

Var add(Var a, Var b) { return same_graph(a, b, "add").emit(Op::kAdd, {a, b}); }
Var sub(Var a, Var b) { return same_graph(a, b, "sub").emit(Op::kSub, {a, b}); }
Var mul(Var a, Var b) { return same_graph(a, b, "mul").emit(Op::kMul, {a, b}); }
Var matmul(Var a, Var b) { return same_graph(a, b, "matmul").emit(Op::kMatMul, {a, b}); }
Var scale(Var a, double s) { return own_graph(a, "scale").emit(Op::kScale, {a}, s); }
Var add_scalar(Var a, double s) { return own_graph(a, "add_scalar").emit(Op::kAddScalar, {a}, s); }
Var neg(Var a) { return own_graph(a, "neg").emit(Op::kNeg, {a}); }
Var tanh_op(Var a) { return own_graph(a, "tanh").emit(Op::kTanh, {a}); }
Var silu(Var a) { return own_graph(a, "silu").emit(Op::kSilu, {a}); }
Var sigmoid(Var a) { return own_graph(a, "sigmoid").emit(Op::kSigmoid, {a}); }
Var softplus(Var a) { return own_graph(a, "softplus").emit(Op::kSoftplus, {a}); }
Var square(Var a) { return own_graph(a, "square").emit(Op::kSquare, {a}); }
Var sum(Var a) { return own_graph(a, "sum").emit(Op::kSum, {a}); }
Var mean(Var a) { return own_graph(a, "mean").emit(Op::kMean, {a}); }
Var row_sum(Var a) { return own_graph(a, "row_sum").emit(Op::kRowSum, {a}); }
Var concat_cols(Var a, Var b) {
    return same_graph(a, b, "concat_cols").emit(Op::kConcatCols, {a, b});
}
Var stop_grad(Var a) { return own_graph(a, "stop_grad").emit(Op::kStopGrad, {a}); }
Var transpose_op(Var a) { return own_graph(a, "transpose").emit(Op::kTranspose, {a}); }
Var rows_gather(Var table, std::vector<int64_t> rows) {
    return own_graph(table, "rows_gather").emit(Op::kRowsGather, {table}, 0.0, std::move(rows));
}

}  // namespace flowlab
