#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowlab/tensor.hpp"

namespace flowlab {

// Reverse-mode autodiff over a flat tape of tensor ops.  Nodes are appended in
// construction order, so parents always precede children and backward is a
// single reverse sweep.  Values are computed eagerly at emit time; inputs can
// be rebound later via forward()/set_input() and the whole tape re-evaluated.
enum class Op {
    kLeaf,
    kAdd,        // a + b; b may be [1,c] broadcast over rows of a [r,c]
    kSub,        // a - b; same broadcast rule as kAdd
    kMul,        // a * b elementwise; b may be [r,1] broadcast over cols of a [r,c]
    kMatMul,     // [r,k] x [k,c]
    kScale,      // a * scalar
    kAddScalar,  // a + scalar
    kNeg,
    kTanh,
    kSilu,
    kSigmoid,
    kSoftplus,
    kSquare,
    kSum,         // all elements -> scalar
    kMean,        // all elements -> scalar
    kRowSum,      // [r,c] -> [r,1]
    kConcatCols,  // [r,ca] ++ [r,cb] -> [r,ca+cb]
    kStopGrad,    // identity value, blocks gradient
    kTranspose,   // [r,c] -> [c,r]
    kRowsGather,  // table [v,d], fixed row ids -> [n,d]
};

const char* op_name(Op op);

class Graph;

// Cheap handle into a Graph's tape.
struct Var {
    Graph* graph = nullptr;
    int node = -1;
};

class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Leaves.  Inputs are rebindable; params are what backward() reports
    // gradients for; constants participate in values only.
    Var input(const std::string& name, Tensor value);
    Var param(const std::string& name, Tensor value);
    Var constant(Tensor value);

    void mark_output(const std::string& name, Var v);

    // Rebinds one input without re-evaluating; the graph is stale until the
    // next forward().
    void set_input(const std::string& name, Tensor value);

    // Rebinds the given inputs (a subset is fine; unknown names are errors),
    // re-evaluates every node in tape order, and returns all marked outputs.
    std::map<std::string, Tensor> forward(const std::map<std::string, Tensor>& inputs);

    // Gradients of the named output w.r.t. every param (zeros when a param is
    // unreachable).  seed_grad must match the output's shape; the overload
    // without it seeds with ones.
    std::map<std::string, Tensor> backward(const std::string& output_name,
                                           const Tensor& seed_grad);
    std::map<std::string, Tensor> backward(const std::string& output_name);

    const Tensor& value(Var v) const;
    const Tensor& output(const std::string& name) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Appends one op node and computes its value.  The free functions below
    // are the intended interface; this is their shared implementation.
    Var emit(Op op, const std::vector<Var>& args, double scalar = 0.0,
             std::vector<int64_t> rows = {});

  private:
    enum class LeafKind { kNone, kInput, kParam, kConst };

    struct Node {
        Op op = Op::kLeaf;
        std::vector<int> args;
        double scalar = 0.0;
        std::vector<int64_t> rows;
        Tensor value;
        std::string name;
        LeafKind leaf = LeafKind::kNone;
    };

    Var add_leaf(const std::string& name, Tensor value, LeafKind kind);
    void eval_node(int i);
    void check_var(Var v) const;

    std::vector<Node> nodes_;
    std::map<std::string, int> input_index_;
    std::map<std::string, int> param_index_;
    std::map<std::string, int> output_index_;
    bool stale_ = false;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var tanh_op(Var a);
Var silu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var concat_cols(Var a, Var b);
Var stop_grad(Var a);
Var transpose_op(Var a);
Var rows_gather(Var table, std::vector<int64_t> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace flowlab
