#pragma once

// Finite-difference gradient oracle plus random graph/MLP generators, shared
// by the unit tests and the acceptance suite.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "flowlab/graph.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace fdtest {

using Params = std::map<std::string, flowlab::Tensor>;
using LossFn = std::function<double(const Params&)>;

inline double fd_rel_err(double analytic, double fd) {
    const double d = std::abs(analytic - fd);
    if (d <= 1e-8) return 0.0;  // both effectively zero: FD noise floor
    return d / std::max(std::abs(analytic), std::abs(fd));
}

// Worst relative error between analytic grads and central finite differences.
inline double max_fd_rel_err(const LossFn& loss, const Params& params, const Params& grads,
                             double eps = 1e-5) {
    double worst = 0.0;
    Params work = params;
    for (const auto& [name, p] : params) {
        flowlab::Tensor& wp = work.at(name);
        const flowlab::Tensor& g = grads.at(name);
        for (std::int64_t k = 0; k < p.size(); ++k) {
            wp[k] = p[k] + eps;
            const double up = loss(work);
            wp[k] = p[k] - eps;
            const double dn = loss(work);
            wp[k] = p[k];
            worst = std::max(worst, fd_rel_err(g[k], (up - dn) / (2.0 * eps)));
        }
    }
    return worst;
}

// --- random MLP, silu hidden activations, loss = mean(square(output)) ---

inline Params random_mlp_params(flowlab::Rng& rng, const std::vector<int>& widths) {
    Params p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        flowlab::Tensor w = rng.normal_matrix(widths[l], widths[l + 1]);
        for (double& x : w.values()) x /= std::sqrt(static_cast<double>(widths[l]));
        p.emplace("w" + std::to_string(l), std::move(w));
        flowlab::Tensor b = rng.normal_matrix(1, widths[l + 1]);
        for (double& x : b.values()) x *= 0.1;
        p.emplace("b" + std::to_string(l), std::move(b));
    }
    return p;
}

inline double eval_mlp_msq(const Params& params, const flowlab::Tensor& x, int n_layers,
                           Params* grads) {
    flowlab::Graph g;
    flowlab::Var h = g.input("x", x);
    std::map<std::string, flowlab::Var> pv;
    for (const auto& [name, t] : params) pv.emplace(name, g.param(name, t));
    for (int l = 0; l < n_layers; ++l) {
        h = flowlab::matmul(h, pv.at("w" + std::to_string(l))) + pv.at("b" + std::to_string(l));
        if (l + 1 < n_layers) h = flowlab::silu(h);
    }
    flowlab::Var loss = flowlab::mean(flowlab::square(h));
    g.mark_output("loss", loss);
    if (grads) *grads = g.backward("loss", flowlab::Tensor::scalar(1.0));
    return g.value(loss).item();
}

// --- random op chain over square matrices ---
// Growth is tamed by wrapping the amplifying ops (matmul, square) in tanh, so
// repeated composition stays bounded and FD stays well-conditioned.

struct ChainStep {
    int op;
    int a;
    int b;
    double s;
};

struct ChainSpec {
    int n = 3;         // all tensors are n x n
    int n_params = 2;  // p0..p{n_params-1}
    std::vector<ChainStep> steps;
};

inline ChainSpec make_random_chain(flowlab::Rng& rng) {
    ChainSpec spec;
    spec.n = static_cast<int>(rng.uniform_int(2, 4));
    spec.n_params = static_cast<int>(rng.uniform_int(2, 3));
    const int n_ops = static_cast<int>(rng.uniform_int(4, 8));
    int n_vals = spec.n_params;
    for (int i = 0; i < n_ops; ++i) {
        ChainStep st;
        st.op = static_cast<int>(rng.uniform_int(0, 11));
        st.a = static_cast<int>(rng.uniform_int(0, n_vals - 1));
        st.b = static_cast<int>(rng.uniform_int(0, n_vals - 1));
        st.s = rng.uniform(-1.5, 1.5);
        spec.steps.push_back(st);
        ++n_vals;
    }
    return spec;
}

inline Params random_chain_params(flowlab::Rng& rng, const ChainSpec& spec) {
    Params p;
    for (int k = 0; k < spec.n_params; ++k) {
        flowlab::Tensor t = rng.normal_matrix(spec.n, spec.n);
        for (double& x : t.values()) x *= 0.5;
        p.emplace("p" + std::to_string(k), std::move(t));
    }
    return p;
}

inline double eval_chain(const ChainSpec& spec, const Params& params, Params* grads) {
    flowlab::Graph g;
    std::vector<flowlab::Var> vals;
    for (int k = 0; k < spec.n_params; ++k)
        vals.push_back(g.param("p" + std::to_string(k), params.at("p" + std::to_string(k))));
    for (const ChainStep& st : spec.steps) {
        flowlab::Var a = vals[static_cast<std::size_t>(st.a)];
        flowlab::Var b = vals[static_cast<std::size_t>(st.b)];
        flowlab::Var r;
        switch (st.op) {
            case 0: r = a + b; break;
            case 1: r = a - b; break;
            case 2: r = a * b; break;
            case 3: r = flowlab::tanh_op(flowlab::matmul(a, b)); break;
            case 4: r = flowlab::tanh_op(a); break;
            case 5: r = flowlab::silu(a); break;
            case 6: r = flowlab::sigmoid(a); break;
            case 7: r = flowlab::softplus(a); break;
            case 8: r = flowlab::tanh_op(flowlab::square(a)); break;
            case 9: r = flowlab::scale(a, st.s); break;
            case 10: r = flowlab::transpose_op(a); break;
            default: r = flowlab::add_scalar(a, st.s); break;
        }
        vals.push_back(r);
    }
    flowlab::Var loss = flowlab::mean(flowlab::square(vals.back()));
    g.mark_output("loss", loss);
    if (grads) *grads = g.backward("loss", flowlab::Tensor::scalar(1.0));
    return g.value(loss).item();
}

}  // namespace fdtest
