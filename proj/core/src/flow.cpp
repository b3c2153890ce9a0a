#include "flowlab/flow.hpp"

#include <cmath>
#include <stdexcept>

#include "flowlab/errors.hpp"
#include "flowlab/graph.hpp"

namespace flowlab {

namespace {

Tensor time_col(const Tensor& t, std::int64_t rows, const char* what) {
    if (t.size() == 1) {
        const double tv = t.item();
        if (!(tv >= 0.0 && tv <= 1.0))
            throw std::invalid_argument(std::string(what) + ": t outside [0,1]: " +
                                        std::to_string(tv));
        return Tensor::full({rows, 1}, tv);
    }
    if (t.rank() != 2 || t.cols() != 1 || t.rows() != rows)
        throw std::invalid_argument(std::string(what) + ": t must be scalar or [batch,1], got " +
                                    shape_str(t.shape()));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double tv = t.at(r, 0);
        if (!(tv >= 0.0 && tv <= 1.0))
            throw std::invalid_argument(std::string(what) + ": t outside [0,1]: " +
                                        std::to_string(tv));
    }
    return t;
}

}  // namespace

void FlowBatch::validate() const {
    if (z0.rank() != 2 || z1.rank() != 2)
        throw std::invalid_argument("flow batch: z0/z1 must be [batch,dim]");
    if (!z0.same_shape(z1))
        throw std::invalid_argument("flow batch: z0 shape " + shape_str(z0.shape()) +
                                    " != z1 shape " + shape_str(z1.shape()));
    (void)time_col(t, z0.rows(), "flow batch");
    if (!labels.empty() && static_cast<std::int64_t>(labels.size()) != z0.rows())
        throw std::invalid_argument("flow batch: label count " + std::to_string(labels.size()) +
                                    " != batch " + std::to_string(z0.rows()));
}

Tensor interpolate(const Tensor& z0, const Tensor& z1, const Tensor& t) {
    if (!z0.same_shape(z1) || z0.rank() != 2)
        throw std::invalid_argument("interpolate: z0 " + shape_str(z0.shape()) + " vs z1 " +
                                    shape_str(z1.shape()));
    const Tensor tc = time_col(t, z0.rows(), "interpolate");
    Tensor out = z0;
    for (std::int64_t r = 0; r < z0.rows(); ++r) {
        const double tv = tc.at(r, 0);
        for (std::int64_t c = 0; c < z0.cols(); ++c)
            out.at(r, c) = (1.0 - tv) * z0.at(r, c) + tv * z1.at(r, c);
    }
    return out;
}

Tensor interpolate(const Tensor& z0, const Tensor& z1, double t) {
    return interpolate(z0, z1, Tensor::scalar(t));
}

namespace {

// shared by the value-only and gradient paths
double fm_loss_impl(const VelocityNet& net, const FlowBatch& batch,
                    std::map<std::string, Tensor>* grads) {
    batch.validate();
    if (net.conditional() && batch.labels.empty())
        throw std::invalid_argument("fm_loss: conditional net needs labels");
    const Tensor tc = time_col(batch.t, batch.batch(), "fm_loss");
    const Tensor zt = interpolate(batch.z0, batch.z1, tc);
    Tensor target = batch.z1;
    for (std::int64_t k = 0; k < target.size(); ++k) target[k] -= batch.z0[k];

    if (!grads) {
        const Tensor v = net.velocity(zt, tc, batch.labels);
        double acc = 0.0;
        for (std::int64_t k = 0; k < v.size(); ++k) {
            const double d = target[k] - v[k];
            acc += d * d;
        }
        return acc / static_cast<double>(batch.batch());
    }

    Graph g;
    auto vars = net.bind(g, /*trainable=*/true);
    Var zt_v = g.input("zt", zt);
    Var temb = g.input("temb", time_embed_batch(tc, net.config().time_dim));
    Var tgt = g.input("target", target);
    Var v = net.velocity_graph(g, vars, zt_v, temb, batch.labels);
    Var loss = scale(sum(square(tgt - v)), 1.0 / static_cast<double>(batch.batch()));
    g.mark_output("loss", loss);
    *grads = g.backward("loss", Tensor::scalar(1.0));
    return g.value(loss).item();
}

}  // namespace

double fm_loss(const VelocityNet& net, const FlowBatch& batch) {
    return fm_loss_impl(net, batch, nullptr);
}

double fm_loss_grads(const VelocityNet& net, const FlowBatch& batch,
                     std::map<std::string, Tensor>& grads) {
    return fm_loss_impl(net, batch, &grads);
}

Tensor cfg_velocity(const VelocityNet& net, const Tensor& z, const Tensor& t,
                    const std::vector<std::int64_t>& labels, double gamma) {
    if (!net.conditional()) {
        if (gamma != 1.0)
            throw std::invalid_argument("cfg_velocity: unconditional net requires gamma = 1");
        return net.velocity(z, t);
    }
    if (gamma == 1.0) return net.velocity(z, t, labels);
    const std::vector<std::int64_t> null_labels(static_cast<std::size_t>(z.rows()), kNullClass);
    if (gamma == 0.0) return net.velocity(z, t, null_labels);
    Tensor vc = net.velocity(z, t, labels);
    const Tensor vu = net.velocity(z, t, null_labels);
    for (std::int64_t k = 0; k < vc.size(); ++k)
        vc[k] = gamma * vc[k] + (1.0 - gamma) * vu[k];
    return vc;
}

VelocityField make_field(const VelocityNet& net) {
    return [&net](const Tensor& z, double t) { return net.velocity(z, t); };
}

VelocityField make_cfg_field(const VelocityNet& net, const std::vector<std::int64_t>& labels,
                             double gamma) {
    return [&net, labels, gamma](const Tensor& z, double t) {
        return cfg_velocity(net, z, Tensor::scalar(t), labels, gamma);
    };
}

Tensor euler_sample(const VelocityField& field, const Tensor& z1, std::int64_t n_steps,
                    Trajectory* traj) {
    if (n_steps < 1)
        throw std::invalid_argument("euler_sample: n_steps must be >= 1, got " +
                                    std::to_string(n_steps));
    if (z1.rank() != 2) throw std::invalid_argument("euler_sample: z1 must be [batch,dim]");
    if (traj) traj->steps.clear();
    const double dt = 1.0 / static_cast<double>(n_steps);
    Tensor z = z1;
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(n_steps - k) / static_cast<double>(n_steps);
        const Tensor v = field(z, t);
        if (!v.same_shape(z))
            throw std::invalid_argument("euler_sample: field returned shape " +
                                        shape_str(v.shape()) + " for state " +
                                        shape_str(z.shape()));
        if (traj) {
            TrajectoryStep step;
            step.t = t;
            step.z = z;
            step.v = v;
            step.zhat0 = z;
            for (std::int64_t i = 0; i < z.size(); ++i) step.zhat0[i] -= t * v[i];
            traj->steps.push_back(std::move(step));
        }
        for (std::int64_t i = 0; i < z.size(); ++i) z[i] -= dt * v[i];
    }
    if (traj) {
        // closing record at t = 0, where zhat0 coincides with the state
        TrajectoryStep step;
        step.t = 0.0;
        step.z = z;
        step.v = field(z, 0.0);
        step.zhat0 = z;
        traj->steps.push_back(std::move(step));
    }
    return z;
}

Tensor euler_sample(const VelocityNet& net, const Tensor& z1, std::int64_t n_steps,
                    Trajectory* traj) {
    return euler_sample(make_field(net), z1, n_steps, traj);
}

TeacherState TeacherState::init(const TeacherConfig& cfg, const VelocityNetConfig& net_cfg) {
    if (cfg.iters < 0 || cfg.batch_size < 1 || cfg.t_grid_n < 2)
        throw std::invalid_argument("teacher config: iters >= 0, batch_size >= 1, t_grid_n >= 2");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("teacher config: lr must be positive");
    TeacherState st;
    st.rng = Rng(cfg.seed);
    st.net = VelocityNet(net_cfg, st.rng);
    st.opt = AdamState(AdamConfig{});
    return st;
}

double teacher_train_step(TeacherState& state, const Dataset& data, const TeacherConfig& cfg) {
    const std::int64_t b = cfg.batch_size;
    FlowBatch batch;
    auto [z0, labels] = data.sample(b, state.rng);
    batch.z0 = std::move(z0);
    batch.z1 = state.rng.normal_matrix(b, data.dim());
    batch.t = Tensor({b, 1});
    for (std::int64_t i = 0; i < b; ++i) {
        const auto gi = state.rng.uniform_int(1, cfg.t_grid_n);
        batch.t.at(i, 0) =
            static_cast<double>(gi - 1) / static_cast<double>(cfg.t_grid_n - 1);
    }
    if (state.net.conditional()) {
        batch.labels = std::move(labels);
        for (auto& c : batch.labels)
            if (state.rng.uniform01() < cfg.p_uncond) c = kNullClass;
    }
    std::map<std::string, Tensor> grads;
    const double loss = fm_loss_grads(state.net, batch, grads);
    if (!std::isfinite(loss) || loss > 1e6)
        throw DivergenceError("teacher training diverged at iter " +
                              std::to_string(state.iter) + ": loss = " + std::to_string(loss));
    state.opt.step(state.net.params(), grads, cfg.lr);
    ++state.iter;
    return loss;
}

VelocityNet train_teacher(const TeacherConfig& cfg, const Dataset& data,
                          const VelocityNetConfig& net_cfg, std::vector<double>* loss_curve) {
    TeacherState state = TeacherState::init(cfg, net_cfg);
    for (std::int64_t i = 0; i < cfg.iters; ++i) {
        const double loss = teacher_train_step(state, data, cfg);
        if (loss_curve) loss_curve->push_back(loss);
    }
    return std::move(state.net);
}

}  // namespace flowlab
