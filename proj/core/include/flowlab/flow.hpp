#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "flowlab/adam.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/nets.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Time convention everywhere: t = 0 is data, t = 1 is noise; the sampler
// integrates t from 1 down to 0 with z <- z - dt * v.

// One training batch: data z0, noise z1, per-sample times, optional labels.
struct FlowBatch {
    Tensor z0;
    Tensor z1;
    Tensor t;                          // [B,1]
    std::vector<std::int64_t> labels;  // empty = unconditional

    void validate() const;
    std::int64_t batch() const { return z0.rows(); }
};

// (1-t) z0 + t z1, with t scalar or a [B,1] column.
Tensor interpolate(const Tensor& z0, const Tensor& z1, const Tensor& t);
Tensor interpolate(const Tensor& z0, const Tensor& z1, double t);

// Mean over the batch of |(z1 - z0) - v(z_t, t[, c])|^2.
double fm_loss(const VelocityNet& net, const FlowBatch& batch);
// Same value, plus d loss / d params.
double fm_loss_grads(const VelocityNet& net, const FlowBatch& batch,
                     std::map<std::string, Tensor>& grads);

// gamma * v(z, c, t) + (1 - gamma) * v(z, null, t).  Unconditional nets are
// only legal at gamma = 1 (plain velocity).
Tensor cfg_velocity(const VelocityNet& net, const Tensor& z, const Tensor& t,
                    const std::vector<std::int64_t>& labels, double gamma);

// Any velocity field the sampler can integrate; tests substitute analytic
// fields here.
using VelocityField = std::function<Tensor(const Tensor& z, double t)>;

VelocityField make_field(const VelocityNet& net);
VelocityField make_cfg_field(const VelocityNet& net, const std::vector<std::int64_t>& labels,
                             double gamma);

struct TrajectoryStep {
    double t;
    Tensor z;      // state at this time
    Tensor v;      // field evaluated at (z, t)
    Tensor zhat0;  // z - t * v
};

// Recorded from t = 1 down to t = 0 inclusive (n_steps + 1 entries); the
// first state is the input noise.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
};

// Euler integration on the uniform grid t_k = 1 - k/n_steps; returns the
// state at t = 0 and optionally the trajectory with zhat0 per step.
Tensor euler_sample(const VelocityField& field, const Tensor& z1, std::int64_t n_steps,
                    Trajectory* traj = nullptr);
Tensor euler_sample(const VelocityNet& net, const Tensor& z1, std::int64_t n_steps,
                    Trajectory* traj = nullptr);

struct TeacherConfig {
    std::int64_t iters = 4000;
    std::int64_t batch_size = 256;
    double lr = 1e-3;
    std::int64_t t_grid_n = 50;  // t drawn uniformly from {0, 1/(N-1), ..., 1}
    double p_uncond = 0.1;       // label dropout rate for conditional teachers
    std::uint64_t seed = 0;
};

struct TeacherState {
    VelocityNet net;
    AdamState opt;
    Rng rng{0};
    std::int64_t iter = 0;

    static TeacherState init(const TeacherConfig& cfg, const VelocityNetConfig& net_cfg);
};

// One flow-matching update; returns the loss.  Throws DivergenceError when the
// loss goes non-finite or above 1e6.
double teacher_train_step(TeacherState& state, const Dataset& data, const TeacherConfig& cfg);

// Full training loop (loss decreases on the toy sets; curve optionally
// captured).
VelocityNet train_teacher(const TeacherConfig& cfg, const Dataset& data,
                          const VelocityNetConfig& net_cfg,
                          std::vector<double>* loss_curve = nullptr);

}  // namespace flowlab
