#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flowlab/adam.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/nets.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Loss weights, warm-up gates and thresholds for the distillation loop.
struct LossSchedule {
    double lambda_gan = 0.1;
    double lambda_rf = 0.1;
    double lambda_bi = 0.1;
    std::int64_t n_gan = 0;  // adversarial term starts at this iteration
    std::int64_t n_rf = 1000;
    std::int64_t n_bi = 1000;
    double t_trunc = 0.4;  // at or below: regress straight onto z0
    double t_skip = 0.1;   // max magnitude of the random time skips
    double ema_mu = 0.9;
    double r1_gamma = 0.0;  // gradient penalty on real data; 0 = off

    void validate() const;  // weights >= 0, thresholds and mu in [0,1]
};

struct DistillConfig {
    LossSchedule schedule;
    double lr_student = 1e-4;
    double lr_disc = 1e-4;
    std::int64_t lr_decay_from = 2000;  // -1 keeps both rates constant
    std::int64_t iters = 8000;
    std::int64_t batch_size = 128;
    std::uint64_t seed = 0;
    std::int64_t disc_hidden = 128;
    std::int64_t disc_depth = 3;
};

// Linear ramp from 1 at lr_decay_from down to 0 at iters (1 before the ramp
// or when decay is disabled).  Applied to both learning rates each step.
double lr_decay_factor(const DistillConfig& cfg, std::int64_t iter);

// Teacher phi stays frozen; student theta starts as an exact copy; theta-tilde
// is the EMA of theta and serves as the stop-gradient target.
struct DistillState {
    VelocityNet teacher;
    VelocityNet student;
    VelocityNet ema;
    Discriminator disc;
    AdamState opt_student;
    AdamState opt_disc;
    Rng rng{0};
    std::int64_t iter = 0;

    static DistillState init(const VelocityNet& teacher, const DistillConfig& cfg);
};

// All per-iteration randomness is drawn up front, in a fixed order, so the
// stream is identical no matter which loss terms are active.
struct DistillBatch {
    Tensor z0;      // data
    Tensor z1;      // noise
    Tensor t;       // [B,1], in (0,1]
    Tensor t_down;  // skip toward data
    Tensor t_up;    // skip toward noise
    Tensor t_rf;    // fresh times for the straightening term

    static DistillBatch draw(const Dataset& data, std::int64_t batch_size, double t_skip,
                             Rng& rng);
    void validate() const;
    std::int64_t batch() const { return z0.rows(); }
};

// z_t - t * v(z_t, t): the one-step data prediction.
Tensor x0_predict(const VelocityNet& net, const Tensor& z_t, const Tensor& t);
Tensor x0_predict(const VelocityNet& net, const Tensor& z_t, double t);

// One signed Euler step of the frozen teacher: works toward data
// (t_to < t_from) and toward noise (t_to > t_from).
Tensor teacher_step(const VelocityNet& teacher, const Tensor& z_t, const Tensor& t_from,
                    const Tensor& t_to);
Tensor teacher_step(const VelocityNet& teacher, const Tensor& z_t, double t_from, double t_to);

// Random skip times around t_i: down toward data by at most min(t_i, t_skip),
// up toward noise by at most min(1 - t_i, t_skip).  Two uniform draws per
// call, in (down, up) order.
std::pair<double, double> time_skip(double t_i, double t_skip, Rng& rng);
std::pair<Tensor, Tensor> time_skip_batch(const Tensor& t, double t_skip, Rng& rng);

// Value-only loss evaluations (the training step computes the same formulas
// inside one differentiable graph).
double loss_cd(const DistillState& state, const DistillBatch& batch, const LossSchedule& sched);
std::pair<double, double> loss_gan(const DistillState& state, const Tensor& z1_batch,
                                   const Tensor& z0_batch);  // (gen, disc)
double loss_rf(const DistillState& state, const Tensor& z1_batch, const Tensor& t_rf);
double loss_bi(const DistillState& state, const DistillBatch& batch, const LossSchedule& sched);

// theta_ema <- mu * theta_ema + (1 - mu) * theta, elementwise.
void ema_update(std::map<std::string, Tensor>& ema_params,
                const std::map<std::string, Tensor>& student_params, double mu);

// Discriminator objective on one batch: mean softplus(-D(real)) + mean
// softplus(D(fake)), plus 0.5 * r1_gamma * mean |dD/d real|^2 when the
// gradient penalty is on.  Returns (adversarial part, full objective) and
// fills grads with d objective / d disc params.
std::pair<double, double> disc_loss_grads(const Discriminator& disc, const Tensor& fake,
                                          const Tensor& real, double r1_gamma,
                                          std::map<std::string, Tensor>& grads);

struct DistillLosses {
    double cd = 0.0;
    double gan_gen = 0.0;
    double gan_disc = 0.0;
    double rf = 0.0;
    double bi = 0.0;
    double total = 0.0;
    bool gan_active = false;
    bool rf_active = false;
    bool bi_active = false;
};

// The gated student objective exactly as distill_step optimizes it (targets
// frozen, straightening anchor behind a stop-gradient).  Optionally returns
// d total / d student params and the generated points f_theta(z1, 1).
DistillLosses student_objective(const DistillState& state, const DistillBatch& batch,
                                const DistillConfig& cfg,
                                std::map<std::string, Tensor>* grads = nullptr,
                                Tensor* fake_out = nullptr);

// One full update: student Adam step on the gated total loss, discriminator
// Adam step when the adversarial term is active, EMA update, counter bump.
DistillLosses distill_step(DistillState& state, const DistillBatch& batch,
                           const DistillConfig& cfg);

}  // namespace flowlab
