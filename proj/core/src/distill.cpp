#include "flowlab/distill.hpp"

#include <cmath>
#include <stdexcept>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

void check_range(const char* what, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
        throw std::invalid_argument(std::string(what) + " out of [" + std::to_string(lo) + "," +
                                    std::to_string(hi) + "]: " + std::to_string(v));
    }
}

void check_time_col(const char* what, const Tensor& t, std::int64_t rows) {
    if (t.rank() != 2 || t.rows() != rows || t.cols() != 1) {
        throw std::invalid_argument(std::string(what) + ": expected [" + std::to_string(rows) +
                                    ",1] time column, got " + shape_str(t.shape()));
    }
    for (double v : t.values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(what) + ": time " + std::to_string(v) +
                                        " out of [0,1]");
        }
    }
}

// out = z - dt * v, with dt a per-row column.
Tensor step_along(const Tensor& z, const Tensor& v, const Tensor& dt) {
    Tensor out = z;
    const std::int64_t rows = z.rows(), cols = z.cols();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double d = dt[r];
        for (std::int64_t c = 0; c < cols; ++c) out.at(r, c) -= d * v.at(r, c);
    }
    return out;
}

Tensor col_diff(const Tensor& a, const Tensor& b) {  // a - b for [B,1] columns
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("mean_sq_diff: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.rows());
}

// Per-row squared error against a row-wise mixed target: rows at or below the
// truncation time regress onto z0, the rest onto the one-step EMA prediction.
Tensor mixed_cd_target(const Tensor& z0, const Tensor& ema_pred, const Tensor& t, double t_trunc) {
    Tensor target = ema_pred;
    const std::int64_t rows = z0.rows(), cols = z0.cols();
    for (std::int64_t r = 0; r < rows; ++r) {
        if (t[r] <= t_trunc) {
            for (std::int64_t c = 0; c < cols; ++c) target.at(r, c) = z0.at(r, c);
        }
    }
    return target;
}

struct CdParts {
    Tensor zt;
    Tensor v_phi;
    Tensor cd_target;
};

CdParts cd_parts(const DistillState& state, const DistillBatch& batch,
                 const LossSchedule& sched) {
    CdParts p;
    p.zt = interpolate(batch.z0, batch.z1, batch.t);
    p.v_phi = state.teacher.velocity(p.zt, batch.t);
    const Tensor z_down = step_along(p.zt, p.v_phi, col_diff(batch.t, batch.t_down));
    const Tensor ema_pred = x0_predict(state.ema, z_down, batch.t_down);
    p.cd_target = mixed_cd_target(batch.z0, ema_pred, batch.t, sched.t_trunc);
    return p;
}

}  // namespace

void LossSchedule::validate() const {
    if (lambda_gan < 0 || lambda_rf < 0 || lambda_bi < 0) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    if (n_gan < 0 || n_rf < 0 || n_bi < 0) {
        throw std::invalid_argument("warm-up iteration counts must be >= 0");
    }
    check_range("t_trunc", t_trunc, 0.0, 1.0);
    check_range("t_skip", t_skip, 0.0, 1.0);
    check_range("ema_mu", ema_mu, 0.0, 1.0);
    if (r1_gamma < 0) throw std::invalid_argument("r1_gamma must be >= 0");
}

DistillState DistillState::init(const VelocityNet& teacher, const DistillConfig& cfg) {
    cfg.schedule.validate();
    if (cfg.lr_student <= 0 || cfg.lr_disc <= 0) {
        throw std::invalid_argument("learning rates must be > 0");
    }
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.iters < 0) throw std::invalid_argument("iters must be >= 0");
    if (teacher.conditional()) {
        throw std::invalid_argument("distillation supports unconditional teachers only");
    }
    DistillState s;
    s.rng = Rng(cfg.seed);
    s.teacher = teacher;
    s.student = teacher;  // theta starts as an exact copy of phi
    s.ema = teacher;
    DiscriminatorConfig dc;
    dc.data_dim = teacher.config().data_dim;
    dc.hidden = cfg.disc_hidden;
    dc.depth = cfg.disc_depth;
    s.disc = Discriminator(dc, s.rng);
    s.opt_student = AdamState(AdamConfig{});
    s.opt_disc = AdamState(AdamConfig{});
    s.iter = 0;
    return s;
}

DistillBatch DistillBatch::draw(const Dataset& data, std::int64_t batch_size, double t_skip,
                                Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    DistillBatch b;
    b.z0 = data.sample(batch_size, rng).first;
    b.z1 = rng.normal_matrix(batch_size, b.z0.cols());
    b.t = Tensor({batch_size, 1});
    for (std::int64_t i = 0; i < batch_size; ++i) b.t[i] = 1.0 - rng.uniform01();  // (0,1]
    auto skips = time_skip_batch(b.t, t_skip, rng);
    b.t_down = std::move(skips.first);
    b.t_up = std::move(skips.second);
    b.t_rf = Tensor({batch_size, 1});
    for (std::int64_t i = 0; i < batch_size; ++i) b.t_rf[i] = 1.0 - rng.uniform01();
    return b;
}

void DistillBatch::validate() const {
    if (z0.rank() != 2 || !z0.same_shape(z1)) {
        throw std::invalid_argument("distill batch: z0/z1 must be matching [B,D] matrices");
    }
    const std::int64_t b = z0.rows();
    check_time_col("t", t, b);
    check_time_col("t_down", t_down, b);
    check_time_col("t_up", t_up, b);
    check_time_col("t_rf", t_rf, b);
    for (std::int64_t i = 0; i < b; ++i) {
        if (t_down[i] > t[i] || t_up[i] < t[i]) {
            throw std::invalid_argument("distill batch: need t_down <= t <= t_up at row " +
                                        std::to_string(i));
        }
    }
    check_finite(z0, "distill batch z0");
    check_finite(z1, "distill batch z1");
}

Tensor x0_predict(const VelocityNet& net, const Tensor& z_t, const Tensor& t) {
    check_time_col("x0_predict", t, z_t.rows());
    return step_along(z_t, net.velocity(z_t, t), t);
}

Tensor x0_predict(const VelocityNet& net, const Tensor& z_t, double t) {
    check_range("x0_predict time", t, 0.0, 1.0);
    const Tensor v = net.velocity(z_t, t);
    Tensor out = z_t;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= t * v[i];
    return out;
}

Tensor teacher_step(const VelocityNet& teacher, const Tensor& z_t, const Tensor& t_from,
                    const Tensor& t_to) {
    check_time_col("teacher_step t_from", t_from, z_t.rows());
    check_time_col("teacher_step t_to", t_to, z_t.rows());
    return step_along(z_t, teacher.velocity(z_t, t_from), col_diff(t_from, t_to));
}

Tensor teacher_step(const VelocityNet& teacher, const Tensor& z_t, double t_from, double t_to) {
    check_range("teacher_step t_from", t_from, 0.0, 1.0);
    check_range("teacher_step t_to", t_to, 0.0, 1.0);
    const Tensor v = teacher.velocity(z_t, t_from);
    const double dt = t_from - t_to;
    Tensor out = z_t;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= dt * v[i];
    return out;
}

std::pair<double, double> time_skip(double t_i, double t_skip, Rng& rng) {
    check_range("time_skip t", t_i, 0.0, 1.0);
    check_range("time_skip width", t_skip, 0.0, 1.0);
    const double reach_down = std::min(t_i, t_skip);
    const double reach_up = std::min(1.0 - t_i, t_skip);
    const double d_down = rng.uniform01() * reach_down;
    const double d_up = rng.uniform01() * reach_up;
    return {t_i - d_down, t_i + d_up};
}

std::pair<Tensor, Tensor> time_skip_batch(const Tensor& t, double t_skip, Rng& rng) {
    check_time_col("time_skip_batch", t, t.rows());
    Tensor down = t, up = t;
    for (std::int64_t i = 0; i < t.size(); ++i) {
        auto [lo, hi] = time_skip(t[i], t_skip, rng);
        down[i] = lo;
        up[i] = hi;
    }
    return {down, up};
}

double loss_cd(const DistillState& state, const DistillBatch& batch, const LossSchedule& sched) {
    batch.validate();
    const CdParts p = cd_parts(state, batch, sched);
    return mean_sq_diff(p.cd_target, x0_predict(state.student, p.zt, batch.t));
}

std::pair<double, double> loss_gan(const DistillState& state, const Tensor& z1_batch,
                                   const Tensor& z0_batch) {
    const Tensor fake = x0_predict(state.student, z1_batch, 1.0);
    const Tensor d_fake = state.disc.logits(fake);
    const Tensor d_real = state.disc.logits(z0_batch);
    double gen = 0.0, on_fake = 0.0, on_real = 0.0;
    for (std::int64_t i = 0; i < d_fake.size(); ++i) {
        gen += stable_softplus(-d_fake[i]);
        on_fake += stable_softplus(d_fake[i]);
    }
    for (std::int64_t i = 0; i < d_real.size(); ++i) on_real += stable_softplus(-d_real[i]);
    const double nf = static_cast<double>(d_fake.size());
    const double nr = static_cast<double>(d_real.size());
    return {gen / nf, on_real / nr + on_fake / nf};
}

double loss_rf(const DistillState& state, const Tensor& z1_batch, const Tensor& t_rf) {
    check_time_col("loss_rf", t_rf, z1_batch.rows());
    const Tensor x_hat = x0_predict(state.student, z1_batch, 1.0);  // stop-grad anchor
    Tensor z_hat = x_hat;
    const std::int64_t rows = z1_batch.rows(), cols = z1_batch.cols();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double tr = t_rf[r];
        for (std::int64_t c = 0; c < cols; ++c) {
            z_hat.at(r, c) = (1.0 - tr) * x_hat.at(r, c) + tr * z1_batch.at(r, c);
        }
    }
    return mean_sq_diff(x_hat, x0_predict(state.student, z_hat, t_rf));
}

double loss_bi(const DistillState& state, const DistillBatch& batch, const LossSchedule& sched) {
    batch.validate();
    (void)sched;
    const Tensor zt = interpolate(batch.z0, batch.z1, batch.t);
    const Tensor v_phi = state.teacher.velocity(zt, batch.t);
    const Tensor z_up = step_along(zt, v_phi, col_diff(batch.t, batch.t_up));
    const Tensor target = x0_predict(state.ema, z_up, batch.t_up);
    return mean_sq_diff(target, x0_predict(state.student, zt, batch.t));
}

void ema_update(std::map<std::string, Tensor>& ema_params,
                const std::map<std::string, Tensor>& student_params, double mu) {
    check_range("ema_mu", mu, 0.0, 1.0);
    if (ema_params.size() != student_params.size()) {
        throw std::invalid_argument("ema_update: parameter sets differ in size");
    }
    for (auto& [name, e] : ema_params) {
        auto it = student_params.find(name);
        if (it == student_params.end()) {
            throw std::invalid_argument("ema_update: missing student param " + name);
        }
        const Tensor& s = it->second;
        if (!e.same_shape(s)) {
            throw std::invalid_argument("ema_update: shape mismatch for " + name);
        }
        for (std::int64_t i = 0; i < e.size(); ++i) e[i] = mu * e[i] + (1.0 - mu) * s[i];
    }
}

namespace {

// d(silu)/dx = s(x) * (1 + x * (1 - s(x))), as a graph expression.
Var silu_deriv(Var pre) {
    Var s = sigmoid(pre);
    return mul(s, add_scalar(mul(pre, add_scalar(neg(s), 1.0)), 1.0));
}

// Forward through the discriminator keeping pre-activations, then a manual
// reverse sweep building grad_x D(x) as a graph expression in the weights.
Var disc_input_grad(Graph& g, const Discriminator& disc, const std::map<std::string, Var>& dv,
                    Var x) {
    const std::int64_t depth = disc.config().depth;
    std::vector<Var> pre;
    Var h = add(matmul(x, dv.at("w0")), dv.at("b0"));
    pre.push_back(h);
    for (std::int64_t l = 1; l <= depth; ++l) {
        const std::string suffix = std::to_string(l);
        h = add(matmul(silu(h), dv.at("w" + suffix)), dv.at("b" + suffix));
        pre.push_back(h);
    }
    const std::int64_t rows = g.value(x).rows();
    Var grad = g.constant(Tensor::full({rows, 1}, 1.0));
    for (std::int64_t l = depth; l >= 1; --l) {
        grad = matmul(grad, transpose_op(dv.at("w" + std::to_string(l))));
        grad = mul(grad, silu_deriv(pre[static_cast<std::size_t>(l - 1)]));
    }
    return matmul(grad, transpose_op(dv.at("w0")));
}

void check_loss_finite(double v, const char* what, std::int64_t iter) {
    if (!std::isfinite(v) || std::abs(v) > 1e6) {
        throw DivergenceError(std::string(what) + " diverged at iteration " +
                              std::to_string(iter) + " (value " + std::to_string(v) + ")");
    }
}

}  // namespace

std::pair<double, double> disc_loss_grads(const Discriminator& disc, const Tensor& fake,
                                          const Tensor& real, double r1_gamma,
                                          std::map<std::string, Tensor>& grads) {
    if (r1_gamma < 0) throw std::invalid_argument("r1_gamma must be >= 0");
    Graph g;
    const auto dv = disc.bind(g, true);
    Var real_in = g.input("real", real);
    Var fake_in = g.input("fake", fake);
    Var adv = add(mean(softplus(neg(disc.logits_graph(g, dv, real_in)))),
                  mean(softplus(disc.logits_graph(g, dv, fake_in))));
    Var objective = adv;
    if (r1_gamma > 0) {
        Var r1 = mean(row_sum(square(disc_input_grad(g, disc, dv, real_in))));
        objective = add(objective, scale(r1, 0.5 * r1_gamma));
    }
    g.mark_output("objective", objective);
    grads = g.backward("objective");
    return {g.value(adv).item(), g.value(objective).item()};
}

double lr_decay_factor(const DistillConfig& cfg, std::int64_t iter) {
    if (cfg.lr_decay_from < 0 || iter < cfg.lr_decay_from || cfg.iters <= cfg.lr_decay_from) {
        return 1.0;
    }
    const double f = 1.0 - static_cast<double>(iter - cfg.lr_decay_from) /
                               static_cast<double>(cfg.iters - cfg.lr_decay_from);
    return f > 0.0 ? f : 0.0;
}

DistillLosses student_objective(const DistillState& state, const DistillBatch& batch,
                                const DistillConfig& cfg, std::map<std::string, Tensor>* grads,
                                Tensor* fake_out) {
    const LossSchedule& sched = cfg.schedule;
    sched.validate();
    batch.validate();
    if (batch.z0.cols() != state.student.config().data_dim) {
        throw std::invalid_argument("distill: batch dimension does not match the nets");
    }

    DistillLosses out;
    out.gan_active = sched.lambda_gan > 0 && state.iter >= sched.n_gan;
    out.rf_active = sched.lambda_rf > 0 && state.iter >= sched.n_rf;
    out.bi_active = sched.lambda_bi > 0 && state.iter >= sched.n_bi;

    const std::int64_t b = batch.batch();
    const std::int64_t time_dim = state.student.config().time_dim;
    const double inv_b = 1.0 / static_cast<double>(b);

    // Targets come from the frozen teacher and the EMA net; only the student
    // is differentiated through.
    const CdParts parts = cd_parts(state, batch, sched);
    Tensor bi_target;
    if (out.bi_active) {
        const Tensor z_up = step_along(parts.zt, parts.v_phi, col_diff(batch.t, batch.t_up));
        bi_target = x0_predict(state.ema, z_up, batch.t_up);
    }

    Graph g;
    const auto sv = state.student.bind(g, true);
    Var zt_in = g.input("zt", parts.zt);
    Var temb = g.input("temb", time_embed_batch(batch.t, time_dim));
    Var t_col = g.constant(batch.t);
    Var f_student = sub(zt_in, mul(state.student.velocity_graph(g, sv, zt_in, temb), t_col));
    Var cd = scale(sum(square(sub(g.constant(parts.cd_target), f_student))), inv_b);
    out.cd = g.value(cd).item();
    Var total = cd;

    Var fake{};  // f_theta(z1, 1), shared by the adversarial and straightening terms
    if (out.gan_active || out.rf_active) {
        Var z1_in = g.input("z1", batch.z1);
        Var temb1 = g.input("temb1", time_embed_batch(Tensor::full({b, 1}, 1.0), time_dim));
        fake = sub(z1_in, state.student.velocity_graph(g, sv, z1_in, temb1));
        if (out.gan_active) {
            const auto dv = state.disc.bind(g, false);  // frozen inside the student step
            Var gen = mean(softplus(neg(state.disc.logits_graph(g, dv, fake))));
            out.gan_gen = g.value(gen).item();
            total = add(total, scale(gen, sched.lambda_gan));
        }
        if (out.rf_active) {
            Var x_hat = stop_grad(fake);
            Var t_rf_col = g.constant(batch.t_rf);
            Tensor one_minus = batch.t_rf;
            for (std::int64_t i = 0; i < one_minus.size(); ++i) one_minus[i] = 1.0 - one_minus[i];
            Var z_hat = add(mul(x_hat, g.constant(one_minus)), mul(z1_in, t_rf_col));
            Var temb_rf = g.input("temb_rf", time_embed_batch(batch.t_rf, time_dim));
            Var f_rf =
                sub(z_hat, mul(state.student.velocity_graph(g, sv, z_hat, temb_rf), t_rf_col));
            Var rf = scale(sum(square(sub(x_hat, f_rf))), inv_b);
            out.rf = g.value(rf).item();
            total = add(total, scale(rf, sched.lambda_rf));
        }
        if (fake_out) *fake_out = g.value(fake);
    }
    if (out.bi_active) {
        Var bi = scale(sum(square(sub(g.constant(bi_target), f_student))), inv_b);
        out.bi = g.value(bi).item();
        total = add(total, scale(bi, sched.lambda_bi));
    }
    g.mark_output("total", total);
    out.total = g.value(total).item();
    if (grads) *grads = g.backward("total");
    return out;
}

DistillLosses distill_step(DistillState& state, const DistillBatch& batch,
                           const DistillConfig& cfg) {
    std::map<std::string, Tensor> student_grads;
    Tensor fake;
    DistillLosses out = student_objective(state, batch, cfg, &student_grads, &fake);
    check_loss_finite(out.total, "student loss", state.iter);

    const double lr_factor = lr_decay_factor(cfg, state.iter);
    state.opt_student.step(state.student.params(), student_grads, cfg.lr_student * lr_factor);

    if (out.gan_active) {
        std::map<std::string, Tensor> disc_grads;
        const auto [adv, objective] =
            disc_loss_grads(state.disc, fake, batch.z0, cfg.schedule.r1_gamma, disc_grads);
        out.gan_disc = adv;
        check_loss_finite(objective, "discriminator loss", state.iter);
        state.opt_disc.step(state.disc.params(), disc_grads, cfg.lr_disc * lr_factor);
    }

    ema_update(state.ema.params(), state.student.params(), cfg.schedule.ema_mu);
    state.iter += 1;
    return out;
}

}  // namespace flowlab
