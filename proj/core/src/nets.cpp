#include "flowlab/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

namespace {

double sigmoid_val(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> embed_freqs(std::int64_t dim) {
    const std::int64_t half = dim / 2;
    std::vector<double> w(static_cast<std::size_t>(half), 1.0);
    for (std::int64_t k = 1; k < half; ++k)
        w[static_cast<std::size_t>(k)] =
            std::pow(100.0, static_cast<double>(k) / static_cast<double>(half - 1));
    return w;
}

void check_embed_args(double t, std::int64_t dim) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("time_embed: t outside [0,1]: " + std::to_string(t));
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("time_embed: dim must be even and positive, got " +
                                    std::to_string(dim));
}

// names w0,b0,... shared by both net kinds
std::string wname(std::int64_t l) { return "w" + std::to_string(l); }
std::string bname(std::int64_t l) { return "b" + std::to_string(l); }

void init_mlp_params(std::map<std::string, Tensor>& params,
                     const std::vector<std::int64_t>& widths, bool zero_init_last, Rng& rng) {
    const std::int64_t n_layers = static_cast<std::int64_t>(widths.size()) - 1;
    for (std::int64_t l = 0; l < n_layers; ++l) {
        const std::int64_t fan_in = widths[static_cast<std::size_t>(l)];
        const std::int64_t fan_out = widths[static_cast<std::size_t>(l + 1)];
        Tensor w({fan_in, fan_out});
        if (l == n_layers - 1 && zero_init_last) {
            // keep zeros
        } else {
            rng.fill_normal(w);
            const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& x : w.values()) x *= s;
        }
        params.emplace(wname(l), std::move(w));
        params.emplace(bname(l), Tensor::zeros({1, fan_out}));
    }
}

Tensor mlp_apply(const std::map<std::string, Tensor>& params, std::int64_t n_layers,
                 const Tensor& x) {
    Tensor h = matmul(x, params.at(wname(0)));
    add_row_inplace(h, params.at(bname(0)));
    for (std::int64_t l = 1; l < n_layers; ++l) {
        for (double& v : h.values()) v *= sigmoid_val(v);  // silu
        Tensor next = matmul(h, params.at(wname(l)));
        add_row_inplace(next, params.at(bname(l)));
        h = std::move(next);
    }
    return h;
}

Var mlp_graph(Graph& g, const std::map<std::string, Var>& vars, std::int64_t n_layers, Var x) {
    Var h = matmul(x, vars.at(wname(0))) + vars.at(bname(0));
    for (std::int64_t l = 1; l < n_layers; ++l)
        h = matmul(silu(h), vars.at(wname(l))) + vars.at(bname(l));
    return h;
}

std::int64_t count_params(const std::map<std::string, Tensor>& params) {
    std::int64_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

std::map<std::string, Var> bind_params(const std::map<std::string, Tensor>& params, Graph& g,
                                       bool trainable) {
    std::map<std::string, Var> vars;
    for (const auto& [name, t] : params)
        vars.emplace(name, trainable ? g.param(name, t) : g.constant(t));
    return vars;
}

// expands a scalar t to a [rows,1] column, validates a matching column shape
Tensor time_column(const Tensor& t, std::int64_t rows) {
    if (t.size() == 1) return Tensor::full({rows, 1}, t.item());
    if (t.rank() == 2 && t.cols() == 1 && t.rows() == rows) return t;
    throw std::invalid_argument("velocity: t must be scalar or [batch,1], got " +
                                shape_str(t.shape()));
}

}  // namespace

Tensor time_embed(double t, std::int64_t dim) {
    check_embed_args(t, dim);
    const auto freqs = embed_freqs(dim);
    Tensor out({dim});
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        out[static_cast<std::int64_t>(2 * k)] = std::sin(freqs[k] * t);
        out[static_cast<std::int64_t>(2 * k + 1)] = std::cos(freqs[k] * t);
    }
    return out;
}

Tensor time_embed_batch(const Tensor& t, std::int64_t dim) {
    if (t.rank() != 2 || t.cols() != 1)
        throw std::invalid_argument("time_embed_batch: want [batch,1], got " +
                                    shape_str(t.shape()));
    check_embed_args(0.0, dim);
    const auto freqs = embed_freqs(dim);
    Tensor out({t.rows(), dim});
    for (std::int64_t r = 0; r < t.rows(); ++r) {
        const double tv = t.at(r, 0);
        if (!(tv >= 0.0 && tv <= 1.0))
            throw std::invalid_argument("time_embed_batch: t outside [0,1]: " +
                                        std::to_string(tv));
        for (std::size_t k = 0; k < freqs.size(); ++k) {
            out.at(r, static_cast<std::int64_t>(2 * k)) = std::sin(freqs[k] * tv);
            out.at(r, static_cast<std::int64_t>(2 * k + 1)) = std::cos(freqs[k] * tv);
        }
    }
    return out;
}

VelocityNet::VelocityNet(VelocityNetConfig cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.data_dim < 1 || cfg_.hidden < 1 || cfg_.depth < 1)
        throw std::invalid_argument("velocity net: bad width config");
    if (cfg_.time_dim < 2 || cfg_.time_dim % 2 != 0)
        throw std::invalid_argument("velocity net: time_dim must be even and positive");
    if (cfg_.n_classes < 0)
        throw std::invalid_argument("velocity net: negative n_classes");
    std::vector<std::int64_t> widths;
    widths.push_back(cfg_.data_dim + cfg_.time_dim + (conditional() ? cfg_.class_dim : 0));
    for (std::int64_t l = 0; l < cfg_.depth; ++l) widths.push_back(cfg_.hidden);
    widths.push_back(cfg_.data_dim);
    init_mlp_params(params_, widths, cfg_.zero_init_last, rng);
    if (conditional()) {
        Tensor table({cfg_.n_classes + 1, cfg_.class_dim});
        rng.fill_normal(table);
        params_.emplace("class_embed", std::move(table));
    }
}

std::int64_t VelocityNet::param_count() const { return count_params(params_); }

namespace {

// maps user labels (kNullClass or 0..n-1) to class-table rows
std::vector<std::int64_t> table_rows(const std::vector<std::int64_t>& labels,
                                     std::int64_t n_classes, std::int64_t batch) {
    if (static_cast<std::int64_t>(labels.size()) != batch)
        throw std::invalid_argument("velocity: conditional net needs one label per row (got " +
                                    std::to_string(labels.size()) + " for batch " +
                                    std::to_string(batch) + "); use kNullClass for the null token");
    std::vector<std::int64_t> rows(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::int64_t c = labels[i];
        if (c == kNullClass) {
            rows[i] = n_classes;
        } else if (c >= 0 && c < n_classes) {
            rows[i] = c;
        } else {
            throw std::invalid_argument("velocity: class " + std::to_string(c) +
                                        " outside [0," + std::to_string(n_classes) + ")");
        }
    }
    return rows;
}

}  // namespace

Tensor VelocityNet::velocity(const Tensor& z, const Tensor& t,
                             const std::vector<std::int64_t>& labels) const {
    if (params_.empty()) throw std::runtime_error("velocity: net not initialized");
    if (z.rank() != 2 || z.cols() != cfg_.data_dim)
        throw std::invalid_argument("velocity: z must be [batch," +
                                    std::to_string(cfg_.data_dim) + "], got " +
                                    shape_str(z.shape()));
    if (!conditional() && !labels.empty())
        throw std::invalid_argument("velocity: unconditional net given class labels");
    const Tensor tcol = time_column(t, z.rows());
    Tensor x = concat_cols(z, time_embed_batch(tcol, cfg_.time_dim));
    if (conditional()) {
        const auto rows = table_rows(labels, cfg_.n_classes, z.rows());
        const Tensor& table = params_.at("class_embed");
        Tensor emb({z.rows(), cfg_.class_dim});
        for (std::int64_t r = 0; r < z.rows(); ++r)
            for (std::int64_t c = 0; c < cfg_.class_dim; ++c)
                emb.at(r, c) = table.at(rows[static_cast<std::size_t>(r)], c);
        x = concat_cols(x, emb);
    }
    return mlp_apply(params_, cfg_.depth + 1, x);
}

Tensor VelocityNet::velocity(const Tensor& z, double t,
                             const std::vector<std::int64_t>& labels) const {
    return velocity(z, Tensor::scalar(t), labels);
}

std::map<std::string, Var> VelocityNet::bind(Graph& g, bool trainable) const {
    return bind_params(params_, g, trainable);
}

Var VelocityNet::velocity_graph(Graph& g, const std::map<std::string, Var>& vars, Var z,
                                Var t_embed, const std::vector<std::int64_t>& labels) const {
    if (!conditional() && !labels.empty())
        throw std::invalid_argument("velocity: unconditional net given class labels");
    Var x = concat_cols(z, t_embed);
    if (conditional()) {
        const auto rows = table_rows(labels, cfg_.n_classes, g.value(z).rows());
        x = concat_cols(x, rows_gather(vars.at("class_embed"), rows));
    }
    return mlp_graph(g, vars, cfg_.depth + 1, x);
}

Discriminator::Discriminator(DiscriminatorConfig cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.data_dim < 1 || cfg_.hidden < 1 || cfg_.depth < 1)
        throw std::invalid_argument("discriminator: bad width config");
    std::vector<std::int64_t> widths;
    widths.push_back(cfg_.data_dim);
    for (std::int64_t l = 0; l < cfg_.depth; ++l) widths.push_back(cfg_.hidden);
    widths.push_back(1);
    init_mlp_params(params_, widths, /*zero_init_last=*/true, rng);
}

std::int64_t Discriminator::param_count() const { return count_params(params_); }

Tensor Discriminator::logits(const Tensor& z) const {
    if (params_.empty()) throw std::runtime_error("discriminate: net not initialized");
    if (z.rank() != 2 || z.cols() != cfg_.data_dim)
        throw std::invalid_argument("discriminate: z must be [batch," +
                                    std::to_string(cfg_.data_dim) + "], got " +
                                    shape_str(z.shape()));
    return mlp_apply(params_, cfg_.depth + 1, z);
}

double Discriminator::discriminate(const Tensor& point) const {
    Tensor row({1, cfg_.data_dim});
    if (point.rank() == 1 && point.size() == cfg_.data_dim) {
        for (std::int64_t k = 0; k < point.size(); ++k) row.at(0, k) = point[k];
    } else if (point.rank() == 2 && point.rows() == 1 && point.cols() == cfg_.data_dim) {
        row = point;
    } else {
        throw std::invalid_argument("discriminate: point must have dim " +
                                    std::to_string(cfg_.data_dim) + ", got " +
                                    shape_str(point.shape()));
    }
    return logits(row).item();
}

std::map<std::string, Var> Discriminator::bind(Graph& g, bool trainable) const {
    return bind_params(params_, g, trainable);
}

Var Discriminator::logits_graph(Graph& g, const std::map<std::string, Var>& vars, Var z) const {
    return mlp_graph(g, vars, cfg_.depth + 1, z);
}

}  // namespace flowlab
