#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowlab/graph.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Class label for the null (unconditional) token in conditional nets.
inline constexpr std::int64_t kNullClass = -1;

// Sinusoidal features [sin(w_k t), cos(w_k t)] with geometrically spaced
// frequencies from 1 to 100.  dim must be even; t must lie in [0,1].
Tensor time_embed(double t, std::int64_t dim);
// Batch version: t is [B,1] (or {1}), returns [B,dim].
Tensor time_embed_batch(const Tensor& t, std::int64_t dim);

struct VelocityNetConfig {
    std::int64_t data_dim = 2;
    std::int64_t hidden = 128;
    std::int64_t depth = 4;  // hidden layers
    std::int64_t time_dim = 32;
    std::int64_t class_dim = 16;
    std::int64_t n_classes = 0;  // 0 = unconditional
    bool zero_init_last = true;
};

// Velocity-field MLP v(z, t[, c]).  Input is the concatenation of z, the time
// embedding and (for conditional nets) a learned class embedding whose table
// has n_classes + 1 rows, the last row being the null token.
class VelocityNet {
  public:
    VelocityNet() = default;
    VelocityNet(VelocityNetConfig cfg, Rng& rng);

    const VelocityNetConfig& config() const { return cfg_; }
    bool conditional() const { return cfg_.n_classes > 0; }
    std::int64_t param_count() const;

    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    // Fast (gradient-free) evaluation.  z is [B,D]; t is [B,1] or a scalar
    // applied to every row; labels must be empty for unconditional nets and
    // one per row (kNullClass for the null token) for conditional nets.
    Tensor velocity(const Tensor& z, const Tensor& t,
                    const std::vector<std::int64_t>& labels = {}) const;
    Tensor velocity(const Tensor& z, double t,
                    const std::vector<std::int64_t>& labels = {}) const;

    // Graph path.  bind() registers every parameter once (as trainable params
    // or frozen constants); velocity_graph() can then be applied any number of
    // times within the same graph.  t_embed is the precomputed time embedding
    // (time is never differentiated through).
    std::map<std::string, Var> bind(Graph& g, bool trainable) const;
    Var velocity_graph(Graph& g, const std::map<std::string, Var>& vars, Var z, Var t_embed,
                       const std::vector<std::int64_t>& labels = {}) const;

  private:
    VelocityNetConfig cfg_;
    std::map<std::string, Tensor> params_;
};

struct DiscriminatorConfig {
    std::int64_t data_dim = 2;
    std::int64_t hidden = 128;
    std::int64_t depth = 3;  // hidden layers
};

// Small MLP producing one realness logit per point.
class Discriminator {
  public:
    Discriminator() = default;
    Discriminator(DiscriminatorConfig cfg, Rng& rng);

    const DiscriminatorConfig& config() const { return cfg_; }
    std::int64_t param_count() const;

    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    Tensor logits(const Tensor& z) const;  // [B,D] -> [B,1]
    double discriminate(const Tensor& point) const;

    std::map<std::string, Var> bind(Graph& g, bool trainable) const;
    Var logits_graph(Graph& g, const std::map<std::string, Var>& vars, Var z) const;

  private:
    DiscriminatorConfig cfg_;
    std::map<std::string, Tensor> params_;
};

}  // namespace flowlab
