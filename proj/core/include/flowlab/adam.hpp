#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "flowlab/tensor.hpp"

namespace flowlab {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction.  Moments are keyed by parameter name and
// created lazily on the first step; the whole state round-trips through
// checkpoints via the accessors.
class AdamState {
  public:
    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

    // One update, in place.  grads must supply a same-shaped, finite gradient
    // for every param.
    void step(std::map<std::string, Tensor>& params,
              const std::map<std::string, Tensor>& grads, double lr);

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    const std::map<std::string, Tensor>& m() const { return m_; }
    const std::map<std::string, Tensor>& v() const { return v_; }

    void restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                 std::int64_t step_count);

  private:
    AdamConfig cfg_;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
    std::int64_t step_count_ = 0;
};

}  // namespace flowlab
