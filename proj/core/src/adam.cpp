#include "flowlab/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

void AdamState::step(std::map<std::string, Tensor>& params,
                     const std::map<std::string, Tensor>& grads, double lr) {
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw std::invalid_argument("adam: missing grad for param '" + name + "'");
        if (!git->second.same_shape(p))
            throw std::invalid_argument("adam: grad shape " + shape_str(git->second.shape()) +
                                        " does not match param '" + name + "' " +
                                        shape_str(p.shape()));
        if (!git->second.all_finite())
            throw std::invalid_argument("adam: non-finite grad for param '" + name + "'");
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (auto& [name, p] : params) {
        const Tensor& g = grads.at(name);
        Tensor& m = m_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
        if (!m.same_shape(p) || !v.same_shape(p))
            throw std::invalid_argument("adam: restored moment shape does not match param '" +
                                        name + "'");
        for (std::int64_t k = 0; k < p.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamState::restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                        std::int64_t step_count) {
    if (step_count < 0) throw std::invalid_argument("adam: negative step count");
    m_ = std::move(m);
    v_ = std::move(v);
    step_count_ = step_count;
}

}  // namespace flowlab
