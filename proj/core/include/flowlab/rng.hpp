#pragma once

#include "flowlab/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace flowlab {

// Seeded RNG with a fully defined mapping from engine output to doubles, so
// that streams are reproducible and serializable (std::*_distribution state
// is implementation-defined; this class avoids them).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // standard normal via Box-Muller; the spare value is cached
    double normal();

    void fill_normal(Tensor& t);
    Tensor normal_matrix(std::int64_t rows, std::int64_t cols);

    std::string save_state() const;
    void load_state(const std::string& s);

    bool operator==(const Rng& o) const {
        return engine_ == o.engine_ && has_spare_ == o.has_spare_ && spare_ == o.spare_;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flowlab
