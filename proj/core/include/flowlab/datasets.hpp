#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Deterministic 2D toy generators.  Labeled sets (gauss8, moons) return one
// class id per point; the rest return an empty label vector.
class Dataset {
  public:
    static Dataset by_name(const std::string& name);  // unknown name -> error listing valid ones
    static const std::vector<std::string>& names();

    const std::string& name() const { return name_; }
    std::int64_t dim() const { return 2; }
    std::int64_t n_classes() const { return n_classes_; }

    // Same (name, n, seed) is bit-identical.
    std::pair<Tensor, std::vector<std::int64_t>> sample(std::int64_t n, std::uint64_t seed) const;
    // Draws from a caller-owned stream (used inside training loops).
    std::pair<Tensor, std::vector<std::int64_t>> sample(std::int64_t n, Rng& rng) const;

  private:
    Dataset(std::string name, std::int64_t n_classes)
        : name_(std::move(name)), n_classes_(n_classes) {}
    std::string name_;
    std::int64_t n_classes_ = 0;
};

// Identity stand-ins for a latent encoder/decoder pair.
Tensor encode(const Tensor& x);
Tensor decode(const Tensor& z);

// Centers of the gauss8 mixture (radius-2 circle, 8 components).
std::vector<std::pair<double, double>> gauss8_centers();

}  // namespace flowlab
