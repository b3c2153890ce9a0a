#include "flowlab/datasets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flowlab {

namespace {

constexpr double kGauss8Sigma = 0.1;
constexpr double kGauss8Radius = 2.0;

void gen_gauss8(std::int64_t n, Rng& rng, Tensor& pts, std::vector<std::int64_t>& labels) {
    const auto centers = gauss8_centers();
    labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = rng.uniform_int(0, 7);
        const auto& [cx, cy] = centers[static_cast<std::size_t>(k)];
        pts.at(i, 0) = cx + kGauss8Sigma * rng.normal();
        pts.at(i, 1) = cy + kGauss8Sigma * rng.normal();
        labels[static_cast<std::size_t>(i)] = k;
    }
}

void gen_moons(std::int64_t n, Rng& rng, Tensor& pts, std::vector<std::int64_t>& labels) {
    // two interleaved half circles, recentered and scaled to roughly [-2,2]
    labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = rng.uniform_int(0, 1);
        const double a = rng.uniform01() * std::numbers::pi;
        double x, y;
        if (k == 0) {
            x = std::cos(a);
            y = std::sin(a);
        } else {
            x = 1.0 - std::cos(a);
            y = 0.5 - std::sin(a);
        }
        pts.at(i, 0) = 2.0 * (x - 0.5) + 0.1 * rng.normal();
        pts.at(i, 1) = 2.0 * (y - 0.25) + 0.1 * rng.normal();
        labels[static_cast<std::size_t>(i)] = k;
    }
}

void gen_checkerboard(std::int64_t n, Rng& rng, Tensor& pts) {
    // the 8 filled cells of a 4x4 board over [-2,2]^2
    for (std::int64_t i = 0; i < n; ++i) {
        const auto kx = rng.uniform_int(0, 3);
        const auto half = rng.uniform_int(0, 1);
        const auto ky = (kx % 2 == 0) ? 2 * half : 2 * half + 1;
        pts.at(i, 0) = static_cast<double>(kx) - 2.0 + rng.uniform01();
        pts.at(i, 1) = static_cast<double>(ky) - 2.0 + rng.uniform01();
    }
}

void gen_spiral(std::int64_t n, Rng& rng, Tensor& pts) {
    // single Archimedean arm reaching radius 2, light Gaussian jitter
    for (std::int64_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        const double a = 3.0 * std::numbers::pi * u;
        const double r = 2.0 * u;
        pts.at(i, 0) = r * std::cos(a) + 0.05 * rng.normal();
        pts.at(i, 1) = r * std::sin(a) + 0.05 * rng.normal();
    }
}

}  // namespace

std::vector<std::pair<double, double>> gauss8_centers() {
    std::vector<std::pair<double, double>> c;
    for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 8.0;
        c.emplace_back(kGauss8Radius * std::cos(a), kGauss8Radius * std::sin(a));
    }
    return c;
}

const std::vector<std::string>& Dataset::names() {
    static const std::vector<std::string> kNames{"gauss8", "moons", "checkerboard", "spiral",
                                                 "point_mass"};
    return kNames;
}

Dataset Dataset::by_name(const std::string& name) {
    if (name == "gauss8") return Dataset(name, 8);
    if (name == "moons") return Dataset(name, 2);
    if (name == "checkerboard" || name == "spiral" || name == "point_mass")
        return Dataset(name, 0);
    std::string valid;
    for (const auto& n : names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown dataset '" + name + "' (valid: " + valid + ")");
}

std::pair<Tensor, std::vector<std::int64_t>> Dataset::sample(std::int64_t n,
                                                             std::uint64_t seed) const {
    Rng rng(seed);
    return sample(n, rng);
}

std::pair<Tensor, std::vector<std::int64_t>> Dataset::sample(std::int64_t n, Rng& rng) const {
    if (n < 1) throw std::invalid_argument("dataset sample: n must be >= 1");
    Tensor pts({n, 2});
    std::vector<std::int64_t> labels;
    if (name_ == "gauss8") {
        gen_gauss8(n, rng, pts, labels);
    } else if (name_ == "moons") {
        gen_moons(n, rng, pts, labels);
    } else if (name_ == "checkerboard") {
        gen_checkerboard(n, rng, pts);
    } else if (name_ == "spiral") {
        gen_spiral(n, rng, pts);
    } else {
        // point_mass: all zeros already
    }
    return {std::move(pts), std::move(labels)};
}

Tensor encode(const Tensor& x) { return x; }
Tensor decode(const Tensor& z) { return z; }

}  // namespace flowlab
