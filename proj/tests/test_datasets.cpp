#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "flowlab/datasets.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

using flowlab::Dataset;
using flowlab::Rng;
using flowlab::Tensor;

TEST_CASE("the registry exposes the five generators and rejects unknown names") {
    const auto& names = Dataset::names();
    for (const char* expected : {"gauss8", "moons", "checkerboard", "spiral", "point_mass"}) {
        CHECK(std::find(names.begin(), names.end(), expected) != names.end());
    }
    for (const auto& name : names) {
        const Dataset ds = Dataset::by_name(name);
        CHECK(ds.name() == name);
        CHECK(ds.dim() == 2);
    }
    CHECK_THROWS_AS(Dataset::by_name("galaxy"), std::invalid_argument);
}

TEST_CASE("sampling is bit-identical for a fixed seed and fresh across seeds") {
    for (const auto& name : Dataset::names()) {
        const Dataset ds = Dataset::by_name(name);
        const auto [a, la] = ds.sample(257, 3);
        const auto [b, lb] = ds.sample(257, 3);
        REQUIRE(a.rows() == 257);
        REQUIRE(a.cols() == 2);
        CHECK(a.values() == b.values());
        CHECK(la == lb);
        if (name != "point_mass") {
            const auto [c, lc] = ds.sample(257, 4);
            CHECK(a.values() != c.values());
        }
    }
}

TEST_CASE("every generator stays finite inside a generous bounding box") {
    for (const auto& name : Dataset::names()) {
        const Dataset ds = Dataset::by_name(name);
        const auto [pts, labels] = ds.sample(4000, 0);
        for (std::int64_t k = 0; k < pts.size(); ++k) {
            CHECK(std::isfinite(pts[k]));
            CHECK(std::abs(pts[k]) < 10.0);
        }
    }
}

TEST_CASE("labeled sets return one class per point, unlabeled sets none") {
    for (const auto& name : Dataset::names()) {
        const Dataset ds = Dataset::by_name(name);
        const auto [pts, labels] = ds.sample(100, 1);
        if (ds.n_classes() > 0) {
            REQUIRE(labels.size() == 100);
            for (const auto l : labels) {
                CHECK(l >= 0);
                CHECK(l < ds.n_classes());
            }
        } else {
            CHECK(labels.empty());
        }
    }
    CHECK(Dataset::by_name("gauss8").n_classes() == 8);
}

TEST_CASE("mixture component means land on the circle of radius 2") {
    const Dataset ds = Dataset::by_name("gauss8");
    const auto centers = flowlab::gauss8_centers();
    REQUIRE(centers.size() == 8);
    for (const auto& [cx, cy] : centers) {
        CHECK(std::sqrt(cx * cx + cy * cy) == doctest::Approx(2.0).epsilon(1e-12));
    }

    const auto [pts, labels] = ds.sample(8000, 0);
    std::vector<double> sx(8, 0.0);
    std::vector<double> sy(8, 0.0);
    std::vector<std::int64_t> count(8, 0);
    for (std::int64_t i = 0; i < 8000; ++i) {
        const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        sx[l] += pts.at(i, 0);
        sy[l] += pts.at(i, 1);
        count[l] += 1;
    }
    for (std::size_t l = 0; l < 8; ++l) {
        REQUIRE(count[l] > 0);
        const double mx = sx[l] / static_cast<double>(count[l]);
        const double my = sy[l] / static_cast<double>(count[l]);
        CHECK(std::abs(mx - centers[l].first) < 0.02);
        CHECK(std::abs(my - centers[l].second) < 0.02);
    }

    // sigma = 0.1: every point hugs its component center.
    for (std::int64_t i = 0; i < 8000; ++i) {
        const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        const double dx = pts.at(i, 0) - centers[l].first;
        const double dy = pts.at(i, 1) - centers[l].second;
        CHECK(std::sqrt(dx * dx + dy * dy) < 0.6);
    }
}

TEST_CASE("moons forms two interleaved half circles with matching labels") {
    const Dataset ds = Dataset::by_name("moons");
    CHECK(ds.n_classes() == 2);
    const auto [pts, labels] = ds.sample(2000, 5);
    std::set<std::int64_t> seen(labels.begin(), labels.end());
    CHECK(seen.size() == 2);
    // The two moons separate vertically on average.
    double mean0 = 0.0;
    double mean1 = 0.0;
    std::int64_t n0 = 0;
    std::int64_t n1 = 0;
    for (std::int64_t i = 0; i < 2000; ++i) {
        if (labels[static_cast<std::size_t>(i)] == 0) {
            mean0 += pts.at(i, 1);
            ++n0;
        } else {
            mean1 += pts.at(i, 1);
            ++n1;
        }
    }
    CHECK(n0 > 0);
    CHECK(n1 > 0);
    CHECK(mean0 / static_cast<double>(n0) != mean1 / static_cast<double>(n1));
}

TEST_CASE("point mass collapses to a single location") {
    const Dataset ds = Dataset::by_name("point_mass");
    const auto [pts, labels] = ds.sample(64, 9);
    for (std::int64_t i = 1; i < 64; ++i) {
        CHECK(pts.at(i, 0) == pts.at(0, 0));
        CHECK(pts.at(i, 1) == pts.at(0, 1));
    }
}

TEST_CASE("stream sampling advances the caller's generator deterministically") {
    const Dataset ds = Dataset::by_name("spiral");
    Rng r1(7);
    Rng r2(7);
    const auto [a, la] = ds.sample(33, r1);
    const auto [b, lb] = ds.sample(33, r2);
    CHECK(a.values() == b.values());
    const auto [c, lc] = ds.sample(33, r1);  // stream moved on
    CHECK(a.values() != c.values());
    CHECK_THROWS_AS(ds.sample(0, r1), std::invalid_argument);
}

TEST_CASE("latent encode and decode are exact inverses") {
    Rng rng(11);
    const Tensor x = rng.normal_matrix(5, 2);
    const Tensor z = flowlab::encode(x);
    const Tensor back = flowlab::decode(z);
    REQUIRE(back.same_shape(x));
    for (std::int64_t k = 0; k < x.size(); ++k) {
        CHECK(z[k] == x[k]);
        CHECK(back[k] == x[k]);
    }
}
