#include "flowlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowlab {

namespace {

void check_points(const char* what, const Tensor& t, std::int64_t min_rows) {
    if (t.rank() != 2 || t.rows() < min_rows) {
        throw std::invalid_argument(std::string(what) + ": need at least " +
                                    std::to_string(min_rows) + " points as [n,d], got " +
                                    shape_str(t.shape()));
    }
    check_finite(t, what);
}

double row_dist(const Tensor& a, std::int64_t i, const Tensor& b, std::int64_t j) {
    const std::int64_t d = a.cols();
    double acc = 0.0;
    for (std::int64_t c = 0; c < d; ++c) {
        const double diff = a.at(i, c) - b.at(j, c);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// Mean pairwise distance within one set, with or without the (zero) diagonal.
// Accumulates the full ordered double loop in the same row-major order as the
// cross term so that identical inputs cancel exactly in the V form.
double self_mean_dist(const Tensor& a, EnergyForm form) {
    const std::int64_t n = a.rows();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            if (i != j) acc += row_dist(a, i, a, j);
        }
    }
    const double nd = static_cast<double>(n);
    const double pairs = form == EnergyForm::kU ? nd * (nd - 1.0) : nd * nd;
    return acc / pairs;
}

// Exact 1-D W2^2 between two sorted samples via the quantile coupling.
double w2_squared_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    const std::int64_t n = static_cast<std::int64_t>(a.size());
    const std::int64_t m = static_cast<std::int64_t>(b.size());
    double total = 0.0, u = 0.0;
    std::int64_t i = 0, j = 0;
    while (i < n && j < m) {
        const double next_a = static_cast<double>(i + 1) / static_cast<double>(n);
        const double next_b = static_cast<double>(j + 1) / static_cast<double>(m);
        const double u_next = std::min(next_a, next_b);
        const double diff = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)];
        total += (u_next - u) * diff * diff;
        if (next_a <= u_next) ++i;
        if (next_b <= u_next) ++j;
        u = u_next;
    }
    return total;
}

}  // namespace

double energy_distance(const Tensor& a, const Tensor& b, EnergyForm form) {
    check_points("energy_distance A", a, 2);
    check_points("energy_distance B", b, 2);
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("energy_distance: dimension mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::int64_t n = a.rows(), m = b.rows();
    double cross = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < m; ++j) cross += row_dist(a, i, b, j);
    }
    cross /= static_cast<double>(n) * static_cast<double>(m);
    return 2.0 * cross - self_mean_dist(a, form) - self_mean_dist(b, form);
}

double sliced_wasserstein(const Tensor& a, const Tensor& b, std::int64_t n_projections,
                          std::uint64_t seed) {
    check_points("sliced_wasserstein A", a, 1);
    check_points("sliced_wasserstein B", b, 1);
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
    }
    if (n_projections < 1) throw std::invalid_argument("sliced_wasserstein: n_projections >= 1");
    const std::int64_t d = a.cols();
    Rng rng(seed);
    std::vector<double> dir(static_cast<std::size_t>(d));
    std::vector<double> pa(static_cast<std::size_t>(a.rows()));
    std::vector<double> pb(static_cast<std::size_t>(b.rows()));
    double acc = 0.0;
    for (std::int64_t p = 0; p < n_projections; ++p) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : dir) {
                v = rng.normal();
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& v : dir) v /= norm;
        for (std::int64_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (std::int64_t c = 0; c < d; ++c) s += a.at(i, c) * dir[static_cast<std::size_t>(c)];
            pa[static_cast<std::size_t>(i)] = s;
        }
        for (std::int64_t i = 0; i < b.rows(); ++i) {
            double s = 0.0;
            for (std::int64_t c = 0; c < d; ++c) s += b.at(i, c) * dir[static_cast<std::size_t>(c)];
            pb[static_cast<std::size_t>(i)] = s;
        }
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        acc += std::sqrt(w2_squared_sorted(pa, pb));
    }
    return acc / static_cast<double>(n_projections);
}

PrecisionRecall knn_precision_recall(const Tensor& real, const Tensor& fake, std::int64_t k) {
    check_points("knn_precision_recall real", real, 2);
    check_points("knn_precision_recall fake", fake, 2);
    if (real.cols() != fake.cols()) {
        throw std::invalid_argument("knn_precision_recall: dimension mismatch");
    }
    if (k < 1 || k >= real.rows() || k >= fake.rows()) {
        throw std::invalid_argument("knn_precision_recall: k out of range");
    }

    // Radius of each point's k-NN ball within its own set (self excluded).
    auto radii = [k](const Tensor& pts) {
        const std::int64_t n = pts.rows();
        std::vector<double> out(static_cast<std::size_t>(n));
        std::vector<double> dists(static_cast<std::size_t>(n - 1));
        for (std::int64_t i = 0; i < n; ++i) {
            std::size_t w = 0;
            for (std::int64_t j = 0; j < n; ++j) {
                if (j != i) dists[w++] = row_dist(pts, i, pts, j);
            }
            auto kth = dists.begin() + static_cast<std::ptrdiff_t>(k - 1);
            std::nth_element(dists.begin(), kth, dists.end());
            out[static_cast<std::size_t>(i)] = *kth;
        }
        return out;
    };
    auto covered_fraction = [](const Tensor& queries, const Tensor& anchors,
                               const std::vector<double>& anchor_radii) {
        std::int64_t hits = 0;
        for (std::int64_t i = 0; i < queries.rows(); ++i) {
            for (std::int64_t j = 0; j < anchors.rows(); ++j) {
                if (row_dist(queries, i, anchors, j) <= anchor_radii[static_cast<std::size_t>(j)]) {
                    ++hits;
                    break;
                }
            }
        }
        return static_cast<double>(hits) / static_cast<double>(queries.rows());
    };

    PrecisionRecall pr;
    pr.precision = covered_fraction(fake, real, radii(real));
    pr.recall = covered_fraction(real, fake, radii(fake));
    return pr;
}

Tensor nfe_consistency(const VelocityField& field, const Tensor& noise,
                       const std::vector<std::int64_t>& nfes) {
    check_points("nfe_consistency", noise, 1);
    if (nfes.empty()) throw std::invalid_argument("nfe_consistency: empty NFE list");
    const std::int64_t k = static_cast<std::int64_t>(nfes.size());
    std::vector<Tensor> samples;
    samples.reserve(nfes.size());
    for (std::int64_t nfe : nfes) samples.push_back(euler_sample(field, noise, nfe));
    Tensor mat({k, k});
    for (std::int64_t i = 0; i < k; ++i) {
        for (std::int64_t j = i + 1; j < k; ++j) {
            double acc = 0.0;
            for (std::int64_t r = 0; r < noise.rows(); ++r) {
                acc += row_dist(samples[static_cast<std::size_t>(i)], r,
                                samples[static_cast<std::size_t>(j)], r);
            }
            const double v = acc / static_cast<double>(noise.rows());
            mat.at(i, j) = v;
            mat.at(j, i) = v;
        }
    }
    return mat;
}

Tensor nfe_consistency(const VelocityNet& net, const Tensor& noise,
                       const std::vector<std::int64_t>& nfes) {
    return nfe_consistency(make_field(net), noise, nfes);
}

double straightness(const VelocityField& field, const Tensor& noise, std::int64_t n_eval_steps) {
    check_points("straightness", noise, 1);
    if (n_eval_steps < 2) throw std::invalid_argument("straightness: n_eval_steps >= 2");
    Trajectory traj;
    const Tensor z_final = euler_sample(field, noise, n_eval_steps, &traj);
    const std::int64_t rows = noise.rows(), d = noise.cols();
    double acc = 0.0;
    for (std::int64_t s = 0; s < n_eval_steps; ++s) {  // the closing row drives no update
        const Tensor& v = traj.steps[static_cast<std::size_t>(s)].v;
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t c = 0; c < d; ++c) {
                const double chord = noise.at(r, c) - z_final.at(r, c);
                const double diff = v.at(r, c) - chord;
                acc += diff * diff;
            }
        }
    }
    return acc / (static_cast<double>(n_eval_steps) * static_cast<double>(rows));
}

double straightness(const VelocityNet& net, const Tensor& noise, std::int64_t n_eval_steps) {
    return straightness(make_field(net), noise, n_eval_steps);
}

SaturationStats saturation_stats(const Tensor& samples, const Tensor& reference) {
    check_points("saturation_stats samples", samples, 1);
    check_points("saturation_stats reference", reference, 1);
    if (samples.cols() != reference.cols()) {
        throw std::invalid_argument("saturation_stats: dimension mismatch");
    }
    const std::int64_t d = samples.cols();
    auto column_stats = [d](const Tensor& pts) {
        const std::int64_t n = pts.rows();
        Tensor mean({1, d}), stddev({1, d});
        for (std::int64_t c = 0; c < d; ++c) {
            double m = 0.0;
            for (std::int64_t r = 0; r < n; ++r) m += pts.at(r, c);
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::int64_t r = 0; r < n; ++r) {
                const double diff = pts.at(r, c) - m;
                var += diff * diff;
            }
            mean[c] = m;
            stddev[c] = std::sqrt(var / static_cast<double>(n));
        }
        return std::pair<Tensor, Tensor>(mean, stddev);
    };
    const auto [ms, ss] = column_stats(samples);
    const auto [mr, sr] = column_stats(reference);
    SaturationStats out;
    out.mean_shift = Tensor({1, d});
    out.std_ratio = Tensor({1, d});
    for (std::int64_t c = 0; c < d; ++c) {
        out.mean_shift[c] = ms[c] - mr[c];
        if (sr[c] == 0.0) {
            if (ss[c] != 0.0) {
                throw std::invalid_argument("saturation_stats: reference has zero spread in dim " +
                                            std::to_string(c));
            }
            out.std_ratio[c] = 1.0;
        } else {
            out.std_ratio[c] = ss[c] / sr[c];
        }
    }
    return out;
}

}  // namespace flowlab
