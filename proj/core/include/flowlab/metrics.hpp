#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/flow.hpp"
#include "flowlab/nets.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Energy distance between two point sets [n,d] and [m,d]:
//   2 E|a-b| - E|a-a'| - E|b-b'|.
// The U-statistic is unbiased but can dip below zero near equality; the
// V-statistic (diagonal terms included) is always >= 0 and exactly 0 on
// identical multisets.
enum class EnergyForm { kU, kV };
double energy_distance(const Tensor& a, const Tensor& b, EnergyForm form = EnergyForm::kU);

// Mean over random unit directions of the 1-D 2-Wasserstein distance between
// the projected samples (exact quantile coupling, so sizes may differ).
double sliced_wasserstein(const Tensor& a, const Tensor& b, std::int64_t n_projections,
                          std::uint64_t seed);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

// Manifold estimate from k-NN radii: precision = fraction of fake points
// within some real point's k-NN ball, recall = the mirror statement.
PrecisionRecall knn_precision_recall(const Tensor& real, const Tensor& fake, std::int64_t k = 5);

// Entry (i,j): mean over shared noise draws of |sample_{nfe_i}(z) -
// sample_{nfe_j}(z)|.  Symmetric, zero diagonal.
Tensor nfe_consistency(const VelocityNet& net, const Tensor& noise,
                       const std::vector<std::int64_t>& nfes);
Tensor nfe_consistency(const VelocityField& field, const Tensor& noise,
                       const std::vector<std::int64_t>& nfes);

// Mean over Euler steps and noise rows of |v(z_t, t) - (z1 - z0_final)|^2:
// deviation of the local velocity from the trajectory chord.
double straightness(const VelocityNet& net, const Tensor& noise, std::int64_t n_eval_steps);
double straightness(const VelocityField& field, const Tensor& noise, std::int64_t n_eval_steps);

struct SaturationStats {
    Tensor mean_shift;  // [1,d]: mean(samples) - mean(reference)
    Tensor std_ratio;   // [1,d]: std(samples) / std(reference)
};

SaturationStats saturation_stats(const Tensor& samples, const Tensor& reference);

// One evaluation row as produced by the eval command.
struct MetricReport {
    std::string run_id;
    std::int64_t nfe = 1;
    double energy = 0.0;        // U-form
    double energy_v = 0.0;      // V-form
    double sliced_w2 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    Tensor consistency;         // [k,k] matrix over the probed NFE list
    std::vector<std::int64_t> consistency_nfes;
    double straightness = 0.0;
    SaturationStats saturation;
};

}  // namespace flowlab
