#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "nudiff/exec.hpp"
#include "nudiff/linalg.hpp"

namespace nudiff {

struct SampleSet {
    Mat points;  // N x d
    std::string label;
};

// Average over n_proj random unit directions of the exact 1-D W2 (sort both
// projections, RMS of differences). Sets of unequal size have the larger one
// subsampled, seeded. Symmetric in (a, b) for a fixed seed.
double sliced_w2(const SampleSet& a, const SampleSet& b, int n_proj, uint64_t seed,
                 Exec exec = Exec::Parallel);

// Sample mean and unbiased covariance; requires N >= 2.
std::pair<Vec, Mat> gaussian_moments(const SampleSet& s);

// Squared Bures-Wasserstein distance between Gaussians:
// |mu_a - mu_b|^2 + tr(Ca + Cb - 2 (Ca^1/2 Cb Ca^1/2)^1/2).
double w2_gaussian(const Vec& mean_a, const Mat& cov_a, const Vec& mean_b, const Mat& cov_b);

}  // namespace nudiff
