#include "nudiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nudiff/rng.hpp"

namespace nudiff {

namespace {

constexpr uint64_t kSubsampleTag = 0x5b5a317edULL;

Mat subsample(const Mat& points, size_t target, uint64_t seed) {
    std::vector<size_t> idx(points.rows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, kSubsampleTag));
    for (size_t i = points.rows - 1; i > 0; i--)
        std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
    Mat out(target, points.cols);
    for (size_t i = 0; i < target; i++)
        std::copy(points.row(idx[i]), points.row(idx[i]) + points.cols, out.row(i));
    return out;
}

double w2_1d_for_direction(const Mat& a, const Mat& b, const Vec& dir) {
    const size_t n = a.rows;
    Vec pa(n), pb(n);
    for (size_t i = 0; i < n; i++) {
        double da = 0.0, db = 0.0;
        for (size_t j = 0; j < a.cols; j++) {
            da += a(i, j) * dir[j];
            db += b(i, j) * dir[j];
        }
        pa[i] = da;
        pb[i] = db;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double acc = 0.0;
    for (size_t i = 0; i < n; i++) {
        const double diff = pa[i] - pb[i];
        acc += diff * diff;
    }
    return std::sqrt(acc / n);
}

Vec random_unit_direction(size_t d, uint64_t seed) {
    Rng rng(seed);
    Vec dir = rng.normal_vec(d);
    double norm = std::sqrt(sq_norm(dir));
    while (norm < 1e-12) {
        dir = rng.normal_vec(d);
        norm = std::sqrt(sq_norm(dir));
    }
    for (auto& x : dir)
        x /= norm;
    return dir;
}

}  // namespace

double sliced_w2(const SampleSet& a, const SampleSet& b, int n_proj, uint64_t seed, Exec exec) {
    if (a.points.cols != b.points.cols)
        throw std::invalid_argument("sliced_w2: dimension mismatch");
    if (a.points.rows == 0 || b.points.rows == 0)
        throw std::invalid_argument("sliced_w2: empty sample set");
    if (n_proj < 1)
        throw std::invalid_argument("sliced_w2: n_proj must be >= 1");

    const size_t n = std::min(a.points.rows, b.points.rows);
    const Mat& pa_full = a.points;
    const Mat& pb_full = b.points;
    Mat pa_sub, pb_sub;
    const Mat* pa = &pa_full;
    const Mat* pb = &pb_full;
    if (pa_full.rows > n) {
        pa_sub = subsample(pa_full, n, seed);
        pa = &pa_sub;
    }
    if (pb_full.rows > n) {
        pb_sub = subsample(pb_full, n, seed);
        pb = &pb_sub;
    }

    Vec per_proj(n_proj);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int p = 0; p < n_proj; p++) {
            Vec dir = random_unit_direction(pa->cols, mix_seed(seed, p));
            per_proj[p] = w2_1d_for_direction(*pa, *pb, dir);
        }
    } else {
        for (int p = 0; p < n_proj; p++) {
            Vec dir = random_unit_direction(pa->cols, mix_seed(seed, p));
            per_proj[p] = w2_1d_for_direction(*pa, *pb, dir);
        }
    }

    double acc = 0.0;
    for (double v : per_proj)
        acc += v;
    return acc / n_proj;
}

std::pair<Vec, Mat> gaussian_moments(const SampleSet& s) {
    const size_t n = s.points.rows;
    const size_t d = s.points.cols;
    if (n < 2)
        throw std::invalid_argument("gaussian_moments: need at least 2 points");

    Vec mean(d, 0.0);
    for (size_t i = 0; i < n; i++)
        for (size_t j = 0; j < d; j++)
            mean[j] += s.points(i, j);
    for (auto& m : mean)
        m /= n;

    Mat cov(d, d, 0.0);
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < d; j++) {
            const double cj = s.points(i, j) - mean[j];
            for (size_t k = j; k < d; k++)
                cov(j, k) += cj * (s.points(i, k) - mean[k]);
        }
    }
    for (size_t j = 0; j < d; j++)
        for (size_t k = j; k < d; k++) {
            cov(j, k) /= (n - 1);
            cov(k, j) = cov(j, k);
        }
    return {mean, cov};
}

double w2_gaussian(const Vec& mean_a, const Mat& cov_a, const Vec& mean_b, const Mat& cov_b) {
    const size_t d = mean_a.size();
    if (mean_b.size() != d || cov_a.rows != d || cov_a.cols != d || cov_b.rows != d ||
        cov_b.cols != d)
        throw std::invalid_argument("w2_gaussian: shape mismatch");
    for (size_t i = 0; i < d; i++)
        for (size_t j = i + 1; j < d; j++)
            if (std::abs(cov_a(i, j) - cov_a(j, i)) > 1e-9 ||
                std::abs(cov_b(i, j) - cov_b(j, i)) > 1e-9)
                throw std::invalid_argument("w2_gaussian: covariance not symmetric");

    double mean_sq = 0.0;
    for (size_t i = 0; i < d; i++) {
        const double diff = mean_a[i] - mean_b[i];
        mean_sq += diff * diff;
    }

    Mat root_a = sqrtm_psd(cov_a);  // throws on non-PSD input
    Mat cross = matmul(matmul(root_a, cov_b), root_a);
    // symmetrize roundoff before the second root
    for (size_t i = 0; i < d; i++)
        for (size_t j = i + 1; j < d; j++) {
            const double avg = 0.5 * (cross(i, j) + cross(j, i));
            cross(i, j) = avg;
            cross(j, i) = avg;
        }
    Mat root_cross = sqrtm_psd(cross);

    double trace = 0.0;
    for (size_t i = 0; i < d; i++)
        trace += cov_a(i, i) + cov_b(i, i) - 2.0 * root_cross(i, i);
    return mean_sq + std::max(0.0, trace);
}

}  // namespace nudiff
