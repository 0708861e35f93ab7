#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "nudiff/metrics.hpp"
#include "nudiff/rng.hpp"

using namespace nudiff;

namespace {

Mat gaussian_cloud(size_t n, const Vec& mean, double scale, uint64_t seed) {
    Rng rng(seed);
    Mat m(n, mean.size());
    for (size_t i = 0; i < n; i++)
        for (size_t j = 0; j < mean.size(); j++)
            m(i, j) = mean[j] + scale * rng.normal();
    return m;
}

}  // namespace

TEST_CASE("sliced_w2 of identical sets is zero") {
    Mat pts = gaussian_cloud(500, {0.0, 0.0}, 1.0, 1);
    CHECK(sliced_w2({pts, "a"}, {pts, "a"}, 32, 7) == doctest::Approx(0.0));
}

TEST_CASE("sliced_w2 of shifted 1-D sets is the shift") {
    const double c = 1.75;
    Mat a(100, 1), b(100, 1);
    for (int i = 0; i < 100; i++) {
        a(i, 0) = 0.01 * i;
        b(i, 0) = 0.01 * i + c;
    }
    CHECK(sliced_w2({a, "a"}, {b, "b"}, 16, 3) == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("sliced_w2 is symmetric and non-negative") {
    Mat a = gaussian_cloud(400, {0.0, 1.0}, 1.0, 11);
    Mat b = gaussian_cloud(300, {0.5, -0.5}, 1.3, 12);  // unequal sizes
    const double ab = sliced_w2({a, "a"}, {b, "b"}, 48, 99);
    const double ba = sliced_w2({b, "b"}, {a, "a"}, 48, 99);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab > 0.0);
    CHECK_THROWS_AS(sliced_w2({a, "a"}, {gaussian_cloud(10, {0.0}, 1.0, 1), "c"}, 8, 1),
                    std::invalid_argument);
}

TEST_CASE("sliced_w2 against the analytic Gaussian value") {
    // N(0, I) vs N(mu, I): per direction theta the 1-D W2 is |theta . mu|;
    // the oracle integrates that over the circle by quadrature.
    const Vec mu = {1.0, 1.0};
    Mat a = gaussian_cloud(10000, {0.0, 0.0}, 1.0, 21);
    Mat b = gaussian_cloud(10000, mu, 1.0, 22);

    const int quad = 100000;
    double oracle = 0.0;
    for (int i = 0; i < quad; i++) {
        const double theta = M_PI * (i + 0.5) / quad;
        oracle += std::abs(std::cos(theta) * mu[0] + std::sin(theta) * mu[1]);
    }
    oracle /= quad;

    const double got = sliced_w2({a, "a"}, {b, "b"}, 256, 5);
    MESSAGE("sliced w2 ", got, " oracle ", oracle);
    CHECK(std::abs(got - oracle) / oracle < 0.05);
}

TEST_CASE("gaussian_moments hand values and transforms") {
    Mat two(2, 1);
    two(0, 0) = -1.0;
    two(1, 0) = 1.0;
    auto [mean, cov] = gaussian_moments({two, "two"});
    CHECK(mean[0] == doctest::Approx(0.0));
    CHECK(cov(0, 0) == doctest::Approx(2.0));  // unbiased: divides by n-1

    Mat one(1, 1, 5.0);
    CHECK_THROWS_AS(gaussian_moments({one, "one"}), std::invalid_argument);

    // affine transform y = 2x + 3 maps moments accordingly
    Mat base = gaussian_cloud(5000, {0.0}, 1.0, 31);
    Mat mapped = base;
    for (auto& v : mapped.data)
        v = 2.0 * v + 3.0;
    auto [m0, c0] = gaussian_moments({base, "x"});
    auto [m1, c1] = gaussian_moments({mapped, "y"});
    CHECK(m1[0] == doctest::Approx(2.0 * m0[0] + 3.0).epsilon(1e-12));
    CHECK(c1(0, 0) == doctest::Approx(4.0 * c0(0, 0)).epsilon(1e-12));
}

TEST_CASE("gaussian_moments CLT sanity at 1e5 draws") {
    Mat pts = gaussian_cloud(100000, {0.0}, 1.0, 41);
    auto [mean, cov] = gaussian_moments({pts, "std"});
    CHECK(std::abs(mean[0]) < 0.02);
    CHECK(std::abs(cov(0, 0) - 1.0) < 0.03);
}

TEST_CASE("w2_gaussian closed-form cases") {
    Mat eye(2, 2, 0.0);
    eye(0, 0) = eye(1, 1) = 1.0;
    CHECK(w2_gaussian({0.0, 0.0}, eye, {0.0, 0.0}, eye) == doctest::Approx(0.0).epsilon(1e-9));

    // same covariance, shifted mean: squared distance is |c|^2
    CHECK(w2_gaussian({0.0, 0.0}, eye, {3.0, 4.0}, eye) == doctest::Approx(25.0).epsilon(1e-9));

    // 1-D diagonal: (sigma_a - sigma_b)^2
    Mat va(1, 1, 1.0), vb(1, 1, 4.0);
    CHECK(w2_gaussian({0.0}, va, {0.0}, vb) == doctest::Approx(1.0).epsilon(1e-9));

    Mat asym(2, 2, 0.0);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(w2_gaussian({0.0, 0.0}, asym, {0.0, 0.0}, eye), std::invalid_argument);

    Mat neg(2, 2, 0.0);
    neg(0, 0) = -1.0;
    neg(1, 1) = 1.0;
    CHECK_THROWS_AS(w2_gaussian({0.0, 0.0}, neg, {0.0, 0.0}, eye), std::invalid_argument);
}

TEST_CASE("sqrt of w2_gaussian satisfies the triangle inequality") {
    Rng rng(51);
    auto random_psd = [&](size_t d) {
        Mat m(d, d);
        for (auto& v : m.data)
            v = rng.normal();
        Mat psd(d, d, 0.0);
        for (size_t i = 0; i < d; i++)
            for (size_t j = 0; j < d; j++)
                for (size_t k = 0; k < d; k++)
                    psd(i, j) += m(i, k) * m(j, k);
        return psd;
    };
    for (int trial = 0; trial < 50; trial++) {
        const size_t d = 2 + rng.uniform_index(3);
        Vec ma = rng.normal_vec(d), mb = rng.normal_vec(d), mc = rng.normal_vec(d);
        Mat ca = random_psd(d), cb = random_psd(d), cc = random_psd(d);
        const double dab = std::sqrt(w2_gaussian(ma, ca, mb, cb));
        const double dbc = std::sqrt(w2_gaussian(mb, cb, mc, cc));
        const double dac = std::sqrt(w2_gaussian(ma, ca, mc, cc));
        CHECK(dac <= dab + dbc + 1e-8);
    }
}

TEST_CASE("w2_gaussian agrees with sliced_w2 on point clouds, loosely") {
    // same two Gaussians measured both ways; values differ by the slicing
    // geometry but must order identically against a third, farther one
    Mat near_a = gaussian_cloud(8000, {0.0, 0.0}, 1.0, 61);
    Mat near_b = gaussian_cloud(8000, {0.3, 0.0}, 1.0, 62);
    Mat far_c = gaussian_cloud(8000, {3.0, 0.0}, 1.0, 63);

    auto [ma, ca] = gaussian_moments({near_a, "a"});
    auto [mb, cb] = gaussian_moments({near_b, "b"});
    auto [mc2, cc] = gaussian_moments({far_c, "c"});

    CHECK(w2_gaussian(ma, ca, mb, cb) < w2_gaussian(ma, ca, mc2, cc));
    CHECK(sliced_w2({near_a, "a"}, {near_b, "b"}, 64, 9) <
          sliced_w2({near_a, "a"}, {far_c, "c"}, 64, 9));
}
