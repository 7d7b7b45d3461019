#include <catch2/catch_amalgamated.hpp>

#include "dif/sampling.hpp"

using namespace dif;
using Catch::Approx;

namespace {

// One-sample Kolmogorov-Smirnov p-value against U[lo, hi].
double ks_uniform_pvalue(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double cdf = (xs[i] - lo) / (hi - lo);
        d = std::max(d, std::abs(cdf - (i + 1) / n));
        d = std::max(d, std::abs(cdf - i / n));
    }
    double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

Shape bumpy() {
    return make_bump_sphere({0, 0, 0}, 0.5,
                            {{{1, 0.4, 0.2}, 0.1, 0.5}, {{0.1, -0.3, 1.0}, 0.08, 0.6}});
}

} // namespace

TEST_CASE("uniform mix fills the bbox with per-axis KS p > 0.01", "[sampling]") {
    Box3 bbox{{-1.1, -1.1, -1.1}, {1.1, 1.1, 1.1}};
    SampleBatch b = sample_training_points(bumpy(), 1000, 1.0, 0.05, bbox, 4242, {20.0}, {0.6, 4.0});
    REQUIRE(b.size() == 1000);
    for (int ax = 0; ax < 3; ++ax) {
        std::vector<double> xs;
        for (const auto& p : b.points) {
            REQUIRE(bbox.contains(p));
            xs.push_back(p[ax]);
        }
        CHECK(ks_uniform_pvalue(xs, -1.1, 1.1) > 0.01);
    }
}

TEST_CASE("near-surface mix keeps |gt_sdf| within the folded-normal bound", "[sampling]") {
    Box3 bbox{{-1.1, -1.1, -1.1}, {1.1, 1.1, 1.1}};
    SampleBatch b = sample_training_points(bumpy(), 1000, 0.0, 0.05, bbox, 7, {20.0}, {0.6, 4.0});
    double mean_abs = 0;
    for (double s : b.gt_sdf) mean_abs += std::abs(s);
    mean_abs /= static_cast<double>(b.size());
    CHECK(mean_abs < 3.0 * 0.05);
}

TEST_CASE("batches are bitwise reproducible given the seed", "[sampling]") {
    Box3 bbox{{-1.1, -1.1, -1.1}, {1.1, 1.1, 1.1}};
    SampleBatch a = sample_training_points(bumpy(), 512, 0.5, 0.05, bbox, 99, {20.0}, {0.6, 4.0});
    SampleBatch b = sample_training_points(bumpy(), 512, 0.5, 0.05, bbox, 99, {20.0}, {0.6, 4.0});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i] == b.points[i]);
        CHECK(a.gt_sdf[i] == b.gt_sdf[i]);
        CHECK(a.gt_occ[i] == b.gt_occ[i]);
        CHECK(a.designed_sigma[i] == b.designed_sigma[i]);
    }

    SampleBatch c = sample_training_points(bumpy(), 512, 0.5, 0.05, bbox, 100, {20.0}, {0.6, 4.0});
    bool all_equal = true;
    for (std::size_t i = 0; i < a.size(); ++i) all_equal = all_equal && (a.points[i] == c.points[i]);
    CHECK_FALSE(all_equal);
}

TEST_CASE("batch ground truth satisfies the field identities", "[sampling]") {
    Box3 bbox{{-1.1, -1.1, -1.1}, {1.1, 1.1, 1.1}};
    SmoothOccParams occ{20.0};
    DesignParams dp{0.6, 4.0};
    SampleBatch b = sample_training_points(bumpy(), 2048, 0.5, 0.05, bbox, 1, occ, dp);
    validate_batch(b, occ);
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.gt_occ[i] == smooth_occupancy(b.gt_sdf[i], occ.alpha));
        CHECK(b.designed_mu[i] == b.gt_occ[i]);
        CHECK(b.designed_sigma[i] == designed_sigma(b.gt_occ[i], dp));
        CHECK(b.gt_occ[i] >= 0.0);
        CHECK(b.gt_occ[i] <= 1.0);
    }
}

TEST_CASE("sampling rejects bad arguments", "[sampling]") {
    Box3 bbox{{-1, -1, -1}, {1, 1, 1}};
    CHECK_THROWS_AS(sample_training_points(bumpy(), 0, 0.5, 0.05, bbox, 1, {20.0}, {0.6, 4.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_training_points(bumpy(), 10, 1.5, 0.05, bbox, 1, {20.0}, {0.6, 4.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_training_points(bumpy(), 10, 0.5, 0.0, bbox, 1, {20.0}, {0.6, 4.0}),
                    std::invalid_argument);
}
