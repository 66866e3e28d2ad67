#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "radscan/geometry.hpp"
#include "radscan/rng.hpp"
#include "test_util.hpp"

using namespace radscan;
using namespace radscan::testing;

namespace {

SourceSet random_sources(Rng& rng, std::size_t h, std::size_t w, std::size_t k) {
    SourceSet s;
    for (std::size_t i = 0; i < k; ++i)
        s.add({double(rng.below(w)), double(rng.below(h))}, rng.uniform());
    return s;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("distance map examples") {
    SourceSet one;
    one.add({0, 0});
    const DistanceField d = compute_distance_map(one, 2, 2);
    CHECK(d.values == std::vector<double>{0.0, 1.0, 1.0, std::sqrt(2.0)});

    SourceSet every;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) every.add({double(c), double(r)});
    for (double v : compute_distance_map(every, 3, 4).values) CHECK(v == 0.0);

    for (double v : compute_distance_map(SourceSet{}, 3, 2).values) CHECK(v == kInfiniteDistance);

    SourceSet outside;
    outside.add({5.0, 0.0});
    CHECK_THROWS_AS(compute_distance_map(outside, 4, 4), std::invalid_argument);
}

TEST_CASE("distance map matches brute force and is Lipschitz") {
    Rng rng(101);
    for (int t = 0; t < 40; ++t) {
        const std::size_t h = 1 + rng.below(64), w = 1 + rng.below(64), k = 1 + rng.below(8);
        const SourceSet s = random_sources(rng, h, w, k);
        const DistanceField d = compute_distance_map(s, h, w);
        CHECK(d.values == distance_oracle(s, h, w));
        for (const Point& p : s.centers) CHECK(d.at(std::size_t(p.y), std::size_t(p.x)) == 0.0);
        for (std::size_t r = 0; r + 1 < h; ++r)
            for (std::size_t c = 0; c + 1 < w; ++c) {
                CHECK(std::abs(d.at(r, c) - d.at(r + 1, c + 1)) <= std::sqrt(2.0) + 1e-12);
                CHECK(std::abs(d.at(r, c) - d.at(r, c + 1)) <= 1.0 + 1e-12);
            }
    }
}

TEST_CASE("radial plan examples") {
    SourceSet one;
    one.add({0, 0});
    const RadialPlan p = build_radial_plan(compute_distance_map(one, 2, 2));
    CHECK(p.forward == std::vector<std::uint32_t>{3, 1, 2, 0});

    CHECK(build_radial_plan(compute_distance_map(one, 1, 1)).forward == std::vector<std::uint32_t>{0});
    CHECK(build_radial_plan(compute_distance_map(SourceSet{}, 2, 3)).forward ==
          std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("radial plan properties against the selection oracle") {
    Rng rng(102);
    for (int t = 0; t < 30; ++t) {
        const std::size_t h = 1 + rng.below(24), w = 1 + rng.below(24), k = rng.below(5);
        const DistanceField d = compute_distance_map(random_sources(rng, h, w, k), h, w);
        const RadialPlan p = build_radial_plan(d);
        CHECK(p.forward == plan_oracle(d.values));
        for (std::size_t i = 0; i < p.length(); ++i) {
            CHECK(p.inverse[p.forward[i]] == i);
            CHECK(p.forward[p.inverse[i]] == i);
            if (i + 1 < p.length()) CHECK(d.values[p.forward[i]] >= d.values[p.forward[i + 1]]);
        }
    }
}

TEST_CASE("unfold and fold") {
    SourceSet one;
    one.add({0, 0});
    const RadialPlan p = build_radial_plan(compute_distance_map(one, 2, 2));
    const Tensor field({2, 2}, {1.0, 2.0, 3.0, 4.0});  // a b c d
    const Tensor seq = radial_unfold(field, p);
    CHECK(seq.shape() == Shape{4, 1});
    CHECK(seq.values() == std::vector<double>{4.0, 2.0, 3.0, 1.0});
    CHECK(radial_fold(seq, p).values() == field.values());

    Rng rng(103);
    const Tensor x = random_tensor({3, 4, 4}, rng);
    const RadialPlan q = build_radial_plan(compute_distance_map(random_sources(rng, 4, 4, 2), 4, 4));
    CHECK(radial_fold(radial_unfold(x, q), q) == x);
    CHECK(radial_unfold(x, RadialPlan::raster(4, 4)).at(5, 2) == x.at(2, 1, 1));

    const Tensor constant({16, 2}, 0.25);
    const Tensor folded = radial_fold(constant, q);
    for (double v : folded.data()) CHECK(v == 0.25);

    CHECK_THROWS_AS(radial_unfold(Tensor({1, 3, 4}), q), ShapeError);
    CHECK_THROWS_AS(radial_fold(Tensor({15, 1}), q), ShapeError);
}

TEST_CASE("gaussian heatmap closed forms") {
    SourceSet one;
    one.add({8, 8});
    const double sigma = 2.0;
    const Tensor h = gaussian_heatmap(one, 17, 17, sigma);
    CHECK(h.shape() == Shape{1, 17, 17});
    CHECK(h.at(0, 8, 8) == 1.0);
    CHECK(h.at(0, 8, 10) == doctest::Approx(0.606531).epsilon(1e-6));

    SourceSet two;
    two.add({2, 8});
    two.add({14, 8});
    const Tensor h2 = gaussian_heatmap(two, 17, 17, sigma);
    CHECK(h2.at(0, 8, 2) == 1.0);
    CHECK(h2.at(0, 8, 14) == 1.0);
    CHECK(std::abs(h2.at(0, 8, 8) - std::exp(-144.0 / (8 * sigma * sigma))) < 1e-12);
}

TEST_CASE("nms examples and oracle") {
    SourceSet one;
    one.add({5, 7});
    const SourceSet got = nms_peaks(gaussian_heatmap(one, 12, 12, 2.0), 0.5, 3);
    REQUIRE(got.size() == 1);
    CHECK(got.centers[0] == Point{5, 7});
    CHECK(nms_peaks(Tensor({1, 9, 9}), 0.5, 3).empty());

    Rng rng(104);
    for (int t = 0; t < 50; ++t) {
        Tensor m({1, 9, 9});
        // Quantized values create plateaus.
        for (double& v : m.values()) v = double(rng.below(5)) / 4.0;
        for (std::size_t window : {3u, 5u}) {
            const SourceSet s = nms_peaks(m, 0.3, window);
            const auto want = peaks_oracle(m, 9, 9, 0.3, long(window / 2));
            REQUIRE(s.size() == want.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                CHECK(s.centers[i].x == double(want[i].first));
                CHECK(s.centers[i].y == double(want[i].second));
                CHECK(s.confidences[i] == m.at(0, std::size_t(want[i].second), std::size_t(want[i].first)));
            }
        }
    }
}

TEST_CASE("threshold mask") {
    CHECK(threshold_mask(Tensor({3}, {0.4, 0.5, 0.6}), 0.5).values() == std::vector<double>{0, 1, 1});
    CHECK(max_abs(threshold_mask(Tensor({1, 3, 3}), 0.5)) == 0.0);
    const Tensor ones = threshold_mask(Tensor({1, 3, 3}, 1.0), 0.5);
    for (double v : ones.data()) CHECK(v == 1.0);
}

TEST_CASE("downsample priors") {
    PriorBundle b;
    b.full.p_flare = Tensor({1, 8, 8}, 0.3);
    b.full.p_mask = Tensor({1, 8, 8});
    b.full.p_mask.at(0, 3, 2) = 1.0;
    b.full.p_position.add({5, 3});
    const PriorBundle d = downsample_priors(b, 3);
    REQUIRE(d.levels() == 3);
    for (std::size_t l = 1; l <= 3; ++l) {
        const PriorLevel& lv = d.level(l);
        CHECK(lv.p_flare.shape() == Shape{1, 8u >> l, 8u >> l});
        for (double v : lv.p_flare.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(max_abs(lv.p_mask) == 1.0);
    }
    CHECK(d.level(1).p_mask.at(0, 1, 1) == 1.0);
    CHECK(d.level(1).p_position.centers[0] == Point{2, 1});
    CHECK(d.level(2).p_position.centers[0] == Point{1, 0});

    PriorBundle odd;
    odd.full.p_flare = Tensor({1, 6, 6});
    CHECK_THROWS(downsample_priors(odd, 2));

    const PriorBundle e = empty_priors(2);
    CHECK(e.levels() == 2);
    CHECK_FALSE(e.level(2).has_flare());
}

TEST_CASE("max-pooled mask never loses a source pixel") {
    Rng rng(105);
    for (int t = 0; t < 20; ++t) {
        PriorBundle b;
        b.full.p_mask = Tensor({1, 16, 16});
        for (double& v : b.full.p_mask.values()) v = rng.uniform() < 0.05 ? 1.0 : 0.0;
        const PriorBundle d = downsample_priors(b, 2);
        for (std::size_t r = 0; r < 16; ++r)
            for (std::size_t c = 0; c < 16; ++c) {
                const double v = b.full.p_mask.at(0, r, c);
                CHECK(d.level(1).p_mask.at(0, r / 2, c / 2) >= v);
                CHECK(d.level(2).p_mask.at(0, r / 4, c / 4) >= v);
            }
    }
}

TEST_CASE("source file round trip") {
    SourceSet s;
    s.add({1.5, 2.25}, 0.75);
    s.add({0, 31}, 1.0);
    std::stringstream ss;
    write_sources(ss, s);
    CHECK(read_sources(ss) == s);
    std::stringstream empty;
    write_sources(empty, SourceSet{});
    CHECK(read_sources(empty).empty());
}

}
