#include "smokeforge/error.hpp"
#include "smokeforge/haze.hpp"

#include "../support/dft_oracle.hpp"
#include "../support/image_fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace smokeforge;
using namespace smokeforge::haze;
using testing::random_frame;
using testing::random_mask;

namespace
{
    double mean(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
} // namespace

TEST_CASE("smooth_mask: constants are preserved")
{
    const MaskFrame ones(20, 13, 1.0);
    const MaskFrame zeros(20, 13, 0.0);
    for (double v : smooth_mask(ones).values)
        CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : smooth_mask(zeros).values)
        CHECK(v == 0.0);
}

TEST_CASE("smooth_mask: a step edge blurs symmetrically to 0.5")
{
    MaskFrame step(40, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 20; x < 40; ++x)
            step.at(x, y) = 1.0;
    const MaskFrame s = smooth_mask(step, 2.0);
    for (int y = 0; y < 10; ++y)
    {
        // The edge lies between columns 19 and 20.
        CHECK(0.5 * (s.at(19, y) + s.at(20, y)) == doctest::Approx(0.5).epsilon(0.01));
        for (int d = 0; d < 20; ++d)
            CHECK(s.at(19 - d, y) + s.at(20 + d, y) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Odd width with the edge column half on: its value stays 0.5.
    MaskFrame odd(41, 3);
    for (int y = 0; y < 3; ++y)
    {
        odd.at(20, y) = 0.5;
        for (int x = 21; x < 41; ++x)
            odd.at(x, y) = 1.0;
    }
    const MaskFrame so = smooth_mask(odd, 2.0);
    for (int y = 0; y < 3; ++y)
        CHECK(std::abs(so.at(20, y) - 0.5) <= 0.01);
}

TEST_CASE("smooth_mask preserves range and mean")
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial)
    {
        std::uniform_int_distribution<int> dim(3, 40);
        const MaskFrame m = random_mask(rng, dim(rng), dim(rng));
        for (double sigma : {0.5, 2.0, 7.0})
        {
            const MaskFrame s = smooth_mask(m, sigma);
            CHECK(std::abs(mean(s.values) - mean(m.values)) <= 1e-6);
            for (double v : s.values)
            {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
    CHECK_THROWS_AS((void)smooth_mask(MaskFrame(3, 3), 0.0), ArgumentError);
}

TEST_CASE("extract_coarse")
{
    std::mt19937 rng(1);
    const Frame f = random_frame(rng, 9, 7, 3);
    CHECK(extract_coarse(MaskFrame(9, 7, 1.0), f) == f);
    for (double v : extract_coarse(MaskFrame(9, 7, 0.0), f).pixels)
        CHECK(v == 0.0);
    const MaskFrame m = random_mask(rng, 9, 7);
    const Frame p = extract_coarse(m, f);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(p.at(x, y, c) - m.at(x, y) * f.at(x, y, c)) <= 1e-12);
    CHECK_THROWS_AS((void)extract_coarse(MaskFrame(8, 7), f), ArgumentError);
}

TEST_CASE("composite_haze")
{
    std::mt19937 rng(2);
    const Frame bg = random_frame(rng, 8, 8, 1);
    CHECK(composite_haze(bg, Frame(8, 8, 1, 0.0), {0.8}) == bg);
    for (double v : composite_haze(bg, Frame(8, 8, 1, 1.0), {0.8}).pixels)
        CHECK(v == doctest::Approx(0.8).epsilon(1e-15));

    const Frame one = composite_haze(Frame(1, 1, 1, 0.4), Frame(1, 1, 1, 0.25), {0.8});
    CHECK(one.pixels[0] == doctest::Approx(0.5).epsilon(1e-15));

    // Affine in S: the midpoint of two smoke maps composites to the midpoint.
    const Frame s1 = random_frame(rng, 8, 8, 1);
    const Frame s2 = random_frame(rng, 8, 8, 1);
    Frame mid = s1;
    for (std::size_t i = 0; i < mid.pixels.size(); ++i)
        mid.pixels[i] = 0.5 * (s1.pixels[i] + s2.pixels[i]);
    const Frame c1 = composite_haze(bg, s1, {0.7});
    const Frame c2 = composite_haze(bg, s2, {0.7});
    const Frame cm = composite_haze(bg, mid, {0.7});
    for (std::size_t i = 0; i < cm.pixels.size(); ++i)
        CHECK(cm.pixels[i] == doctest::Approx(0.5 * (c1.pixels[i] + c2.pixels[i])).epsilon(1e-12));

    // A equal to the background makes compositing the identity.
    const Frame flat(8, 8, 1, 0.3);
    for (double v : composite_haze(flat, s1, {0.3}).pixels)
        CHECK(v == doctest::Approx(0.3).epsilon(1e-12));

    // RGB background with a single-channel smoke map and per-channel A.
    const Frame rgb = random_frame(rng, 5, 4, 3);
    const Frame s = random_frame(rng, 5, 4, 1);
    const Frame out = composite_haze(rgb, s, {0.9, 0.8, 0.7});
    const double A[3] = {0.9, 0.8, 0.7};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(out.at(x, y, c) ==
                      doctest::Approx(rgb.at(x, y, c) * (1 - s.at(x, y)) + A[c] * s.at(x, y)).epsilon(1e-12));

    CHECK_THROWS_AS((void)composite_haze(bg, Frame(7, 8, 1), {0.5}), ArgumentError);
    CHECK_THROWS_AS((void)composite_haze(rgb, s, {0.5, 0.5}), ArgumentError);
    CHECK_THROWS_AS((void)composite_haze(bg, s1, {1.5}), ArgumentError);
}

TEST_CASE("atmospheric light")
{
    const Frame gray(30, 20, 3, 0.42);
    const auto A = estimate_atmospheric_light(gray);
    REQUIRE(A.size() == 3);
    for (double a : A)
        CHECK(a == 0.42);

    Frame dark(60, 60, 1, 0.05);
    for (int y = 20; y < 40; ++y)
        for (int x = 10; x < 30; ++x)
            dark.at(x, y) = 1.0;
    CHECK(estimate_atmospheric_light(dark)[0] == 1.0);

    CHECK_THROWS_AS((void)estimate_atmospheric_light(dark, 4), ArgumentError);
    CHECK_THROWS_AS((void)estimate_atmospheric_light(dark, 15, 0.0), ArgumentError);
}

TEST_CASE("atmospheric light recovered from a synthetic hazy frame")
{
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial)
    {
        std::uniform_real_distribution<double> ua(0.6, 1.0);
        const double a = ua(rng);
        const Frame bg = random_frame(rng, 96, 96, 3, 0.0, 0.5);
        // Dense smoke over a region larger than the dark-channel patch.
        MaskFrame m(96, 96);
        for (int y = 30; y < 70; ++y)
            for (int x = 25; x < 65; ++x)
                m.at(x, y) = 1.0;
        const Frame smoke = image::to_frame(smooth_mask(m, 2.0));
        const Frame hazy = composite_haze(bg, smoke, {a});
        for (double got : estimate_atmospheric_light(hazy))
            CHECK(std::abs(got - a) <= 0.05);
    }
}

TEST_CASE("extract_clean_smoke closed forms")
{
    std::mt19937 rng(9);
    const Frame bg = random_frame(rng, 10, 10, 1, 0.0, 0.5);
    const auto none = extract_clean_smoke(bg, bg, {0.9});
    for (double v : none.smoke.pixels)
        CHECK(std::abs(v) <= 1e-12);
    CHECK(none.report.floor_pixels == 0);
    CHECK(none.report.total_pixels == 100);

    const auto full = extract_clean_smoke(Frame(10, 10, 1, 0.9), bg, {0.9});
    for (double v : full.smoke.pixels)
        CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extract inverts composite away from the denominator floor")
{
    std::mt19937 rng(10);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Frame bg = random_frame(rng, 32, 32, 3);
        const Frame s = random_frame(rng, 32, 32, 3);
        std::uniform_real_distribution<double> ua(0.6, 1.0);
        const std::vector<double> A{ua(rng), ua(rng), ua(rng)};
        const Frame hazy = composite_haze(bg, s, A);
        const auto ex = extract_clean_smoke(hazy, bg, A);
        std::size_t floored = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
            {
                bool any = false;
                for (int c = 0; c < 3; ++c)
                {
                    if (std::abs(bg.at(x, y, c) - A[c]) < kDefaultDenomFloor)
                    {
                        any = true;
                        CHECK(ex.smoke.at(x, y, c) == 0.0); // no fallback given
                    }
                    else
                        CHECK(std::abs(ex.smoke.at(x, y, c) - s.at(x, y, c)) < 1e-6);
                }
                floored += any;
                CHECK(ex.floor_mask.at(x, y) == (any ? 1.0 : 0.0));
            }
        CHECK(ex.report.floor_pixels == floored);
    }
}

TEST_CASE("floor pixels take the fallback and are reported")
{
    Frame bg(4, 1, 1, 0.2);
    bg.at(1, 0) = 0.79; // within 0.02 of A
    bg.at(3, 0) = 0.8;  // exactly A
    const Frame hazy = composite_haze(bg, Frame(4, 1, 1, 0.5), {0.8});
    const Frame coarse(4, 1, 1, 0.33);
    const auto ex = extract_clean_smoke(hazy, bg, {0.8}, coarse);
    CHECK(ex.report.floor_pixels == 2);
    CHECK(ex.report.floor_fraction() == 0.5);
    CHECK(ex.smoke.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ex.smoke.at(1, 0) == 0.33);
    CHECK(ex.smoke.at(3, 0) == 0.33);
    CHECK_THROWS_AS((void)extract_clean_smoke(hazy, bg, {0.8}, Frame(3, 1, 1)), ArgumentError);
}

TEST_CASE("decay_weight")
{
    WeightSchedule s{0.0, 0.02, 0};
    CHECK(decay_weight(s, 0) == 1.0);
    CHECK(std::abs(decay_weight(s, 50) - std::exp(-1.0)) <= 1e-12);
    CHECK(decay_weight(WeightSchedule{0.3, 0.0, 5}, 500) == 1.0);
    WeightSchedule floor{0.25, 0.1, 3};
    double prev = 1.0;
    for (int t = 3; t < 300; ++t)
    {
        const double w = decay_weight(floor, t);
        CHECK(w <= prev);
        CHECK(w >= 0.25);
        CHECK(w <= 1.0);
        prev = w;
    }
    CHECK(decay_weight(floor, 300) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK_THROWS_AS((void)decay_weight(floor, 2), ArgumentError);
    CHECK_THROWS_AS((void)decay_weight(WeightSchedule{1.5, 0.1, 0}, 1), ArgumentError);
    CHECK_THROWS_AS((void)decay_weight(WeightSchedule{0.0, -0.1, 0}, 1), ArgumentError);
}

TEST_CASE("frequency loss matches a naive DFT")
{
    std::mt19937 rng(21);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Frame a = random_frame(rng, 4, 4, 1);
        const Frame b = random_frame(rng, 4, 4, 1);
        const double expect = testing::oracle_frequency_distance(a, b);
        CHECK(std::abs(frequency_distance(a, b) - expect) <= 1e-9);
        FrequencyLossOptions opt;
        opt.warmup = 100;
        CHECK(std::abs(frequency_loss(a, b, 250, opt) - 0.001 * expect) <= 1e-12);
        CHECK(std::abs(frequency_loss(a, b, 25, opt) - 0.25 * 0.001 * expect) <= 1e-12);
    }
    // Non-square, multi-channel.
    const Frame a = random_frame(rng, 5, 3, 3);
    const Frame b = random_frame(rng, 5, 3, 3);
    CHECK(std::abs(frequency_distance(a, b) - testing::oracle_frequency_distance(a, b)) <= 1e-9);
}

TEST_CASE("frequency loss properties")
{
    std::mt19937 rng(22);
    const Frame a = random_frame(rng, 8, 6, 1);
    const Frame b = random_frame(rng, 8, 6, 1);
    CHECK(frequency_distance(a, a) == 0.0);
    CHECK(frequency_distance(a, b) > 0.0);
    CHECK(frequency_distance(a, b) == doctest::Approx(frequency_distance(b, a)).epsilon(1e-14));
    FrequencyLossOptions opt;
    opt.warmup = 10;
    CHECK(frequency_loss(a, b, 0, opt) == 0.0);
    opt.warmup = 0;
    CHECK(frequency_loss(a, b, 0, opt) > 0.0);
    CHECK(frequency_distance(a, b, PhaseDifference::Wrapped) <= frequency_distance(a, b, PhaseDifference::Raw));
    CHECK_THROWS_AS((void)frequency_distance(a, Frame(8, 5, 1)), ArgumentError);

    // A half-period shift of a Nyquist pattern: raw phase distance is pi per
    // affected bin, and wrap-awareness does not change that.
    Frame stripes(4, 1, 1);
    stripes.pixels = {1, 0, 1, 0};
    Frame shifted(4, 1, 1);
    shifted.pixels = {0, 1, 0, 1};
    const double raw = frequency_distance(stripes, shifted);
    CHECK(raw == doctest::Approx(std::numbers::pi / 4 + 0.0).epsilon(1e-12));
}
