#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "wmc/augment.hpp"
#include "wmc/env.hpp"

using namespace wmc;

namespace {

Tensor32 random_image(int h, int w, RngStream& rng) {
    Tensor32 img({h, w, 3});
    for (int64_t i = 0; i < img.size(); ++i) {
        img[i] = static_cast<float>(rng.uniform());
    }
    return img;
}

double mean_abs_diff(const Tensor32& a, const Tensor32& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        acc += std::fabs(a[i] - b[i]);
    }
    return acc / static_cast<double>(a.size());
}

// chi-square 0.99 quantile via the Wilson-Hilferty approximation
double chi2_q99(int df) {
    const double d = static_cast<double>(df);
    const double z = 2.3263478740408408;  // Phi^{-1}(0.99)
    const double t = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
    return d * t * t * t;
}

}  // namespace

TEST_CASE("spatial_jitter: identity at pad 0, determinism, uniform offsets") {
    RngStream rng(1);
    auto img = random_image(64, 64, rng);

    RngStream r0(5);
    auto same = spatial_jitter(img, 0, r0);
    CHECK(mean_abs_diff(same, img) == 0.0);

    RngStream ra(9), rb(9);
    auto a = spatial_jitter(img, 10, ra);
    auto b = spatial_jitter(img, 10, rb);
    CHECK(mean_abs_diff(a, b) == 0.0);

    // offset distribution over (2 pad + 1)^2 positions, chi-square p > 0.01.
    // Offsets are recovered on a witness image encoding pixel coordinates.
    const int pad = 10;
    const int bins = (2 * pad + 1) * (2 * pad + 1);
    Tensor32 witness({64, 64, 3});
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            float* px = witness.data() + (static_cast<int64_t>(y) * 64 + x) * 3;
            px[0] = static_cast<float>(x);
            px[1] = static_cast<float>(y);
            px[2] = 0.0f;
        }
    }
    std::map<int, int> counts;
    RngStream seeds(1234);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        RngStream r = seeds.split(static_cast<uint64_t>(i));
        auto out = spatial_jitter(witness, pad, r);
        // the center pixel reveals the offset (it never clamps)
        const float* px = out.data() + (static_cast<int64_t>(32) * 64 + 32) * 3;
        const int ox = static_cast<int>(px[0]) - 32 + pad;
        const int oy = static_cast<int>(px[1]) - 32 + pad;
        REQUIRE(ox >= 0);
        REQUIRE(ox <= 2 * pad);
        REQUIRE(oy >= 0);
        REQUIRE(oy <= 2 * pad);
        counts[oy * (2 * pad + 1) + ox] += 1;
    }
    const double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int bin = 0; bin < bins; ++bin) {
        const double observed = counts.count(bin) ? counts[bin] : 0.0;
        chi2 += (observed - expected) * (observed - expected) / expected;
    }
    INFO("chi2=" << chi2 << " threshold=" << chi2_q99(bins - 1));
    CHECK(chi2 < chi2_q99(bins - 1));
}

TEST_CASE("grayscale: all channels equal the luminance") {
    RngStream rng(3);
    auto img = random_image(32, 32, rng);
    auto g = grayscale(img);
    for (int64_t i = 0; i < g.size() / 3; ++i) {
        CHECK(g[i * 3] == g[i * 3 + 1]);
        CHECK(g[i * 3] == g[i * 3 + 2]);
        const float y = 0.299f * img[i * 3] + 0.587f * img[i * 3 + 1] +
                        0.114f * img[i * 3 + 2];
        CHECK(g[i * 3] == doctest::Approx(y).epsilon(1e-6));
    }
}

TEST_CASE("gaussian_blur: small sigma approaches identity") {
    RngStream rng(5);
    auto img = random_image(32, 32, rng);
    auto out = gaussian_blur(img, 0.05f);
    double worst = 0.0;
    for (int64_t i = 0; i < img.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::fabs(out[i] - img[i])));
    }
    CHECK(worst < 1e-3);

    // larger sigma actually smooths
    auto smooth = gaussian_blur(img, 2.0f);
    CHECK(mean_abs_diff(smooth, img) > 0.01);
}

TEST_CASE("cutout: square side within the scaled bounds") {
    AugmentationConfig cfg;
    RngStream rng(7);
    auto img = random_image(64, 64, rng);
    for (int64_t i = 0; i < img.size(); ++i) {
        img[i] = std::max(0.05f, img[i]);  // strictly positive so zeros mark the cut
    }
    const int lo = cfg.scaled_cutout_min(64);
    const int hi = cfg.scaled_cutout_max(64);
    CHECK(lo == 16);
    CHECK(hi == 26);  // floor(50*64/120)
    RngStream seeds(99);
    for (int i = 0; i < 1000; ++i) {
        RngStream r = seeds.split(static_cast<uint64_t>(i));
        auto out = cutout(img, cfg, r);
        int zeros = 0;
        for (int64_t j = 0; j < out.size() / 3; ++j) {
            if (out[j * 3] == 0.0f && out[j * 3 + 1] == 0.0f && out[j * 3 + 2] == 0.0f) {
                ++zeros;
            }
        }
        // the zero region is exactly one axis-aligned square
        const int side = static_cast<int>(std::lround(std::sqrt(double(zeros))));
        CHECK(side * side == zeros);
        CHECK(side >= lo);
        CHECK(side <= hi);
    }
}

TEST_CASE("color_jitter: output in range, deterministic") {
    AugmentationConfig cfg;
    RngStream rng(11);
    auto img = random_image(32, 32, rng);
    RngStream ra(13), rb(13);
    auto a = color_jitter(img, cfg, ra);
    auto b = color_jitter(img, cfg, rb);
    CHECK(mean_abs_diff(a, b) == 0.0);
    for (int64_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] >= 0.0f);
        CHECK(a[i] <= 1.0f);
    }
}

TEST_CASE("make_pair: contracts") {
    EnvConfig env_cfg;
    PointGoalEnv env(env_cfg);
    auto obs = env.reset(3, 4, Split::train);
    AugmentationConfig cfg;

    // all probabilities zero -> both views equal the source
    AugmentationConfig off = cfg;
    off.p_spatial_jitter = off.p_color_jitter = off.p_grayscale = off.p_blur =
        off.p_cutout = 0.0f;
    auto pair_off = make_pair(obs, off, RngStream(1));
    CHECK(mean_abs_diff(pair_off.view_q, obs.rgb) == 0.0);
    CHECK(mean_abs_diff(pair_off.view_k, obs.rgb) == 0.0);

    // depth and task_vec bit-identical through any pipeline
    RngStream seeds(55);
    int differing = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        auto pair = make_pair(obs, cfg, seeds.split(static_cast<uint64_t>(i)));
        CHECK(pair.depth.shape == obs.depth.shape);
        for (int64_t j = 0; j < obs.depth.size(); ++j) {
            REQUIRE(pair.depth[j] == obs.depth[j]);
        }
        for (int k = 0; k < 6; ++k) {
            REQUIRE(pair.task_vec[k] == obs.task_vec[k]);
        }
        // no resize: output shape equals input shape always
        REQUIRE(pair.view_q.shape == obs.rgb.shape);
        REQUIRE(pair.view_k.shape == obs.rgb.shape);
        if (mean_abs_diff(pair.view_q, pair.view_k) > 0.0) {
            ++differing;
        }
    }
    // views differ from each other in >= 99% of seeds
    CHECK(differing >= 990);

    // purity: same seed gives the same pair
    auto p1 = make_pair(obs, cfg, RngStream(777));
    auto p2 = make_pair(obs, cfg, RngStream(777));
    CHECK(mean_abs_diff(p1.view_q, p2.view_q) == 0.0);
    CHECK(mean_abs_diff(p1.view_k, p2.view_k) == 0.0);
}

TEST_CASE("augmentation config validation") {
    AugmentationConfig cfg;
    cfg.validate(64, 64);
    AugmentationConfig bad = cfg;
    bad.pad = 100;
    CHECK_THROWS(bad.validate(64, 64));
    AugmentationConfig bad2 = cfg;
    bad2.cutout_min = 60;
    CHECK_THROWS(bad2.validate(64, 64));  // min > max
}
