#include "wmc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wmc {

namespace {

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    v = mx;
    const float d = mx - mn;
    s = mx > 0 ? d / mx : 0.0f;
    if (d <= 1e-12f) {
        h = 0.0f;
        return;
    }
    if (mx == r) {
        h = (g - b) / d;
    } else if (mx == g) {
        h = 2.0f + (b - r) / d;
    } else {
        h = 4.0f + (r - g) / d;
    }
    h /= 6.0f;
    if (h < 0) {
        h += 1.0f;
    }
}

void hsv_to_rgb_px(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const float c = v * s;
    const float hp = h * 6.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    float rr = 0, gg = 0, bb = 0;
    if (hp < 1) {
        rr = c, gg = x;
    } else if (hp < 2) {
        rr = x, gg = c;
    } else if (hp < 3) {
        gg = c, bb = x;
    } else if (hp < 4) {
        gg = x, bb = c;
    } else if (hp < 5) {
        rr = x, bb = c;
    } else {
        rr = c, bb = x;
    }
    const float m = v - c;
    r = rr + m;
    g = gg + m;
    b = bb + m;
}

}  // namespace

int AugmentationConfig::scaled_cutout_min(int img_side) const {
    return std::max(1, cutout_min * img_side / reference_side);
}

int AugmentationConfig::scaled_cutout_max(int img_side) const {
    return std::max(1, cutout_max * img_side / reference_side);
}

void AugmentationConfig::validate(int img_h, int img_w) const {
    check(pad >= 0, "augment: pad must be >= 0");
    check(pad <= std::min(img_h, img_w), "augment: pad larger than image side");
    check(blur_sigma_min <= blur_sigma_max && blur_sigma_min >= 0,
          "augment: invalid blur sigma range");
    check(cutout_min <= cutout_max, "augment: invalid cutout range");
    const int side = std::min(img_h, img_w);
    check(scaled_cutout_max(side) <= side,
          "augment: scaled cutout does not fit inside the image");
}

Tensor32 spatial_jitter(const Tensor32& rgb, int pad, RngStream& rng) {
    if (pad == 0) {
        return rgb;
    }
    const int h = rgb.shape[0], w = rgb.shape[1];
    const int oy = rng.uniform_int(2 * pad + 1);
    const int ox = rng.uniform_int(2 * pad + 1);
    Tensor32 out({h, w, 3});
    // replicate-pad then crop == clamped source indexing
    for (int y = 0; y < h; ++y) {
        const int sy = std::clamp(y + oy - pad, 0, h - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = std::clamp(x + ox - pad, 0, w - 1);
            const float* src = rgb.data() + (static_cast<int64_t>(sy) * w + sx) * 3;
            float* dst = out.data() + (static_cast<int64_t>(y) * w + x) * 3;
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
        }
    }
    return out;
}

Tensor32 color_jitter(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream& rng) {
    const float dh = static_cast<float>(rng.uniform(-cfg.hue_delta, cfg.hue_delta));
    const float fb = 1.0f + static_cast<float>(
                                rng.uniform(-cfg.brightness_delta, cfg.brightness_delta));
    const float fs = 1.0f + static_cast<float>(
                                rng.uniform(-cfg.saturation_delta, cfg.saturation_delta));
    const float fc =
        1.0f + static_cast<float>(rng.uniform(-cfg.contrast_delta, cfg.contrast_delta));
    const int64_t pixels = rgb.size() / 3;
    Tensor32 out(rgb.shape);
    // hue/saturation/brightness in HSV space
    double vmean = 0.0;
    for (int64_t i = 0; i < pixels; ++i) {
        const float* src = rgb.data() + i * 3;
        float h, s, v;
        rgb_to_hsv(src[0], src[1], src[2], h, s, v);
        h += dh;
        s = clamp01(s * fs);
        v = clamp01(v * fb);
        float* dst = out.data() + i * 3;
        hsv_to_rgb_px(h, s, v, dst[0], dst[1], dst[2]);
        vmean += (dst[0] + dst[1] + dst[2]) / 3.0;
    }
    // contrast about the post-adjustment mean
    const float mean = static_cast<float>(vmean / static_cast<double>(pixels));
    for (int64_t i = 0; i < out.size(); ++i) {
        out[i] = clamp01(mean + (out[i] - mean) * fc);
    }
    return out;
}

Tensor32 grayscale(const Tensor32& rgb) {
    Tensor32 out(rgb.shape);
    const int64_t pixels = rgb.size() / 3;
    for (int64_t i = 0; i < pixels; ++i) {
        const float* src = rgb.data() + i * 3;
        const float y = 0.299f * src[0] + 0.587f * src[1] + 0.114f * src[2];
        float* dst = out.data() + i * 3;
        dst[0] = dst[1] = dst[2] = clamp01(y);
    }
    return out;
}

Tensor32 gaussian_blur(const Tensor32& rgb, float sigma) {
    if (sigma <= 0.0f) {
        return rgb;
    }
    const int h = rgb.shape[0], w = rgb.shape[1];
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0f * sigma)));
    std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
    float sum = 0.0f;
    for (int i = -radius; i <= radius; ++i) {
        const float v = std::exp(-0.5f * static_cast<float>(i) * static_cast<float>(i) /
                                 (sigma * sigma));
        kernel[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (float& v : kernel) {
        v /= sum;
    }
    Tensor32 tmp({h, w, 3});
    // horizontal pass, replicate borders
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc[3] = {0, 0, 0};
            for (int k = -radius; k <= radius; ++k) {
                const int sx = std::clamp(x + k, 0, w - 1);
                const float* src = rgb.data() + (static_cast<int64_t>(y) * w + sx) * 3;
                const float kv = kernel[static_cast<size_t>(k + radius)];
                acc[0] += kv * src[0];
                acc[1] += kv * src[1];
                acc[2] += kv * src[2];
            }
            float* dst = tmp.data() + (static_cast<int64_t>(y) * w + x) * 3;
            dst[0] = acc[0];
            dst[1] = acc[1];
            dst[2] = acc[2];
        }
    }
    Tensor32 out({h, w, 3});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc[3] = {0, 0, 0};
            for (int k = -radius; k <= radius; ++k) {
                const int sy = std::clamp(y + k, 0, h - 1);
                const float* src = tmp.data() + (static_cast<int64_t>(sy) * w + x) * 3;
                const float kv = kernel[static_cast<size_t>(k + radius)];
                acc[0] += kv * src[0];
                acc[1] += kv * src[1];
                acc[2] += kv * src[2];
            }
            float* dst = out.data() + (static_cast<int64_t>(y) * w + x) * 3;
            dst[0] = clamp01(acc[0]);
            dst[1] = clamp01(acc[1]);
            dst[2] = clamp01(acc[2]);
        }
    }
    return out;
}

Tensor32 cutout(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream& rng) {
    const int h = rgb.shape[0], w = rgb.shape[1];
    const int side = std::min(h, w);
    const int lo = cfg.scaled_cutout_min(side);
    const int hi = cfg.scaled_cutout_max(side);
    const int size = lo + rng.uniform_int(hi - lo + 1);
    const int y0 = rng.uniform_int(h - size + 1);
    const int x0 = rng.uniform_int(w - size + 1);
    Tensor32 out = rgb;
    for (int y = y0; y < y0 + size; ++y) {
        for (int x = x0; x < x0 + size; ++x) {
            float* dst = out.data() + (static_cast<int64_t>(y) * w + x) * 3;
            dst[0] = dst[1] = dst[2] = 0.0f;
        }
    }
    return out;
}

Tensor32 augment_view(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream rng) {
    cfg.validate(rgb.shape[0], rgb.shape[1]);
    Tensor32 img = rgb;
    RngStream gate = rng.split("gate");
    RngStream draw = rng.split("draw");
    if (gate.bernoulli(cfg.p_spatial_jitter)) {
        img = spatial_jitter(img, cfg.pad, draw);
    }
    if (gate.bernoulli(cfg.p_color_jitter)) {
        img = color_jitter(img, cfg, draw);
    }
    if (gate.bernoulli(cfg.p_grayscale)) {
        img = grayscale(img);
    }
    if (gate.bernoulli(cfg.p_blur)) {
        const float sigma =
            static_cast<float>(draw.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
        img = gaussian_blur(img, sigma);
    }
    if (gate.bernoulli(cfg.p_cutout)) {
        img = cutout(img, cfg, draw);
    }
    return img;
}

AugmentedPair make_pair(const EnvObservation& obs, const AugmentationConfig& cfg,
                        RngStream rng) {
    AugmentedPair pair;
    pair.view_q = augment_view(obs.rgb, cfg, rng.split("q"));
    pair.view_k = augment_view(obs.rgb, cfg, rng.split("k"));
    pair.depth = obs.depth;
    pair.task_vec = obs.task_vec;
    return pair;
}

}  // namespace wmc
