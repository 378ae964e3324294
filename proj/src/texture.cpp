#include "wmc/texture.hpp"

#include <cmath>
#include <sstream>

namespace wmc {

const char* texture_family_name(TextureFamily f) {
    switch (f) {
        case TextureFamily::stripes:
            return "stripes";
        case TextureFamily::checker:
            return "checker";
        case TextureFamily::noise:
            return "noise";
        case TextureFamily::gradient:
            return "gradient";
    }
    return "unknown";
}

std::array<float, 3> hsv_to_rgb(float h, float s, float v) {
    h = h - std::floor(h);
    const float c = v * s;
    const float hp = h * 6.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c, g = x;
    } else if (hp < 2) {
        r = x, g = c;
    } else if (hp < 3) {
        g = c, b = x;
    } else if (hp < 4) {
        g = x, b = c;
    } else if (hp < 5) {
        r = x, b = c;
    } else {
        r = c, b = x;
    }
    const float m = v - c;
    return {r + m, g + m, b + m};
}

HueRange split_hue_range(Split split) {
    // disjoint with a 0.08 gap
    return split == Split::train ? HueRange{0.00f, 0.46f} : HueRange{0.54f, 1.00f};
}

namespace {

float lattice_noise(uint64_t seed, int ix, int iy) {
    uint64_t h = RngStream::mix64(seed ^ (static_cast<uint64_t>(ix) * 0x8da6b343ull) ^
                                  (static_cast<uint64_t>(iy) * 0xd8163841ull));
    return static_cast<float>(static_cast<double>(h >> 11) * 0x1.0p-53);
}

float value_noise(uint64_t seed, float x, float y) {
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));
    const float fx = x - static_cast<float>(ix);
    const float fy = y - static_cast<float>(iy);
    const float sx = fx * fx * (3.0f - 2.0f * fx);
    const float sy = fy * fy * (3.0f - 2.0f * fy);
    const float n00 = lattice_noise(seed, ix, iy);
    const float n10 = lattice_noise(seed, ix + 1, iy);
    const float n01 = lattice_noise(seed, ix, iy + 1);
    const float n11 = lattice_noise(seed, ix + 1, iy + 1);
    const float a = n00 + sx * (n10 - n00);
    const float b = n01 + sx * (n11 - n01);
    return a + sy * (b - a);
}

std::array<float, 3> lerp3(const std::array<float, 3>& a, const std::array<float, 3>& b,
                           float t) {
    return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

}  // namespace

std::array<float, 3> TextureSpec::sample(float u, float v) const {
    const auto color_a = hsv_to_rgb(hue, sat, val);
    const auto color_b = hsv_to_rgb(hue2, sat, val2);
    switch (family) {
        case TextureFamily::stripes: {
            const float c = orient == 0 ? u : (orient == 1 ? v : 0.5f * (u + v));
            const int idx = static_cast<int>(std::floor(c * freq + phase));
            return (idx & 1) ? color_b : color_a;
        }
        case TextureFamily::checker: {
            const int iu = static_cast<int>(std::floor(u * freq + phase));
            const int iv = static_cast<int>(std::floor(v * freq + phase));
            return ((iu + iv) & 1) ? color_b : color_a;
        }
        case TextureFamily::noise: {
            const float n =
                value_noise(noise_seed, u * noise_scale + phase, v * noise_scale);
            return lerp3(color_a, color_b, n);
        }
        case TextureFamily::gradient: {
            const float t = orient == 0 ? u : v;
            return lerp3(color_a, color_b, t);
        }
    }
    return color_a;
}

TextureSpec sample_texture(TextureFamily family, Split split, RngStream& rng) {
    const HueRange hr = split_hue_range(split);
    TextureSpec spec;
    spec.family = family;
    spec.split = split;
    spec.hue = static_cast<float>(rng.uniform(hr.lo, hr.hi));
    spec.hue2 = static_cast<float>(rng.uniform(hr.lo, hr.hi));
    spec.sat = static_cast<float>(rng.uniform(0.55, 0.95));
    spec.val = static_cast<float>(rng.uniform(0.55, 0.95));
    spec.val2 = static_cast<float>(rng.uniform(0.15, 0.45));
    spec.freq = static_cast<float>(rng.uniform(2.0, 6.0));
    spec.phase = static_cast<float>(rng.uniform(0.0, 1.0));
    spec.orient = rng.uniform_int(3);
    spec.noise_scale = static_cast<float>(rng.uniform(2.0, 8.0));
    spec.noise_seed = rng.next_u64();
    return spec;
}

bool texture_in_split_range(const TextureSpec& spec) {
    const HueRange hr = split_hue_range(spec.split);
    return spec.hue >= hr.lo && spec.hue <= hr.hi && spec.hue2 >= hr.lo &&
           spec.hue2 <= hr.hi;
}

std::string TextureSpec::to_text() const {
    std::ostringstream os;
    os << "family=" << texture_family_name(family) << " split=" << split_name(split)
       << " hue=" << hue << " hue2=" << hue2 << " sat=" << sat << " val=" << val
       << " val2=" << val2 << " freq=" << freq << " phase=" << phase
       << " orient=" << orient << " noise_scale=" << noise_scale
       << " noise_seed=" << noise_seed;
    return os.str();
}

}  // namespace wmc
