#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "wmc/rng.hpp"

namespace wmc {

enum class Split { train = 0, test = 1 };

inline const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

enum class TextureFamily : int { stripes = 0, checker = 1, noise = 2, gradient = 3 };

const char* texture_family_name(TextureFamily f);

// Procedural texture families stand in for held-out material ids: the train
// and test populations draw their hues from disjoint ranges, so style is
// genuinely novel at evaluation time while geometry is untouched.
struct TextureSpec {
    TextureFamily family = TextureFamily::stripes;
    Split split = Split::train;
    float hue = 0.0f;    // primary color hue, split-partitioned
    float hue2 = 0.0f;   // secondary color hue, split-partitioned
    float sat = 0.8f;    // shared range
    float val = 0.8f;    // shared range
    float val2 = 0.4f;   // secondary color value
    float freq = 3.0f;   // stripes/checker spatial frequency
    float phase = 0.0f;
    int orient = 0;  // stripes: 0 = along u, 1 = along v, 2 = diagonal
    float noise_scale = 4.0f;
    uint64_t noise_seed = 0;

    // Color at face coordinates (u, v) in [0,1)^2.
    std::array<float, 3> sample(float u, float v) const;

    std::string to_text() const;
};

// Hue partition with a safety gap; disjoint by construction.
struct HueRange {
    float lo, hi;
};
HueRange split_hue_range(Split split);

TextureSpec sample_texture(TextureFamily family, Split split, RngStream& rng);

// All split-partitioned parameters lie inside the tagged range.
bool texture_in_split_range(const TextureSpec& spec);

std::array<float, 3> hsv_to_rgb(float h, float s, float v);

}  // namespace wmc
