#pragma once

#include <array>
#include <cstdint>

#include "wmc/env.hpp"
#include "wmc/rng.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// Style interventions on rgb only. No op resizes the image; depth and the
// task vector pass through every pipeline untouched.
struct AugmentationConfig {
    int pad = 10;
    float hue_delta = 0.1f;
    float brightness_delta = 0.4f;
    float contrast_delta = 0.4f;
    float saturation_delta = 0.2f;
    float blur_sigma_min = 0.1f;
    float blur_sigma_max = 2.0f;
    // Cutout bounds are declared for 120x160 inputs and scaled by the image
    // side ratio before use (fraction of the image stays fixed).
    int cutout_min = 30;
    int cutout_max = 50;
    int reference_side = 120;
    float p_spatial_jitter = 1.0f;
    float p_color_jitter = 0.8f;
    float p_grayscale = 0.2f;
    float p_blur = 0.5f;
    float p_cutout = 0.5f;

    int scaled_cutout_min(int img_side) const;
    int scaled_cutout_max(int img_side) const;
    void validate(int img_h, int img_w) const;
};

struct AugmentedPair {
    Tensor32 view_q;
    Tensor32 view_k;
    Tensor32 depth;                   // bit-identical to the source
    std::array<float, 6> task_vec{};  // bit-identical to the source
    int episode = -1;
    int t = -1;
};

// Each op is a pure function of (input, rng state).
Tensor32 spatial_jitter(const Tensor32& rgb, int pad, RngStream& rng);
Tensor32 color_jitter(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream& rng);
Tensor32 grayscale(const Tensor32& rgb);
Tensor32 gaussian_blur(const Tensor32& rgb, float sigma);
Tensor32 cutout(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream& rng);

// One randomly composed style intervention.
Tensor32 augment_view(const Tensor32& rgb, const AugmentationConfig& cfg, RngStream rng);

AugmentedPair make_pair(const EnvObservation& obs, const AugmentationConfig& cfg,
                        RngStream rng);

}  // namespace wmc
