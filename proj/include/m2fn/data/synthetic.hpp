#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m2fn/data/click_log.hpp"
#include "m2fn/image.hpp"

namespace m2fn::data {

// Click-probability shifts planted into the generative model. Each effect
// can be zeroed independently.
struct PlantedEffects {
    double base_ctr = 0.10;
    double color_delta = 0.08;        // warm background colors
    double interaction_delta = 0.08;  // age group x text-band position
    double time_delta = 0.06;         // peak display hours
};

struct SyntheticInstance {
    Image image;
    std::vector<ClickLogRecord> records;  // identical key, one per exposure
    double true_ctr = 0;                  // closed-form click probability
    std::string background_color;         // palette label of the background
    bool text_on_top = false;
};

struct SyntheticOptions {
    int image_size = 32;
    std::uint64_t min_impressions = 200;
    std::uint64_t max_impressions = 800;
};

// Deterministic per seed. Images carry a background color, a white text-band
// marker (top or bottom), and a sprite blob; the click probability depends on
// background color, the age x band-position interaction, and time of day, so
// auxiliary attributes carry signal an image-only model cannot recover.
std::vector<SyntheticInstance> generate_synthetic_dataset(std::uint64_t seed, int n_instances,
                                                          const PlantedEffects& effects,
                                                          const SyntheticOptions& opts = {});

// Closed-form click probability of the generator; the oracle for planted
// effect tests.
double synthetic_click_probability(const PlantedEffects& effects, const std::string& background_color,
                                   bool text_on_top, int age, int time);

bool synthetic_color_is_warm(const std::string& label);
bool synthetic_time_is_peak(int time);

}  // namespace m2fn::data
