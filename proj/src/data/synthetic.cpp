#include "m2fn/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "m2fn/common.hpp"

namespace m2fn::data {

namespace {

struct Background {
    const char* label;
    std::array<std::uint8_t, 3> rgb;
};

// White and grey are reserved for the text-band marker and sprite.
constexpr std::array<Background, 7> kBackgrounds = {{
    {"black", {10, 10, 10}},
    {"blue", {20, 30, 230}},
    {"brown", {145, 80, 15}},
    {"green", {15, 120, 20}},
    {"pink", {245, 185, 195}},
    {"red", {235, 20, 25}},
    {"yellow", {240, 235, 25}},
}};

const std::vector<std::string>& phrase_pool() {
    static const std::vector<std::string> pool = {
        "play now",        "limited offer",  "new season",    "join the battle", "free rewards",
        "download today",  "epic adventure", "daily bonus",   "top rated game",  "start your quest",
    };
    return pool;
}

}  // namespace

bool synthetic_color_is_warm(const std::string& label) {
    return label == "red" || label == "yellow" || label == "pink" || label == "brown";
}

bool synthetic_time_is_peak(int time) {
    return (time >= 2 && time <= 4) || (time >= 9 && time <= 12) || (time >= 15 && time <= 17);
}

double synthetic_click_probability(const PlantedEffects& effects, const std::string& background_color,
                                   bool text_on_top, int age, int time) {
    double p = effects.base_ctr;
    if (synthetic_color_is_warm(background_color)) p += effects.color_delta;
    // Crossed interaction: older users respond to top banners, younger to
    // bottom banners. Neither the image nor the attributes alone resolve it.
    if ((age >= 5) == text_on_top) p += effects.interaction_delta;
    if (synthetic_time_is_peak(time)) p += effects.time_delta;
    return std::clamp(p, 0.005, 0.95);
}

std::vector<SyntheticInstance> generate_synthetic_dataset(std::uint64_t seed, int n_instances,
                                                          const PlantedEffects& effects,
                                                          const SyntheticOptions& opts) {
    if (n_instances < 1) throw UsageError("generate_synthetic_dataset: n_instances must be >= 1");

    Rng rng(derive_seed(seed, "synthetic"));
    std::uniform_int_distribution<int> pick_bg(0, static_cast<int>(kBackgrounds.size()) - 1);
    std::uniform_int_distribution<int> pick_phrase(0, static_cast<int>(phrase_pool().size()) - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<std::uint64_t> pick_impr(opts.min_impressions, opts.max_impressions);

    const int s = opts.image_size;
    std::vector<SyntheticInstance> out;
    out.reserve(static_cast<std::size_t>(n_instances));

    for (int i = 0; i < n_instances; ++i) {
        SyntheticInstance inst;
        const Background& bg = kBackgrounds[static_cast<std::size_t>(pick_bg(rng))];
        inst.background_color = bg.label;
        inst.text_on_top = coin(rng) == 1;

        // Image: background, white text-band marker, sprite blob.
        inst.image = Image(s, s, bg.rgb);
        int band_h = std::max(2, s / 7);
        int band_y = inst.text_on_top ? 1 : s - band_h - 1;
        inst.image.fill_rect(2, band_y, s - 4, band_h, {255, 255, 255});
        std::uniform_int_distribution<int> sprite_x(s / 4, 3 * s / 4);
        inst.image.fill_circle(sprite_x(rng), s / 2, std::max(2, s / 8), {128, 128, 128});

        AdAttributes attrs;
        attrs.image_id = "synth_" + std::to_string(i);
        attrs.gender = std::uniform_int_distribution<int>(1, 2)(rng);
        attrs.age = std::uniform_int_distribution<int>(1, 9)(rng);
        attrs.month = std::uniform_int_distribution<int>(1, 12)(rng);
        attrs.weekday = std::uniform_int_distribution<int>(1, 7)(rng);
        attrs.time = std::uniform_int_distribution<int>(0, 23)(rng);
        attrs.position = std::uniform_int_distribution<int>(1, 4)(rng);
        attrs.cate2 = std::uniform_int_distribution<int>(1, 4)(rng);
        attrs.cate3 = std::uniform_int_distribution<int>(1, 9)(rng);
        attrs.title = phrase_pool()[static_cast<std::size_t>(pick_phrase(rng))];
        attrs.desc = phrase_pool()[static_cast<std::size_t>(pick_phrase(rng))];
        attrs.ocr = phrase_pool()[static_cast<std::size_t>(pick_phrase(rng))];

        inst.true_ctr = synthetic_click_probability(effects, inst.background_color, inst.text_on_top,
                                                    attrs.age, attrs.time);

        std::uint64_t impressions = pick_impr(rng);
        std::bernoulli_distribution click(inst.true_ctr);
        inst.records.reserve(impressions);
        for (std::uint64_t m = 0; m < impressions; ++m) {
            ClickLogRecord rec;
            rec.attrs = attrs;
            rec.clicked = click(rng) ? 1 : 0;
            inst.records.push_back(std::move(rec));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace m2fn::data
