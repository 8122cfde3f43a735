#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m2fn/image.hpp"

namespace m2fn::data {

struct PaletteColor {
    std::string label;
    std::array<double, 3> anchor;  // RGB in [0,255]
    bool fallback = false;         // "multiple": assigned by threshold, never by distance
};

struct ColorPalette {
    std::vector<PaletteColor> colors;  // exactly 10 entries
    double dominance_threshold = 0.4;

    int index_of(const std::string& label) const;
};

ColorPalette default_palette();

struct DominantColorOptions {
    int k = 5;
    int sample_cap = 10000;
    std::uint64_t seed = 12345;
    int kmeans_iters = 50;
    int mcd_subsample = 600;
    int mcd_starts = 8;
};

// Largest K-means cluster centroid matched to the nearest palette anchor
// under Mahalanobis distance with an MCD-robust pixel covariance. Returns
// the fallback label when the largest cluster's share is below the
// dominance threshold. Invariant to pixel order (sampling is performed on
// the sorted pixel multiset).
std::string dominant_color(const Image& image, const ColorPalette& palette,
                           const DominantColorOptions& opts = {});

// Robust location/scatter via random starts + concentration steps.
// Exposed for testing.
void mcd_covariance(const std::vector<Eigen::Vector3d>& points, std::uint64_t seed, int n_starts,
                    Eigen::Vector3d& location, Eigen::Matrix3d& scatter);

}  // namespace m2fn::data
