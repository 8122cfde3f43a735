#pragma once

#include <string>

#include <Eigen/Core>

#include "m2fn/image.hpp"
#include "m2fn/model/network.hpp"

namespace m2fn::harness {

// Activation heatmap at a spatial layer's native resolution, values in [0,1].
struct Heatmap {
    std::string layer;
    Eigen::MatrixXd values;  // H x W
};

// Gradient-weighted class activation map: channel weights are the spatial
// mean of the output gradient at `layer`, the map is the ReLU of the
// weighted channel sum, max-normalized to [0,1]. target_bucket selects the
// output in distribution mode (-1 = highest-probability bucket); it is
// ignored in regression mode.
Heatmap gradcam(model::M2FN& net, const Image& image, const Eigen::VectorXd* aux, const std::string& layer,
                int target_bucket = -1);

// Nearest-neighbor upscale of the heatmap to the given resolution.
Heatmap resize_heatmap(const Heatmap& hm, int h, int w);

// Red-overlay blend of the heatmap onto the image, alpha scaled per pixel by
// the heatmap value.
Image overlay_heatmap(const Image& base, const Heatmap& hm, double alpha = 0.6);

}  // namespace m2fn::harness
