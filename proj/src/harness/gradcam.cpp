#include "m2fn/harness/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "m2fn/model/tensor.hpp"

namespace m2fn::harness {

Heatmap gradcam(model::M2FN& net, const Image& image, const Eigen::VectorXd* aux, const std::string& layer,
                int target_bucket) {
    // Validates the layer name up front so the error lists the valid layers
    // even before any forward pass.
    const auto names = net.spatial_layer_names();
    if (std::find(names.begin(), names.end(), layer) == names.end()) {
        std::string valid;
        for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
        throw UsageError("no spatial activation named '" + layer + "'; valid layers: " + valid);
    }

    const int size = net.config().input_size();
    Image scaled = (image.width == size && image.height == size) ? image : resize_nearest(image, size, size);
    model::FeatureTensor input = model::images_to_tensor({scaled}, size);

    Eigen::MatrixXd aux_mat;
    const Eigen::MatrixXd* aux_ptr = nullptr;
    if (net.config().use_aux) {
        if (!aux) throw UsageError("model config requires auxiliary attributes but none were supplied");
        aux_mat = *aux;
        aux_ptr = &aux_mat;
    }

    Eigen::MatrixXd out = net.forward(input, aux_ptr, /*training=*/false);
    Eigen::MatrixXd d_output = Eigen::MatrixXd::Zero(out.rows(), 1);
    if (net.config().output_mode == model::OutputMode::kRegression) {
        d_output(0, 0) = 1.0;
    } else {
        int bucket = target_bucket;
        if (bucket < 0) {
            out.col(0).maxCoeff(&bucket);
        } else if (bucket < 1 || bucket > 10) {
            throw UsageError("target bucket must be in 1..10");
        } else {
            --bucket;  // 1-based on the interface
        }
        d_output(bucket, 0) = 1.0;
    }
    net.backward(d_output);

    const model::FeatureTensor& act = net.activation(layer);
    const model::FeatureTensor& grad = net.activation_grad(layer);

    Heatmap hm;
    hm.layer = layer;
    hm.values = Eigen::MatrixXd::Zero(act.h, act.w);
    for (int ci = 0; ci < act.c; ++ci) {
        const double* gp = grad.plane(0, ci);
        double wsum = 0;
        for (Eigen::Index i = 0; i < grad.plane_size(); ++i) wsum += gp[i];
        const double weight = wsum / static_cast<double>(grad.plane_size());
        const double* ap = act.plane(0, ci);
        for (int y = 0; y < act.h; ++y)
            for (int x = 0; x < act.w; ++x) hm.values(y, x) += weight * ap[static_cast<Eigen::Index>(y) * act.w + x];
    }
    hm.values = hm.values.cwiseMax(0.0);
    const double peak = hm.values.maxCoeff();
    if (peak > 0) hm.values /= peak;
    return hm;
}

Heatmap resize_heatmap(const Heatmap& hm, int h, int w) {
    Heatmap out;
    out.layer = hm.layer;
    out.values.resize(h, w);
    const Eigen::Index sh = hm.values.rows(), sw = hm.values.cols();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Eigen::Index sy = std::min<Eigen::Index>(sh - 1, static_cast<Eigen::Index>(y) * sh / h);
            const Eigen::Index sx = std::min<Eigen::Index>(sw - 1, static_cast<Eigen::Index>(x) * sw / w);
            out.values(y, x) = hm.values(sy, sx);
        }
    return out;
}

Image overlay_heatmap(const Image& base, const Heatmap& hm, double alpha) {
    Heatmap scaled = (hm.values.rows() == base.height && hm.values.cols() == base.width)
                         ? hm
                         : resize_heatmap(hm, base.height, base.width);
    Image out = base;
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x) {
            const double a = alpha * std::clamp(scaled.values(y, x), 0.0, 1.0);
            std::uint8_t* px = out.at(x, y);
            px[0] = static_cast<std::uint8_t>(std::lround((1 - a) * px[0] + a * 255.0));
            px[1] = static_cast<std::uint8_t>(std::lround((1 - a) * px[1]));
            px[2] = static_cast<std::uint8_t>(std::lround((1 - a) * px[2]));
        }
    return out;
}

}  // namespace m2fn::harness
