#pragma once

#include <vector>

#include <Eigen/Core>

#include "m2fn/image.hpp"

namespace m2fn::model {

// N x C x H x W activation tensor. Each (n, c) plane is contiguous,
// row-major.
struct FeatureTensor {
    int n = 0, c = 0, h = 0, w = 0;
    Eigen::VectorXd data;

    FeatureTensor() = default;
    FeatureTensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        data = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_) * c_ * h_ * w_);
    }

    Eigen::Index plane_size() const { return static_cast<Eigen::Index>(h) * w; }
    Eigen::Index instance_size() const { return static_cast<Eigen::Index>(c) * h * w; }

    double* plane(int ni, int ci) { return data.data() + (static_cast<Eigen::Index>(ni) * c + ci) * plane_size(); }
    const double* plane(int ni, int ci) const {
        return data.data() + (static_cast<Eigen::Index>(ni) * c + ci) * plane_size();
    }

    double& at(int ni, int ci, int y, int x) { return plane(ni, ci)[static_cast<Eigen::Index>(y) * w + x]; }
    double at(int ni, int ci, int y, int x) const { return plane(ni, ci)[static_cast<Eigen::Index>(y) * w + x]; }

    // Instance view as C x (H*W), channels as rows.
    using InstanceMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstInstanceMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    InstanceMap instance(int ni) { return InstanceMap(data.data() + ni * instance_size(), c, plane_size()); }
    ConstInstanceMap instance(int ni) const {
        return ConstInstanceMap(data.data() + ni * instance_size(), c, plane_size());
    }

    bool same_shape(const FeatureTensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

// RGB images scaled to [0,1], shape N x 3 x H x W.
FeatureTensor images_to_tensor(const std::vector<Image>& images, int expected_size);

// Flatten to (C*H*W) x N; column n is instance n in (c, y, x) order.
Eigen::MatrixXd flatten(const FeatureTensor& t);
FeatureTensor unflatten(const Eigen::MatrixXd& m, int c, int h, int w);

}  // namespace m2fn::model
