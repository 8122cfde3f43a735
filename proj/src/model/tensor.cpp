#include "m2fn/model/tensor.hpp"

#include "m2fn/common.hpp"

namespace m2fn::model {

FeatureTensor images_to_tensor(const std::vector<Image>& images, int expected_size) {
    if (images.empty()) throw UsageError("images_to_tensor: empty batch");
    FeatureTensor t(static_cast<int>(images.size()), 3, expected_size, expected_size);
    for (std::size_t n = 0; n < images.size(); ++n) {
        const Image& img = images[n];
        if (img.width != expected_size || img.height != expected_size)
            throw DataError("image size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " does not match backbone input " + std::to_string(expected_size));
        for (int ci = 0; ci < 3; ++ci) {
            double* p = t.plane(static_cast<int>(n), ci);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) p[y * img.width + x] = img.at(x, y)[ci] / 255.0;
        }
    }
    return t;
}

Eigen::MatrixXd flatten(const FeatureTensor& t) {
    Eigen::MatrixXd m(t.instance_size(), t.n);
    for (int ni = 0; ni < t.n; ++ni)
        m.col(ni) = Eigen::Map<const Eigen::VectorXd>(t.data.data() + ni * t.instance_size(), t.instance_size());
    return m;
}

FeatureTensor unflatten(const Eigen::MatrixXd& m, int c, int h, int w) {
    FeatureTensor t(static_cast<int>(m.cols()), c, h, w);
    for (int ni = 0; ni < t.n; ++ni)
        Eigen::Map<Eigen::VectorXd>(t.data.data() + ni * t.instance_size(), t.instance_size()) = m.col(ni);
    return t;
}

}  // namespace m2fn::model
