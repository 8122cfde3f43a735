#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m2fn/common.hpp"
#include "m2fn/model/tensor.hpp"

namespace m2fn::model {

struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, int rows, int cols, bool train = true)
        : name(std::move(n)),
          value(Eigen::MatrixXd::Zero(rows, cols)),
          grad(Eigen::MatrixXd::Zero(rows, cols)),
          trainable(train) {}
};

// Scaled-uniform init for a fan_in-shaped weight.
void init_weight(Eigen::MatrixXd& w, int fan_in, Rng& rng);

// Activations as (features x batch) matrices.
class Linear {
public:
    Linear() = default;
    Linear(const std::string& name, int in, int out, Rng& rng, bool zero_init = false);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
    // Forward without caching (evaluation-only paths).
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

    void collect(std::vector<Param*>& out);

    Param weight;  // out x in
    Param bias;    // out x 1

private:
    Eigen::MatrixXd x_;
};

class ReluMat {
public:
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        y_ = x.cwiseMax(0.0);
        return y_;
    }
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) const {
        return ((y_.array() > 0.0).cast<double>() * dy.array()).matrix();
    }

private:
    Eigen::MatrixXd y_;
};

// 3x3 convolution, stride 1, zero padding 1. im2col + GEMM, processed in
// row strips to bound the scratch buffer.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, Rng& rng);

    FeatureTensor forward(const FeatureTensor& x);
    FeatureTensor backward(const FeatureTensor& dy);
    void collect(std::vector<Param*>& out);

    int in_channels() const { return cin_; }
    int out_channels() const { return cout_; }

    Param weight;  // cout x (cin*9)
    Param bias;    // cout x 1

private:
    int cin_ = 0, cout_ = 0;
    FeatureTensor x_;
};

class ReluTensor {
public:
    FeatureTensor forward(const FeatureTensor& x) {
        y_ = x;
        y_.data = y_.data.cwiseMax(0.0);
        return y_;
    }
    FeatureTensor backward(const FeatureTensor& dy) const {
        FeatureTensor dx = dy;
        dx.data.array() *= (y_.data.array() > 0.0).cast<double>();
        return dx;
    }

private:
    FeatureTensor y_;
};

class MaxPool2 {
public:
    FeatureTensor forward(const FeatureTensor& x);
    FeatureTensor backward(const FeatureTensor& dy) const;

private:
    std::vector<Eigen::Index> argmax_;
    int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

// Batch normalization whose per-channel scale/shift are offset per instance
// by delta MLPs on the auxiliary vector. With aux_dim == 0 it is a plain
// batch norm. Aux is treated as a constant input: no gradient is propagated
// into it, only into the MLP parameters.
class ConditionalBatchNorm {
public:
    ConditionalBatchNorm() = default;
    ConditionalBatchNorm(const std::string& name, int channels, int aux_dim, int hidden, Rng& rng);

    FeatureTensor forward(const FeatureTensor& x, const Eigen::MatrixXd* aux, bool training,
                          bool update_running);
    FeatureTensor backward(const FeatureTensor& dy);
    void collect(std::vector<Param*>& out);

    bool conditional() const { return aux_dim_ > 0; }
    int channels() const { return channels_; }

    Param base_gamma, base_beta;        // C x 1
    Param running_mean, running_var;    // C x 1, non-trainable
    double epsilon = 1e-5;
    double momentum = 0.1;

    Linear gamma_l1, gamma_l2, beta_l1, beta_l2;  // aux -> hidden -> C, zero-init final

private:
    int channels_ = 0, aux_dim_ = 0;
    bool training_ = false;
    ReluMat gamma_relu_, beta_relu_;
    // caches
    FeatureTensor xhat_;
    Eigen::MatrixXd gamma_eff_;  // C x N
    Eigen::VectorXd inv_std_;    // C
};

// Per-location MLP producing one logit per spatial position, softmaxed over
// positions; features are scaled by the resulting weights. The first affine
// is split into a feature part and an aux part, which is the same map as
// concatenating [feature; aux] per location.
class SpatialAttention {
public:
    SpatialAttention() = default;
    SpatialAttention(const std::string& name, int channels, int aux_dim, int hidden, Rng& rng);

    FeatureTensor forward(const FeatureTensor& x, const Eigen::MatrixXd& aux);
    FeatureTensor backward(const FeatureTensor& dy);
    void collect(std::vector<Param*>& out);

    // L x N softmax weights from the last forward; columns sum to 1.
    const Eigen::MatrixXd& attention_weights() const { return alpha_; }

    Param w_feat;  // hidden x C
    Param w_aux;   // hidden x aux_dim
    Param b1;      // hidden x 1
    Param w_out;   // 1 x hidden
    Param b_out;   // 1 x 1

private:
    int hidden_ = 0;
    FeatureTensor x_;
    Eigen::MatrixXd aux_;
    std::vector<Eigen::MatrixXd> hidden_acts_;  // per instance: hidden x L (post-relu)
    Eigen::MatrixXd alpha_;                     // L x N
};

// tanh(W_img * flat + b) elementwise* tanh(W_aux * aux + b).
class HighLevelFusion {
public:
    HighLevelFusion() = default;
    HighLevelFusion(const std::string& name, int flat_dim, int aux_dim, int out_dim, Rng& rng);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& flat, const Eigen::MatrixXd& aux);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);  // returns d_flat
    void collect(std::vector<Param*>& out);

    Linear img_proj, aux_proj;

private:
    Eigen::MatrixXd u_, v_;  // tanh outputs
};

}  // namespace m2fn::model
