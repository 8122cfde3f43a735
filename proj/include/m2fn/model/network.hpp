#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "m2fn/model/layers.hpp"
#include "m2fn/model/tensor.hpp"

namespace m2fn::model {

enum class OutputMode { kRegression, kDistribution };
enum class BackboneScale { kTiny, kFull };

struct ModelConfig {
    bool use_aux = true;
    bool use_cbn = true;
    bool use_attention = true;
    bool use_high_fusion = true;
    std::array<bool, 5> cbn_block_mask = {true, false, false, false, false};
    // CBN after the first convolution of each masked block (default) or after
    // every convolution in the block.
    bool cbn_all_convs = false;
    int cbn_hidden = 256;
    int att_hidden = 512;
    int high_hidden = 512;
    int head_hidden = 4096;
    OutputMode output_mode = OutputMode::kRegression;
    BackboneScale backbone_scale = BackboneScale::kFull;

    static ModelConfig tiny();

    int input_size() const { return backbone_scale == BackboneScale::kTiny ? 32 : 224; }
    int output_dim() const { return output_mode == OutputMode::kRegression ? 1 : 10; }

    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// Per-block backbone shape: convolutions per block, output channels, pooling.
struct BackboneSpec {
    std::array<int, 5> convs_per_block;
    std::array<int, 5> channels;
    std::array<bool, 5> pool_after;
    int input_size;
};
BackboneSpec backbone_spec(BackboneScale scale);

class M2FN {
public:
    M2FN(const ModelConfig& config, int aux_dim, std::uint64_t seed);

    // params_ holds pointers into member layers.
    M2FN(const M2FN&) = delete;
    M2FN& operator=(const M2FN&) = delete;

    // Output: 1 x N (regression) or 10 x N column-stochastic (distribution).
    // update_running toggles the batch-norm running statistics update; frozen
    // for finite-difference checks.
    Eigen::MatrixXd forward(const FeatureTensor& images, const Eigen::MatrixXd* aux, bool training,
                            bool update_running = true);
    // d_output is the loss gradient with respect to the network output
    // (post-softmax probabilities in distribution mode).
    void backward(const Eigen::MatrixXd& d_output);

    void zero_grad();
    const std::vector<Param*>& params() { return params_; }

    const ModelConfig& config() const { return config_; }
    int aux_dim() const { return aux_dim_; }

    // Spatial layers usable for activation heatmaps.
    std::vector<std::string> spatial_layer_names() const;
    const FeatureTensor& activation(const std::string& layer) const;
    const FeatureTensor& activation_grad(const std::string& layer) const;

private:
    struct ConvUnit {
        Conv2d conv;
        std::optional<ConditionalBatchNorm> norm;
        ReluTensor relu;
    };
    struct Block {
        std::vector<ConvUnit> units;
        bool pool = false;
        MaxPool2 pooler;
    };

    ModelConfig config_;
    int aux_dim_ = 0;
    BackboneSpec spec_;

    std::vector<Block> blocks_;
    std::optional<SpatialAttention> attention_;
    std::optional<HighLevelFusion> fusion_;
    std::optional<Linear> img_proj_;  // used when high-level fusion is off
    Linear head1_, head2_, head_out_;
    ReluMat head_relu1_, head_relu2_;

    std::vector<Param*> params_;

    // forward caches
    Eigen::MatrixXd aux_cache_;
    Eigen::MatrixXd probs_;  // distribution mode softmax output
    int feat_c_ = 0, feat_h_ = 0, feat_w_ = 0;
    std::map<std::string, FeatureTensor> acts_;
    std::map<std::string, FeatureTensor> act_grads_;

    void register_params();
};

// Single-archive checkpoint: JSON header (model config, aux dim, named
// parameter shapes) followed by row-major little-endian f32 blobs.
void save_checkpoint(const std::string& path, M2FN& net);
std::unique_ptr<M2FN> load_checkpoint(const std::string& path);

}  // namespace m2fn::model
