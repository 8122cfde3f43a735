#include "m2fn/model/network.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace m2fn::model {

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.backbone_scale = BackboneScale::kTiny;
    c.cbn_hidden = 64;
    c.att_hidden = 64;
    c.high_hidden = 64;
    c.head_hidden = 128;
    return c;
}

void ModelConfig::validate() const {
    bool any_mask = false;
    for (bool b : cbn_block_mask) any_mask |= b;
    if (!use_cbn && any_mask) throw UsageError("cbn_block_mask must be all-zero when use_cbn is false");
    if (!use_aux && (use_cbn || use_attention || use_high_fusion))
        throw UsageError("use_cbn/use_attention/use_high_fusion require use_aux");
    if (cbn_hidden < 1 || att_hidden < 1 || high_hidden < 1 || head_hidden < 1)
        throw UsageError("hidden widths must be positive");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["use_aux"] = use_aux;
    j["use_cbn"] = use_cbn;
    j["use_attention"] = use_attention;
    j["use_high_fusion"] = use_high_fusion;
    j["cbn_block_mask"] = cbn_block_mask;
    j["cbn_all_convs"] = cbn_all_convs;
    j["cbn_hidden"] = cbn_hidden;
    j["att_hidden"] = att_hidden;
    j["high_hidden"] = high_hidden;
    j["head_hidden"] = head_hidden;
    j["output_mode"] = output_mode == OutputMode::kRegression ? "regression" : "distribution";
    j["backbone_scale"] = backbone_scale == BackboneScale::kTiny ? "tiny" : "full";
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelConfig c;
    c.use_aux = j.at("use_aux").get<bool>();
    c.use_cbn = j.at("use_cbn").get<bool>();
    c.use_attention = j.at("use_attention").get<bool>();
    c.use_high_fusion = j.at("use_high_fusion").get<bool>();
    auto mask = j.at("cbn_block_mask").get<std::vector<bool>>();
    if (mask.size() != 5) throw DataError("cbn_block_mask must have 5 entries");
    for (int i = 0; i < 5; ++i) c.cbn_block_mask[static_cast<std::size_t>(i)] = mask[static_cast<std::size_t>(i)];
    c.cbn_all_convs = j.value("cbn_all_convs", false);
    c.cbn_hidden = j.at("cbn_hidden").get<int>();
    c.att_hidden = j.at("att_hidden").get<int>();
    c.high_hidden = j.at("high_hidden").get<int>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.output_mode =
        j.at("output_mode").get<std::string>() == "regression" ? OutputMode::kRegression : OutputMode::kDistribution;
    c.backbone_scale =
        j.at("backbone_scale").get<std::string>() == "tiny" ? BackboneScale::kTiny : BackboneScale::kFull;
    c.validate();
    return c;
}

BackboneSpec backbone_spec(BackboneScale scale) {
    if (scale == BackboneScale::kTiny)
        return {{1, 1, 1, 1, 1}, {8, 16, 32, 32, 64}, {true, true, true, false, false}, 32};
    return {{2, 2, 4, 4, 4}, {64, 128, 256, 512, 512}, {true, true, true, true, true}, 224};
}

M2FN::M2FN(const ModelConfig& config, int aux_dim, std::uint64_t seed)
    : config_(config), aux_dim_(aux_dim), spec_(backbone_spec(config.backbone_scale)) {
    config_.validate();
    if (config_.use_aux && aux_dim_ < 1) throw UsageError("use_aux requires a positive aux dimension");
    Rng rng(seed);

    int in_ch = 3;
    int size = spec_.input_size;
    for (int b = 0; b < 5; ++b) {
        Block block;
        const bool masked = config_.use_cbn && config_.cbn_block_mask[static_cast<std::size_t>(b)];
        for (int u = 0; u < spec_.convs_per_block[static_cast<std::size_t>(b)]; ++u) {
            ConvUnit unit;
            const int out_ch = spec_.channels[static_cast<std::size_t>(b)];
            std::string base = "block" + std::to_string(b + 1) + ".conv" + std::to_string(u + 1);
            unit.conv = Conv2d(base, in_ch, out_ch, rng);
            const bool wants_norm = (u == 0) || (masked && config_.cbn_all_convs);
            if (wants_norm) {
                const int cond_dim = masked && (u == 0 || config_.cbn_all_convs) ? aux_dim_ : 0;
                unit.norm = ConditionalBatchNorm("block" + std::to_string(b + 1) + ".norm" + std::to_string(u + 1),
                                                 out_ch, cond_dim, config_.cbn_hidden, rng);
            }
            in_ch = out_ch;
            block.units.push_back(std::move(unit));
        }
        block.pool = spec_.pool_after[static_cast<std::size_t>(b)];
        if (block.pool) size /= 2;
        blocks_.push_back(std::move(block));
    }
    feat_c_ = in_ch;
    feat_h_ = feat_w_ = size;
    const int flat_dim = feat_c_ * feat_h_ * feat_w_;

    if (config_.use_attention)
        attention_ = SpatialAttention("attention", feat_c_, aux_dim_, config_.att_hidden, rng);
    if (config_.use_high_fusion) {
        fusion_ = HighLevelFusion("fusion", flat_dim, aux_dim_, config_.high_hidden, rng);
    } else {
        img_proj_ = Linear("img_proj", flat_dim, config_.high_hidden, rng);
    }

    const int head_in = config_.high_hidden + (config_.use_aux && !config_.use_high_fusion ? aux_dim_ : 0);
    head1_ = Linear("head.fc1", head_in, config_.head_hidden, rng);
    head2_ = Linear("head.fc2", config_.head_hidden, config_.head_hidden, rng);
    head_out_ = Linear("head.out", config_.head_hidden, config_.output_dim(), rng);

    register_params();
}

void M2FN::register_params() {
    params_.clear();
    for (auto& block : blocks_)
        for (auto& unit : block.units) {
            unit.conv.collect(params_);
            if (unit.norm) unit.norm->collect(params_);
        }
    if (attention_) attention_->collect(params_);
    if (fusion_) fusion_->collect(params_);
    if (img_proj_) img_proj_->collect(params_);
    head1_.collect(params_);
    head2_.collect(params_);
    head_out_.collect(params_);
}

void M2FN::zero_grad() {
    for (Param* p : params_) p->grad.setZero();
}

Eigen::MatrixXd M2FN::forward(const FeatureTensor& images, const Eigen::MatrixXd* aux, bool training,
                              bool update_running) {
    if (images.h != spec_.input_size || images.w != spec_.input_size || images.c != 3)
        throw UsageError("input tensor does not match backbone input size");
    if (config_.use_aux) {
        if (!aux) throw UsageError("model config requires auxiliary attributes but none were supplied");
        if (aux->rows() != aux_dim_) throw UsageError("aux dimension mismatch");
        if (aux->cols() != images.n) throw UsageError("aux batch size mismatch");
        aux_cache_ = *aux;
    } else {
        aux_cache_.resize(0, images.n);
    }
    acts_.clear();
    act_grads_.clear();

    FeatureTensor x = images;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        Block& block = blocks_[b];
        for (auto& unit : block.units) {
            x = unit.conv.forward(x);
            if (unit.norm)
                x = unit.norm->forward(x, unit.norm->conditional() ? &aux_cache_ : nullptr, training,
                                       update_running);
            x = unit.relu.forward(x);
        }
        acts_["block" + std::to_string(b + 1)] = x;
        if (block.pool) x = block.pooler.forward(x);
    }

    if (attention_) {
        x = attention_->forward(x, aux_cache_);
        acts_["attention"] = x;
    }

    Eigen::MatrixXd flat = flatten(x);
    Eigen::MatrixXd vec;
    if (fusion_) {
        vec = fusion_->forward(flat, aux_cache_);
    } else {
        vec = img_proj_->forward(flat);
        if (config_.use_aux) {
            Eigen::MatrixXd stacked(vec.rows() + aux_cache_.rows(), vec.cols());
            stacked.topRows(vec.rows()) = vec;
            stacked.bottomRows(aux_cache_.rows()) = aux_cache_;
            vec = std::move(stacked);
        }
    }

    Eigen::MatrixXd h = head_relu2_.forward(head2_.forward(head_relu1_.forward(head1_.forward(vec))));
    Eigen::MatrixXd out = head_out_.forward(h);

    if (config_.output_mode == OutputMode::kDistribution) {
        probs_.resize(out.rows(), out.cols());
        for (Eigen::Index n = 0; n < out.cols(); ++n) {
            Eigen::VectorXd e = (out.col(n).array() - out.col(n).maxCoeff()).exp().matrix();
            probs_.col(n) = e / e.sum();
        }
        return probs_;
    }
    return out;
}

void M2FN::backward(const Eigen::MatrixXd& d_output) {
    Eigen::MatrixXd d_logits = d_output;
    if (config_.output_mode == OutputMode::kDistribution) {
        // softmax backward per column
        for (Eigen::Index n = 0; n < d_logits.cols(); ++n) {
            Eigen::VectorXd p = probs_.col(n);
            Eigen::VectorXd pd = p.cwiseProduct(d_output.col(n));
            d_logits.col(n) = pd - p * pd.sum();
        }
    }

    Eigen::MatrixXd d_vec =
        head1_.backward(head_relu1_.backward(head2_.backward(head_relu2_.backward(head_out_.backward(d_logits)))));

    Eigen::MatrixXd d_flat;
    if (fusion_) {
        d_flat = fusion_->backward(d_vec);
    } else {
        Eigen::MatrixXd d_img = d_vec.topRows(config_.high_hidden);  // aux rows are constant input
        d_flat = img_proj_->backward(d_img);
    }

    FeatureTensor dx = unflatten(d_flat, feat_c_, feat_h_, feat_w_);
    if (attention_) {
        act_grads_["attention"] = dx;
        dx = attention_->backward(dx);
    }

    for (int b = 4; b >= 0; --b) {
        Block& block = blocks_[static_cast<std::size_t>(b)];
        if (block.pool) dx = block.pooler.backward(dx);
        act_grads_["block" + std::to_string(b + 1)] = dx;
        for (auto it = block.units.rbegin(); it != block.units.rend(); ++it) {
            dx = it->relu.backward(dx);
            if (it->norm) dx = it->norm->backward(dx);
            dx = it->conv.backward(dx);
        }
    }
}

std::vector<std::string> M2FN::spatial_layer_names() const {
    std::vector<std::string> names;
    for (int b = 1; b <= 5; ++b) names.push_back("block" + std::to_string(b));
    if (attention_) names.push_back("attention");
    return names;
}

const FeatureTensor& M2FN::activation(const std::string& layer) const {
    auto it = acts_.find(layer);
    if (it == acts_.end()) {
        std::string valid;
        for (const auto& n : spatial_layer_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw UsageError("no spatial activation named '" + layer + "'; valid layers: " + valid);
    }
    return it->second;
}

const FeatureTensor& M2FN::activation_grad(const std::string& layer) const {
    auto it = act_grads_.find(layer);
    if (it == act_grads_.end()) throw UsageError("no gradient recorded for layer '" + layer + "'");
    return it->second;
}

namespace {

void put_u64(std::ofstream& f, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::ifstream& f) {
    unsigned char buf[8];
    f.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    return v;
}

constexpr char kMagic[8] = {'M', '2', 'F', 'N', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::string& path, M2FN& net) {
    nlohmann::json header;
    header["config"] = nlohmann::json::parse(net.config().to_json());
    header["aux_dim"] = net.aux_dim();
    nlohmann::json plist = nlohmann::json::array();
    for (const Param* p : net.params()) {
        nlohmann::json pj;
        pj["name"] = p->name;
        pj["rows"] = p->value.rows();
        pj["cols"] = p->value.cols();
        plist.push_back(pj);
    }
    header["params"] = plist;
    std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 8);
    put_u64(f, htext.size());
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const Param* p : net.params()) {
        // row-major f32
        for (Eigen::Index r = 0; r < p->value.rows(); ++r)
            for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
                float v = static_cast<float>(p->value(r, c));
                std::uint32_t u;
                std::memcpy(&u, &v, 4);
                unsigned char buf[4];
                for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
                f.write(reinterpret_cast<const char*>(buf), 4);
            }
    }
}

std::unique_ptr<M2FN> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path);
    std::uint64_t hlen = get_u64(f);
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(htext);

    ModelConfig config = ModelConfig::from_json(header.at("config").dump());
    int aux_dim = header.at("aux_dim").get<int>();
    auto net = std::make_unique<M2FN>(config, aux_dim, /*seed=*/0);

    std::map<std::string, Param*> by_name;
    for (Param* p : net->params()) by_name[p->name] = p;

    for (const auto& pj : header.at("params")) {
        std::string name = pj.at("name").get<std::string>();
        Eigen::Index rows = pj.at("rows").get<Eigen::Index>();
        Eigen::Index cols = pj.at("cols").get<Eigen::Index>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("checkpoint parameter '" + name + "' not present in model");
        Param* p = it->second;
        if (p->value.rows() != rows || p->value.cols() != cols)
            throw DataError("shape mismatch for parameter '" + name + "': checkpoint " + std::to_string(rows) +
                            "x" + std::to_string(cols) + ", model " + std::to_string(p->value.rows()) + "x" +
                            std::to_string(p->value.cols()));
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                unsigned char buf[4];
                f.read(reinterpret_cast<char*>(buf), 4);
                std::uint32_t u = 0;
                for (int i = 0; i < 4; ++i) u |= std::uint32_t(buf[i]) << (8 * i);
                float v;
                std::memcpy(&v, &u, 4);
                p->value(r, c) = static_cast<double>(v);
            }
    }
    if (!f) throw DataError("truncated checkpoint: " + path);
    return net;
}

}  // namespace m2fn::model
