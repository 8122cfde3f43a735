#include "m2fn/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace m2fn::harness {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

std::array<bool, 5> parse_mask(const std::string& v) {
    if (v.size() != 5) throw UsageError("model.cbn_block_mask expects 5 binary digits, got '" + v + "'");
    std::array<bool, 5> mask{};
    for (int i = 0; i < 5; ++i) {
        if (v[static_cast<std::size_t>(i)] != '0' && v[static_cast<std::size_t>(i)] != '1')
            throw UsageError("model.cbn_block_mask expects 5 binary digits, got '" + v + "'");
        mask[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] == '1';
    }
    return mask;
}

}  // namespace

model::OutputMode RunConfig::required_output_mode() const {
    if (loss == "wmse") return model::OutputMode::kRegression;
    if (loss == "kld" || loss == "emd") return model::OutputMode::kDistribution;
    throw UsageError("unknown loss '" + loss + "'; expected wmse, kld or emd");
}

void RunConfig::validate() const {
    if (model.output_mode != required_output_mode())
        throw UsageError("loss '" + loss + "' is incompatible with output mode '" +
                         std::string(model.output_mode == model::OutputMode::kRegression ? "regression"
                                                                                         : "distribution") +
                         "'");
    if (learning_rate <= 0) throw UsageError("learning_rate must be positive");
    if (batch_size < 2) throw UsageError("batch_size must be at least 2");
    if (epochs < 1) throw UsageError("epochs must be at least 1");
    if (val_fraction < 0 || val_fraction >= 1) throw UsageError("val_fraction must be in [0, 1)");
    if (lognormal_c <= 0) throw UsageError("lognormal_c must be positive");
    model.validate();
}

RunConfig RunConfig::from_key_values(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, value] : kv) {
        if (key == "dataset") c.dataset = value;
        else if (key == "images_dir") c.images_dir = value;
        else if (key == "learning_rate") c.learning_rate = std::stod(value);
        else if (key == "batch_size") c.batch_size = std::stoi(value);
        else if (key == "epochs") c.epochs = std::stoi(value);
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "loss") c.loss = value;
        else if (key == "out_dir") c.out_dir = value;
        else if (key == "lognormal_c") c.lognormal_c = std::stod(value);
        else if (key == "val_fraction") c.val_fraction = std::stod(value);
        else if (key == "model.use_aux") c.model.use_aux = parse_bool(key, value);
        else if (key == "model.use_cbn") c.model.use_cbn = parse_bool(key, value);
        else if (key == "model.use_attention") c.model.use_attention = parse_bool(key, value);
        else if (key == "model.use_high_fusion") c.model.use_high_fusion = parse_bool(key, value);
        else if (key == "model.cbn_block_mask") c.model.cbn_block_mask = parse_mask(value);
        else if (key == "model.cbn_all_convs") c.model.cbn_all_convs = parse_bool(key, value);
        else if (key == "model.cbn_hidden") c.model.cbn_hidden = std::stoi(value);
        else if (key == "model.att_hidden") c.model.att_hidden = std::stoi(value);
        else if (key == "model.high_hidden") c.model.high_hidden = std::stoi(value);
        else if (key == "model.head_hidden") c.model.head_hidden = std::stoi(value);
        else if (key == "model.output_mode") {
            if (value == "regression") c.model.output_mode = model::OutputMode::kRegression;
            else if (value == "distribution") c.model.output_mode = model::OutputMode::kDistribution;
            else throw UsageError("model.output_mode must be regression or distribution");
        } else if (key == "model.backbone_scale") {
            if (value == "tiny") c.model.backbone_scale = model::BackboneScale::kTiny;
            else if (value == "full") c.model.backbone_scale = model::BackboneScale::kFull;
            else throw UsageError("model.backbone_scale must be tiny or full");
        } else {
            throw UsageError("unknown config key '" + key + "'");
        }
    }
    // The loss choice fixes the output mode; keep them consistent unless the
    // pair is genuinely contradictory (validate() catches that case).
    if (kv.find("model.output_mode") == kv.end()) c.model.output_mode = c.required_output_mode();
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open run config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(line.substr(0, eq)), value = strip(line.substr(eq + 1));
        if (key.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return from_key_values(kv);
}

Adam::Adam(std::vector<model::Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const model::Param* p : params_) {
        m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        model::Param* p = params_[i];
        if (!p->trainable) continue;
        m_[i] = beta1_ * m_[i] + (1 - beta1_) * p->grad;
        v_[i] = beta2_ * v_[i] + (1 - beta2_) * p->grad.cwiseProduct(p->grad);
        p->value.array() -= lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
}

namespace {

std::vector<ScoreDistribution> columns_to_distributions(const Eigen::MatrixXd& m) {
    std::vector<ScoreDistribution> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index n = 0; n < m.cols(); ++n)
        for (int k = 0; k < 10; ++k) out[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)] = m(k, n);
    return out;
}

// Batch ranges over `total` instances; a trailing singleton is folded into
// the previous batch because training batch statistics need at least two
// instances.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t total, int batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t b = 0; b < total; b += static_cast<std::size_t>(batch_size))
        ranges.emplace_back(b, std::min(total, b + static_cast<std::size_t>(batch_size)));
    if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
        ranges[ranges.size() - 2].second = ranges.back().second;
        ranges.pop_back();
    }
    return ranges;
}

struct BatchLoss {
    double value = 0;
    Eigen::MatrixXd d_output;  // output_dim x B
};

BatchLoss batch_loss(const RunConfig& cfg, const Dataset& ds, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end, const Eigen::MatrixXd& out, double mean_impressions) {
    BatchLoss bl;
    const std::size_t B = end - begin;
    if (cfg.loss == "wmse") {
        std::vector<double> pred(B), target(B), weights(B);
        for (std::size_t i = 0; i < B; ++i) {
            const DatasetInstance& inst = ds.instances[order[begin + i]];
            pred[i] = out(0, static_cast<Eigen::Index>(i));
            target[i] = inst.ctr;
            // impressions normalized to mean 1 so the learning rate is
            // independent of exposure volume
            weights[i] = static_cast<double>(inst.impressions) / mean_impressions;
        }
        bl.value = metrics::loss_weighted_mse(pred, target, weights);
        std::vector<double> g = metrics::grad_weighted_mse(pred, target, weights);
        bl.d_output.resize(1, static_cast<Eigen::Index>(B));
        for (std::size_t i = 0; i < B; ++i) bl.d_output(0, static_cast<Eigen::Index>(i)) = g[i];
        return bl;
    }
    std::vector<ScoreDistribution> pred = columns_to_distributions(out);
    std::vector<ScoreDistribution> target(B);
    for (std::size_t i = 0; i < B; ++i) target[i] = ds.instances[order[begin + i]].target;
    std::vector<ScoreDistribution> g;
    if (cfg.loss == "kld") {
        bl.value = metrics::loss_kld(pred, target);
        g = metrics::grad_kld(pred, target);
    } else {
        bl.value = metrics::loss_emd(pred, target);
        g = metrics::grad_emd(pred, target);
    }
    bl.d_output.resize(10, static_cast<Eigen::Index>(B));
    for (std::size_t i = 0; i < B; ++i)
        for (int k = 0; k < 10; ++k)
            bl.d_output(k, static_cast<Eigen::Index>(i)) = g[i].buckets[static_cast<std::size_t>(k)];
    return bl;
}

}  // namespace

Eigen::MatrixXd predict(model::M2FN& net, const Dataset& ds, int batch_size) {
    const int size = net.config().input_size();
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Eigen::MatrixXd out(net.config().output_dim(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t b = 0; b < ds.size(); b += static_cast<std::size_t>(batch_size)) {
        const std::size_t e = std::min(ds.size(), b + static_cast<std::size_t>(batch_size));
        model::FeatureTensor images = batch_images(ds, order, b, e, size);
        Eigen::MatrixXd aux = batch_aux(ds, order, b, e);
        Eigen::MatrixXd y = net.forward(images, net.config().use_aux ? &aux : nullptr, /*training=*/false);
        out.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) = y;
    }
    return out;
}

metrics::MetricReport evaluate_model(model::M2FN& net, const Dataset& ds, int batch_size) {
    if (ds.instances.empty()) throw UsageError("cannot evaluate on an empty dataset");
    Eigen::MatrixXd out = predict(net, ds, batch_size);
    if (net.config().output_mode == model::OutputMode::kRegression) {
        std::vector<double> pred(ds.size()), target(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            pred[i] = out(0, static_cast<Eigen::Index>(i));
            target[i] = ds.instances[i].ctr;
        }
        return metrics::evaluate(pred, target);
    }
    std::vector<ScoreDistribution> pred = columns_to_distributions(out);
    std::vector<ScoreDistribution> target(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) target[i] = ds.instances[i].target;
    return metrics::evaluate(pred, target);
}

metrics::MetricReport evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& ds,
                                          int batch_size) {
    auto net = model::load_checkpoint(checkpoint_path);
    return evaluate_model(*net, ds, batch_size);
}

TrainResult train(const RunConfig& config, const Dataset& train_set) {
    config.validate();
    if (train_set.mode != config.model.output_mode)
        throw UsageError("dataset target mode does not match the model output mode");
    if (train_set.instances.size() < 2) throw UsageError("training needs at least two instances");

    auto [val, fit] = split_dataset(train_set, config.val_fraction);
    if (fit.instances.size() < 2) throw UsageError("validation split leaves fewer than two training instances");
    if (val.instances.empty()) val = fit;  // fall back to in-sample validation

    std::filesystem::create_directories(config.out_dir);
    TrainResult result;
    result.checkpoint_path = (std::filesystem::path(config.out_dir) / "checkpoint.bin").string();
    result.log_path = (std::filesystem::path(config.out_dir) / "epochs.jsonl").string();

    model::M2FN net(config.model, train_set.aux_dim, config.seed);
    Adam optimizer(net.params(), config.learning_rate);
    const int size = config.model.input_size();

    double mean_impressions = 0;
    for (const auto& inst : fit.instances) mean_impressions += static_cast<double>(inst.impressions);
    mean_impressions = std::max(1.0, mean_impressions / static_cast<double>(fit.instances.size()));

    // A checkpoint exists from the start so an abort always leaves the last
    // good state on disk.
    model::save_checkpoint(result.checkpoint_path, net);

    std::ofstream log(result.log_path);
    if (!log) throw DataError("cannot open epoch log for writing: " + result.log_path);

    std::vector<std::size_t> order(fit.instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "epoch-" + std::to_string(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0;
        std::size_t seen = 0;
        for (auto [b, e] : batch_ranges(order.size(), config.batch_size)) {
            model::FeatureTensor images = batch_images(fit, order, b, e, size);
            Eigen::MatrixXd aux = batch_aux(fit, order, b, e);
            net.zero_grad();
            Eigen::MatrixXd out =
                net.forward(images, config.model.use_aux ? &aux : nullptr, /*training=*/true);
            BatchLoss bl = batch_loss(config, fit, order, b, e, out, mean_impressions);
            if (!std::isfinite(bl.value))
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                   "; last good checkpoint retained at " + result.checkpoint_path);
            net.backward(bl.d_output);
            optimizer.step();
            loss_sum += bl.value * static_cast<double>(e - b);
            seen += e - b;
        }

        EpochStat stat;
        stat.epoch = epoch + 1;
        stat.train_loss = loss_sum / static_cast<double>(seen);
        try {
            metrics::MetricReport report = evaluate_model(net, val, config.batch_size);
            stat.val_sprc = report.sprc_mean;
            stat.val_lcc = report.lcc_mean;
        } catch (const NumericError&) {
            stat.val_sprc = stat.val_lcc = 0;  // constant predictions: no rank signal yet
        }
        result.epochs.push_back(stat);

        if (result.best_epoch < 0 || stat.val_sprc > result.best_val_sprc) {
            result.best_epoch = stat.epoch;
            result.best_val_sprc = stat.val_sprc;
            model::save_checkpoint(result.checkpoint_path, net);
        }

        nlohmann::json j;
        j["epoch"] = stat.epoch;
        j["train_loss"] = stat.train_loss;
        j["val_sprc"] = stat.val_sprc;
        j["val_lcc"] = stat.val_lcc;
        log << j.dump() << "\n";
        log.flush();
    }
    return result;
}

}  // namespace m2fn::harness
