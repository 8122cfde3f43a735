#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "m2fn/harness/dataset.hpp"
#include "m2fn/metrics.hpp"
#include "m2fn/model/network.hpp"

namespace m2fn::harness {

// Flat key=value run configuration (one `key = value` pair per line, '#'
// comments). Model fields are namespaced as model.<field>.
struct RunConfig {
    std::string dataset;     // aggregated JSON-lines path
    std::string images_dir;  // base directory for relative image paths
    model::ModelConfig model = model::ModelConfig::tiny();
    double learning_rate = 1e-4;
    int batch_size = 128;
    int epochs = 20;
    std::uint64_t seed = 0;
    std::string loss = "wmse";  // wmse | kld | emd
    std::string out_dir = "out";
    double lognormal_c = 1.0;
    double val_fraction = 0.1;

    // Throws UsageError on incompatible loss/output-mode pairs or invalid
    // scalar ranges.
    void validate() const;

    model::OutputMode required_output_mode() const;

    static RunConfig from_key_values(const std::map<std::string, std::string>& kv);
    static RunConfig from_file(const std::string& path);
};

// Adam with bias correction; applies only to trainable parameters.
class Adam {
public:
    Adam(std::vector<model::Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step();

private:
    std::vector<model::Param*> params_;
    std::vector<Eigen::MatrixXd> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

struct EpochStat {
    int epoch = 0;
    double train_loss = 0;
    double val_sprc = 0;
    double val_lcc = 0;
};

struct TrainResult {
    std::vector<EpochStat> epochs;
    int best_epoch = -1;
    double best_val_sprc = 0;
    std::string checkpoint_path;  // best validation checkpoint
    std::string log_path;         // JSON-lines per-epoch log
};

// Deterministic training loop: hash-split validation subset, per-epoch
// seeded shuffle, best-validation checkpointing. A non-finite loss aborts
// with NumericError; the checkpoint on disk stays at the last good state.
TrainResult train(const RunConfig& config, const Dataset& train_set);

// Forward the whole dataset in evaluation mode. Returns output_dim x N.
Eigen::MatrixXd predict(model::M2FN& net, const Dataset& ds, int batch_size = 128);

metrics::MetricReport evaluate_model(model::M2FN& net, const Dataset& ds, int batch_size = 128);
metrics::MetricReport evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& ds,
                                          int batch_size = 128);

}  // namespace m2fn::harness
