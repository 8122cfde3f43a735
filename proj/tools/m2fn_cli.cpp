// Command-line front end: dataset aggregation, synthetic data generation,
// training, evaluation, ablation grids, activation heatmaps and plots.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "m2fn/data/aggregate.hpp"
#include "m2fn/data/synthetic.hpp"
#include "m2fn/harness/ablation.hpp"
#include "m2fn/harness/gradcam.hpp"
#include "m2fn/harness/plots.hpp"
#include "m2fn/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace m2fn;

namespace {

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scale;
    std::optional<std::string> loss;
    std::optional<std::string> out;
};

harness::RunConfig load_run_config(const std::string& path, const CommonOverrides& ov) {
    harness::RunConfig cfg = harness::RunConfig::from_file(path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.loss) {
        cfg.loss = *ov.loss;
        cfg.model.output_mode = cfg.required_output_mode();
    }
    if (ov.scale) {
        if (*ov.scale == "tiny") {
            model::ModelConfig tiny = model::ModelConfig::tiny();
            cfg.model.backbone_scale = tiny.backbone_scale;
            cfg.model.cbn_hidden = tiny.cbn_hidden;
            cfg.model.att_hidden = tiny.att_hidden;
            cfg.model.high_hidden = tiny.high_hidden;
            cfg.model.head_hidden = tiny.head_hidden;
        } else if (*ov.scale == "full") {
            model::ModelConfig full;
            cfg.model.backbone_scale = full.backbone_scale;
            cfg.model.cbn_hidden = full.cbn_hidden;
            cfg.model.att_hidden = full.att_hidden;
            cfg.model.high_hidden = full.high_hidden;
            cfg.model.head_hidden = full.head_hidden;
        } else {
            throw UsageError("--scale must be tiny or full");
        }
    }
    if (ov.out) cfg.out_dir = *ov.out;
    cfg.validate();
    return cfg;
}

harness::Dataset load_for(const harness::RunConfig& cfg) {
    data::HashEmbedder embedder(derive_seed(cfg.seed, "text-embedding"));
    return harness::load_dataset(cfg.dataset, cfg.images_dir, embedder, cfg.model.output_mode,
                                 cfg.model.input_size(), cfg.lognormal_c);
}

int cmd_aggregate(const std::string& in, const std::string& out, std::uint64_t min_impressions) {
    auto records = data::read_click_logs(in);
    data::AggregateResult result = data::aggregate_logs(records, min_impressions);
    data::write_aggregated_jsonl(result.instances, out);
    std::cout << "instances: " << result.instances.size() << "\n";
    for (std::size_t i = 0; i < result.rejected.size(); ++i)
        std::cerr << "rejected record " << result.rejected[i] << ": " << result.reject_reasons[i] << "\n";
    return 0;
}

int cmd_synth(std::uint64_t seed, int count, const std::string& out_dir, int image_size) {
    data::SyntheticOptions opts;
    opts.image_size = image_size;
    auto synth = data::generate_synthetic_dataset(seed, count, data::PlantedEffects{}, opts);

    fs::create_directories(fs::path(out_dir) / "images");
    std::vector<data::ClickLogRecord> records;
    std::ofstream truth(fs::path(out_dir) / "truth.jsonl");
    for (const auto& s : synth) {
        const std::string image_id = s.records.front().attrs.image_id;
        write_bmp(s.image, (fs::path(out_dir) / "images" / (image_id + ".bmp")).string());
        records.insert(records.end(), s.records.begin(), s.records.end());
        nlohmann::json j;
        j["image_id"] = image_id;
        j["true_ctr"] = s.true_ctr;
        j["background_color"] = s.background_color;
        j["text_on_top"] = s.text_on_top;
        truth << j.dump() << "\n";
    }
    data::write_click_logs_jsonl(records, (fs::path(out_dir) / "logs.jsonl").string());

    data::AggregateResult agg = data::aggregate_logs(records, 1);
    for (auto& inst : agg.instances) inst.image_path = "images/" + inst.attributes.image_id + ".bmp";
    data::write_aggregated_jsonl(agg.instances, (fs::path(out_dir) / "dataset.jsonl").string());
    std::cout << "instances: " << agg.instances.size() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const CommonOverrides& ov) {
    harness::RunConfig cfg = load_run_config(config_path, ov);
    harness::Dataset ds = load_for(cfg);
    harness::TrainResult result = harness::train(cfg, ds);
    std::cout << "best_epoch: " << result.best_epoch << "\n"
              << "best_val_sprc: " << result.best_val_sprc << "\n"
              << "checkpoint: " << result.checkpoint_path << "\n"
              << "epoch_log: " << result.log_path << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, const CommonOverrides& ov) {
    harness::RunConfig cfg = load_run_config(config_path, ov);
    harness::Dataset ds = load_for(cfg);
    metrics::MetricReport report = harness::evaluate_checkpoint(checkpoint, ds, cfg.batch_size);
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const CommonOverrides& ov) {
    harness::RunConfig cfg = load_run_config(config_path, ov);
    harness::Dataset full = load_for(cfg);
    auto [test_set, train_set] = harness::split_dataset(full, 0.2);
    auto grid = harness::default_ablation_grid(cfg.model);
    auto rows = harness::run_ablation_grid(cfg, grid, train_set, test_set);
    fs::create_directories(cfg.out_dir);
    harness::write_ablation_jsonl(rows, (fs::path(cfg.out_dir) / "ablation.jsonl").string());
    std::cout << harness::ablation_table(rows);
    return 0;
}

int cmd_gradcam(const std::string& config_path, const std::string& checkpoint, int index,
                const std::string& layer, int target_bucket, const std::string& out_path,
                const CommonOverrides& ov) {
    harness::RunConfig cfg = load_run_config(config_path, ov);
    harness::Dataset ds = load_for(cfg);
    if (index < 0 || static_cast<std::size_t>(index) >= ds.size())
        throw UsageError("instance index out of range (dataset has " + std::to_string(ds.size()) +
                         " instances)");
    auto net = model::load_checkpoint(checkpoint);
    const harness::DatasetInstance& inst = ds.instances[static_cast<std::size_t>(index)];
    Eigen::VectorXd aux = inst.aux;
    harness::Heatmap hm = harness::gradcam(*net, inst.image, &aux, layer, target_bucket);
    harness::plot_heatmap_overlay(inst.image, hm, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

std::vector<harness::EpochStat> read_epoch_log(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open epoch log: " + path);
    std::vector<harness::EpochStat> stats;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        harness::EpochStat s;
        s.epoch = j.at("epoch").get<int>();
        s.train_loss = j.at("train_loss").get<double>();
        s.val_sprc = j.value("val_sprc", 0.0);
        s.val_lcc = j.value("val_lcc", 0.0);
        stats.push_back(s);
    }
    return stats;
}

int cmd_plot(const std::string& epochs_path, const std::string& ablation_path, const std::string& out_path) {
    if (epochs_path.empty() == ablation_path.empty())
        throw UsageError("plot needs exactly one of --epochs or --ablation");
    if (!epochs_path.empty())
        harness::plot_loss_curve(read_epoch_log(epochs_path), out_path);
    else
        harness::plot_ablation_bars(harness::read_ablation_jsonl(ablation_path), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-step modality fusion trainer and data tooling"};
    app.require_subcommand(1);

    CommonOverrides ov;

    // aggregate
    std::string agg_in, agg_out;
    std::uint64_t agg_min = 1;
    auto* aggregate = app.add_subcommand("aggregate", "Aggregate click logs into CTR instances");
    aggregate->add_option("--in", agg_in, "Click log file (CSV or JSON lines)")->required();
    aggregate->add_option("--out", agg_out, "Aggregated JSON-lines output")->required();
    aggregate->add_option("--min-impressions", agg_min, "Drop instances with fewer impressions");

    // synth
    std::uint64_t synth_seed = 0;
    int synth_count = 500, synth_size = 32;
    std::string synth_out = "synth";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic click dataset with known effects");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--count", synth_count, "Number of instances");
    synth->add_option("--image-size", synth_size, "Square image resolution");
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto add_overrides = [&](CLI::App* cmd, bool with_out = true) {
        cmd->add_option("--seed", ov.seed, "Override the run seed");
        cmd->add_option("--scale", ov.scale, "Backbone scale: tiny or full");
        cmd->add_option("--loss", ov.loss, "Loss: wmse, kld or emd");
        if (with_out) cmd->add_option("--out", ov.out, "Override the output directory");
    };

    // train
    std::string train_config;
    auto* train = app.add_subcommand("train", "Train a model from a run config");
    train->add_option("--config", train_config, "Run config file (key = value)")->required();
    add_overrides(train);

    // eval
    std::string eval_config, eval_checkpoint;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--config", eval_config, "Run config file")->required();
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
    add_overrides(eval);

    // ablate
    std::string ablate_config;
    auto* ablate = app.add_subcommand("ablate", "Run the fusion ablation grid");
    ablate->add_option("--config", ablate_config, "Run config file")->required();
    add_overrides(ablate);

    // gradcam
    std::string gc_config, gc_checkpoint, gc_layer = "block5", gc_out = "heatmap.bmp";
    int gc_index = 0, gc_bucket = -1;
    auto* gradcam = app.add_subcommand("gradcam", "Render an activation heatmap overlay");
    gradcam->add_option("--config", gc_config, "Run config file")->required();
    gradcam->add_option("--checkpoint", gc_checkpoint, "Checkpoint file")->required();
    gradcam->add_option("--index", gc_index, "Dataset instance index");
    gradcam->add_option("--layer", gc_layer, "Spatial layer name");
    gradcam->add_option("--bucket", gc_bucket, "Target bucket 1..10 (distribution mode)");
    gradcam->add_option("--out", gc_out, "Overlay BMP path");
    add_overrides(gradcam, /*with_out=*/false);

    // plot
    std::string plot_epochs, plot_ablation, plot_out = "plot.bmp";
    auto* plot = app.add_subcommand("plot", "Render a training curve or ablation bar chart");
    plot->add_option("--epochs", plot_epochs, "Epoch log (JSON lines)");
    plot->add_option("--ablation", plot_ablation, "Ablation results (JSON lines)");
    plot->add_option("--out", plot_out, "Output BMP path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (aggregate->parsed()) return cmd_aggregate(agg_in, agg_out, agg_min);
        if (synth->parsed()) return cmd_synth(synth_seed, synth_count, synth_out, synth_size);
        if (train->parsed()) return cmd_train(train_config, ov);
        if (eval->parsed()) return cmd_eval(eval_config, eval_checkpoint, ov);
        if (ablate->parsed()) return cmd_ablate(ablate_config, ov);
        if (gradcam->parsed())
            return cmd_gradcam(gc_config, gc_checkpoint, gc_index, gc_layer, gc_bucket, gc_out, ov);
        if (plot->parsed()) return cmd_plot(plot_epochs, plot_ablation, plot_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
