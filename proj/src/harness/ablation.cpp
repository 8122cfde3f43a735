#include "m2fn/harness/ablation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace m2fn::harness {

std::vector<AblationRowSpec> default_ablation_grid(const model::ModelConfig& base) {
    std::vector<AblationRowSpec> grid;
    auto add = [&](const std::string& label, model::ModelConfig c) { grid.push_back({label, std::move(c)}); };

    model::ModelConfig full = base;
    full.use_aux = true;
    full.use_cbn = true;
    full.use_attention = true;
    full.use_high_fusion = true;
    if (std::none_of(full.cbn_block_mask.begin(), full.cbn_block_mask.end(), [](bool b) { return b; }))
        full.cbn_block_mask = {true, false, false, false, false};
    add("full", full);

    model::ModelConfig c = full;
    c.use_cbn = false;
    c.cbn_block_mask = {false, false, false, false, false};
    add("no_cbn", c);

    c = full;
    c.use_attention = false;
    add("no_attention", c);

    c = full;
    c.use_high_fusion = false;
    add("no_high_fusion", c);

    c = full;
    c.use_aux = false;
    c.use_cbn = false;
    c.use_attention = false;
    c.use_high_fusion = false;
    c.cbn_block_mask = {false, false, false, false, false};
    add("image_only", c);

    return grid;
}

std::vector<AblationRow> run_ablation_grid(const RunConfig& base, const std::vector<AblationRowSpec>& grid,
                                           const Dataset& train_set, const Dataset& test_set) {
    std::vector<AblationRow> rows;
    for (const auto& spec : grid) {
        AblationRow row;
        row.label = spec.label;
        try {
            RunConfig cfg = base;
            cfg.model = spec.config;
            cfg.out_dir = (std::filesystem::path(base.out_dir) / spec.label).string();
            TrainResult tr = train(cfg, train_set);
            row.report = evaluate_checkpoint(tr.checkpoint_path, test_set, cfg.batch_size);
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::vector<const AblationRow*> good, bad;
    for (const auto& r : rows) (r.ok ? good : bad).push_back(&r);
    std::stable_sort(good.begin(), good.end(),
                     [](const AblationRow* a, const AblationRow* b) { return a->report.sprc_mean > b->report.sprc_mean; });

    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(6) << "rank" << std::setw(20) << "variant" << std::setw(10) << "sprc"
       << std::setw(10) << "lcc" << "\n";
    int rank = 1;
    for (const AblationRow* r : good)
        os << std::left << std::setw(6) << rank++ << std::setw(20) << r->label << std::setw(10)
           << r->report.sprc_mean << std::setw(10) << r->report.lcc_mean << "\n";
    for (const AblationRow* r : bad)
        os << std::left << std::setw(6) << "-" << std::setw(20) << r->label << "failed: " << r->error << "\n";
    return os.str();
}

void write_ablation_jsonl(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open ablation output for writing: " + path);
    for (const auto& r : rows) {
        nlohmann::json j;
        j["label"] = r.label;
        j["ok"] = r.ok;
        if (r.ok)
            j["report"] = nlohmann::json::parse(r.report.to_json());
        else
            j["error"] = r.error;
        f << j.dump() << "\n";
    }
}

std::vector<AblationRow> read_ablation_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open ablation results: " + path);
    std::vector<AblationRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        AblationRow r;
        r.label = j.at("label").get<std::string>();
        r.ok = j.at("ok").get<bool>();
        if (r.ok)
            r.report = metrics::MetricReport::from_json(j.at("report").dump());
        else
            r.error = j.value("error", "");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace m2fn::harness
