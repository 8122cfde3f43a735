#pragma once

#include <string>
#include <vector>

#include "m2fn/harness/trainer.hpp"

namespace m2fn::harness {

struct AblationRowSpec {
    std::string label;
    model::ModelConfig config;
};

struct AblationRow {
    std::string label;
    bool ok = false;
    std::string error;  // filled when the run failed
    metrics::MetricReport report;
};

// The standard grid: full model, each fusion mechanism removed in turn, and
// the image-only baseline.
std::vector<AblationRowSpec> default_ablation_grid(const model::ModelConfig& base);

// Trains and evaluates one row per config. A failing row is recorded with
// its error and the grid continues.
std::vector<AblationRow> run_ablation_grid(const RunConfig& base, const std::vector<AblationRowSpec>& grid,
                                           const Dataset& train_set, const Dataset& test_set);

// Text table ranked by SPRC, best first; failed rows listed underneath.
std::string ablation_table(const std::vector<AblationRow>& rows);

void write_ablation_jsonl(const std::vector<AblationRow>& rows, const std::string& path);
std::vector<AblationRow> read_ablation_jsonl(const std::string& path);

}  // namespace m2fn::harness
