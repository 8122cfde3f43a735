#include "m2fn/data/aggregate.hpp"

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "m2fn/common.hpp"

namespace m2fn::data {

AggregateResult aggregate_logs(const std::vector<ClickLogRecord>& records, std::uint64_t min_impressions) {
    if (records.empty()) throw UsageError("aggregate_logs: empty record list");
    if (min_impressions < 1) throw UsageError("aggregate_logs: min_impressions must be >= 1");

    AggregateResult result;
    std::map<std::string, AggregatedInstance> groups;  // sorted => deterministic output order
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string why = validate_record(records[i]);
        if (!why.empty()) {
            result.rejected.push_back(i);
            result.reject_reasons.push_back("record " + std::to_string(i) + ": " + why);
            continue;
        }
        auto& inst = groups[records[i].attrs.key()];
        if (inst.impressions == 0) inst.attributes = records[i].attrs;
        inst.impressions += 1;
        inst.clicks += static_cast<std::uint64_t>(records[i].clicked);
    }
    for (auto& [key, inst] : groups) {
        if (inst.impressions < min_impressions) continue;
        inst.ctr = static_cast<double>(inst.clicks) / static_cast<double>(inst.impressions);
        result.instances.push_back(std::move(inst));
    }
    return result;
}

void write_aggregated_jsonl(const std::vector<AggregatedInstance>& instances, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& inst : instances) {
        nlohmann::json j;
        j["image_path"] = inst.image_path;
        j["image_id"] = inst.attributes.image_id;
        for (const auto& spec : categorical_specs()) j[spec.name] = inst.attributes.categorical(spec.name);
        j["title"] = inst.attributes.title;
        j["desc"] = inst.attributes.desc;
        j["ocr"] = inst.attributes.ocr;
        j["impressions"] = inst.impressions;
        j["clicks"] = inst.clicks;
        j["ctr"] = inst.ctr;
        f << j.dump() << '\n';
    }
}

std::vector<AggregatedInstance> read_aggregated_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open aggregated dataset: " + path);
    std::vector<AggregatedInstance> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        AggregatedInstance inst;
        inst.image_path = j.value("image_path", "");
        inst.attributes.image_id = j.at("image_id").get<std::string>();
        for (const auto& spec : categorical_specs())
            inst.attributes.set_categorical(spec.name, j.at(spec.name).get<int>());
        inst.attributes.title = j.value("title", "");
        inst.attributes.desc = j.value("desc", "");
        inst.attributes.ocr = j.value("ocr", "");
        inst.impressions = j.at("impressions").get<std::uint64_t>();
        inst.clicks = j.at("clicks").get<std::uint64_t>();
        inst.ctr = j.at("ctr").get<double>();
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace m2fn::data
