#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m2fn/data/click_log.hpp"

namespace m2fn::data {

// Unique (image, attribute-tuple) with click statistics. ctr is exactly
// clicks/impressions; the integer fields are kept for exact conservation
// checks.
struct AggregatedInstance {
    AdAttributes attributes;
    std::uint64_t impressions = 0;
    std::uint64_t clicks = 0;
    double ctr = 0;
    std::string image_path;  // optional, filled by dataset writers
};

struct AggregateResult {
    std::vector<AggregatedInstance> instances;
    std::vector<std::size_t> rejected;  // indices of malformed input records
    std::vector<std::string> reject_reasons;
};

// Groups records by (image_id, attribute tuple), drops keys with fewer than
// min_impressions exposures. Malformed records are rejected and reported by
// input index. Output order is deterministic (sorted by key).
AggregateResult aggregate_logs(const std::vector<ClickLogRecord>& records, std::uint64_t min_impressions);

// JSON-lines aggregated dataset: image path, raw attribute values,
// impressions, clicks, ctr.
void write_aggregated_jsonl(const std::vector<AggregatedInstance>& instances, const std::string& path);
std::vector<AggregatedInstance> read_aggregated_jsonl(const std::string& path);

}  // namespace m2fn::data
