#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "m2fn/distribution.hpp"

namespace m2fn::data {

using BucketEdges = std::array<double, 11>;

// Deciles of the given CTR values, padded at both ends to span the range.
BucketEdges decile_edges(std::vector<double> ctrs);

// Log-normal with median = ctr and shape sigma = c/sqrt(impressions),
// integrated over the buckets and renormalized. ctr == 0 puts all mass in
// bucket 1; ctr above the last edge puts all mass in bucket 10 and sets
// *warning.
ScoreDistribution lognormal_distribution(double ctr, std::uint64_t impressions, const BucketEdges& edges,
                                         double c = 1.0, bool* warning = nullptr);

struct AvaInstance {
    std::string image_id;
    ScoreDistribution distribution;
    std::vector<std::string> tags;
};

struct AvaDataset {
    std::vector<AvaInstance> train;
    std::vector<AvaInstance> test;
    std::vector<std::string> warnings;
};

// One line per image: image id, 10 integer rating counts, then
// semicolon-separated tag texts. All-zero rating rows are skipped with a
// warning. The 8:2 split sorts ids by a stable hash and takes the first 80%
// as train, so the ratio is exact and reproducible.
AvaDataset load_ava_style(const std::string& path);

}  // namespace m2fn::data
