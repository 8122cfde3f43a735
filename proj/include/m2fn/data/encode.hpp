#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m2fn/data/click_log.hpp"

namespace m2fn::data {

// level -> post-merge level for one categorical attribute.
using MergeMap = std::map<int, int>;

// Maps every level with fewer than `threshold` impressions to its nearest
// level (ordinal distance, ties toward the lower level) whose own count is
// at or above the threshold. When no level qualifies, everything merges into
// the most frequent level and *warning is set.
MergeMap merge_rare_levels(const std::map<int, std::uint64_t>& level_histogram, std::uint64_t threshold,
                           bool* warning = nullptr);

constexpr int kTextEmbeddingDim = 768;

// Deterministic text -> 768-dim vector with entries in [-1, 1].
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Eigen::VectorXd embed(const std::string& text) const = 0;
    virtual std::string provider_id() const = 0;
};

// Seeded hash-to-vector stub. Empty text embeds to the zero vector.
class HashEmbedder : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::uint64_t seed = 0) : seed_(seed) {}
    Eigen::VectorXd embed(const std::string& text) const override;
    std::string provider_id() const override;

private:
    std::uint64_t seed_;
};

struct Block {
    std::string name;
    int offset;
    int width;
};

struct BlockLayout {
    std::vector<Block> blocks;
    int total_width() const;
    const Block& find(const std::string& name) const;
};

// One-hot categorical blocks (full Table-1 widths, plus a 10-wide dominant
// color block when enabled) followed by three 768-dim text blocks.
BlockLayout auxiliary_layout(bool with_domcol = true);

struct AuxiliaryVector {
    Eigen::VectorXd values;
    BlockLayout layout;
};

// merge_maps is keyed by attribute name; attributes without an entry keep
// their raw levels. domcol_level, when present, is a 1-based palette index.
AuxiliaryVector encode_auxiliary(const AdAttributes& attrs,
                                 const std::map<std::string, MergeMap>& merge_maps,
                                 const EmbeddingProvider& embedder,
                                 std::optional<int> domcol_level = std::nullopt);

// Binary embedding cache: u64 row count, u64 dim, row-major f32, all
// little-endian. The JSON sidecar (path + ".json") maps decimal FNV-1a text
// hashes to row indices.
void write_embedding_cache(const std::string& path, const std::vector<std::string>& texts,
                           const EmbeddingProvider& embedder);

class CachedEmbedder : public EmbeddingProvider {
public:
    explicit CachedEmbedder(const std::string& path);
    Eigen::VectorXd embed(const std::string& text) const override;
    std::string provider_id() const override { return "cache:" + path_; }

private:
    std::string path_;
    std::map<std::uint64_t, std::size_t> index_;
    Eigen::MatrixXd rows_;  // one embedding per row
};

}  // namespace m2fn::data
