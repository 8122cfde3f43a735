#include "m2fn/data/encode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "m2fn/common.hpp"

namespace m2fn::data {

MergeMap merge_rare_levels(const std::map<int, std::uint64_t>& level_histogram, std::uint64_t threshold,
                           bool* warning) {
    if (level_histogram.empty()) throw UsageError("merge_rare_levels: empty histogram");
    if (warning) *warning = false;

    std::vector<int> qualified;
    for (const auto& [level, count] : level_histogram)
        if (count >= threshold) qualified.push_back(level);

    MergeMap map;
    if (qualified.empty()) {
        // Everything is rare: collapse into the most frequent level.
        int target = level_histogram.begin()->first;
        std::uint64_t best = 0;
        for (const auto& [level, count] : level_histogram)
            if (count > best) {
                best = count;
                target = level;
            }
        for (const auto& [level, count] : level_histogram) map[level] = target;
        if (warning) *warning = true;
        return map;
    }

    for (const auto& [level, count] : level_histogram) {
        if (count >= threshold) {
            map[level] = level;
            continue;
        }
        int best = qualified.front();
        int best_dist = std::numeric_limits<int>::max();
        for (int q : qualified) {
            int dist = std::abs(q - level);
            if (dist < best_dist || (dist == best_dist && q < best)) {
                best = q;
                best_dist = dist;
            }
        }
        map[level] = best;
    }
    return map;
}

Eigen::VectorXd HashEmbedder::embed(const std::string& text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kTextEmbeddingDim);
    if (text.empty()) return v;  // absent text -> zero block
    Rng rng(fnv1a(text) ^ seed_);
    // Scaled so the block has unit expected norm; keeps text features on the
    // same footing as the one-hot blocks while staying inside [-1, 1].
    const double scale = 1.0 / std::sqrt(static_cast<double>(kTextEmbeddingDim) / 3.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < kTextEmbeddingDim; ++i) v[i] = scale * uni(rng);
    return v;
}

std::string HashEmbedder::provider_id() const { return "hash-stub:" + std::to_string(seed_); }

int BlockLayout::total_width() const {
    if (blocks.empty()) return 0;
    return blocks.back().offset + blocks.back().width;
}

const Block& BlockLayout::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return b;
    throw UsageError("no such block: " + name);
}

BlockLayout auxiliary_layout(bool with_domcol) {
    BlockLayout layout;
    int offset = 0;
    for (const auto& spec : categorical_specs()) {
        layout.blocks.push_back({spec.name, offset, spec.levels()});
        offset += spec.levels();
    }
    if (with_domcol) {
        layout.blocks.push_back({"domcol", offset, 10});
        offset += 10;
    }
    for (const char* name : {"title", "desc", "ocr"}) {
        layout.blocks.push_back({name, offset, kTextEmbeddingDim});
        offset += kTextEmbeddingDim;
    }
    return layout;
}

AuxiliaryVector encode_auxiliary(const AdAttributes& attrs, const std::map<std::string, MergeMap>& merge_maps,
                                 const EmbeddingProvider& embedder, std::optional<int> domcol_level) {
    AuxiliaryVector aux;
    aux.layout = auxiliary_layout(domcol_level.has_value());
    aux.values = Eigen::VectorXd::Zero(aux.layout.total_width());

    for (const auto& spec : categorical_specs()) {
        int level = attrs.categorical(spec.name);
        if (auto it = merge_maps.find(spec.name); it != merge_maps.end()) {
            auto lv = it->second.find(level);
            if (lv == it->second.end())
                throw DataError("level " + std::to_string(level) + " of attribute '" + spec.name +
                                "' not covered by merge map");
            level = lv->second;
        }
        if (level < spec.min_level || level > spec.max_level)
            throw DataError("attribute '" + spec.name + "' has level " + std::to_string(level) +
                            " outside its value set after merging");
        const Block& block = aux.layout.find(spec.name);
        aux.values[block.offset + (level - spec.min_level)] = 1.0;
    }

    if (domcol_level) {
        if (*domcol_level < 1 || *domcol_level > 10)
            throw DataError("attribute 'domcol' has level " + std::to_string(*domcol_level) +
                            " outside its value set");
        const Block& block = aux.layout.find("domcol");
        aux.values[block.offset + (*domcol_level - 1)] = 1.0;
    }

    const std::string* texts[3] = {&attrs.title, &attrs.desc, &attrs.ocr};
    const char* names[3] = {"title", "desc", "ocr"};
    for (int t = 0; t < 3; ++t) {
        const Block& block = aux.layout.find(names[t]);
        aux.values.segment(block.offset, block.width) = embedder.embed(*texts[t]);
    }
    return aux;
}

namespace {

template <typename T>
void write_le(std::ofstream& f, T v) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (std::is_same_v<T, float>) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        bits = u;
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

std::uint64_t read_u64(std::ifstream& f) {
    unsigned char buf[8];
    f.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    return v;
}

float read_f32(std::ifstream& f) {
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= std::uint32_t(buf[i]) << (8 * i);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void write_embedding_cache(const std::string& path, const std::vector<std::string>& texts,
                           const EmbeddingProvider& embedder) {
    // Deduplicate by text hash; first occurrence wins.
    std::map<std::uint64_t, std::size_t> index;
    std::vector<const std::string*> unique;
    for (const auto& t : texts) {
        std::uint64_t h = fnv1a(t);
        if (index.emplace(h, unique.size()).second) unique.push_back(&t);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    write_le<std::uint64_t>(f, unique.size());
    write_le<std::uint64_t>(f, kTextEmbeddingDim);
    for (const auto* t : unique) {
        Eigen::VectorXd v = embedder.embed(*t);
        for (int i = 0; i < kTextEmbeddingDim; ++i) write_le<float>(f, static_cast<float>(v[i]));
    }

    nlohmann::json sidecar;
    for (const auto& [hash, row] : index) sidecar[std::to_string(hash)] = row;
    std::ofstream sf(path + ".json");
    if (!sf) throw DataError("cannot open for writing: " + path + ".json");
    sf << sidecar.dump() << '\n';
}

CachedEmbedder::CachedEmbedder(const std::string& path) : path_(path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open embedding cache: " + path);
    std::uint64_t rows = read_u64(f);
    std::uint64_t dim = read_u64(f);
    if (dim != kTextEmbeddingDim) throw DataError("embedding cache dim mismatch");
    rows_.resize(static_cast<Eigen::Index>(rows), kTextEmbeddingDim);
    for (std::uint64_t r = 0; r < rows; ++r)
        for (int c = 0; c < kTextEmbeddingDim; ++c) rows_(static_cast<Eigen::Index>(r), c) = read_f32(f);
    if (!f) throw DataError("truncated embedding cache: " + path);

    std::ifstream sf(path + ".json");
    if (!sf) throw DataError("missing embedding cache sidecar: " + path + ".json");
    nlohmann::json sidecar = nlohmann::json::parse(sf);
    for (auto it = sidecar.begin(); it != sidecar.end(); ++it)
        index_[std::stoull(it.key())] = it.value().get<std::size_t>();
}

Eigen::VectorXd CachedEmbedder::embed(const std::string& text) const {
    auto it = index_.find(fnv1a(text));
    if (it == index_.end()) throw DataError("text not present in embedding cache");
    return rows_.row(static_cast<Eigen::Index>(it->second)).transpose();
}

}  // namespace m2fn::data
