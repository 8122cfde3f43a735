#include "m2fn/harness/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "m2fn/data/color.hpp"

namespace m2fn::harness {

namespace {

// Fills distribution targets from CTRs once the instance list is complete.
void finalize_targets(Dataset& ds, double lognormal_c) {
    if (ds.mode != model::OutputMode::kDistribution) return;
    std::vector<double> ctrs;
    ctrs.reserve(ds.instances.size());
    for (const auto& inst : ds.instances) ctrs.push_back(inst.ctr);
    ds.edges = data::decile_edges(ctrs);
    for (auto& inst : ds.instances)
        inst.target = data::lognormal_distribution(inst.ctr, inst.impressions, ds.edges, lognormal_c);
}

}  // namespace

Dataset build_dataset_from_synthetic(const std::vector<data::SyntheticInstance>& synth,
                                     std::uint64_t min_impressions, const data::EmbeddingProvider& embedder,
                                     model::OutputMode mode, double lognormal_c) {
    std::vector<data::ClickLogRecord> records;
    std::map<std::string, const data::SyntheticInstance*> by_image;
    for (const auto& s : synth) {
        records.insert(records.end(), s.records.begin(), s.records.end());
        if (!s.records.empty()) by_image[s.records.front().attrs.image_id] = &s;
    }
    data::AggregateResult agg = data::aggregate_logs(records, min_impressions);

    const data::ColorPalette palette = data::default_palette();
    std::map<std::string, int> domcol_cache;  // image_id -> 1-based palette index
    const std::map<std::string, data::MergeMap> no_merges;

    Dataset ds;
    ds.mode = mode;
    for (const auto& inst : agg.instances) {
        auto img_it = by_image.find(inst.attributes.image_id);
        if (img_it == by_image.end()) throw DataError("no image for id " + inst.attributes.image_id);
        auto [cit, inserted] = domcol_cache.try_emplace(inst.attributes.image_id, 0);
        if (inserted)
            cit->second = palette.index_of(data::dominant_color(img_it->second->image, palette)) + 1;

        DatasetInstance di;
        di.id = inst.attributes.key();
        di.image = img_it->second->image;
        di.aux = data::encode_auxiliary(inst.attributes, no_merges, embedder, cit->second).values;
        di.ctr = inst.ctr;
        di.impressions = inst.impressions;
        ds.instances.push_back(std::move(di));
    }
    ds.aux_dim = ds.instances.empty() ? data::auxiliary_layout(true).total_width()
                                      : static_cast<int>(ds.instances.front().aux.size());
    finalize_targets(ds, lognormal_c);
    return ds;
}

Dataset load_dataset(const std::string& aggregated_jsonl, const std::string& base_dir,
                     const data::EmbeddingProvider& embedder, model::OutputMode mode, int image_size,
                     double lognormal_c) {
    auto instances = data::read_aggregated_jsonl(aggregated_jsonl);
    const data::ColorPalette palette = data::default_palette();
    const std::map<std::string, data::MergeMap> no_merges;
    std::map<std::string, std::pair<Image, int>> image_cache;  // path -> (image, domcol)

    Dataset ds;
    ds.mode = mode;
    for (const auto& inst : instances) {
        if (inst.image_path.empty()) throw DataError("aggregated instance lacks an image path: " + inst.attributes.key());
        std::filesystem::path p(inst.image_path);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        auto [cit, inserted] = image_cache.try_emplace(p.string());
        if (inserted) {
            Image img = read_bmp(p.string());
            if (img.width != image_size || img.height != image_size)
                img = resize_nearest(img, image_size, image_size);
            int domcol = palette.index_of(data::dominant_color(img, palette)) + 1;
            cit->second = {std::move(img), domcol};
        }
        DatasetInstance di;
        di.id = inst.attributes.key();
        di.image = cit->second.first;
        di.aux = data::encode_auxiliary(inst.attributes, no_merges, embedder, cit->second.second).values;
        di.ctr = inst.ctr;
        di.impressions = inst.impressions;
        ds.instances.push_back(std::move(di));
    }
    ds.aux_dim = ds.instances.empty() ? data::auxiliary_layout(true).total_width()
                                      : static_cast<int>(ds.instances.front().aux.size());
    finalize_targets(ds, lognormal_c);
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& full, double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw UsageError("split fraction must be in [0, 1]");
    std::vector<std::size_t> order(full.instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const std::uint64_t ha = fnv1a(full.instances[a].id), hb = fnv1a(full.instances[b].id);
        if (ha != hb) return ha < hb;
        return full.instances[a].id < full.instances[b].id;
    });
    const std::size_t n_first =
        static_cast<std::size_t>(fraction * static_cast<double>(order.size()) + 0.5);
    Dataset first, second;
    first.aux_dim = second.aux_dim = full.aux_dim;
    first.mode = second.mode = full.mode;
    first.edges = second.edges = full.edges;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_first ? first : second).instances.push_back(full.instances[order[i]]);
    return {std::move(first), std::move(second)};
}

model::FeatureTensor batch_images(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                                  std::size_t end, int image_size) {
    std::vector<Image> images;
    images.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const Image& img = ds.instances[order[i]].image;
        images.push_back(img.width == image_size && img.height == image_size
                             ? img
                             : resize_nearest(img, image_size, image_size));
    }
    return model::images_to_tensor(images, image_size);
}

Eigen::MatrixXd batch_aux(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                          std::size_t end) {
    Eigen::MatrixXd aux(ds.aux_dim, static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) aux.col(static_cast<Eigen::Index>(i - begin)) = ds.instances[order[i]].aux;
    return aux;
}

}  // namespace m2fn::harness
