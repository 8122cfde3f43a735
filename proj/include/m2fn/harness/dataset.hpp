#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m2fn/data/aggregate.hpp"
#include "m2fn/data/distribution_ops.hpp"
#include "m2fn/data/encode.hpp"
#include "m2fn/data/synthetic.hpp"
#include "m2fn/distribution.hpp"
#include "m2fn/image.hpp"
#include "m2fn/model/network.hpp"

namespace m2fn::harness {

struct DatasetInstance {
    std::string id;
    Image image;
    Eigen::VectorXd aux;
    double ctr = 0;
    std::uint64_t impressions = 1;
    ScoreDistribution target;  // filled in distribution mode
};

struct Dataset {
    std::vector<DatasetInstance> instances;
    int aux_dim = 0;
    model::OutputMode mode = model::OutputMode::kRegression;
    data::BucketEdges edges{};  // CTR bucket edges (distribution mode)

    std::size_t size() const { return instances.size(); }
};

// Aggregates synthetic click streams, labels dominant colors, encodes
// auxiliary vectors and assembles a training-ready dataset.
Dataset build_dataset_from_synthetic(const std::vector<data::SyntheticInstance>& synth,
                                     std::uint64_t min_impressions, const data::EmbeddingProvider& embedder,
                                     model::OutputMode mode, double lognormal_c = 1.0);

// Loads an aggregated JSON-lines dataset plus BMP images referenced by
// image_path (relative paths resolved against base_dir).
Dataset load_dataset(const std::string& aggregated_jsonl, const std::string& base_dir,
                     const data::EmbeddingProvider& embedder, model::OutputMode mode, int image_size,
                     double lognormal_c = 1.0);

// Deterministic hash split on instance id; `fraction` of instances land in
// the first output.
std::pair<Dataset, Dataset> split_dataset(const Dataset& full, double fraction);

// Model input batch assembly for instance indices [begin, end).
model::FeatureTensor batch_images(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                                  std::size_t end, int image_size);
Eigen::MatrixXd batch_aux(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                          std::size_t end);

}  // namespace m2fn::harness
