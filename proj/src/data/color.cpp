#include "m2fn/data/color.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "m2fn/common.hpp"

namespace m2fn::data {

int ColorPalette::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < colors.size(); ++i)
        if (colors[i].label == label) return static_cast<int>(i);
    throw UsageError("no such palette color: " + label);
}

ColorPalette default_palette() {
    ColorPalette p;
    p.colors = {
        {"black", {0, 0, 0}},       {"blue", {0, 0, 255}},     {"brown", {150, 75, 0}},
        {"green", {0, 128, 0}},     {"grey", {128, 128, 128}}, {"multiple", {0, 0, 0}, true},
        {"pink", {255, 192, 203}},  {"red", {255, 0, 0}},      {"white", {255, 255, 255}},
        {"yellow", {255, 255, 0}},
    };
    return p;
}

namespace {

// Sorted-multiset sampling: invariant to any permutation of the input pixels.
std::vector<Eigen::Vector3d> sample_pixels(const Image& image, int cap) {
    std::vector<std::array<std::uint8_t, 3>> all;
    all.reserve(static_cast<std::size_t>(image.width) * image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const auto* p = image.at(x, y);
            all.push_back({p[0], p[1], p[2]});
        }
    std::sort(all.begin(), all.end());

    std::vector<Eigen::Vector3d> out;
    const std::size_t n = all.size();
    const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto& px = all[i * n / take];
        out.emplace_back(px[0], px[1], px[2]);
    }
    return out;
}

struct KmeansResult {
    std::vector<Eigen::Vector3d> centroids;
    std::vector<std::size_t> counts;
};

KmeansResult kmeans(const std::vector<Eigen::Vector3d>& points, int k, std::uint64_t seed, int iters) {
    Rng rng(seed);
    const std::size_t n = points.size();
    std::vector<Eigen::Vector3d> centroids;

    // k-means++ seeding
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centroids.push_back(points[first(rng)]);
    std::vector<double> d2(n, std::numeric_limits<double>::max());
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points[i] - centroids.back()).squaredNorm());
            total += d2[i];
        }
        if (total == 0) {
            centroids.push_back(points[first(rng)]);
            continue;
        }
        std::uniform_real_distribution<double> uni(0, total);
        double target = uni(rng), acc = 0;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (acc >= target) {
                pick = i;
                break;
            }
        }
        centroids.push_back(points[pick]);
    }

    std::vector<int> assign(n, 0);
    KmeansResult res;
    for (int it = 0; it < iters; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (int c = 0; c < k; ++c) {
                double d = (points[i] - centroids[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]] += points[i];
            counts[assign[i]] += 1;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centroids[c] = sums[c] / static_cast<double>(counts[c]);
        res.centroids = centroids;
        res.counts = counts;
        if (!changed && it > 0) break;
    }
    return res;
}

}  // namespace

void mcd_covariance(const std::vector<Eigen::Vector3d>& points, std::uint64_t seed, int n_starts,
                    Eigen::Vector3d& location, Eigen::Matrix3d& scatter) {
    const std::size_t n = points.size();
    const std::size_t h = (n + 4) / 2;  // ~50% coverage
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);

    auto moments = [&](const std::vector<std::size_t>& idx, Eigen::Vector3d& mu, Eigen::Matrix3d& cov) {
        mu.setZero();
        for (std::size_t i : idx) mu += points[i];
        mu /= static_cast<double>(idx.size());
        cov.setZero();
        for (std::size_t i : idx) {
            Eigen::Vector3d d = points[i] - mu;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(idx.size());
        cov += 1e-6 * Eigen::Matrix3d::Identity();
    };

    double best_det = std::numeric_limits<double>::max();
    Eigen::Vector3d best_mu = Eigen::Vector3d::Zero();
    Eigen::Matrix3d best_cov = Eigen::Matrix3d::Identity();

    for (int s = 0; s < n_starts; ++s) {
        // elemental start: p+1 points
        std::vector<std::size_t> idx;
        for (int i = 0; i < 4; ++i) idx.push_back(pick(rng));
        Eigen::Vector3d mu;
        Eigen::Matrix3d cov;
        moments(idx, mu, cov);

        // concentration steps
        for (int step = 0; step < 3; ++step) {
            Eigen::Matrix3d inv = cov.inverse();
            std::vector<std::pair<double, std::size_t>> dist(n);
            for (std::size_t i = 0; i < n; ++i) {
                Eigen::Vector3d d = points[i] - mu;
                dist[i] = {d.dot(inv * d), i};
            }
            std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(h) - 1, dist.end());
            std::vector<std::size_t> subset;
            subset.reserve(h);
            for (std::size_t i = 0; i < h; ++i) subset.push_back(dist[i].second);
            std::sort(subset.begin(), subset.end());  // fixed order for reproducible sums
            moments(subset, mu, cov);
        }
        double det = cov.determinant();
        if (det < best_det) {
            best_det = det;
            best_mu = mu;
            best_cov = cov;
        }
    }
    location = best_mu;
    scatter = best_cov;
}

std::string dominant_color(const Image& image, const ColorPalette& palette, const DominantColorOptions& opts) {
    if (image.width <= 0 || image.height <= 0) throw UsageError("dominant_color: empty image");
    if (opts.k < 2) throw UsageError("dominant_color: k must be >= 2");

    std::vector<Eigen::Vector3d> pixels = sample_pixels(image, opts.sample_cap);

    auto nearest_anchor = [&](const Eigen::Vector3d& c, const Eigen::Matrix3d& inv_cov) {
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < palette.colors.size(); ++i) {
            if (palette.colors[i].fallback) continue;
            Eigen::Vector3d a(palette.colors[i].anchor[0], palette.colors[i].anchor[1],
                              palette.colors[i].anchor[2]);
            Eigen::Vector3d d = c - a;
            double dist = d.dot(inv_cov * d);
            if (dist < best_d) {
                best_d = dist;
                best = static_cast<int>(i);
            }
        }
        return palette.colors[static_cast<std::size_t>(best)].label;
    };

    // Single-color short-circuit: no clustering, Euclidean anchor match.
    bool uniform = true;
    for (const auto& p : pixels)
        if (p != pixels.front()) {
            uniform = false;
            break;
        }
    if (uniform) return nearest_anchor(pixels.front(), Eigen::Matrix3d::Identity());

    KmeansResult km = kmeans(pixels, opts.k, opts.seed, opts.kmeans_iters);
    std::size_t largest = 0;
    for (std::size_t c = 1; c < km.counts.size(); ++c)
        if (km.counts[c] > km.counts[largest]) largest = c;

    double share = static_cast<double>(km.counts[largest]) / static_cast<double>(pixels.size());
    if (share < palette.dominance_threshold) {
        for (const auto& col : palette.colors)
            if (col.fallback) return col.label;
    }

    // MCD-robust covariance on a subsample (sorted order, so deterministic).
    std::vector<Eigen::Vector3d> sub;
    const std::size_t stride = std::max<std::size_t>(1, pixels.size() / static_cast<std::size_t>(opts.mcd_subsample));
    for (std::size_t i = 0; i < pixels.size(); i += stride) sub.push_back(pixels[i]);
    Eigen::Vector3d mu;
    Eigen::Matrix3d cov;
    mcd_covariance(sub, opts.seed, opts.mcd_starts, mu, cov);

    return nearest_anchor(km.centroids[largest], cov.inverse());
}

}  // namespace m2fn::data
