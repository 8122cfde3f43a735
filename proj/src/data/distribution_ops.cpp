#include "m2fn/data/distribution_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "m2fn/common.hpp"

namespace m2fn::data {

BucketEdges decile_edges(std::vector<double> ctrs) {
    if (ctrs.empty()) throw UsageError("decile_edges: empty CTR list");
    std::sort(ctrs.begin(), ctrs.end());
    BucketEdges edges;
    const std::size_t n = ctrs.size();
    for (int i = 0; i <= 10; ++i) {
        double q = i / 10.0;
        double pos = q * static_cast<double>(n - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        edges[static_cast<std::size_t>(i)] =
            lo + 1 < n ? ctrs[lo] * (1 - frac) + ctrs[lo + 1] * frac : ctrs[lo];
    }
    // Degenerate or duplicate quantiles: force strict ascent with tiny steps.
    for (int i = 1; i <= 10; ++i) {
        auto idx = static_cast<std::size_t>(i);
        if (edges[idx] <= edges[idx - 1]) edges[idx] = edges[idx - 1] + 1e-9;
    }
    return edges;
}

ScoreDistribution lognormal_distribution(double ctr, std::uint64_t impressions, const BucketEdges& edges,
                                         double c, bool* warning) {
    if (warning) *warning = false;
    for (int i = 0; i < 10; ++i)
        if (!(edges[static_cast<std::size_t>(i)] < edges[static_cast<std::size_t>(i) + 1]))
            throw UsageError("lognormal_distribution: edges must be strictly ascending");
    if (ctr < 0) throw UsageError("lognormal_distribution: negative ctr");

    ScoreDistribution d;
    if (ctr == 0) {  // zero-CTR convention: all mass in bucket 1
        d.buckets[0] = 1.0;
        return d;
    }
    if (ctr > edges[10]) {
        if (warning) *warning = true;
        d.buckets[9] = 1.0;
        return d;
    }
    if (impressions < 1) throw UsageError("lognormal_distribution: impressions must be >= 1");

    const double mu = std::log(ctr);  // median of the log-normal
    const double sigma = c / std::sqrt(static_cast<double>(impressions));
    auto cdf = [&](double x) {
        if (x <= 0) return 0.0;
        return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::sqrt(2.0)));
    };

    double total = 0;
    for (int k = 0; k < 10; ++k) {
        auto idx = static_cast<std::size_t>(k);
        d.buckets[idx] = cdf(edges[idx + 1]) - cdf(edges[idx]);
        total += d.buckets[idx];
    }
    if (total <= 0) {  // numeric underflow far outside the edge range
        d.buckets[ctr <= edges[0] ? 0 : 9] = 1.0;
        return d;
    }
    for (auto& b : d.buckets) b /= total;
    return d;
}

AvaDataset load_ava_style(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open annotations: " + path);

    std::vector<AvaInstance> all;
    AvaDataset out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        AvaInstance inst;
        if (!(is >> inst.image_id)) throw DataError("bad annotation line " + std::to_string(lineno));
        long long counts[10];
        long long total = 0;
        for (auto& cnt : counts) {
            if (!(is >> cnt) || cnt < 0) throw DataError("bad rating counts at line " + std::to_string(lineno));
            total += cnt;
        }
        if (total == 0) {
            out.warnings.push_back("line " + std::to_string(lineno) + ": all-zero rating row skipped");
            continue;
        }
        for (int k = 0; k < 10; ++k)
            inst.distribution.buckets[static_cast<std::size_t>(k)] =
                static_cast<double>(counts[k]) / static_cast<double>(total);
        std::string tags;
        std::getline(is, tags);
        std::istringstream ts(tags);
        std::string tag;
        while (std::getline(ts, tag, ';')) {
            // trim
            auto b = tag.find_first_not_of(" \t");
            auto e = tag.find_last_not_of(" \t");
            if (b != std::string::npos) inst.tags.push_back(tag.substr(b, e - b + 1));
        }
        all.push_back(std::move(inst));
    }

    // Exact deterministic 8:2 split: order by (hash, id), first 80% train.
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ha = fnv1a(all[a].image_id), hb = fnv1a(all[b].image_id);
        return ha != hb ? ha < hb : all[a].image_id < all[b].image_id;
    });
    const std::size_t n_train = all.size() * 8 / 10;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? out.train : out.test).push_back(std::move(all[order[i]]));
    return out;
}

}  // namespace m2fn::data
