#include "m2fn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "m2fn/common.hpp"

namespace m2fn::metrics {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
    if (a == 0) throw UsageError("empty loss batch");
    if (a != b) throw UsageError("prediction/target length mismatch");
}

void check_distribution(const ScoreDistribution& d, bool require_normalized) {
    for (double b : d.buckets)
        if (b < 0) throw DataError("negative bucket value in distribution");
    if (require_normalized && std::abs(d.sum() - 1.0) > 1e-4)
        throw DataError("unnormalized distribution (row sum off by > 1e-4)");
}

}  // namespace

double loss_weighted_mse(const std::vector<double>& pred, const std::vector<double>& target,
                         const std::vector<double>& weights) {
    check_sizes(pred.size(), target.size());
    check_sizes(pred.size(), weights.size());
    double acc = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        if (weights[n] <= 0) throw UsageError("nonpositive impression weight");
        double d = pred[n] - target[n];
        acc += weights[n] * d * d;
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<double> grad_weighted_mse(const std::vector<double>& pred, const std::vector<double>& target,
                                      const std::vector<double>& weights) {
    check_sizes(pred.size(), target.size());
    check_sizes(pred.size(), weights.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    std::vector<double> g(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) g[n] = 2.0 * weights[n] * (pred[n] - target[n]) * inv_n;
    return g;
}

double loss_kld(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target,
                double floor) {
    check_sizes(pred.size(), target.size());
    double acc = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        check_distribution(pred[n], false);
        check_distribution(target[n], false);
        for (int k = 0; k < ScoreDistribution::kBuckets; ++k) {
            double p = target[n].buckets[k];
            if (p == 0) continue;  // 0 * log 0 = 0
            acc += p * std::log(p / std::max(pred[n].buckets[k], floor));
        }
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<ScoreDistribution> grad_kld(const std::vector<ScoreDistribution>& pred,
                                        const std::vector<ScoreDistribution>& target, double floor) {
    check_sizes(pred.size(), target.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    std::vector<ScoreDistribution> g(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n)
        for (int k = 0; k < ScoreDistribution::kBuckets; ++k) {
            double p = target[n].buckets[k];
            double q = pred[n].buckets[k];
            g[n].buckets[k] = (p == 0 || q <= floor) ? 0.0 : -p / q * inv_n;
        }
    return g;
}

double loss_emd(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target,
                double r) {
    check_sizes(pred.size(), target.size());
    if (r < 1) throw UsageError("EMD exponent must be >= 1");
    constexpr int K = ScoreDistribution::kBuckets;
    double acc = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        check_distribution(pred[n], true);
        check_distribution(target[n], true);
        double cdf_p = 0, cdf_t = 0, s = 0;
        for (int k = 0; k < K; ++k) {
            cdf_p += pred[n].buckets[k];
            cdf_t += target[n].buckets[k];
            s += std::pow(std::abs(cdf_t - cdf_p), r);
        }
        acc += std::pow(s / K, 1.0 / r);
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<ScoreDistribution> grad_emd(const std::vector<ScoreDistribution>& pred,
                                        const std::vector<ScoreDistribution>& target, double r) {
    check_sizes(pred.size(), target.size());
    constexpr int K = ScoreDistribution::kBuckets;
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    std::vector<ScoreDistribution> g(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) {
        std::array<double, K> diff;  // CDF_t(k) - CDF_p(k)
        double cdf_p = 0, cdf_t = 0, s = 0;
        for (int k = 0; k < K; ++k) {
            cdf_p += pred[n].buckets[k];
            cdf_t += target[n].buckets[k];
            diff[k] = cdf_t - cdf_p;
            s += std::pow(std::abs(diff[k]), r);
        }
        if (s == 0) continue;  // identical CDFs, subgradient 0
        double outer = std::pow(s / K, 1.0 / r - 1.0) / K;
        // dL_n/dCDF_p(k) = -outer * r/r * |diff|^(r-1) sgn(diff); pred bucket j
        // contributes to every CDF index k >= j.
        std::array<double, K> d_cdf;
        for (int k = 0; k < K; ++k) {
            double m = std::pow(std::abs(diff[k]), r - 1.0);
            d_cdf[k] = -outer * m * (diff[k] > 0 ? 1.0 : (diff[k] < 0 ? -1.0 : 0.0));
        }
        double suffix = 0;
        for (int j = K - 1; j >= 0; --j) {
            suffix += d_cdf[j];
            g[n].buckets[j] = suffix * inv_n;
        }
    }
    return g;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based tie midpoint
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    check_sizes(xs.size(), ys.size());
    if (xs.size() < 2) throw UsageError("correlation needs at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0 || syy == 0) throw NumericError("correlation undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    return pearson(average_ranks(xs), average_ranks(ys));
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["sprc_mean"] = sprc_mean;
    j["lcc_mean"] = lcc_mean;
    if (sprc_std) j["sprc_std"] = *sprc_std;
    if (lcc_std) j["lcc_std"] = *lcc_std;
    return j.dump();
}

MetricReport MetricReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MetricReport r;
    r.sprc_mean = j.at("sprc_mean").get<double>();
    r.lcc_mean = j.at("lcc_mean").get<double>();
    if (j.contains("sprc_std")) r.sprc_std = j["sprc_std"].get<double>();
    if (j.contains("lcc_std")) r.lcc_std = j["lcc_std"].get<double>();
    return r;
}

MetricReport evaluate(const std::vector<double>& pred, const std::vector<double>& target) {
    MetricReport r;
    r.sprc_mean = spearman(pred, target);
    r.lcc_mean = pearson(pred, target);
    return r;
}

MetricReport evaluate(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target) {
    check_sizes(pred.size(), target.size());
    std::vector<double> pm, tm, ps, ts;
    pm.reserve(pred.size());
    tm.reserve(pred.size());
    ps.reserve(pred.size());
    ts.reserve(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) {
        pm.push_back(pred[n].mean());
        tm.push_back(target[n].mean());
        ps.push_back(pred[n].stddev());
        ts.push_back(target[n].stddev());
    }
    MetricReport r;
    r.sprc_mean = spearman(pm, tm);
    r.lcc_mean = pearson(pm, tm);
    r.sprc_std = spearman(ps, ts);
    r.lcc_std = pearson(ps, ts);
    return r;
}

}  // namespace m2fn::metrics
