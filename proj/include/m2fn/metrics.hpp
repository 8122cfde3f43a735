#pragma once

#include <optional>
#include <string>
#include <vector>

#include "m2fn/distribution.hpp"

namespace m2fn::metrics {

// Impression-weighted MSE: (1/N) sum w_n (pred_n - target_n)^2.
double loss_weighted_mse(const std::vector<double>& pred, const std::vector<double>& target,
                         const std::vector<double>& weights);
// d/dpred_n = 2 w_n (pred_n - target_n) / N
std::vector<double> grad_weighted_mse(const std::vector<double>& pred, const std::vector<double>& target,
                                      const std::vector<double>& weights);

// KL divergence, target || prediction, averaged over the batch.
// 0*log(0) = 0; the prediction is floored inside the log.
double loss_kld(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target,
                double floor = 1e-12);
std::vector<ScoreDistribution> grad_kld(const std::vector<ScoreDistribution>& pred,
                                        const std::vector<ScoreDistribution>& target, double floor = 1e-12);

// CDF-difference loss over ordered buckets:
// (1/N) sum_n ( (1/K) sum_k |CDF_t(k) - CDF_p(k)|^r )^(1/r), K = 10.
double loss_emd(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target,
                double r = 2.0);
std::vector<ScoreDistribution> grad_emd(const std::vector<ScoreDistribution>& pred,
                                        const std::vector<ScoreDistribution>& target, double r = 2.0);

// Average ranks with tie midpoints (1-based).
std::vector<double> average_ranks(const std::vector<double>& xs);

// Product-moment correlation. Throws NumericError on constant input.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);
// Pearson correlation of average-ranked values.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct MetricReport {
    double sprc_mean = 0;
    double lcc_mean = 0;
    std::optional<double> sprc_std;
    std::optional<double> lcc_std;

    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
};

MetricReport evaluate(const std::vector<double>& pred, const std::vector<double>& target);
MetricReport evaluate(const std::vector<ScoreDistribution>& pred, const std::vector<ScoreDistribution>& target);

}  // namespace m2fn::metrics
