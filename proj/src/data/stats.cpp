#include "m2fn/data/stats.hpp"

#include <map>

#include <boost/math/distributions/fisher_f.hpp>

#include "m2fn/common.hpp"

namespace m2fn::data {

AnovaResult anova_screen(const std::vector<int>& levels, const std::vector<double>& ctrs) {
    if (levels.size() != ctrs.size()) throw UsageError("anova_screen: length mismatch");

    std::map<int, std::vector<double>> groups;
    for (std::size_t i = 0; i < levels.size(); ++i) groups[levels[i]].push_back(ctrs[i]);

    AnovaResult res;
    std::vector<const std::vector<double>*> usable;
    for (const auto& [level, obs] : groups) {
        if (obs.size() < 2) {
            res.warnings.push_back("level " + std::to_string(level) + " excluded (single observation)");
            continue;
        }
        usable.push_back(&obs);
    }
    if (usable.size() < 2) throw UsageError("anova_screen: need at least 2 levels with >= 2 observations");

    std::size_t n = 0;
    double grand = 0;
    for (const auto* g : usable) {
        n += g->size();
        for (double v : *g) grand += v;
    }
    grand /= static_cast<double>(n);

    double ssb = 0, ssw = 0;
    for (const auto* g : usable) {
        double mean = 0;
        for (double v : *g) mean += v;
        mean /= static_cast<double>(g->size());
        ssb += static_cast<double>(g->size()) * (mean - grand) * (mean - grand);
        for (double v : *g) ssw += (v - mean) * (v - mean);
    }

    const double df_between = static_cast<double>(usable.size()) - 1.0;
    const double df_within = static_cast<double>(n) - static_cast<double>(usable.size());
    if (ssw == 0) throw NumericError("anova_screen: zero within-group variance");

    res.f_statistic = (ssb / df_between) / (ssw / df_within);
    boost::math::fisher_f dist(df_between, df_within);
    res.p_value = boost::math::cdf(boost::math::complement(dist, res.f_statistic));
    res.keep = res.p_value < 0.05;
    return res;
}

}  // namespace m2fn::data
