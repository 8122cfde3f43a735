#pragma once

#include <string>
#include <vector>

namespace m2fn::data {

struct AnovaResult {
    double f_statistic = 0;
    double p_value = 1;
    bool keep = false;  // p < 0.05
    std::vector<std::string> warnings;
};

// One-way ANOVA F-test of CTR across attribute levels. Levels with a single
// observation are excluded with a warning; at least two usable groups with
// two observations each are required.
AnovaResult anova_screen(const std::vector<int>& levels, const std::vector<double>& ctrs);

}  // namespace m2fn::data
