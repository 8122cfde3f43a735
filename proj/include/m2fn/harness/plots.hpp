#pragma once

#include <string>
#include <vector>

#include "m2fn/harness/ablation.hpp"
#include "m2fn/harness/gradcam.hpp"
#include "m2fn/harness/trainer.hpp"
#include "m2fn/image.hpp"

namespace m2fn::harness {

// All plots are rendered to 24-bit BMP with a fixed rasterizer, so byte
// output is deterministic for identical inputs.

Image render_loss_curve(const std::vector<EpochStat>& stats);
void plot_loss_curve(const std::vector<EpochStat>& stats, const std::string& path);

// Bar chart of per-variant SPRC. Throws DataError when no row succeeded:
// there is nothing to plot.
Image render_ablation_bars(const std::vector<AblationRow>& rows);
void plot_ablation_bars(const std::vector<AblationRow>& rows, const std::string& path);

void plot_heatmap_overlay(const Image& base, const Heatmap& hm, const std::string& path);

}  // namespace m2fn::harness
