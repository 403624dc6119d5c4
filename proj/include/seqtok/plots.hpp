#pragma once

#include "seqtok/types.hpp"

#include <string>
#include <vector>

namespace seqtok {

struct Series {
  std::string name;
  std::vector<Scalar> y;
};

// Minimal chart renderers writing PPM images; enough for loss curves, usage
// histograms, and latent scatter plots without a plotting dependency.
void render_line_chart(const std::vector<Series>& series, const std::string& path,
                       Eigen::Index width = 480, Eigen::Index height = 320);
void render_bar_chart(const std::vector<Scalar>& values, const std::string& path,
                      Eigen::Index width = 480, Eigen::Index height = 320);
// xy is n x 2 (or wider; only the first two columns are used); color_ids picks
// a palette color per point (empty = all one color).
void render_scatter(const Mat& xy, const std::vector<int>& color_ids, const std::string& path,
                    Eigen::Index width = 480, Eigen::Index height = 480);

}  // namespace seqtok
