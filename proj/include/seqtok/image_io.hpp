#pragma once

#include "seqtok/types.hpp"

#include <string>
#include <vector>

namespace seqtok {

struct LoadedImage {
  Mat pixels;  // (H*W) x C in [-1, 1]
  Eigen::Index h = 0, w = 0, c = 3;
};

// Binary PPM (P6, maxval 255). Values map linearly to [-1, 1].
LoadedImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Mat& pixels, Eigen::Index h, Eigen::Index w);

// Tile a batch of equally sized images into one grid image (row-major order).
Mat tile_image_grid(const Mat& pixels, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
                    Eigen::Index cols, Eigen::Index& out_h, Eigen::Index& out_w);

}  // namespace seqtok
