#include "seqtok/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace seqtok {

namespace {

// Skips whitespace and '#' comments between PPM header fields.
int next_header_token(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == EOF) throw IoError("ppm: truncated header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      int value = 0;
      if (!(in >> value)) throw IoError("ppm: malformed header field");
      return value;
    }
  }
}

}  // namespace

LoadedImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw IoError("unsupported image format (want P6 ppm): " + path);
  const int w = next_header_token(in);
  const int h = next_header_token(in);
  const int maxval = next_header_token(in);
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("ppm: unsupported dimensions in " + path);
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError("ppm: truncated pixel data in " + path);
  }
  LoadedImage img;
  img.h = h;
  img.w = w;
  img.c = 3;
  img.pixels = Mat(static_cast<Eigen::Index>(h) * w, 3);
  for (Eigen::Index i = 0; i < img.pixels.rows(); ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      img.pixels(i, c) = static_cast<Scalar>(raw[static_cast<std::size_t>(i * 3 + c)]) / 127.5 - 1.0;
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Mat& pixels, Eigen::Index h, Eigen::Index w) {
  if (pixels.rows() != h * w || (pixels.cols() != 3 && pixels.cols() != 1)) {
    throw DimensionError("write_ppm: pixel shape mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * 3);
  for (Eigen::Index i = 0; i < h * w; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      const Scalar v = pixels(i, pixels.cols() == 1 ? 0 : c);
      const Scalar byte = std::round((std::clamp(v, Scalar(-1), Scalar(1)) + 1.0) * 127.5);
      raw[static_cast<std::size_t>(i * 3 + c)] = static_cast<unsigned char>(byte);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write: " + path);
}

Mat tile_image_grid(const Mat& pixels, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
                    Eigen::Index cols, Eigen::Index& out_h, Eigen::Index& out_w) {
  if (pixels.rows() != batch * h * w) throw DimensionError("tile_image_grid: shape mismatch");
  const Eigen::Index rows = (batch + cols - 1) / cols;
  out_h = rows * h;
  out_w = cols * w;
  Mat canvas = Mat::Constant(out_h * out_w, pixels.cols(), -1.0);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index gy = (b / cols) * h, gx = (b % cols) * w;
    for (Eigen::Index y = 0; y < h; ++y) {
      for (Eigen::Index x = 0; x < w; ++x) {
        canvas.row((gy + y) * out_w + gx + x) = pixels.row(b * h * w + y * w + x);
      }
    }
  }
  return canvas;
}

}  // namespace seqtok
