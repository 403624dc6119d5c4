#include "seqtok/plots.hpp"

#include "seqtok/image_io.hpp"

#include <algorithm>
#include <cmath>

namespace seqtok {

namespace {

struct Canvas {
  Mat pixels;  // (h*w) x 3 in [-1, 1]
  Eigen::Index h, w;

  Canvas(Eigen::Index height, Eigen::Index width) : h(height), w(width) {
    pixels = Mat::Ones(h * w, 3);
  }
  void set(Eigen::Index x, Eigen::Index y, Scalar r, Scalar g, Scalar b) {
    if (x < 0 || x >= w || y < 0 || y >= h) return;
    pixels.row(y * w + x) << r, g, b;
  }
  void dot(Eigen::Index x, Eigen::Index y, Scalar r, Scalar g, Scalar b) {
    for (Eigen::Index dy = 0; dy <= 1; ++dy) {
      for (Eigen::Index dx = 0; dx <= 1; ++dx) set(x + dx, y + dy, r, g, b);
    }
  }
  void line(Scalar x0, Scalar y0, Scalar x1, Scalar y1, Scalar r, Scalar g, Scalar b) {
    const Scalar len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    const Eigen::Index steps = std::max<Eigen::Index>(1, Eigen::Index(std::ceil(len)));
    for (Eigen::Index i = 0; i <= steps; ++i) {
      const Scalar u = Scalar(i) / Scalar(steps);
      set(Eigen::Index(std::lround(x0 + u * (x1 - x0))),
          Eigen::Index(std::lround(y0 + u * (y1 - y0))), r, g, b);
    }
  }
  void frame() {
    line(0, 0, Scalar(w - 1), 0, -0.5, -0.5, -0.5);
    line(0, Scalar(h - 1), Scalar(w - 1), Scalar(h - 1), -0.5, -0.5, -0.5);
    line(0, 0, 0, Scalar(h - 1), -0.5, -0.5, -0.5);
    line(Scalar(w - 1), 0, Scalar(w - 1), Scalar(h - 1), -0.5, -0.5, -0.5);
  }
  void save(const std::string& path) const { write_ppm(path, pixels, h, w); }
};

constexpr int kPaletteSize = 8;
const Scalar kPalette[kPaletteSize][3] = {
    {-0.8, -0.2, 0.9},  {0.9, -0.5, -0.5}, {-0.5, 0.6, -0.5}, {0.8, 0.5, -0.7},
    {-0.2, -0.7, -0.2}, {0.7, -0.2, 0.7},  {-0.7, 0.5, 0.7},  {0.2, 0.2, -0.9},
};

void minmax(const std::vector<Series>& series, Scalar& lo, Scalar& hi) {
  lo = std::numeric_limits<Scalar>::infinity();
  hi = -lo;
  for (const Series& s : series) {
    for (Scalar v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

}  // namespace

void render_line_chart(const std::vector<Series>& series, const std::string& path,
                       Eigen::Index width, Eigen::Index height) {
  Canvas c(height, width);
  c.frame();
  Scalar lo, hi;
  minmax(series, lo, hi);
  const Scalar pad = 8;
  size_t max_n = 1;
  for (const Series& s : series) max_n = std::max(max_n, s.y.size());
  for (size_t si = 0; si < series.size(); ++si) {
    const std::vector<Scalar>& y = series[si].y;
    if (y.size() < 2) continue;
    const Scalar* col = kPalette[si % kPaletteSize];
    for (size_t i = 0; i + 1 < y.size(); ++i) {
      if (!std::isfinite(y[i]) || !std::isfinite(y[i + 1])) continue;
      const Scalar x0 = pad + (Scalar(width) - 2 * pad) * Scalar(i) / Scalar(max_n - 1);
      const Scalar x1 = pad + (Scalar(width) - 2 * pad) * Scalar(i + 1) / Scalar(max_n - 1);
      const Scalar y0 = Scalar(height) - pad - (Scalar(height) - 2 * pad) * (y[i] - lo) / (hi - lo);
      const Scalar y1 =
          Scalar(height) - pad - (Scalar(height) - 2 * pad) * (y[i + 1] - lo) / (hi - lo);
      c.line(x0, y0, x1, y1, col[0], col[1], col[2]);
    }
  }
  c.save(path);
}

void render_bar_chart(const std::vector<Scalar>& values, const std::string& path,
                      Eigen::Index width, Eigen::Index height) {
  Canvas c(height, width);
  c.frame();
  if (values.empty()) {
    c.save(path);
    return;
  }
  Scalar hi = 1e-12;
  for (Scalar v : values) {
    if (std::isfinite(v)) hi = std::max(hi, v);
  }
  const Scalar pad = 8;
  const Scalar span = Scalar(width) - 2 * pad;
  const Scalar bar_w = std::max<Scalar>(1, span / Scalar(values.size()));
  for (size_t i = 0; i < values.size(); ++i) {
    const Scalar v = std::isfinite(values[i]) ? std::max<Scalar>(0, values[i]) : 0;
    const Eigen::Index top =
        Eigen::Index(Scalar(height) - pad - (Scalar(height) - 2 * pad) * v / hi);
    const Eigen::Index x0 = Eigen::Index(pad + bar_w * Scalar(i));
    const Eigen::Index x1 = Eigen::Index(pad + bar_w * Scalar(i + 1)) - 1;
    for (Eigen::Index x = x0; x <= std::max(x0, x1); ++x) {
      c.line(Scalar(x), Scalar(top), Scalar(x), Scalar(height) - pad, -0.6, -0.1, 0.6);
    }
  }
  c.save(path);
}

void render_scatter(const Mat& xy, const std::vector<int>& color_ids, const std::string& path,
                    Eigen::Index width, Eigen::Index height) {
  Canvas c(height, width);
  c.frame();
  if (xy.rows() > 0 && xy.cols() >= 2) {
    Scalar xlo = xy.col(0).minCoeff(), xhi = xy.col(0).maxCoeff();
    Scalar ylo = xy.col(1).minCoeff(), yhi = xy.col(1).maxCoeff();
    if (xhi - xlo < 1e-12) xhi = xlo + 1;
    if (yhi - ylo < 1e-12) yhi = ylo + 1;
    const Scalar pad = 8;
    for (Eigen::Index i = 0; i < xy.rows(); ++i) {
      const Scalar* col =
          kPalette[color_ids.empty() ? 0 : color_ids[i % Eigen::Index(color_ids.size())] %
                                               kPaletteSize];
      const Scalar x = pad + (Scalar(width) - 2 * pad) * (xy(i, 0) - xlo) / (xhi - xlo);
      const Scalar y =
          Scalar(height) - pad - (Scalar(height) - 2 * pad) * (xy(i, 1) - ylo) / (yhi - ylo);
      c.dot(Eigen::Index(std::lround(x)), Eigen::Index(std::lround(y)), col[0], col[1], col[2]);
    }
  }
  c.save(path);
}

}  // namespace seqtok
