#include "instrans/image.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "instrans/errors.hpp"

namespace instrans {

Tensor load_image_chw(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot read image file '" + path.string() + "'");
  Tensor out({3, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y) {
    const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      // OpenCV loads BGR
      out.at(0, y, x) = row[x][2] / 127.5 - 1.0;
      out.at(1, y, x) = row[x][1] / 127.5 - 1.0;
      out.at(2, y, x) = row[x][0] / 127.5 - 1.0;
    }
  }
  return out;
}

std::vector<uint8_t> quantize_u8(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("expected 3xHxW image, got " + shape_str(chw.shape()));
  const int h = chw.dim(1), w = chw.dim(2);
  std::vector<uint8_t> out(static_cast<size_t>(3) * h * w);
  const int prev_mode = std::fegetround();
  std::fesetround(FE_TONEAREST);  // rint => round-half-even
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = (chw.at(c, y, x) + 1.0) * 0.5 * 255.0;
        v = std::clamp(v, 0.0, 255.0);
        out[(static_cast<size_t>(c) * h + y) * w + x] = static_cast<uint8_t>(std::rint(v));
      }
  std::fesetround(prev_mode);
  return out;
}

void save_image_chw(const std::filesystem::path& path, const Tensor& chw) {
  const int h = chw.dim(1), w = chw.dim(2);
  const std::vector<uint8_t> q = quantize_u8(chw);
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      row[x][2] = q[(static_cast<size_t>(0) * h + y) * w + x];
      row[x][1] = q[(static_cast<size_t>(1) * h + y) * w + x];
      row[x][0] = q[(static_cast<size_t>(2) * h + y) * w + x];
    }
  }
  if (!cv::imwrite(path.string(), img))
    throw DataError("cannot write image file '" + path.string() + "'");
}

Tensor bilinear_resize_chw(const Tensor& src, int out_h, int out_w) {
  if (src.rank() != 3) throw ShapeError("bilinear_resize expects CHW, got " + shape_str(src.shape()));
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize target must be positive");
  const int c = src.dim(0), in_h = src.dim(1), in_w = src.dim(2);
  if (in_h == out_h && in_w == out_w) return src;
  Tensor out({c, out_h, out_w});
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = src.at(ch, y0, x0) * (1.0 - wx) + src.at(ch, y0, x1) * wx;
        const double bot = src.at(ch, y1, x0) * (1.0 - wx) + src.at(ch, y1, x1) * wx;
        out.at(ch, y, x) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

double pixel_hue(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  if (d <= 1e-12) return 0.0;
  double h;
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  return h;
}

CircularStats circular_hue_stats(const std::vector<double>& hues) {
  CircularStats st;
  if (hues.empty()) return st;
  double cs = 0.0, sn = 0.0;
  for (double h : hues) {
    cs += std::cos(2.0 * std::numbers::pi * h);
    sn += std::sin(2.0 * std::numbers::pi * h);
  }
  cs /= static_cast<double>(hues.size());
  sn /= static_cast<double>(hues.size());
  const double r = std::sqrt(cs * cs + sn * sn);
  double mean = std::atan2(sn, cs) / (2.0 * std::numbers::pi);
  if (mean < 0.0) mean += 1.0;
  st.mean = mean;
  st.resultant = r;
  st.stddev = r > 1e-12 ? std::sqrt(std::max(0.0, -2.0 * std::log(r))) / (2.0 * std::numbers::pi) : 0.25;
  return st;
}

double circular_diff(double a, double b) {
  double d = std::fmod(b - a, 1.0);
  if (d > 0.5) d -= 1.0;
  if (d <= -0.5) d += 1.0;
  return d;
}

double background_hue(const Tensor& chw, const std::vector<InstanceBox>& boxes) {
  const int h = chw.dim(1), w = chw.dim(2);
  std::vector<uint8_t> masked(static_cast<size_t>(h) * w, 0);
  for (const InstanceBox& b : boxes)
    for (int y = std::max(0, b.y); y < std::min(h, b.y + b.h); ++y)
      for (int x = std::max(0, b.x); x < std::min(w, b.x + b.w); ++x)
        masked[static_cast<size_t>(y) * w + x] = 1;
  std::vector<double> hues;
  hues.reserve(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!masked[static_cast<size_t>(y) * w + x])
        hues.push_back(pixel_hue(chw.at(0, y, x), chw.at(1, y, x), chw.at(2, y, x)));
  if (hues.empty()) return 0.0;
  return circular_hue_stats(hues).mean;
}

}  // namespace instrans
