#pragma once

#include <filesystem>
#include <vector>

#include "instrans/tensor.hpp"
#include "instrans/types.hpp"

namespace instrans {

// 8-bit RGB file <-> CHW [-1,1] float. Files go through a [0,255] affine map
// with round-half-even quantization.
Tensor load_image_chw(const std::filesystem::path& path);
void save_image_chw(const std::filesystem::path& path, const Tensor& chw);

std::vector<uint8_t> quantize_u8(const Tensor& chw);

// Half-pixel-centered bilinear sampling; identity when sizes are unchanged.
Tensor bilinear_resize_chw(const Tensor& src, int out_h, int out_w);

// Hue in [0,1) from RGB in [-1,1]; gray pixels report hue 0.
double pixel_hue(double r, double g, double b);

struct CircularStats {
  double mean = 0.0;  // [0,1)
  double stddev = 0.0;
  double resultant = 0.0;
};

// Directional statistics over hue values (unit = one full turn).
CircularStats circular_hue_stats(const std::vector<double>& hues);

// Signed shortest arc from a to b in turns, in (-0.5, 0.5].
double circular_diff(double a, double b);

// Mean hue over pixels outside every box (whole image when boxes is empty).
double background_hue(const Tensor& chw, const std::vector<InstanceBox>& boxes);

}  // namespace instrans
