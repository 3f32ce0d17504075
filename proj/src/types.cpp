#include "instrans/types.hpp"

#include <cmath>

#include "instrans/errors.hpp"

namespace instrans {

std::string category_name(Category c) {
  switch (c) {
    case Category::car: return "car";
    case Category::person: return "person";
    case Category::traffic_sign: return "traffic_sign";
    case Category::synthetic: return "synthetic";
  }
  return "synthetic";
}

Category category_from_name(const std::string& name) {
  if (name == "car") return Category::car;
  if (name == "person") return Category::person;
  if (name == "traffic_sign") return Category::traffic_sign;
  if (name == "synthetic") return Category::synthetic;
  throw DataError("unknown box category '" + name + "'");
}

int coarseness(Granularity g) {
  switch (g) {
    case Granularity::global: return 0;
    case Granularity::background: return 1;
    case Granularity::instance: return 2;
    case Granularity::half_scale: return 0;
  }
  return 0;
}

std::string granularity_name(Granularity g) {
  switch (g) {
    case Granularity::global: return "global";
    case Granularity::background: return "background";
    case Granularity::instance: return "instance";
    case Granularity::half_scale: return "half_scale";
  }
  return "global";
}

Granularity granularity_from_name(const std::string& name) {
  if (name == "global") return Granularity::global;
  if (name == "background") return Granularity::background;
  if (name == "instance") return Granularity::instance;
  if (name == "half_scale") return Granularity::half_scale;
  throw DataError("unknown granularity '" + name + "'");
}

std::vector<std::string> validate_sample(const ImageSample& sample) {
  std::vector<std::string> violations;
  if (sample.pixels.rank() != 3 || sample.pixels.dim(0) != 3) {
    violations.push_back("pixels must be a 3-channel CHW array");
    return violations;
  }
  const int h = sample.height();
  const int w = sample.width();
  if (h < 1 || w < 1) violations.push_back("pixels have empty spatial extent");

  bool out_of_range = false;
  bool non_finite = false;
  for (int64_t i = 0; i < sample.pixels.numel(); ++i) {
    const double v = sample.pixels[i];
    if (!std::isfinite(v))
      non_finite = true;
    else if (v < -1.0 || v > 1.0)
      out_of_range = true;
  }
  if (non_finite) violations.push_back("pixels contain non-finite values");
  if (out_of_range) violations.push_back("pixels out of range");

  if (sample.domain.index != 0 && sample.domain.index != 1)
    violations.push_back("domain index out of range");

  for (size_t i = 0; i < sample.boxes.size(); ++i) {
    const InstanceBox& b = sample.boxes[i];
    const std::string tag = "box " + std::to_string(i);
    if (b.w < 1 || b.h < 1) violations.push_back(tag + " has non-positive size");
    if (b.x < 0 || b.y < 0 || b.x + b.w > w || b.y + b.h > h)
      violations.push_back(tag + " exceeds image bounds");
  }
  return violations;
}

}  // namespace instrans
