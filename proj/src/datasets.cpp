#include "instrans/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "instrans/errors.hpp"

namespace instrans {

using nlohmann::json;

const ManifestImage& DatasetManifest::find(const std::string& id) const {
  for (const auto& im : images)
    if (im.id == id) return im;
  throw DataError("manifest has no image with id '" + id + "'");
}

int64_t DatasetManifest::total_boxes() const {
  int64_t n = 0;
  for (const auto& im : images) n += static_cast<int64_t>(im.boxes.size());
  return n;
}

namespace {

InstanceBox parse_box(const json& ann, size_t index) {
  const std::string tag = "annotation " + std::to_string(index);
  if (!ann.contains("bbox") || !ann["bbox"].is_array() || ann["bbox"].size() != 4)
    throw DataError(tag + ": bbox must be [x,y,w,h]");
  InstanceBox b;
  b.x = ann["bbox"][0].get<int>();
  b.y = ann["bbox"][1].get<int>();
  b.w = ann["bbox"][2].get<int>();
  b.h = ann["bbox"][3].get<int>();
  if (b.w < 1 || b.h < 1) throw DataError(tag + ": box has non-positive width or height");
  if (b.x < 0 || b.y < 0) throw DataError(tag + ": box has negative origin");
  b.category = ann.contains("category") ? category_from_name(ann["category"].get<std::string>())
                                        : Category::synthetic;
  return b;
}

InstanceBox scale_box(const InstanceBox& b, double sx, double sy, int out_w, int out_h) {
  InstanceBox r = b;
  r.x = static_cast<int>(std::llround(b.x * sx));
  r.y = static_cast<int>(std::llround(b.y * sy));
  r.w = std::max<int>(1, static_cast<int>(std::llround(b.w * sx)));
  r.h = std::max<int>(1, static_cast<int>(std::llround(b.h * sy)));
  r.x = std::clamp(r.x, 0, out_w - 1);
  r.y = std::clamp(r.y, 0, out_h - 1);
  r.w = std::min(r.w, out_w - r.x);
  r.h = std::min(r.h, out_h - r.y);
  return r;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }

  DatasetManifest m;
  m.annotation_file = path;
  m.root = path.parent_path();
  if (doc.contains("split_ratio")) m.split_ratio = doc["split_ratio"].get<double>();
  if (doc.contains("seed")) m.seed = doc["seed"].get<uint64_t>();
  if (!(m.split_ratio > 0.0 && m.split_ratio < 1.0))
    throw DataError("manifest '" + path.string() + "': split_ratio must be in (0,1)");
  if (!doc.contains("images") || !doc["images"].is_array())
    throw DataError("manifest '" + path.string() + "': missing images array");

  for (size_t i = 0; i < doc["images"].size(); ++i) {
    const json& im = doc["images"][i];
    const std::string tag = "image " + std::to_string(i);
    ManifestImage mi;
    for (const char* field : {"id", "file", "width", "height", "domain"})
      if (!im.contains(field)) throw DataError(tag + ": missing field '" + std::string(field) + "'");
    mi.id = im["id"].get<std::string>();
    mi.file = im["file"].get<std::string>();
    mi.width = im["width"].get<int>();
    mi.height = im["height"].get<int>();
    mi.domain = im["domain"].get<std::string>();
    if (mi.width < 1 || mi.height < 1) throw DataError(tag + ": non-positive dimensions");
    const auto full = m.root / mi.file;
    if (!std::filesystem::exists(full))
      throw DataError("manifest references missing image file '" + full.string() + "'");
    for (const auto& prev : m.images)
      if (prev.id == mi.id) throw DataError(tag + ": duplicate image id '" + mi.id + "'");
    if (std::find(m.domain_names.begin(), m.domain_names.end(), mi.domain) == m.domain_names.end())
      m.domain_names.push_back(mi.domain);
    m.images.push_back(std::move(mi));
  }

  if (doc.contains("annotations")) {
    if (!doc["annotations"].is_array()) throw DataError("annotations must be an array");
    for (size_t i = 0; i < doc["annotations"].size(); ++i) {
      const json& ann = doc["annotations"][i];
      const std::string tag = "annotation " + std::to_string(i);
      if (!ann.contains("image_id")) throw DataError(tag + ": missing image_id");
      const std::string image_id = ann["image_id"].get<std::string>();
      ManifestImage* target = nullptr;
      for (auto& im : m.images)
        if (im.id == image_id) target = &im;
      if (!target) throw DataError(tag + ": references unknown image '" + image_id + "'");
      InstanceBox b = parse_box(ann, i);
      if (b.x + b.w > target->width || b.y + b.h > target->height)
        throw DataError(tag + ": box exceeds image bounds of '" + image_id + "'");
      target->boxes.push_back(b);
    }
  }
  return m;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split(const DatasetManifest& manifest, uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(manifest.images.size());
  for (const auto& im : manifest.images) ids.push_back(im.id);
  Rng rng = make_rng(seed, {0x5B11Cull});
  for (size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  const auto n_train = static_cast<size_t>(
      std::llround(manifest.split_ratio * static_cast<double>(ids.size())));
  std::vector<std::string> train(ids.begin(), ids.begin() + std::min(n_train, ids.size()));
  std::vector<std::string> test(ids.begin() + std::min(n_train, ids.size()), ids.end());
  return {std::move(train), std::move(test)};
}

ImageSample load_sample(const DatasetManifest& manifest, const std::string& id, int domain_index) {
  const ManifestImage& mi = manifest.find(id);
  ImageSample s;
  s.id = mi.id;
  s.domain = DomainId{mi.domain, domain_index};
  s.boxes = mi.boxes;
  s.pixels = load_image_chw(manifest.root / mi.file);
  if (s.width() != mi.width || s.height() != mi.height)
    throw DataError("image '" + mi.file + "' is " + std::to_string(s.width()) + "x" + std::to_string(s.height()) +
                    " but manifest declares " + std::to_string(mi.width) + "x" + std::to_string(mi.height));
  return s;
}

std::vector<ImageSample> crop_instances(const ImageSample& sample, int out_size) {
  if (out_size < 1) throw ShapeError("crop_instances: out_size must be >= 1");
  std::vector<ImageSample> crops;
  crops.reserve(sample.boxes.size());
  for (size_t i = 0; i < sample.boxes.size(); ++i) {
    const InstanceBox& b = sample.boxes[i];
    Tensor region({3, b.h, b.w});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) region.at(c, y, x) = sample.pixels.at(c, b.y + y, b.x + x);
    ImageSample crop;
    crop.pixels = bilinear_resize_chw(region, out_size, out_size);
    crop.domain = sample.domain;
    crop.id = sample.id + "#" + std::to_string(i);
    crops.push_back(std::move(crop));
  }
  return crops;
}

ImageSample resize_short_side(const ImageSample& sample, int target) {
  if (target < 1) throw ShapeError("resize_short_side: target must be >= 1");
  const int w = sample.width(), h = sample.height();
  const double scale = static_cast<double>(target) / std::min(w, h);
  int out_w, out_h;
  if (h <= w) {
    out_h = target;
    out_w = std::max<int>(1, static_cast<int>(std::llround(w * scale)));
  } else {
    out_w = target;
    out_h = std::max<int>(1, static_cast<int>(std::llround(h * scale)));
  }
  ImageSample out;
  out.id = sample.id;
  out.domain = sample.domain;
  out.pixels = bilinear_resize_chw(sample.pixels, out_h, out_w);
  const double sx = static_cast<double>(out_w) / w;
  const double sy = static_cast<double>(out_h) / h;
  for (const InstanceBox& b : sample.boxes) out.boxes.push_back(scale_box(b, sx, sy, out_w, out_h));
  return out;
}

ImageSample random_crop(const ImageSample& sample, int size, Rng& rng) {
  const int w = sample.width(), h = sample.height();
  if (w < size || h < size)
    throw ShapeError("random_crop: image " + std::to_string(w) + "x" + std::to_string(h) +
                     " smaller than crop size " + std::to_string(size));
  const int x0 = static_cast<int>(rng.uniform_int(0, w - size));
  const int y0 = static_cast<int>(rng.uniform_int(0, h - size));
  ImageSample out;
  out.id = sample.id;
  out.domain = sample.domain;
  Tensor px({3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) px.at(c, y, x) = sample.pixels.at(c, y0 + y, x0 + x);
  out.pixels = std::move(px);
  for (const InstanceBox& b : sample.boxes) {
    const int ix0 = std::max(b.x, x0), iy0 = std::max(b.y, y0);
    const int ix1 = std::min(b.x + b.w, x0 + size), iy1 = std::min(b.y + b.h, y0 + size);
    if (ix1 <= ix0 || iy1 <= iy0) continue;
    const int64_t inter = static_cast<int64_t>(ix1 - ix0) * (iy1 - iy0);
    if (4 * inter < b.area()) continue;  // < 25% of the original box survives
    InstanceBox nb = b;
    nb.x = ix0 - x0;
    nb.y = iy0 - y0;
    nb.w = ix1 - ix0;
    nb.h = iy1 - iy0;
    out.boxes.push_back(nb);
  }
  return out;
}

ImageSample half_scale(const ImageSample& sample) {
  const int out_w = std::max(1, sample.width() / 2);
  const int out_h = std::max(1, sample.height() / 2);
  ImageSample out;
  out.id = sample.id;
  out.domain = sample.domain;
  out.pixels = bilinear_resize_chw(sample.pixels, out_h, out_w);
  const double sx = static_cast<double>(out_w) / sample.width();
  const double sy = static_cast<double>(out_h) / sample.height();
  for (const InstanceBox& b : sample.boxes) out.boxes.push_back(scale_box(b, sx, sy, out_w, out_h));
  return out;
}

ImageSample background_masked(const ImageSample& sample) {
  ImageSample out = sample;
  for (const InstanceBox& b : sample.boxes)
    for (int c = 0; c < 3; ++c)
      for (int y = b.y; y < b.y + b.h; ++y)
        for (int x = b.x; x < b.x + b.w; ++x) out.pixels.at(c, y, x) = 0.0;
  out.boxes.clear();
  return out;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    case 5: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

namespace {

void render_scene(Tensor& px, const std::vector<InstanceBox>& boxes, const DomainPalette& pal, Rng& rng) {
  const int n = px.dim(1);
  const double hue = rng.uniform(pal.hue_lo, pal.hue_hi);
  const double sat = rng.uniform(0.45, 0.65);
  const double v_top = rng.uniform(0.45, 0.55);
  const double v_bot = rng.uniform(0.62, 0.75);
  for (int y = 0; y < n; ++y) {
    const double v = v_top + (v_bot - v_top) * y / std::max(1, n - 1);
    for (int x = 0; x < n; ++x) {
      double r, g, b;
      hsv_to_rgb(hue, sat, v, r, g, b);
      px.at(0, y, x) = 2.0 * r - 1.0;
      px.at(1, y, x) = 2.0 * g - 1.0;
      px.at(2, y, x) = 2.0 * b - 1.0;
    }
  }
  for (const InstanceBox& box : boxes) {
    const double bright = rng.uniform(pal.object_brightness_lo, pal.object_brightness_hi);
    const double obj_hue = rng.uniform(0.0, 1.0);
    double r, g, b;
    hsv_to_rgb(obj_hue, 0.15, bright, r, g, b);
    for (int y = box.y; y < box.y + box.h; ++y)
      for (int x = box.x; x < box.x + box.w; ++x) {
        px.at(0, y, x) = 2.0 * r - 1.0;
        px.at(1, y, x) = 2.0 * g - 1.0;
        px.at(2, y, x) = 2.0 * b - 1.0;
      }
  }
  // light deterministic texture so scenes are not piecewise constant
  for (int64_t i = 0; i < px.numel(); ++i)
    px[i] = std::clamp(px[i] + rng.uniform(-0.02, 0.02), -1.0, 1.0);
}

std::vector<InstanceBox> sample_boxes(int image_size, int n_lo, int n_hi, Rng& rng) {
  const int n = static_cast<int>(std::max<int64_t>(1, rng.uniform_int(n_lo, n_hi)));
  std::vector<InstanceBox> boxes;
  for (int i = 0; i < n; ++i) {
    InstanceBox b;
    b.w = static_cast<int>(rng.uniform_int(image_size / 8, image_size / 3));
    b.h = static_cast<int>(rng.uniform_int(image_size / 8, image_size / 3));
    b.x = static_cast<int>(rng.uniform_int(0, image_size - b.w));
    b.y = static_cast<int>(rng.uniform_int(0, image_size - b.h));
    b.category = Category::synthetic;
    boxes.push_back(b);
  }
  return boxes;
}

DatasetManifest write_domain_corpus(const SyntheticSceneSpec& spec, const std::filesystem::path& out_dir,
                                    int domain_index) {
  const std::string& name = spec.domain_names[static_cast<size_t>(domain_index)];
  const DomainPalette& pal = domain_index == 0 ? spec.palette_x : spec.palette_y;
  std::filesystem::create_directories(out_dir / name);

  json doc;
  doc["split_ratio"] = 0.85;
  doc["seed"] = spec.seed;
  doc["images"] = json::array();
  doc["annotations"] = json::array();

  for (int i = 0; i < spec.n_images; ++i) {
    Rng geom = make_rng(spec.seed, {0x6E0ull, static_cast<uint64_t>(domain_index), static_cast<uint64_t>(i)});
    auto boxes = sample_boxes(spec.image_size, spec.n_objects_lo, spec.n_objects_hi, geom);
    Rng paint = make_rng(spec.seed, {0x9A1ull, static_cast<uint64_t>(domain_index), static_cast<uint64_t>(i)});
    Tensor px({3, spec.image_size, spec.image_size});
    render_scene(px, boxes, pal, paint);

    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    const std::string stem = std::string(buf);
    const std::string file = name + "/" + stem + ".png";
    const std::string id = name + "_" + stem;
    save_image_chw(out_dir / file, px);

    json im;
    im["id"] = id;
    im["file"] = file;
    im["width"] = spec.image_size;
    im["height"] = spec.image_size;
    im["domain"] = name;
    doc["images"].push_back(im);
    for (const InstanceBox& b : boxes) {
      json ann;
      ann["image_id"] = id;
      ann["bbox"] = {b.x, b.y, b.w, b.h};
      ann["category"] = category_name(b.category);
      doc["annotations"].push_back(ann);
    }
  }

  const auto manifest_path = out_dir / ("manifest_" + name + ".json");
  std::ofstream out(manifest_path);
  out << doc.dump(2) << "\n";
  out.close();
  return load_manifest(manifest_path);
}

}  // namespace

std::pair<DatasetManifest, DatasetManifest> generate_synthetic(const SyntheticSceneSpec& spec,
                                                               const std::filesystem::path& out_dir) {
  if (spec.image_size < 8) throw ConfigError("synthetic image_size must be >= 8");
  if (spec.n_objects_lo < 0 || spec.n_objects_hi < spec.n_objects_lo)
    throw ConfigError("synthetic n_objects range invalid");
  if (spec.n_images < 1) throw ConfigError("synthetic n_images must be >= 1");
  std::filesystem::create_directories(out_dir);
  auto mx = write_domain_corpus(spec, out_dir, 0);
  auto my = write_domain_corpus(spec, out_dir, 1);
  return {std::move(mx), std::move(my)};
}

}  // namespace instrans
