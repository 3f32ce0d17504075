#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "instrans/image.hpp"
#include "instrans/rng.hpp"
#include "instrans/types.hpp"

namespace instrans {

struct ManifestImage {
  std::string id;
  std::string file;  // relative to manifest root
  int width = 0;
  int height = 0;
  std::string domain;
  std::vector<InstanceBox> boxes;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::filesystem::path annotation_file;
  std::vector<ManifestImage> images;
  std::vector<std::string> domain_names;  // distinct, in file order
  double split_ratio = 0.85;
  uint64_t seed = 0;

  const ManifestImage& find(const std::string& id) const;
  int64_t total_boxes() const;
};

// Parses the annotation JSON and validates cross references (files exist,
// boxes inside their images). Throws DataError on any violation.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Deterministic 85/15-style partition; |train| = round(split_ratio * N).
std::pair<std::vector<std::string>, std::vector<std::string>> split(const DatasetManifest& manifest, uint64_t seed);

// Loads pixels for one manifest entry, producing a validated ImageSample.
ImageSample load_sample(const DatasetManifest& manifest, const std::string& id, int domain_index);

// One out_size x out_size crop per box, bilinear-resized, same domain label.
std::vector<ImageSample> crop_instances(const ImageSample& sample, int out_size);

ImageSample resize_short_side(const ImageSample& sample, int target);

// size x size window chosen uniformly; boxes clipped, dropped below 25% of
// their original area.
ImageSample random_crop(const ImageSample& sample, int size, Rng& rng);

ImageSample half_scale(const ImageSample& sample);

// Global image with box interiors zeroed; the background style source.
ImageSample background_masked(const ImageSample& sample);

struct DomainPalette {
  double hue_lo = 0.0, hue_hi = 0.1;
  double object_brightness_lo = 0.7, object_brightness_hi = 0.95;
};

struct SyntheticSceneSpec {
  int image_size = 64;
  int n_objects_lo = 1;
  int n_objects_hi = 2;
  int n_images = 32;  // per domain
  DomainPalette palette_x{0.02, 0.12, 0.70, 0.95};
  DomainPalette palette_y{0.52, 0.62, 0.10, 0.30};
  std::array<std::string, 2> domain_names{"warm", "cool"};
  uint64_t seed = 1;
};

// Writes two single-domain corpora (images + annotation JSON) under out_dir
// and returns their manifests. Deterministic per seed, bit-identical reruns.
std::pair<DatasetManifest, DatasetManifest> generate_synthetic(const SyntheticSceneSpec& spec,
                                                               const std::filesystem::path& out_dir);

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace instrans
