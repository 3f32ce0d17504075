#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "instrans/tensor.hpp"

namespace instrans {

// One of the two active translation domains. index is 0 or 1.
struct DomainId {
  std::string name;
  int index = 0;
  bool operator==(const DomainId& o) const { return name == o.name && index == o.index; }
};

enum class Category { car, person, traffic_sign, synthetic };

std::string category_name(Category c);
Category category_from_name(const std::string& name);

struct InstanceBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  Category category = Category::synthetic;
  int64_t area() const { return static_cast<int64_t>(w) * h; }
};

// Pixels are CHW float in [-1, 1], 3 channels.
struct ImageSample {
  Tensor pixels;
  DomainId domain;
  std::vector<InstanceBox> boxes;
  std::string id;

  int channels() const { return pixels.rank() == 3 ? pixels.dim(0) : 0; }
  int height() const { return pixels.rank() == 3 ? pixels.dim(1) : 0; }
  int width() const { return pixels.rank() == 3 ? pixels.dim(2) : 0; }
};

// Coarseness order: global < background < instance. half_scale ties with global
// for association purposes and only appears in multi-scale pairings.
enum class Granularity { global = 0, background = 1, instance = 2, half_scale = 3 };

int coarseness(Granularity g);
std::string granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

struct ContentCode {
  Tensor features;  // channels x h x w
  Granularity granularity = Granularity::global;
  DomainId domain;
};

struct StyleCode {
  Tensor vector;  // style_dim
  Granularity granularity = Granularity::global;
  DomainId domain;
};

struct BankKey {
  int domain = 0;
  Granularity granularity = Granularity::global;
  std::string source_id;
  auto operator<=>(const BankKey&) const = default;
};

struct StyleBank {
  std::map<BankKey, StyleCode> entries;
  size_t size() const { return entries.size(); }
};

// Pure invariant check; never throws. Empty result iff the sample is well formed.
std::vector<std::string> validate_sample(const ImageSample& sample);

}  // namespace instrans
