#pragma once

#include <array>
#include <utility>
#include <vector>

#include "instrans/autograd.hpp"
#include "instrans/types.hpp"

namespace instrans {

enum class WeightSharing { shared_D, separate_D };

struct NetworkConfig {
  int base_channels = 16;
  int content_downsamples = 2;
  int n_residual_blocks = 2;
  int style_dim = 8;
  int mlp_hidden = 32;
  int discriminator_scales = 2;
  int discriminator_layers = 3;
  WeightSharing weight_sharing = WeightSharing::shared_D;
};

// Throws ConfigError when a count is out of range.
void validate_config(const NetworkConfig& cfg);

struct ConvLayer {
  ad::Var w;  // OC x IC x KH x KW
  ad::Var b;  // OC
  int stride = 1;
  int pad = 0;
};

struct LinearLayer {
  ad::Var w;  // out x in
  ad::Var b;  // out
};

struct ResBlock {
  ConvLayer c1, c2;
};

// conv7 + IN + ReLU, then stride-2 doublings with IN, then IN residual blocks.
struct ContentEncoder {
  ConvLayer stem;
  std::vector<ConvLayer> downs;
  std::vector<ResBlock> res;
};

// conv7 + ReLU, stride-2 doublings (no normalization — statistics carry the
// style), global average pool, fully-connected to style_dim.
struct StyleEncoder {
  ConvLayer stem;
  std::vector<ConvLayer> downs;
  LinearLayer fc;
};

// Style passes through a 2-layer MLP that emits the AdaIN (mean, std) params
// of the residual blocks; content then upsamples back to image size.
struct Decoder {
  LinearLayer mlp1, mlp2;
  std::vector<ResBlock> res;
  std::vector<ConvLayer> ups;
  ConvLayer out;
};

// Multi-scale patch discriminator; scale k sees the input average-pooled k
// times. Each scale owns an independent conv stack ending in a 1x1 logit map.
struct Discriminator {
  struct ScaleNet {
    std::vector<ConvLayer> convs;
    ConvLayer logit;
  };
  std::vector<ScaleNet> scales;
};

struct TranslationModel {
  NetworkConfig config;
  std::array<ContentEncoder, 2> content_enc;
  std::array<StyleEncoder, 2> style_enc;
  std::array<Decoder, 2> dec;
  std::array<Discriminator, 2> disc_global;
  std::array<Discriminator, 2> disc_instance;  // aliases disc_global under shared_D

  static TranslationModel create(const NetworkConfig& cfg, uint64_t seed);

  // Deduplicated parameter lists in a stable serialization order.
  std::vector<ad::Var> generator_parameters() const;
  std::vector<ad::Var> discriminator_parameters() const;
  std::vector<ad::Var> parameters() const;
  int64_t parameter_count() const;
};

// Graph-building forwards. Inputs are CHW image Vars in [-1,1].
ad::Var encode_content(const TranslationModel& model, const ad::Var& image, int domain);
ad::Var encode_style(const TranslationModel& model, const ad::Var& image, int domain);
ad::Var decode_vars(const TranslationModel& model, const ad::Var& content, const ad::Var& style, int domain);
// frozen_params treats the discriminator weights as constants so the returned
// logits carry gradients only toward the image.
std::vector<ad::Var> discriminate_vars(const TranslationModel& model, const ad::Var& image, int domain,
                                       Granularity granularity, bool frozen_params = false);

// Value-level wrappers carrying granularity/domain tags.
std::pair<ContentCode, StyleCode> encode(const TranslationModel& model, const Tensor& image, const DomainId& domain,
                                         Granularity granularity);
Tensor decode(const TranslationModel& model, const ContentCode& content, const StyleCode& style,
              const DomainId& domain);
std::vector<Tensor> discriminate(const TranslationModel& model, const Tensor& image, const DomainId& domain,
                                 Granularity granularity);

// Flat f64 snapshot of every distinct parameter, in parameters() order.
std::vector<double> save_parameters(const TranslationModel& model);
void load_parameters(TranslationModel& model, const std::vector<double>& blob);

}  // namespace instrans
