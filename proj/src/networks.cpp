#include "instrans/networks.hpp"

#include <cmath>
#include <unordered_set>

#include "instrans/errors.hpp"
#include "instrans/rng.hpp"

namespace instrans {

using ad::Var;

void validate_config(const NetworkConfig& cfg) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(cfg.base_channels, "base_channels");
  positive(cfg.content_downsamples, "content_downsamples");
  positive(cfg.n_residual_blocks, "n_residual_blocks");
  positive(cfg.style_dim, "style_dim");
  positive(cfg.mlp_hidden, "mlp_hidden");
  positive(cfg.discriminator_scales, "discriminator_scales");
  positive(cfg.discriminator_layers, "discriminator_layers");
}

namespace {

ConvLayer make_conv(int ic, int oc, int k, int stride, int pad, Rng& rng, const std::string& name) {
  const double std = std::sqrt(2.0 / (ic * k * k));
  ConvLayer l;
  l.w = ad::parameter(Tensor::randn({oc, ic, k, k}, rng, std), name + ".w");
  l.b = ad::parameter(Tensor::zeros({oc}), name + ".b");
  l.stride = stride;
  l.pad = pad;
  return l;
}

LinearLayer make_linear(int in, int out, Rng& rng, const std::string& name) {
  const double std = std::sqrt(2.0 / in);
  LinearLayer l;
  l.w = ad::parameter(Tensor::randn({out, in}, rng, std), name + ".w");
  l.b = ad::parameter(Tensor::zeros({out}), name + ".b");
  return l;
}

Var conv(const ConvLayer& l, const Var& x) { return ad::conv2d(x, l.w, l.b, l.stride, l.pad); }

ContentEncoder make_content_encoder(const NetworkConfig& cfg, Rng& rng, const std::string& name) {
  ContentEncoder e;
  e.stem = make_conv(3, cfg.base_channels, 7, 1, 3, rng, name + ".stem");
  int c = cfg.base_channels;
  for (int i = 0; i < cfg.content_downsamples; ++i) {
    e.downs.push_back(make_conv(c, 2 * c, 4, 2, 1, rng, name + ".down" + std::to_string(i)));
    c *= 2;
  }
  for (int i = 0; i < cfg.n_residual_blocks; ++i) {
    const std::string rn = name + ".res" + std::to_string(i);
    e.res.push_back({make_conv(c, c, 3, 1, 1, rng, rn + ".c1"), make_conv(c, c, 3, 1, 1, rng, rn + ".c2")});
  }
  return e;
}

StyleEncoder make_style_encoder(const NetworkConfig& cfg, Rng& rng, const std::string& name) {
  StyleEncoder e;
  e.stem = make_conv(3, cfg.base_channels, 7, 1, 3, rng, name + ".stem");
  int c = cfg.base_channels;
  for (int i = 0; i < cfg.content_downsamples; ++i) {
    e.downs.push_back(make_conv(c, 2 * c, 4, 2, 1, rng, name + ".down" + std::to_string(i)));
    c *= 2;
  }
  e.fc = make_linear(c, cfg.style_dim, rng, name + ".fc");
  return e;
}

Decoder make_decoder(const NetworkConfig& cfg, Rng& rng, const std::string& name) {
  Decoder d;
  int c = cfg.base_channels << cfg.content_downsamples;
  d.mlp1 = make_linear(cfg.style_dim, cfg.mlp_hidden, rng, name + ".mlp1");
  d.mlp2 = make_linear(cfg.mlp_hidden, cfg.n_residual_blocks * 4 * c, rng, name + ".mlp2");
  for (int i = 0; i < cfg.n_residual_blocks; ++i) {
    const std::string rn = name + ".res" + std::to_string(i);
    d.res.push_back({make_conv(c, c, 3, 1, 1, rng, rn + ".c1"), make_conv(c, c, 3, 1, 1, rng, rn + ".c2")});
  }
  for (int i = 0; i < cfg.content_downsamples; ++i) {
    d.ups.push_back(make_conv(c, c / 2, 3, 1, 1, rng, name + ".up" + std::to_string(i)));
    c /= 2;
  }
  d.out = make_conv(c, 3, 7, 1, 3, rng, name + ".out");
  return d;
}

Discriminator make_discriminator(const NetworkConfig& cfg, Rng& rng, const std::string& name) {
  Discriminator d;
  for (int s = 0; s < cfg.discriminator_scales; ++s) {
    Discriminator::ScaleNet net;
    int c = 3;
    int oc = cfg.base_channels;
    for (int i = 0; i < cfg.discriminator_layers; ++i) {
      net.convs.push_back(
          make_conv(c, oc, 4, 2, 1, rng, name + ".s" + std::to_string(s) + ".c" + std::to_string(i)));
      c = oc;
      oc *= 2;
    }
    net.logit = make_conv(c, 1, 1, 1, 0, rng, name + ".s" + std::to_string(s) + ".logit");
    d.scales.push_back(std::move(net));
  }
  return d;
}

void collect_conv(const ConvLayer& l, std::vector<Var>& out) {
  out.push_back(l.w);
  out.push_back(l.b);
}

void collect_linear(const LinearLayer& l, std::vector<Var>& out) {
  out.push_back(l.w);
  out.push_back(l.b);
}

void collect_content(const ContentEncoder& e, std::vector<Var>& out) {
  collect_conv(e.stem, out);
  for (const auto& l : e.downs) collect_conv(l, out);
  for (const auto& r : e.res) {
    collect_conv(r.c1, out);
    collect_conv(r.c2, out);
  }
}

void collect_style(const StyleEncoder& e, std::vector<Var>& out) {
  collect_conv(e.stem, out);
  for (const auto& l : e.downs) collect_conv(l, out);
  collect_linear(e.fc, out);
}

void collect_decoder(const Decoder& d, std::vector<Var>& out) {
  collect_linear(d.mlp1, out);
  collect_linear(d.mlp2, out);
  for (const auto& r : d.res) {
    collect_conv(r.c1, out);
    collect_conv(r.c2, out);
  }
  for (const auto& l : d.ups) collect_conv(l, out);
  collect_conv(d.out, out);
}

void collect_disc(const Discriminator& d, std::vector<Var>& out) {
  for (const auto& s : d.scales) {
    for (const auto& l : s.convs) collect_conv(l, out);
    collect_conv(s.logit, out);
  }
}

std::vector<Var> dedupe(std::vector<Var> vars) {
  std::vector<Var> out;
  std::unordered_set<const ad::Node*> seen;
  for (auto& v : vars)
    if (seen.insert(v.get()).second) out.push_back(std::move(v));
  return out;
}

void check_encode_input(const NetworkConfig& cfg, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("encoder expects a 3-channel CHW image");
  const int div = 1 << cfg.content_downsamples;
  if (image.dim(1) < div || image.dim(2) < div)
    throw ShapeError("image " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(1)) +
                     " too small for " + std::to_string(cfg.content_downsamples) + " downsamplings");
  if (image.dim(1) % div != 0 || image.dim(2) % div != 0)
    throw ShapeError("image dims must be divisible by " + std::to_string(div));
}

}  // namespace

TranslationModel TranslationModel::create(const NetworkConfig& cfg, uint64_t seed) {
  validate_config(cfg);
  TranslationModel m;
  m.config = cfg;
  for (int d = 0; d < 2; ++d) {
    const std::string dn = "d" + std::to_string(d);
    Rng rng = make_rng(seed, {0x4E7u, static_cast<uint64_t>(d)});
    m.content_enc[d] = make_content_encoder(cfg, rng, dn + ".content");
    m.style_enc[d] = make_style_encoder(cfg, rng, dn + ".style");
    m.dec[d] = make_decoder(cfg, rng, dn + ".dec");
    m.disc_global[d] = make_discriminator(cfg, rng, dn + ".disc_g");
    m.disc_instance[d] = cfg.weight_sharing == WeightSharing::shared_D
                             ? m.disc_global[d]
                             : make_discriminator(cfg, rng, dn + ".disc_o");
  }
  return m;
}

std::vector<Var> TranslationModel::generator_parameters() const {
  std::vector<Var> out;
  for (int d = 0; d < 2; ++d) {
    collect_content(content_enc[d], out);
    collect_style(style_enc[d], out);
    collect_decoder(dec[d], out);
  }
  return dedupe(std::move(out));
}

std::vector<Var> TranslationModel::discriminator_parameters() const {
  std::vector<Var> out;
  for (int d = 0; d < 2; ++d) {
    collect_disc(disc_global[d], out);
    collect_disc(disc_instance[d], out);
  }
  return dedupe(std::move(out));
}

std::vector<Var> TranslationModel::parameters() const {
  auto out = generator_parameters();
  auto disc = discriminator_parameters();
  out.insert(out.end(), disc.begin(), disc.end());
  return dedupe(std::move(out));
}

int64_t TranslationModel::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p->value.numel();
  return n;
}

Var encode_content(const TranslationModel& model, const Var& image, int domain) {
  check_encode_input(model.config, image->value);
  const ContentEncoder& e = model.content_enc[static_cast<size_t>(domain)];
  Var h = ad::relu(ad::instance_norm(conv(e.stem, image)));
  for (const auto& l : e.downs) h = ad::relu(ad::instance_norm(conv(l, h)));
  for (const auto& r : e.res) {
    Var t = ad::relu(ad::instance_norm(conv(r.c1, h)));
    t = ad::instance_norm(conv(r.c2, t));
    h = ad::add(h, t);
  }
  return h;
}

Var encode_style(const TranslationModel& model, const Var& image, int domain) {
  check_encode_input(model.config, image->value);
  const StyleEncoder& e = model.style_enc[static_cast<size_t>(domain)];
  Var h = ad::relu(conv(e.stem, image));
  for (const auto& l : e.downs) h = ad::relu(conv(l, h));
  return ad::linear(ad::global_avg_pool(h), e.fc.w, e.fc.b);
}

Var decode_vars(const TranslationModel& model, const Var& content, const Var& style, int domain) {
  const NetworkConfig& cfg = model.config;
  const Decoder& d = model.dec[static_cast<size_t>(domain)];
  const int c = cfg.base_channels << cfg.content_downsamples;
  if (content->value.rank() != 3 || content->value.dim(0) != c)
    throw ShapeError("decoder expects content with " + std::to_string(c) + " channels, got " +
                     shape_str(content->value.shape()));
  if (style->value.numel() != cfg.style_dim)
    throw ShapeError("decoder expects a style vector of dimension " + std::to_string(cfg.style_dim));

  Var params = ad::linear(ad::relu(ad::linear(style, d.mlp1.w, d.mlp1.b)), d.mlp2.w, d.mlp2.b);
  Var h = content;
  for (size_t i = 0; i < d.res.size(); ++i) {
    const int base = static_cast<int>(i) * 4 * c;
    // raw std offset by 0.5 before softplus so init sits near scale 1
    auto stdv = [&](int off) {
      return ad::softplus(ad::add_scalar(ad::slice1d(params, base + off, c), 0.5));
    };
    Var t = conv(d.res[i].c1, h);
    t = ad::relu(ad::adain(t, ad::slice1d(params, base, c), stdv(c)));
    t = conv(d.res[i].c2, t);
    t = ad::adain(t, ad::slice1d(params, base + 2 * c, c), stdv(3 * c));
    h = ad::add(h, t);
  }
  for (const auto& l : d.ups) h = ad::relu(conv(l, ad::upsample_nearest2(h)));
  return ad::vtanh(conv(d.out, h));
}

std::vector<Var> discriminate_vars(const TranslationModel& model, const Var& image, int domain,
                                   Granularity granularity, bool frozen_params) {
  const NetworkConfig& cfg = model.config;
  if (image->value.rank() != 3 || image->value.dim(0) != 3)
    throw ShapeError("discriminator expects a 3-channel CHW image");
  const int need = 1 << (cfg.discriminator_scales - 1 + cfg.discriminator_layers);
  if (image->value.dim(1) < need || image->value.dim(2) < need)
    throw ShapeError("image " + std::to_string(image->value.dim(2)) + "x" + std::to_string(image->value.dim(1)) +
                     " too small for " + std::to_string(cfg.discriminator_scales) + "-scale discriminator");

  const Discriminator& disc = granularity == Granularity::instance
                                  ? model.disc_instance[static_cast<size_t>(domain)]
                                  : model.disc_global[static_cast<size_t>(domain)];
  auto apply = [frozen_params](const ConvLayer& l, const Var& x) {
    return frozen_params ? ad::conv2d(x, ad::detach(l.w), ad::detach(l.b), l.stride, l.pad) : conv(l, x);
  };
  std::vector<Var> logits;
  Var x = image;
  for (const auto& net : disc.scales) {
    Var h = x;
    for (const auto& l : net.convs) h = ad::lrelu(apply(l, h));
    logits.push_back(apply(net.logit, h));
    x = ad::avgpool2(x);
  }
  return logits;
}

std::pair<ContentCode, StyleCode> encode(const TranslationModel& model, const Tensor& image, const DomainId& domain,
                                         Granularity granularity) {
  Var c = encode_content(model, ad::constant(image), domain.index);
  Var s = encode_style(model, ad::constant(image), domain.index);
  ContentCode cc{c->value, granularity, domain};
  StyleCode sc{s->value, granularity, domain};
  if (!cc.features.all_finite() || !sc.vector.all_finite()) throw NumericError("encoder produced non-finite codes");
  return {std::move(cc), std::move(sc)};
}

Tensor decode(const TranslationModel& model, const ContentCode& content, const StyleCode& style,
              const DomainId& domain) {
  Var img = decode_vars(model, ad::constant(content.features), ad::constant(style.vector), domain.index);
  if (!img->value.all_finite()) throw NumericError("decoder produced non-finite pixels");
  return img->value;
}

std::vector<Tensor> discriminate(const TranslationModel& model, const Tensor& image, const DomainId& domain,
                                 Granularity granularity) {
  auto logits = discriminate_vars(model, ad::constant(image), domain.index, granularity);
  std::vector<Tensor> out;
  out.reserve(logits.size());
  for (auto& l : logits) out.push_back(l->value);
  return out;
}

std::vector<double> save_parameters(const TranslationModel& model) {
  std::vector<double> blob;
  for (const auto& p : model.parameters())
    blob.insert(blob.end(), p->value.data(), p->value.data() + p->value.numel());
  return blob;
}

void load_parameters(TranslationModel& model, const std::vector<double>& blob) {
  auto params = model.parameters();
  int64_t total = 0;
  for (const auto& p : params) total += p->value.numel();
  if (static_cast<int64_t>(blob.size()) != total)
    throw DataError("parameter blob holds " + std::to_string(blob.size()) + " values, model needs " +
                    std::to_string(total));
  int64_t off = 0;
  for (auto& p : params) {
    std::copy(blob.begin() + off, blob.begin() + off + p->value.numel(), p->value.data());
    off += p->value.numel();
  }
}

}  // namespace instrans
