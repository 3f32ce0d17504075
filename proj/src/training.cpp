#include "instrans/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "instrans/errors.hpp"

namespace fs = std::filesystem;

namespace instrans {

namespace {

// rng stream tags
constexpr uint64_t kPlanStream = 0x91A7ull;
constexpr uint64_t kBatchStream = 0xBA7C4ull;

const ImageSample& content_image(const TrainBatch& b, const ContentRef& c) {
  const BatchItem& it = b.domains[static_cast<size_t>(c.domain)].items[static_cast<size_t>(c.item)];
  switch (c.granularity) {
    case Granularity::global: return it.full;
    case Granularity::background: return it.background;
    case Granularity::half_scale: return it.half;
    case Granularity::instance: return it.crops[static_cast<size_t>(c.crop_index)];
  }
  return it.full;
}

const ImageSample& bank_image(const TrainBatch& b, const BankKey& key) {
  for (const BatchItem& it : b.domains[static_cast<size_t>(key.domain)].items) {
    if (key.granularity == Granularity::instance) {
      for (const ImageSample& c : it.crops)
        if (c.id == key.source_id) return c;
    } else if (it.full.id == key.source_id) {
      return key.granularity == Granularity::background ? it.background : it.full;
    }
  }
  throw std::logic_error("style bank key refers outside the batch: " + key.source_id);
}

int style_domain(const StyleRef& s) { return s.source == StyleRef::Source::bank ? s.key.domain : s.domain; }

// Builds each distinct encoding once; fan-out is the graph's problem.
class PlanExecutor {
 public:
  PlanExecutor(const TranslationModel& model, const TrainBatch& batch) : model_(model), batch_(batch) {}

  ad::Var content_of(const ContentRef& ref) {
    std::string key = "c:" + std::to_string(ref.domain) + ":" + std::to_string(ref.item) + ":" +
                      granularity_name(ref.granularity) + ":" + std::to_string(ref.crop_index);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ad::Var v = encode_content(model_, ad::constant(content_image(batch_, ref).pixels), ref.domain);
    cache_.emplace(std::move(key), v);
    return v;
  }

  ad::Var style_of(const StyleRef& ref) {
    std::string key;
    switch (ref.source) {
      case StyleRef::Source::bank:
        key = "sb:" + std::to_string(ref.key.domain) + ":" + granularity_name(ref.key.granularity) + ":" +
              ref.key.source_id;
        break;
      case StyleRef::Source::scale: key = "ss:" + std::to_string(ref.domain) + ":" + std::to_string(ref.item); break;
      case StyleRef::Source::prior: key = "sp:" + std::to_string(ref.prior_seed); break;
    }
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ad::Var v;
    if (ref.source == StyleRef::Source::bank) {
      v = encode_style(model_, ad::constant(bank_image(batch_, ref.key).pixels), ref.key.domain);
    } else if (ref.source == StyleRef::Source::scale) {
      const auto& half = batch_.domains[static_cast<size_t>(ref.domain)].items[static_cast<size_t>(ref.item)].half;
      v = encode_style(model_, ad::constant(half.pixels), ref.domain);
    } else {
      Rng r(ref.prior_seed);
      v = ad::constant(Tensor::randn({model_.config.style_dim}, r));
    }
    cache_.emplace(std::move(key), v);
    return v;
  }

 private:
  const TranslationModel& model_;
  const TrainBatch& batch_;
  std::map<std::string, ad::Var> cache_;
};

std::vector<Tensor> real_images(const TrainBatch& b, int domain, bool fine) {
  std::vector<Tensor> out;
  for (const BatchItem& it : b.domains[static_cast<size_t>(domain)].items) {
    if (fine)
      for (const ImageSample& c : it.crops) out.push_back(c.pixels);
    else
      out.push_back(it.full.pixels);
  }
  return out;
}

ad::Var bucket_mean(const std::vector<ad::Var>& v) {
  if (v.empty()) return {};
  return ad::scale(ad::add_n(v), 1.0 / static_cast<double>(v.size()));
}

std::vector<double> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("checkpoint file missing: " + path.string());
  const std::streamsize bytes = in.tellg();
  if (bytes % 8 != 0) throw DataError("checkpoint file truncated: " + path.string());
  std::vector<double> blob(static_cast<size_t>(bytes) / 8);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(blob.data()), bytes);
  if (!in) throw DataError("checkpoint file unreadable: " + path.string());
  return blob;
}

void write_blob(const fs::path& path, const std::vector<double>& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * 8));
  if (!out) throw DataError("cannot write checkpoint file: " + path.string());
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.iterations <= 0) throw ConfigError("iterations must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.lr_generator < 0 || cfg.lr_discriminator < 0) throw ConfigError("learning rates must be non-negative");
  if (cfg.adam_beta1 < 0 || cfg.adam_beta1 >= 1 || cfg.adam_beta2 < 0 || cfg.adam_beta2 >= 1)
    throw ConfigError("adam moments must lie in [0, 1)");
  if (cfg.weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (cfg.image_size <= 0 || cfg.instance_size <= 0) throw ConfigError("image sizes must be positive");
  if (cfg.max_crops_per_item < 0) throw ConfigError("max_crops_per_item must be non-negative");
  const int div = 1 << cfg.network.content_downsamples;
  if (cfg.image_size % (2 * div) != 0)
    throw ConfigError("image_size must be divisible by " + std::to_string(2 * div) +
                      " so the half-scale view still fits the encoder");
  if (cfg.instance_size % div != 0)
    throw ConfigError("instance_size must be divisible by " + std::to_string(div));
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"base_channels", c.base_channels},
                     {"content_downsamples", c.content_downsamples},
                     {"n_residual_blocks", c.n_residual_blocks},
                     {"style_dim", c.style_dim},
                     {"mlp_hidden", c.mlp_hidden},
                     {"discriminator_scales", c.discriminator_scales},
                     {"discriminator_layers", c.discriminator_layers},
                     {"weight_sharing", c.weight_sharing == WeightSharing::shared_D ? "shared_D" : "separate_D"}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.base_channels = j.value("base_channels", c.base_channels);
  c.content_downsamples = j.value("content_downsamples", c.content_downsamples);
  c.n_residual_blocks = j.value("n_residual_blocks", c.n_residual_blocks);
  c.style_dim = j.value("style_dim", c.style_dim);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.discriminator_scales = j.value("discriminator_scales", c.discriminator_scales);
  c.discriminator_layers = j.value("discriminator_layers", c.discriminator_layers);
  if (j.contains("weight_sharing")) {
    const std::string ws = j.at("weight_sharing").get<std::string>();
    if (ws == "shared_D")
      c.weight_sharing = WeightSharing::shared_D;
    else if (ws == "separate_D")
      c.weight_sharing = WeightSharing::separate_D;
    else
      throw ConfigError("unknown weight_sharing: " + ws);
  }
}

void to_json(nlohmann::json& j, const PlanFlags& f) {
  j = nlohmann::json{
      {"cross_domain", f.cross_domain}, {"cross_granularity", f.cross_granularity}, {"multi_scale", f.multi_scale}};
}

void from_json(const nlohmann::json& j, PlanFlags& f) {
  f.cross_domain = j.value("cross_domain", f.cross_domain);
  f.cross_granularity = j.value("cross_granularity", f.cross_granularity);
  f.multi_scale = j.value("multi_scale", f.multi_scale);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda_g", w.lambda_g},   {"lambda_cg", w.lambda_cg}, {"lambda_sg", w.lambda_sg},
                     {"lambda_o", w.lambda_o},   {"lambda_co", w.lambda_co}, {"lambda_so", w.lambda_so},
                     {"gan_weight", w.gan_weight}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda_g = j.value("lambda_g", w.lambda_g);
  w.lambda_cg = j.value("lambda_cg", w.lambda_cg);
  w.lambda_sg = j.value("lambda_sg", w.lambda_sg);
  w.lambda_o = j.value("lambda_o", w.lambda_o);
  w.lambda_co = j.value("lambda_co", w.lambda_co);
  w.lambda_so = j.value("lambda_so", w.lambda_so);
  w.gan_weight = j.value("gan_weight", w.gan_weight);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"iterations", c.iterations},
                     {"batch_size", c.batch_size},
                     {"lr_generator", c.lr_generator},
                     {"lr_discriminator", c.lr_discriminator},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"weight_decay", c.weight_decay},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"image_size", c.image_size},
                     {"instance_size", c.instance_size},
                     {"max_crops_per_item", c.max_crops_per_item},
                     {"flags", c.flags},
                     {"weights", c.weights},
                     {"network", c.network}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_generator = j.value("lr_generator", c.lr_generator);
  c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.image_size = j.value("image_size", c.image_size);
  c.instance_size = j.value("instance_size", c.instance_size);
  c.max_crops_per_item = j.value("max_crops_per_item", c.max_crops_per_item);
  if (j.contains("flags")) from_json(j.at("flags"), c.flags);
  if (j.contains("weights")) from_json(j.at("weights"), c.weights);
  if (j.contains("network")) from_json(j.at("network"), c.network);
}

Adam::Adam(std::vector<ad::Var> params, double lr_in, double beta1, double beta2, double weight_decay)
    : lr(lr_in), params_(std::move(params)), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  constexpr double eps = 1e-8;
  for (size_t i = 0; i < params_.size(); ++i) {
    ad::Var& p = params_[i];
    const bool has_grad = p->grad.numel() == p->value.numel();
    for (int64_t k = 0; k < p->value.numel(); ++k) {
      const double g = (has_grad ? p->grad[k] : 0.0) + weight_decay_ * p->value[k];
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      p->value[k] -= lr * (m_[i][k] / bc1) / (std::sqrt(v_[i][k] / bc2) + eps);
    }
    if (has_grad) p->grad.fill(0.0);
  }
}

std::vector<double> Adam::serialize() const {
  std::vector<double> blob;
  blob.push_back(static_cast<double>(t_));
  for (const auto& t : m_)
    for (int64_t k = 0; k < t.numel(); ++k) blob.push_back(t[k]);
  for (const auto& t : v_)
    for (int64_t k = 0; k < t.numel(); ++k) blob.push_back(t[k]);
  return blob;
}

void Adam::restore(const std::vector<double>& blob) {
  size_t want = 1;
  for (const auto& t : m_) want += 2 * static_cast<size_t>(t.numel());
  if (blob.size() != want)
    throw DataError("optimizer state size mismatch: file has " + std::to_string(blob.size()) + " values, expected " +
                    std::to_string(want));
  t_ = static_cast<int64_t>(blob[0]);
  size_t at = 1;
  for (auto& t : m_)
    for (int64_t k = 0; k < t.numel(); ++k) t[k] = blob[at++];
  for (auto& t : v_)
    for (int64_t k = 0; k < t.numel(); ++k) t[k] = blob[at++];
}

TrainState TrainState::create(const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_weights(cfg.weights);
  validate_config(cfg.network);
  TrainState st{cfg, TranslationModel::create(cfg.network, cfg.seed), {}, {}, 0, {}};
  st.opt_g = Adam(st.model.generator_parameters(), cfg.lr_generator, cfg.adam_beta1, cfg.adam_beta2, cfg.weight_decay);
  st.opt_d =
      Adam(st.model.discriminator_parameters(), cfg.lr_discriminator, cfg.adam_beta1, cfg.adam_beta2, cfg.weight_decay);
  return st;
}

LossReport train_step(TrainState& state, const DomainBatch& batch_x, const DomainBatch& batch_y) {
  const TrainConfig& cfg = state.config;
  if (batch_x.items.empty() || batch_y.items.empty()) throw ConfigError("train_step needs items in both domains");
  TrainBatch batch{{batch_x, batch_y}};

  Rng plan_rng = make_rng(cfg.seed, {kPlanStream, static_cast<uint64_t>(state.iteration)});
  const CyclePlan plan = plan_cycles(bank_keys(batch), batch, cfg.flags, plan_rng);
  state.last_plan = plan;

  PlanExecutor ex(state.model, batch);
  const size_t n = plan.steps.size();
  std::vector<ad::Var> fakes(n), chats(n);

  // per-domain loss buckets, each a list of step scalars
  std::array<std::vector<ad::Var>, 2> b_global, b_instance, b_cg, b_co, b_sg, b_so, b_cyc_g, b_cyc_o;
  std::array<std::array<std::vector<ad::Var>, 2>, 2> gan_fakes;  // [decode domain][fine]

  for (size_t i = 0; i < n; ++i) {
    const PlanStep& s = plan.steps[i];
    if (s.kind == StepKind::cycle_back) continue;
    ad::Var content = ex.content_of(s.content);
    ad::Var style = ex.style_of(s.style);
    ad::Var fake = decode_vars(state.model, content, style, s.decode_domain);
    fakes[i] = fake;
    const bool fine = s.content.granularity == Granularity::instance;
    if (s.kind == StepKind::self_recon || s.kind == StepKind::scale_recon) {
      ad::Var l = recon_loss_v(fake, ad::constant(content_image(batch, s.content).pixels));
      (fine ? b_instance : b_global)[static_cast<size_t>(s.content.domain)].push_back(l);
    } else {
      gan_fakes[static_cast<size_t>(s.decode_domain)][s.output_granularity == Granularity::instance].push_back(fake);
      chats[i] = encode_content(state.model, fake, s.decode_domain);
      ad::Var shat = encode_style(state.model, fake, s.decode_domain);
      (fine ? b_co : b_cg)[static_cast<size_t>(s.content.domain)].push_back(recon_loss_v(chats[i], content));
      (fine ? b_so : b_sg)[static_cast<size_t>(style_domain(s.style))].push_back(recon_loss_v(shat, style));
    }
  }
  for (size_t i = 0; i < n; ++i) {
    const PlanStep& s = plan.steps[i];
    if (s.kind != StepKind::cycle_back) continue;
    ad::Var back = decode_vars(state.model, chats[static_cast<size_t>(s.pair_index)], ex.style_of(s.style),
                               s.decode_domain);
    ad::Var l = recon_loss_v(back, ad::constant(content_image(batch, s.content).pixels));
    const bool fine = s.content.granularity == Granularity::instance;
    (fine ? b_cyc_o : b_cyc_g)[static_cast<size_t>(s.content.domain)].push_back(l);
  }

  ObjectiveTerms terms;

  // discriminator phase: judge the translated outputs as constants, update D
  std::vector<ad::Var> d_parts;
  for (int dd = 0; dd < 2; ++dd) {
    for (int fine = 0; fine < 2; ++fine) {
      const auto& group = gan_fakes[static_cast<size_t>(dd)][static_cast<size_t>(fine)];
      if (group.empty()) continue;
      const auto reals = real_images(batch, dd, fine != 0);
      if (reals.empty()) continue;  // nothing genuine to compare against at this granularity
      const Granularity g = fine != 0 ? Granularity::instance : Granularity::global;
      std::vector<std::vector<ad::Var>> real_logits, fake_logits;
      for (const Tensor& r : reals) real_logits.push_back(discriminate_vars(state.model, ad::constant(r), dd, g));
      for (const ad::Var& f : group) fake_logits.push_back(discriminate_vars(state.model, ad::detach(f), dd, g));
      ad::Var d = lsgan_d_loss(real_logits, fake_logits);
      const double dv = d->value[0];
      if (!std::isfinite(dv))
        throw NumericError(std::string(fine != 0 ? "gan_discriminator_instance" : "gan_discriminator_global") +
                           " is not finite at iteration " + std::to_string(state.iteration));
      (fine != 0 ? terms.gan_discriminator_instance : terms.gan_discriminator_global)[static_cast<size_t>(dd)] = dv;
      d_parts.push_back(d);
    }
  }
  if (!d_parts.empty()) ad::backward(ad::add_n(d_parts));
  state.opt_d.lr = cfg.lr_discriminator;
  state.opt_d.step();

  // generator phase: adversarial terms against the freshly updated critic
  std::array<std::vector<ad::Var>, 2> b_gan_g, b_gan_o;
  for (int dd = 0; dd < 2; ++dd) {
    for (int fine = 0; fine < 2; ++fine) {
      const auto& group = gan_fakes[static_cast<size_t>(dd)][static_cast<size_t>(fine)];
      if (group.empty() || real_images(batch, dd, fine != 0).empty()) continue;
      const Granularity g = fine != 0 ? Granularity::instance : Granularity::global;
      std::vector<std::vector<ad::Var>> fake_logits;
      for (const ad::Var& f : group)
        fake_logits.push_back(discriminate_vars(state.model, f, dd, g, /*frozen_params=*/true));
      (fine != 0 ? b_gan_o : b_gan_g)[static_cast<size_t>(dd)].push_back(lsgan_g_loss(fake_logits));
    }
  }

  const LossWeights& w = cfg.weights;
  std::vector<ad::Var> g_parts;
  auto fold = [&](const std::array<std::vector<ad::Var>, 2>& buckets, std::array<double, 2>& out, double weight) {
    for (int d = 0; d < 2; ++d) {
      ad::Var m = bucket_mean(buckets[static_cast<size_t>(d)]);
      if (!m) continue;
      out[static_cast<size_t>(d)] = m->value[0];
      g_parts.push_back(ad::scale(m, weight));
    }
  };
  fold(b_global, terms.global_recon, w.lambda_g);
  fold(b_cyc_g, terms.cycle_global, w.lambda_g);
  fold(b_cg, terms.content_recon_global, w.lambda_cg);
  fold(b_sg, terms.style_recon_global, w.lambda_sg);
  fold(b_instance, terms.instance_recon, w.lambda_o);
  fold(b_cyc_o, terms.cycle_instance, w.lambda_o);
  fold(b_co, terms.content_recon_instance, w.lambda_co);
  fold(b_so, terms.style_recon_instance, w.lambda_so);
  fold(b_gan_g, terms.gan_global, w.gan_weight);
  fold(b_gan_o, terms.gan_instance, w.gan_weight);

  LossReport report;
  try {
    report = full_objective(terms, w);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(state.iteration));
  }

  if (!g_parts.empty()) ad::backward(ad::add_n(g_parts));
  state.opt_g.lr = cfg.lr_generator;
  state.opt_g.step();

  ++state.iteration;
  return report;
}

Tensor translate(const TranslationModel& model, const Tensor& image, int source_domain, int target_domain,
                 const StyleCode& style) {
  if (source_domain < 0 || source_domain > 1 || target_domain < 0 || target_domain > 1)
    throw ConfigError("domain index out of range");
  if (style.vector.numel() != model.config.style_dim)
    throw ShapeError("style vector has " + std::to_string(style.vector.numel()) + " entries, model expects " +
                     std::to_string(model.config.style_dim));
  ad::Var content = encode_content(model, ad::constant(image), source_domain);
  ad::Var out = decode_vars(model, content, ad::constant(style.vector), target_domain);
  if (!out->value.all_finite()) throw NumericError("translation produced non-finite pixels");
  return out->value;
}

Tensor translate(const TranslationModel& model, const Tensor& image, int source_domain, int target_domain,
                 uint64_t style_seed) {
  Rng rng(style_seed);
  StyleCode style;
  style.vector = Tensor::randn({model.config.style_dim}, rng);
  style.domain = DomainId{"", target_domain};
  return translate(model, image, source_domain, target_domain, style);
}

void save_checkpoint(const TrainState& state, const std::string& dir) {
  fs::create_directories(dir);
  write_blob(fs::path(dir) / "params.bin", save_parameters(state.model));
  const std::vector<double> og = state.opt_g.serialize();
  const std::vector<double> od = state.opt_d.serialize();
  std::vector<double> optim;
  optim.push_back(static_cast<double>(og.size()));
  optim.push_back(static_cast<double>(od.size()));
  optim.insert(optim.end(), og.begin(), og.end());
  optim.insert(optim.end(), od.begin(), od.end());
  write_blob(fs::path(dir) / "optim.bin", optim);
  nlohmann::json meta{{"format_version", kCheckpointVersion}, {"iteration", state.iteration}, {"config", state.config}};
  std::ofstream out(fs::path(dir) / "meta.json", std::ios::trunc);
  out << meta.dump(2) << "\n";
  if (!out) throw DataError("cannot write checkpoint metadata under " + dir);
}

TrainState load_checkpoint(const std::string& dir) {
  const fs::path meta_path = fs::path(dir) / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("checkpoint not found: " + dir);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }
  try {
    const int version = meta.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("checkpoint format version mismatch: file has " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    TrainConfig cfg;
    from_json(meta.at("config"), cfg);
    TrainState state = TrainState::create(cfg);
    state.iteration = meta.at("iteration").get<int64_t>();
    load_parameters(state.model, read_blob(fs::path(dir) / "params.bin"));
    const std::vector<double> optim = read_blob(fs::path(dir) / "optim.bin");
    if (optim.size() < 2) throw DataError("optimizer state file truncated");
    const auto ng = static_cast<size_t>(optim[0]);
    const auto nd = static_cast<size_t>(optim[1]);
    if (2 + ng + nd != optim.size()) throw DataError("optimizer state file truncated");
    state.opt_g.restore({optim.begin() + 2, optim.begin() + 2 + static_cast<std::ptrdiff_t>(ng)});
    state.opt_d.restore({optim.begin() + 2 + static_cast<std::ptrdiff_t>(ng), optim.end()});
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint metadata incomplete: " + std::string(e.what()));
  }
}

Trainer::Trainer(const TrainConfig& cfg, std::array<std::vector<ImageSample>, 2> pools)
    : Trainer(TrainState::create(cfg), std::move(pools)) {}

Trainer::Trainer(TrainState state, std::array<std::vector<ImageSample>, 2> pools)
    : state_(std::move(state)), pools_(std::move(pools)) {
  for (int d = 0; d < 2; ++d)
    if (pools_[static_cast<size_t>(d)].empty())
      throw ConfigError("training pool for domain " + std::to_string(d) + " is empty");
}

DomainBatch Trainer::assemble(int domain) const {
  const TrainConfig& cfg = state_.config;
  const auto& pool = pools_[static_cast<size_t>(domain)];
  Rng rng = make_rng(cfg.seed,
                     {kBatchStream, static_cast<uint64_t>(state_.iteration), static_cast<uint64_t>(domain)});
  DomainBatch batch;
  for (int k = 0; k < cfg.batch_size; ++k) {
    const auto& pick = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    ImageSample s = resize_short_side(pick, cfg.image_size);
    s = random_crop(s, cfg.image_size, rng);
    batch.items.push_back(make_batch_item(s, cfg.instance_size, cfg.max_crops_per_item));
  }
  return batch;
}

LossReport Trainer::step() {
  DomainBatch bx = assemble(0);
  DomainBatch by = assemble(1);
  LossReport r = train_step(state_, bx, by);
  history_.push_back(r);
  return r;
}

void Trainer::run(const std::string& log_path, const std::string& checkpoint_dir) {
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw DataError("cannot open training log: " + log_path);
  }
  const TrainConfig& cfg = state_.config;
  while (state_.iteration < cfg.iterations) {
    const int64_t it = state_.iteration;
    const auto t0 = std::chrono::steady_clock::now();
    const LossReport r = step();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (log.is_open()) {
      nlohmann::json line = nlohmann::json::parse(r.to_json());
      line["iteration"] = it;
      line["wall_ms"] = ms;
      log << line.dump() << "\n";
    }
    if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0 && state_.iteration % cfg.checkpoint_every == 0)
      save_checkpoint(state_, checkpoint_dir + "/ckpt_" + std::to_string(state_.iteration));
  }
  if (!checkpoint_dir.empty()) save_checkpoint(state_, checkpoint_dir + "/final");
}

}  // namespace instrans
