#include "instrans/losses.hpp"

#include <cmath>
#include <sstream>

#include "instrans/association.hpp"
#include "instrans/errors.hpp"

namespace instrans {

using ad::Var;

void validate_weights(const LossWeights& w) {
  const double vals[] = {w.lambda_g, w.lambda_cg, w.lambda_sg, w.lambda_o, w.lambda_co, w.lambda_so, w.gan_weight};
  const char* names[] = {"lambda_g", "lambda_cg", "lambda_sg", "lambda_o", "lambda_co", "lambda_so", "gan_weight"};
  for (size_t i = 0; i < 7; ++i)
    if (!(vals[i] >= 0.0)) throw ConfigError(std::string(names[i]) + " must be nonnegative");
}

double recon_loss(const Tensor& k_hat, const Tensor& k) {
  if (!k_hat.same_shape(k))
    throw ShapeError("recon_loss shapes differ: " + shape_str(k_hat.shape()) + " vs " + shape_str(k.shape()));
  double acc = 0.0;
  for (int64_t i = 0; i < k.numel(); ++i) acc += std::abs(k_hat[i] - k[i]);
  return acc / static_cast<double>(k.numel());
}

Var recon_loss_v(const Var& k_hat, const Var& k) { return ad::l1_loss(k_hat, k); }

LatentRecon latent_recon_terms(const TranslationModel& model, const ContentCode& content, const StyleCode& style,
                               const DomainId& decode_domain) {
  if (!association_allowed(style.granularity, content.granularity))
    throw std::invalid_argument("a " + granularity_name(style.granularity) + " style cannot dress " +
                                granularity_name(content.granularity) + " content");
  Tensor image = decode(model, content, style, decode_domain);
  auto [c_hat, s_hat] = encode(model, image, decode_domain, content.granularity);
  LatentRecon out;
  out.content_loss = recon_loss(c_hat.features, content.features);
  out.style_loss = recon_loss(s_hat.vector, style.vector);
  out.content_hat = std::move(c_hat);
  out.style_hat = std::move(s_hat);
  return out;
}

namespace {

Var scale_mean_sq(const std::vector<Var>& logits, double target) {
  std::vector<Var> per_scale;
  per_scale.reserve(logits.size());
  for (const Var& l : logits) per_scale.push_back(ad::mean_all(ad::square(ad::add_scalar(l, -target))));
  return ad::scale(ad::add_n(per_scale), 1.0 / static_cast<double>(per_scale.size()));
}

Var image_mean(std::vector<Var> per_image) {
  return ad::scale(ad::add_n(per_image), 1.0 / static_cast<double>(per_image.size()));
}

}  // namespace

Var lsgan_d_loss(const std::vector<std::vector<Var>>& real_logits, const std::vector<std::vector<Var>>& fake_logits) {
  if (real_logits.empty() || fake_logits.empty())
    throw ShapeError("lsgan_d_loss needs at least one real and one fake");
  std::vector<Var> real_terms, fake_terms;
  for (const auto& l : real_logits) real_terms.push_back(scale_mean_sq(l, 1.0));
  for (const auto& l : fake_logits) fake_terms.push_back(scale_mean_sq(l, 0.0));
  return ad::add(image_mean(std::move(real_terms)), image_mean(std::move(fake_terms)));
}

Var lsgan_g_loss(const std::vector<std::vector<Var>>& fake_logits) {
  if (fake_logits.empty()) throw ShapeError("lsgan_g_loss needs at least one fake");
  std::vector<Var> terms;
  for (const auto& l : fake_logits) terms.push_back(scale_mean_sq(l, 1.0));
  return image_mean(std::move(terms));
}

GanLosses gan_losses(const TranslationModel& model, const std::vector<Tensor>& reals,
                     const std::vector<ad::Var>& fakes, int domain, Granularity granularity) {
  if (reals.empty() || fakes.empty()) throw ShapeError("gan_losses needs at least one real and one fake");
  std::vector<std::vector<Var>> real_logits, fake_const_logits, fake_live_logits;
  for (const Tensor& r : reals)
    real_logits.push_back(discriminate_vars(model, ad::constant(r), domain, granularity));
  for (const Var& f : fakes) {
    fake_const_logits.push_back(discriminate_vars(model, ad::detach(f), domain, granularity));
    fake_live_logits.push_back(discriminate_vars(model, f, domain, granularity, /*frozen_params=*/true));
  }
  GanLosses out;
  out.d_loss = lsgan_d_loss(real_logits, fake_const_logits);
  out.g_loss = lsgan_g_loss(fake_live_logits);
  return out;
}

double LossReport::weighted_total(const LossWeights& w) const {
  return w.lambda_g * (global_recon + cycle_global) + w.lambda_cg * content_recon_global +
         w.lambda_sg * style_recon_global + w.lambda_o * (instance_recon + cycle_instance) +
         w.lambda_co * content_recon_instance + w.lambda_so * style_recon_instance +
         w.gan_weight * gan_generator;
}

std::string LossReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"global_recon\":" << global_recon << ",\"instance_recon\":" << instance_recon
     << ",\"content_recon\":" << content_recon() << ",\"style_recon\":" << style_recon()
     << ",\"content_recon_global\":" << content_recon_global
     << ",\"content_recon_instance\":" << content_recon_instance
     << ",\"style_recon_global\":" << style_recon_global
     << ",\"style_recon_instance\":" << style_recon_instance << ",\"cycle\":" << cycle()
     << ",\"cycle_global\":" << cycle_global << ",\"cycle_instance\":" << cycle_instance
     << ",\"gan_generator\":" << gan_generator << ",\"gan_discriminator\":" << gan_discriminator
     << ",\"total\":" << total << "}";
  return os.str();
}

LossReport full_objective(const ObjectiveTerms& terms, const LossWeights& weights) {
  validate_weights(weights);
  auto check = [](const std::array<double, 2>& pair, const char* name) {
    for (int d = 0; d < 2; ++d)
      if (!std::isfinite(pair[static_cast<size_t>(d)]))
        throw NumericError(std::string(name) + (d == 0 ? "_x" : "_y") + " is not finite");
  };
  check(terms.global_recon, "global_recon");
  check(terms.content_recon_global, "content_recon_global");
  check(terms.style_recon_global, "style_recon_global");
  check(terms.instance_recon, "instance_recon");
  check(terms.content_recon_instance, "content_recon_instance");
  check(terms.style_recon_instance, "style_recon_instance");
  check(terms.gan_global, "gan_global");
  check(terms.gan_instance, "gan_instance");
  check(terms.cycle_global, "cycle_global");
  check(terms.cycle_instance, "cycle_instance");
  check(terms.gan_discriminator_global, "gan_discriminator_global");
  check(terms.gan_discriminator_instance, "gan_discriminator_instance");

  auto both = [](const std::array<double, 2>& pair) { return pair[0] + pair[1]; };
  LossReport r;
  r.global_recon = both(terms.global_recon);
  r.instance_recon = both(terms.instance_recon);
  r.content_recon_global = both(terms.content_recon_global);
  r.content_recon_instance = both(terms.content_recon_instance);
  r.style_recon_global = both(terms.style_recon_global);
  r.style_recon_instance = both(terms.style_recon_instance);
  r.cycle_global = both(terms.cycle_global);
  r.cycle_instance = both(terms.cycle_instance);
  r.gan_generator = both(terms.gan_global) + both(terms.gan_instance);
  r.gan_discriminator = both(terms.gan_discriminator_global) + both(terms.gan_discriminator_instance);
  r.total = r.weighted_total(weights);
  return r;
}

}  // namespace instrans
