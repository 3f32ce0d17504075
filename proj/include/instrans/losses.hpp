#pragma once

#include <array>
#include <string>
#include <vector>

#include "instrans/networks.hpp"
#include "instrans/types.hpp"

namespace instrans {

struct LossWeights {
  double lambda_g = 10.0;   // global image reconstruction (and its cycle)
  double lambda_cg = 1.0;   // global content code reconstruction
  double lambda_sg = 1.0;   // global style code reconstruction
  double lambda_o = 10.0;   // instance reconstruction (and its cycle)
  double lambda_co = 1.0;   // instance content code reconstruction
  double lambda_so = 1.0;   // instance style code reconstruction
  double gan_weight = 1.0;
};

// Throws ConfigError on a negative weight.
void validate_weights(const LossWeights& w);

// Mean absolute difference; the one reconstruction form every term reuses.
double recon_loss(const Tensor& k_hat, const Tensor& k);
ad::Var recon_loss_v(const ad::Var& k_hat, const ad::Var& k);

struct LatentRecon {
  ContentCode content_hat;
  StyleCode style_hat;
  double content_loss = 0.0;
  double style_loss = 0.0;
};

// Decodes (content, style) into decode_domain, re-encodes, and measures how
// well the codes survive the round trip. Throws std::invalid_argument when the
// style may not dress this content.
LatentRecon latent_recon_terms(const TranslationModel& model, const ContentCode& content, const StyleCode& style,
                               const DomainId& decode_domain);

// Least-squares adversarial pair on precomputed logit maps. Outer index:
// image; inner: scale. Each image's term is the mean over scales of the mean
// squared deviation from the target (1 for real, 0 for fake).
ad::Var lsgan_d_loss(const std::vector<std::vector<ad::Var>>& real_logits,
                     const std::vector<std::vector<ad::Var>>& fake_logits);
ad::Var lsgan_g_loss(const std::vector<std::vector<ad::Var>>& fake_logits);

struct GanLosses {
  ad::Var d_loss;  // sees fakes as constants; discriminator parameters live
  ad::Var g_loss;  // sees discriminator parameters as constants; fakes live
};

// Builds both adversarial losses with the gradient insulation each side needs.
GanLosses gan_losses(const TranslationModel& model, const std::vector<Tensor>& reals,
                     const std::vector<ad::Var>& fakes, int domain, Granularity granularity);

// One scalar per objective component, indexed by domain (0 = X, 1 = Y).
struct ObjectiveTerms {
  std::array<double, 2> global_recon{};
  std::array<double, 2> content_recon_global{};
  std::array<double, 2> style_recon_global{};
  std::array<double, 2> instance_recon{};
  std::array<double, 2> content_recon_instance{};
  std::array<double, 2> style_recon_instance{};
  std::array<double, 2> gan_global{};
  std::array<double, 2> gan_instance{};
  std::array<double, 2> cycle_global{};    // twice-translated vs original
  std::array<double, 2> cycle_instance{};
  std::array<double, 2> gan_discriminator_global{};  // reported, never in total
  std::array<double, 2> gan_discriminator_instance{};
};

struct LossReport {
  double global_recon = 0.0;
  double instance_recon = 0.0;
  double content_recon_global = 0.0;
  double content_recon_instance = 0.0;
  double style_recon_global = 0.0;
  double style_recon_instance = 0.0;
  double cycle_global = 0.0;
  double cycle_instance = 0.0;
  double gan_generator = 0.0;
  double gan_discriminator = 0.0;
  double total = 0.0;

  double content_recon() const { return content_recon_global + content_recon_instance; }
  double style_recon() const { return style_recon_global + style_recon_instance; }
  double cycle() const { return cycle_global + cycle_instance; }

  // Weighted generator-side sum the `total` field must equal.
  double weighted_total(const LossWeights& w) const;
  std::string to_json() const;
};

// Folds the per-domain components into the weighted scalar objective.
// Throws NumericError naming the first non-finite component.
LossReport full_objective(const ObjectiveTerms& terms, const LossWeights& weights);

}  // namespace instrans
