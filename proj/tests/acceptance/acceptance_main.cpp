// End-to-end acceptance harness. Every check recomputes its expectation from
// scratch (or from the public API at a different level) rather than trusting
// the code path it exercises. One PASS/FAIL line per check; exit 0 iff all 8
// hold.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "instrans/association.hpp"
#include "instrans/autograd.hpp"
#include "instrans/cli.hpp"
#include "instrans/datasets.hpp"
#include "instrans/errors.hpp"
#include "instrans/evaluation.hpp"
#include "instrans/image.hpp"
#include "instrans/losses.hpp"
#include "instrans/networks.hpp"
#include "instrans/rng.hpp"
#include "instrans/training.hpp"
#include "instrans/types.hpp"

using namespace instrans;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::vector<std::string> g_notes;  // printed under the status line

void note(const std::string& line) { g_notes.push_back(line); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "instrans_acceptance";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

NetworkConfig tiny_network() {
  NetworkConfig nc;
  nc.base_channels = 4;
  nc.n_residual_blocks = 1;
  nc.style_dim = 4;
  nc.mlp_hidden = 8;
  nc.discriminator_scales = 1;
  nc.discriminator_layers = 2;
  return nc;
}

ImageSample noise_sample(int size, int domain, const std::string& id, Rng& rng, std::vector<InstanceBox> boxes = {}) {
  ImageSample s;
  s.pixels = Tensor::uniform({3, size, size}, rng, -0.9, 0.9);
  s.domain = DomainId{domain == 0 ? "x" : "y", domain};
  s.id = id;
  s.boxes = std::move(boxes);
  return s;
}

std::array<std::vector<ImageSample>, 2> pools_from(const std::pair<DatasetManifest, DatasetManifest>& manifests) {
  std::array<std::vector<ImageSample>, 2> pools;
  const DatasetManifest* ms[2] = {&manifests.first, &manifests.second};
  for (int d = 0; d < 2; ++d)
    for (const ManifestImage& im : ms[d]->images) pools[static_cast<size_t>(d)].push_back(load_sample(*ms[d], im.id, d));
  return pools;
}

// ---------------------------------------------------------------- check 1

void check_loss_oracles() {
  const auto started = std::chrono::steady_clock::now();
  Rng rng(0xACC1u);

  for (int t = 0; t < 25; ++t) {
    const Tensor a = Tensor::randn({3, 5, 7}, rng);
    const Tensor b = Tensor::randn({3, 5, 7}, rng);
    double manual = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) manual += std::fabs(a[i] - b[i]);
    manual /= static_cast<double>(a.numel());
    expect(std::fabs(recon_loss(a, b) - manual) < 1e-6, "reconstruction differs from direct summation");
  }

  // adversarial pair against per-pixel recomputation through the value-level
  // discriminator
  NetworkConfig nc = tiny_network();
  nc.discriminator_scales = 2;
  const TranslationModel model = TranslationModel::create(nc, 5);
  std::vector<Tensor> reals;
  std::vector<ad::Var> fakes;
  std::vector<Tensor> fake_values;
  for (int i = 0; i < 2; ++i) {
    reals.push_back(Tensor::uniform({3, 16, 16}, rng, -0.9, 0.9));
    fake_values.push_back(Tensor::uniform({3, 16, 16}, rng, -0.9, 0.9));
    fakes.push_back(ad::constant(fake_values.back()));
  }
  const GanLosses gl = gan_losses(model, reals, fakes, 0, Granularity::global);
  auto score = [&](const Tensor& img, double target) {
    const std::vector<Tensor> logits = discriminate(model, img, DomainId{"x", 0}, Granularity::global);
    double over_scales = 0.0;
    for (const Tensor& l : logits) {
      double sq = 0.0;
      for (int64_t i = 0; i < l.numel(); ++i) sq += (l[i] - target) * (l[i] - target);
      over_scales += sq / static_cast<double>(l.numel());
    }
    return over_scales / static_cast<double>(logits.size());
  };
  double d_manual = 0.0, g_manual = 0.0;
  for (const Tensor& r : reals) d_manual += score(r, 1.0) / static_cast<double>(reals.size());
  for (const Tensor& f : fake_values) {
    d_manual += score(f, 0.0) / static_cast<double>(fake_values.size());
    g_manual += score(f, 1.0) / static_cast<double>(fake_values.size());
  }
  expect(std::fabs(gl.d_loss->value[0] - d_manual) < 1e-6,
         "critic loss " + fmt(gl.d_loss->value[0]) + " vs manual " + fmt(d_manual));
  expect(std::fabs(gl.g_loss->value[0] - g_manual) < 1e-6,
         "generator adversarial loss " + fmt(gl.g_loss->value[0]) + " vs manual " + fmt(g_manual));

  // weighted objective against a from-scratch accumulation
  for (int t = 0; t < 30; ++t) {
    ObjectiveTerms terms;
    auto fill = [&](std::array<double, 2>& a) {
      a[0] = rng.uniform(0.0, 3.0);
      a[1] = rng.uniform(0.0, 3.0);
    };
    fill(terms.global_recon);
    fill(terms.content_recon_global);
    fill(terms.style_recon_global);
    fill(terms.instance_recon);
    fill(terms.content_recon_instance);
    fill(terms.style_recon_instance);
    fill(terms.gan_global);
    fill(terms.gan_instance);
    fill(terms.cycle_global);
    fill(terms.cycle_instance);
    fill(terms.gan_discriminator_global);
    fill(terms.gan_discriminator_instance);
    LossWeights w;
    w.lambda_g = rng.uniform(0.0, 4.0);
    w.lambda_cg = rng.uniform(0.0, 4.0);
    w.lambda_sg = rng.uniform(0.0, 4.0);
    w.lambda_o = rng.uniform(0.0, 4.0);
    w.lambda_co = rng.uniform(0.0, 4.0);
    w.lambda_so = rng.uniform(0.0, 4.0);
    w.gan_weight = rng.uniform(0.0, 4.0);

    double manual = 0.0;
    for (int d = 0; d < 2; ++d) {
      const auto sd = static_cast<size_t>(d);
      manual += w.lambda_g * (terms.global_recon[sd] + terms.cycle_global[sd]);
      manual += w.lambda_cg * terms.content_recon_global[sd];
      manual += w.lambda_sg * terms.style_recon_global[sd];
      manual += w.lambda_o * (terms.instance_recon[sd] + terms.cycle_instance[sd]);
      manual += w.lambda_co * terms.content_recon_instance[sd];
      manual += w.lambda_so * terms.style_recon_instance[sd];
      manual += w.gan_weight * (terms.gan_global[sd] + terms.gan_instance[sd]);
    }
    const LossReport r = full_objective(terms, w);
    expect(std::fabs(r.total - manual) < 1e-6, "total " + fmt(r.total) + " vs manual " + fmt(manual));

    ObjectiveTerms tweaked = terms;
    tweaked.gan_discriminator_global[0] += 5.0;
    tweaked.gan_discriminator_instance[1] += 3.0;
    expect(full_objective(tweaked, w).total == r.total, "critic loss leaked into the generator total");
  }
  const double secs =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count() / 1e3;
  expect(secs < 10.0, "oracle suite took " + fmt(secs) + "s");
}

// ---------------------------------------------------------------- check 2

void check_adain_statistics() {
  Rng rng(0xADA1u);
  const int C = 6, H = 6, W = 6;
  double worst_mean = 0.0, worst_std = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Tensor x = Tensor::randn({C, H, W}, rng, 1.2);
    Tensor mu_t({C}), s_t({C});
    for (int c = 0; c < C; ++c) {
      mu_t[c] = rng.uniform(-2.0, 2.0);
      s_t[c] = rng.uniform(0.2, 2.0);
    }
    const Tensor out = ad::adain(ad::constant(x), ad::constant(mu_t), ad::constant(s_t))->value;
    for (int c = 0; c < C; ++c) {
      double m = 0.0, sq = 0.0;
      for (int y = 0; y < H; ++y)
        for (int x2 = 0; x2 < W; ++x2) m += out.at(c, y, x2);
      m /= H * W;
      for (int y = 0; y < H; ++y)
        for (int x2 = 0; x2 < W; ++x2) sq += (out.at(c, y, x2) - m) * (out.at(c, y, x2) - m);
      const double sd = std::sqrt(sq / (H * W));
      worst_mean = std::max(worst_mean, std::fabs(m - mu_t[c]));
      worst_std = std::max(worst_std, std::fabs(sd - s_t[c]));
    }
  }
  expect(worst_mean < 1e-3, "channel mean off by " + fmt(worst_mean));
  expect(worst_std < 1e-3, "channel std off by " + fmt(worst_std));

  // restating a map's own statistics must be a no-op
  double worst_identity = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Tensor x = Tensor::randn({C, H, W}, rng);
    Tensor mu({C}), sd({C});
    for (int c = 0; c < C; ++c) {
      double m = 0.0, sq = 0.0;
      for (int y = 0; y < H; ++y)
        for (int x2 = 0; x2 < W; ++x2) m += x.at(c, y, x2);
      m /= H * W;
      for (int y = 0; y < H; ++y)
        for (int x2 = 0; x2 < W; ++x2) sq += (x.at(c, y, x2) - m) * (x.at(c, y, x2) - m);
      mu[c] = m;
      sd[c] = std::sqrt(sq / (H * W));
    }
    const Tensor out = ad::adain(ad::constant(x), ad::constant(mu), ad::constant(sd))->value;
    for (int64_t i = 0; i < x.numel(); ++i) worst_identity = std::max(worst_identity, std::fabs(out[i] - x[i]));
  }
  expect(worst_identity < 1e-4, "identity renormalization moved pixels by " + fmt(worst_identity));
}

// ---------------------------------------------------------------- check 3

// Independent rebuild of the generator-side objective for a frozen plan, so
// the scalar is a pure function of the parameter values.
ad::Var generator_objective(const TranslationModel& model, const TrainBatch& batch, const CyclePlan& plan,
                            const LossWeights& w) {
  std::map<std::string, ad::Var> cache;
  auto content_image = [&](const ContentRef& c) -> const ImageSample& {
    const BatchItem& it = batch.domains[static_cast<size_t>(c.domain)].items[static_cast<size_t>(c.item)];
    switch (c.granularity) {
      case Granularity::global: return it.full;
      case Granularity::background: return it.background;
      case Granularity::half_scale: return it.half;
      case Granularity::instance: return it.crops[static_cast<size_t>(c.crop_index)];
    }
    return it.full;
  };
  auto bank_image = [&](const BankKey& key) -> const ImageSample& {
    for (const BatchItem& it : batch.domains[static_cast<size_t>(key.domain)].items) {
      if (key.granularity == Granularity::instance) {
        for (const ImageSample& c : it.crops)
          if (c.id == key.source_id) return c;
      } else if (it.full.id == key.source_id) {
        return key.granularity == Granularity::background ? it.background : it.full;
      }
    }
    throw Failure("bank key outside batch");
  };
  auto content_of = [&](const ContentRef& ref) {
    const std::string key = "c" + std::to_string(ref.domain) + "." + std::to_string(ref.item) + "." +
                            std::to_string(static_cast<int>(ref.granularity)) + "." + std::to_string(ref.crop_index);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ad::Var v = encode_content(model, ad::constant(content_image(ref).pixels), ref.domain);
    cache.emplace(key, v);
    return v;
  };
  auto style_of = [&](const StyleRef& ref) {
    std::string key;
    if (ref.source == StyleRef::Source::bank)
      key = "b" + std::to_string(ref.key.domain) + "." + std::to_string(static_cast<int>(ref.key.granularity)) + "." +
            ref.key.source_id;
    else if (ref.source == StyleRef::Source::scale)
      key = "h" + std::to_string(ref.domain) + "." + std::to_string(ref.item);
    else
      key = "p" + std::to_string(ref.prior_seed);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ad::Var v;
    if (ref.source == StyleRef::Source::bank) {
      v = encode_style(model, ad::constant(bank_image(ref.key).pixels), ref.key.domain);
    } else if (ref.source == StyleRef::Source::scale) {
      const auto& half = batch.domains[static_cast<size_t>(ref.domain)].items[static_cast<size_t>(ref.item)].half;
      v = encode_style(model, ad::constant(half.pixels), ref.domain);
    } else {
      Rng r(ref.prior_seed);
      v = ad::constant(Tensor::randn({model.config.style_dim}, r));
    }
    cache.emplace(key, v);
    return v;
  };

  const size_t n = plan.steps.size();
  std::vector<ad::Var> chats(n);
  std::array<std::vector<ad::Var>, 2> b_global, b_instance, b_cg, b_co, b_sg, b_so, b_cyc_g, b_cyc_o;
  std::array<std::array<std::vector<ad::Var>, 2>, 2> fakes_by;  // [decode domain][fine output]

  for (size_t i = 0; i < n; ++i) {
    const PlanStep& s = plan.steps[i];
    if (s.kind == StepKind::cycle_back) continue;
    ad::Var content = content_of(s.content);
    ad::Var style = style_of(s.style);
    ad::Var fake = decode_vars(model, content, style, s.decode_domain);
    const bool fine = s.content.granularity == Granularity::instance;
    if (s.kind == StepKind::self_recon || s.kind == StepKind::scale_recon) {
      (fine ? b_instance : b_global)[static_cast<size_t>(s.content.domain)].push_back(
          ad::l1_loss(fake, ad::constant(content_image(s.content).pixels)));
    } else {
      fakes_by[static_cast<size_t>(s.decode_domain)][s.output_granularity == Granularity::instance].push_back(fake);
      chats[i] = encode_content(model, fake, s.decode_domain);
      ad::Var shat = encode_style(model, fake, s.decode_domain);
      (fine ? b_co : b_cg)[static_cast<size_t>(s.content.domain)].push_back(ad::l1_loss(chats[i], content));
      const int sdom = s.style.source == StyleRef::Source::bank ? s.style.key.domain : s.style.domain;
      (fine ? b_so : b_sg)[static_cast<size_t>(sdom)].push_back(ad::l1_loss(shat, style));
    }
  }
  for (size_t i = 0; i < n; ++i) {
    const PlanStep& s = plan.steps[i];
    if (s.kind != StepKind::cycle_back) continue;
    ad::Var back = decode_vars(model, chats[static_cast<size_t>(s.pair_index)], style_of(s.style), s.decode_domain);
    const bool fine = s.content.granularity == Granularity::instance;
    (fine ? b_cyc_o : b_cyc_g)[static_cast<size_t>(s.content.domain)].push_back(
        ad::l1_loss(back, ad::constant(content_image(s.content).pixels)));
  }

  std::array<std::vector<ad::Var>, 2> b_gan_g, b_gan_o;
  for (int dd = 0; dd < 2; ++dd) {
    for (int fine = 0; fine < 2; ++fine) {
      const auto& group = fakes_by[static_cast<size_t>(dd)][static_cast<size_t>(fine)];
      if (group.empty()) continue;
      const Granularity g = fine != 0 ? Granularity::instance : Granularity::global;
      std::vector<std::vector<ad::Var>> fake_logits;
      for (const ad::Var& f : group) fake_logits.push_back(discriminate_vars(model, f, dd, g, /*frozen_params=*/true));
      (fine != 0 ? b_gan_o : b_gan_g)[static_cast<size_t>(dd)].push_back(lsgan_g_loss(fake_logits));
    }
  }

  std::vector<ad::Var> parts;
  auto fold = [&](const std::array<std::vector<ad::Var>, 2>& buckets, double weight) {
    for (int d = 0; d < 2; ++d) {
      const auto& v = buckets[static_cast<size_t>(d)];
      if (v.empty()) continue;
      parts.push_back(ad::scale(ad::scale(ad::add_n(v), 1.0 / static_cast<double>(v.size())), weight));
    }
  };
  fold(b_global, w.lambda_g);
  fold(b_cyc_g, w.lambda_g);
  fold(b_cg, w.lambda_cg);
  fold(b_sg, w.lambda_sg);
  fold(b_instance, w.lambda_o);
  fold(b_cyc_o, w.lambda_o);
  fold(b_co, w.lambda_co);
  fold(b_so, w.lambda_so);
  fold(b_gan_g, w.gan_weight);
  fold(b_gan_o, w.gan_weight);
  return ad::add_n(parts);
}

void check_gradients() {
  NetworkConfig nc = tiny_network();
  const TranslationModel model = TranslationModel::create(nc, 3);

  Rng data_rng(0xF00Du);
  TrainBatch batch;
  for (int d = 0; d < 2; ++d) {
    ImageSample s = noise_sample(8, d, d == 0 ? "x0" : "y0", data_rng, {InstanceBox{2, 2, 4, 4}});
    batch.domains[static_cast<size_t>(d)].items.push_back(make_batch_item(s, 4, 1));
  }
  Rng plan_rng(77);
  const CyclePlan plan = plan_cycles(bank_keys(batch), batch, PlanFlags{}, plan_rng);
  const LossWeights w;

  const ad::Var loss = generator_objective(model, batch, plan, w);
  expect(loss->value.numel() == 1, "objective is not scalar");
  ad::backward(loss);

  const std::vector<ad::Var> params = model.generator_parameters();
  std::vector<std::pair<size_t, int64_t>> coords;
  for (size_t p = 0; p < params.size(); ++p)
    for (int64_t i = 0; i < params[p]->value.numel(); ++i) coords.emplace_back(p, i);
  Rng pick(0xC0DEu);
  for (size_t i = coords.size() - 1; i > 0; --i) std::swap(coords[i], coords[pick.uniform_int(0, static_cast<int>(i))]);
  const size_t n_sampled = std::min<size_t>(120, coords.size());
  expect(n_sampled >= 100, "needs at least 100 parameter coordinates to sample");

  // The objective is piecewise smooth (L1 kinks, ReLU corners); when a step of
  // h straddles a kink the difference quotient averages the two slopes, so a
  // miss at one step size retries at a finer one.
  double worst = 0.0;
  for (size_t k = 0; k < n_sampled; ++k) {
    auto [p, i] = coords[k];
    const double analytic = params[p]->grad.numel() > 0 ? params[p]->grad[i] : 0.0;
    const double theta = params[p]->value[i];
    double rel = 1.0, fd = 0.0;
    for (const double h : {1e-5, 1e-6}) {
      params[p]->value[i] = theta + h;
      const double up = generator_objective(model, batch, plan, w)->value[0];
      params[p]->value[i] = theta - h;
      const double down = generator_objective(model, batch, plan, w)->value[0];
      params[p]->value[i] = theta;
      fd = (up - down) / (2.0 * h);
      rel = std::fabs(analytic - fd) / std::max({std::fabs(analytic), std::fabs(fd), 1e-6});
      if (rel < 1e-2) break;
    }
    worst = std::max(worst, rel);
    expect(rel < 1e-2, "coordinate " + std::to_string(k) + " of " + params[p]->name + ": analytic " + fmt(analytic) +
                           " vs central difference " + fmt(fd) + " (rel " + fmt(rel) + ")");
  }
  note("worst relative error " + fmt(worst) + " over " + std::to_string(n_sampled) + " coordinates");
}

// ---------------------------------------------------------------- check 4

void check_association_fuzz() {
  Rng rng(0x50C1A1u);
  int64_t steps_seen = 0, coarse_on_fine = 0;
  auto rank = [](Granularity g) {
    switch (g) {
      case Granularity::global: return 0;
      case Granularity::half_scale: return 0;
      case Granularity::background: return 1;
      case Granularity::instance: return 2;
    }
    return 0;
  };
  for (int t = 0; t < 1000; ++t) {
    TrainBatch batch;
    for (int d = 0; d < 2; ++d) {
      const int items = rng.uniform_int(1, 2);
      for (int i = 0; i < items; ++i) {
        std::vector<InstanceBox> boxes;
        const int n_boxes = static_cast<int>(rng.uniform_int(0, 2));
        for (int b = 0; b < n_boxes; ++b) {
          const int w = static_cast<int>(rng.uniform_int(2, 4));
          const int hgt = static_cast<int>(rng.uniform_int(2, 4));
          boxes.push_back(InstanceBox{static_cast<int>(rng.uniform_int(0, 8 - w)),
                                      static_cast<int>(rng.uniform_int(0, 8 - hgt)), w, hgt});
        }
        ImageSample s = noise_sample(8, d, (d == 0 ? "x" : "y") + std::to_string(i), rng, std::move(boxes));
        batch.domains[static_cast<size_t>(d)].items.push_back(make_batch_item(s, 4, 2));
      }
    }
    PlanFlags flags;
    flags.cross_domain = (t % 2) != 0;
    flags.cross_granularity = (t / 2 % 2) != 0;
    flags.multi_scale = (t / 4 % 2) != 0;
    const CyclePlan plan = plan_cycles(bank_keys(batch), batch, flags, rng);
    validate_plan(plan);
    for (const PlanStep& s : plan.steps) {
      ++steps_seen;
      const Granularity sg = s.style.granularity();
      const Granularity cg = s.content.granularity;
      expect(rank(sg) <= rank(cg),
             "plan " + std::to_string(t) + " dresses " + granularity_name(cg) + " content in " + granularity_name(sg) +
                 " style");
      expect(!(sg == Granularity::instance && cg != Granularity::instance), "object style escaped its object");
      if (rank(sg) < 2 && cg == Granularity::instance) ++coarse_on_fine;
    }
  }
  expect(steps_seen > 0, "fuzz produced no steps");
  expect(coarse_on_fine > 0, "never saw a coarse style dressing object content; fuzz too narrow");
  note(std::to_string(steps_seen) + " steps across 1000 plans, " + std::to_string(coarse_on_fine) +
       " coarse-style-on-object pairings, 0 violations");
}

// ---------------------------------------------------------------- check 5

void check_metric_analytics() {
  // degenerate anchors
  const std::vector<double> uniform_row{0.25, 0.25, 0.25, 0.25};
  expect(std::fabs(inception_score({uniform_row, uniform_row, uniform_row}) - 1.0) < 1e-12,
         "identical rows must score exactly 1");
  const std::vector<std::vector<double>> onehots{
      {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  expect(std::fabs(inception_score(onehots) - 4.0) < 1e-6, "balanced one-hots over 4 classes must score 4");
  expect(std::fabs(conditional_inception_score({{uniform_row, uniform_row}, {{0.7, 0.1, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1}}}) -
                   1.0) < 1e-12,
         "constant per-input rows must score exactly 1");

  // random fixtures against direct summation
  Rng rng(0x15C15u);
  auto random_rows = [&](int n, int k) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < n; ++i) {
      std::vector<double> r(static_cast<size_t>(k));
      double sum = 0.0;
      for (double& v : r) sum += (v = rng.uniform(0.05, 1.0));
      for (double& v : r) v /= sum;
      rows.push_back(std::move(r));
    }
    return rows;
  };
  auto kl = [](const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    return s;
  };
  for (int t = 0; t < 10; ++t) {
    const auto rows = random_rows(12, 5);
    std::vector<double> marginal(5, 0.0);
    for (const auto& r : rows)
      for (size_t i = 0; i < r.size(); ++i) marginal[i] += r[i] / static_cast<double>(rows.size());
    double mean_kl = 0.0;
    for (const auto& r : rows) mean_kl += kl(r, marginal) / static_cast<double>(rows.size());
    const double oracle = std::exp(mean_kl);
    const double got = inception_score(rows);
    expect(std::fabs(got - oracle) < 1e-9, "score " + fmt(got) + " vs oracle " + fmt(oracle));
    expect(got >= 1.0 - 1e-12, "score below 1");
  }
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<std::vector<double>>> grouped;
    const int n_inputs = 3 + t % 3;
    for (int i = 0; i < n_inputs; ++i) grouped.push_back(random_rows(2 + (t + i) % 4, 4));
    double acc = 0.0;
    int64_t rows_total = 0;
    for (const auto& group : grouped) {
      std::vector<double> marginal(4, 0.0);
      for (const auto& r : group)
        for (size_t i = 0; i < r.size(); ++i) marginal[i] += r[i] / static_cast<double>(group.size());
      double per_input = 0.0;
      for (const auto& r : group) per_input += kl(r, marginal) / static_cast<double>(group.size());
      acc += per_input;
      rows_total += static_cast<int64_t>(group.size());
    }
    const double oracle = std::exp(acc / static_cast<double>(grouped.size()));
    const double got = conditional_inception_score(grouped);
    expect(std::fabs(got - oracle) < 1e-9,
           "conditional score " + fmt(got) + " vs oracle " + fmt(oracle) + " (" + std::to_string(rows_total) + " rows)");
  }
}

// ---------------------------------------------------------------- check 6

void check_toy_dynamics() {
  const fs::path dir = scratch_dir() / "toy";
  SyntheticSceneSpec spec;  // 64x64, 32 per domain
  spec.seed = 1;
  const auto manifests = generate_synthetic(spec, dir);
  auto pools = pools_from(manifests);

  TrainConfig cfg;
  cfg.iterations = 1000;
  cfg.image_size = 64;
  cfg.instance_size = 16;
  cfg.seed = 7;
  cfg.network.base_channels = 8;
  cfg.network.n_residual_blocks = 1;
  cfg.network.mlp_hidden = 16;
  cfg.network.discriminator_layers = 2;

  Trainer trainer(cfg, pools);
  const auto t0 = std::chrono::steady_clock::now();
  trainer.run();
  const double mins =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count() / 60000.0;
  expect(mins < 30.0, "training took " + fmt(mins) + " minutes");

  const auto& history = trainer.history();
  std::vector<double> head, tail;
  for (int i = 0; i < 100; ++i) head.push_back(history[static_cast<size_t>(i)].global_recon);
  for (int i = 900; i < 1000; ++i) tail.push_back(history[static_cast<size_t>(i)].global_recon);
  const double m_head = median(head), m_tail = median(tail);
  expect(m_tail < 0.5 * m_head,
         "reconstruction stalled: early median " + fmt(m_head) + ", late median " + fmt(m_tail));

  // hue migration of translated backgrounds
  const TranslationModel& model = trainer.state().model;
  std::vector<double> hues_x, hues_y, hues_t;
  for (const ImageSample& s : pools[0]) hues_x.push_back(background_hue(s.pixels, s.boxes));
  for (const ImageSample& s : pools[1]) hues_y.push_back(background_hue(s.pixels, s.boxes));
  for (size_t i = 0; i < pools[0].size(); ++i) {
    const ImageSample& s = pools[0][i];
    const Tensor out = translate(model, s.pixels, 0, 1, make_rng(99, {i}).next_u64());
    hues_t.push_back(background_hue(out, s.boxes));
  }
  const CircularStats cx = circular_hue_stats(hues_x);
  const CircularStats cy = circular_hue_stats(hues_y);
  const CircularStats ct = circular_hue_stats(hues_t);
  const double before = std::fabs(circular_diff(cx.mean, cy.mean));
  const double after = std::fabs(circular_diff(ct.mean, cy.mean));
  const double pooled = std::sqrt((cx.stddev * cx.stddev + cy.stddev * cy.stddev) / 2.0);
  note("hue gap to target: untranslated " + fmt(before) + ", translated " + fmt(after) + ", pooled std " +
       fmt(pooled) + " (" + fmt(mins) + " min)");
  expect(before - after >= 3.0 * pooled, "hue shift " + fmt(before - after) + " below 3x pooled std " + fmt(pooled));

  // styled variety
  std::vector<Tensor> inputs;
  for (size_t i = 0; i < 10; ++i) inputs.push_back(pools[0][i].pixels);
  const RandomConvExtractor extractor(17);
  const auto styled = [&](const Tensor& img, uint64_t seed) { return translate(model, img, 0, 1, seed); };
  const auto fixed = [&](const Tensor& img, uint64_t) { return translate(model, img, 0, 1, uint64_t{42}); };
  const double varied = diversity_score(styled, inputs, 10, 5, extractor, 123);
  const double frozen = diversity_score(fixed, inputs, 10, 5, extractor, 123);
  note("diversity " + fmt(varied) + " styled vs " + fmt(frozen) + " frozen-style");
  expect(varied > 0.0, "styled translations collapsed to a single output");
  expect(varied > frozen, "independent styles no more diverse than a frozen style");
}

// ---------------------------------------------------------------- check 7

void check_ablation_harness() {
  const fs::path dir = scratch_dir() / "ablate";
  json tree = default_run_config();
  apply_set_overrides(tree, {"out_dir=" + (dir / "run").string(), "synthetic.enabled=true", "synthetic.n_images=3",
                             "synthetic.image_size=24", "train.image_size=16", "train.instance_size=8",
                             "train.iterations=4", "network.base_channels=4", "network.n_residual_blocks=1",
                             "network.style_dim=4", "network.mlp_hidden=8", "network.discriminator_scales=1",
                             "network.discriminator_layers=2"});
  const json report = run_ablation(RunConfig{tree}, (dir / "out").string());

  expect(report.at("variants").is_array() && report.at("variants").size() == 5, "expected 5 variants");
  bool saw_shared = false, saw_separate = false;
  for (const json& row : report.at("variants")) {
    for (const char* key : {"name", "weight_sharing", "flags", "iterations", "final_loss", "median_total_last_quarter"})
      expect(row.contains(key), std::string("variant row missing '") + key + "'");
    expect(std::isfinite(row.at("final_loss").at("total").get<double>()), "variant total not finite");
    expect(std::isfinite(row.at("median_total_last_quarter").get<double>()), "variant median not finite");
    const std::string ws = row.at("weight_sharing").get<std::string>();
    if (row.at("name") == "shared_D") saw_shared = ws == "shared_D";
    if (row.at("name") == "separate_D") saw_separate = ws == "separate_D";
  }
  expect(saw_shared && saw_separate, "both discriminator-sharing settings must run");
  const json reread = json::parse(std::ifstream((dir / "out" / "ablation_report.json")));
  expect(reread.at("variants").size() == 5, "written report disagrees with the returned one");
}

// ---------------------------------------------------------------- check 8

void check_determinism() {
  const fs::path dir = scratch_dir() / "determinism";
  SyntheticSceneSpec spec;
  spec.image_size = 24;
  spec.n_images = 4;
  spec.seed = 2;
  auto pools = pools_from(generate_synthetic(spec, dir / "data"));

  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.image_size = 16;
  cfg.instance_size = 8;
  cfg.lr_generator = 1e-3;
  cfg.lr_discriminator = 1e-3;
  cfg.seed = 17;
  cfg.network = tiny_network();

  Trainer a(cfg, pools), b(cfg, pools);
  a.run();
  b.run();
  for (size_t i = 0; i < a.history().size(); ++i)
    expect(a.history()[i].to_json() == b.history()[i].to_json(),
           "iteration " + std::to_string(i) + " logs differ between identical runs");

  // interrupted vs straight-through
  TrainConfig half = cfg;
  half.iterations = 10;
  Trainer c(half, pools);
  c.run();
  save_checkpoint(c.state(), (dir / "ckpt").string());
  TrainState resumed = load_checkpoint((dir / "ckpt").string());
  resumed.config.iterations = 20;
  Trainer d(resumed, pools);
  d.run();
  for (size_t i = 0; i < d.history().size(); ++i) {
    const double full_total = a.history()[10 + i].total;
    const double resumed_total = d.history()[i].total;
    expect(std::fabs(full_total - resumed_total) <= 1e-5,
           "resumed iteration " + std::to_string(10 + i) + " drifted by " + fmt(std::fabs(full_total - resumed_total)));
  }
  const std::vector<double> pa = save_parameters(a.state().model);
  const std::vector<double> pd = save_parameters(d.state().model);
  double worst = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::fabs(pa[i] - pd[i]));
  expect(worst <= 1e-5, "resumed parameters drifted by " + fmt(worst));

  // translation and metric determinism
  const TranslationModel& model = a.state().model;
  const Tensor& img = pools[0][0].pixels;
  const Tensor t1 = translate(model, img, 0, 1, uint64_t{5});
  const Tensor t2 = translate(model, img, 0, 1, uint64_t{5});
  expect(t1.numel() == t2.numel(), "translation sizes differ");
  for (int64_t i = 0; i < t1.numel(); ++i) expect(t1[i] == t2[i], "translated pixels differ between identical calls");
  expect(quantize_u8(t1) == quantize_u8(t2), "translated bytes differ between identical calls");

  std::vector<Tensor> inputs;
  for (const ImageSample& s : pools[0]) inputs.push_back(s.pixels);
  const RandomConvExtractor extractor(7);
  const auto fn = [&](const Tensor& image, uint64_t seed) { return translate(model, image, 0, 1, seed); };
  const double m1 = diversity_score(fn, inputs, 3, 2, extractor, 9);
  const double m2 = diversity_score(fn, inputs, 3, 2, extractor, 9);
  expect(m1 == m2, "metric differs between identical runs");
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    void (*fn)();
  };
  const Check checks[] = {
      {"loss oracles", check_loss_oracles},
      {"adain statistics", check_adain_statistics},
      {"gradient check", check_gradients},
      {"association fuzz", check_association_fuzz},
      {"metric analytics", check_metric_analytics},
      {"toy training dynamics", check_toy_dynamics},
      {"ablation harness", check_ablation_harness},
      {"determinism", check_determinism},
  };
  const int total = static_cast<int>(sizeof(checks) / sizeof(checks[0]));
  int passed = 0;
  const auto t_all = std::chrono::steady_clock::now();
  for (int i = 0; i < total; ++i) {
    std::printf("[%d/%d] %-24s ", i + 1, total, checks[i].name);
    std::fflush(stdout);
    g_notes.clear();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      checks[i].fn();
      const double s =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count() / 1e3;
      std::printf("PASS (%.1fs)\n", s);
      ++passed;
    } catch (const std::exception& e) {
      std::printf("FAIL: %s\n", e.what());
    }
    for (const std::string& n : g_notes) std::printf("      %s\n", n.c_str());
    std::fflush(stdout);
  }
  const double s =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t_all).count() / 1e3;
  std::printf("acceptance: %d/%d passed (%.1fs)\n", passed, total, s);
  return passed == total ? 0 : 1;
}
