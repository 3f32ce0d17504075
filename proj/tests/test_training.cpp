#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "instrans/errors.hpp"
#include "instrans/training.hpp"

using namespace instrans;
using ad::Var;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.image_size = 16;
  cfg.instance_size = 8;
  cfg.lr_generator = 1e-3;
  cfg.lr_discriminator = 1e-3;
  cfg.seed = 11;
  cfg.network.base_channels = 4;
  cfg.network.n_residual_blocks = 1;
  cfg.network.style_dim = 4;
  cfg.network.mlp_hidden = 8;
  cfg.network.discriminator_scales = 1;
  cfg.network.discriminator_layers = 2;
  return cfg;
}

ImageSample noise_sample(const DomainId& domain, const std::string& id, uint64_t seed, bool with_box = true) {
  Rng rng(seed);
  ImageSample s;
  s.pixels = Tensor::uniform({3, 16, 16}, rng, -0.9, 0.9);
  s.domain = domain;
  s.id = id;
  if (with_box) s.boxes.push_back({4, 4, 8, 8, Category::synthetic});
  return s;
}

std::array<std::vector<ImageSample>, 2> noise_pools() {
  std::array<std::vector<ImageSample>, 2> pools;
  for (int d = 0; d < 2; ++d) {
    DomainId dom{d == 0 ? "x" : "y", d};
    for (int i = 0; i < 3; ++i)
      pools[static_cast<size_t>(d)].push_back(
          noise_sample(dom, dom.name + std::to_string(i), 100 * static_cast<uint64_t>(d) + static_cast<uint64_t>(i)));
  }
  return pools;
}

bool reports_equal(const LossReport& a, const LossReport& b) {
  auto eq = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
  return eq(a.global_recon, b.global_recon) && eq(a.instance_recon, b.instance_recon) &&
         eq(a.content_recon_global, b.content_recon_global) &&
         eq(a.content_recon_instance, b.content_recon_instance) && eq(a.style_recon_global, b.style_recon_global) &&
         eq(a.style_recon_instance, b.style_recon_instance) && eq(a.cycle_global, b.cycle_global) &&
         eq(a.cycle_instance, b.cycle_instance) && eq(a.gan_generator, b.gan_generator) &&
         eq(a.gan_discriminator, b.gan_discriminator) && eq(a.total, b.total);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("config validation rejects out-of-range settings") {
  TrainConfig cfg = tiny_train_config();
  cfg.iterations = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = tiny_train_config();
  cfg.lr_generator = -1e-4;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = tiny_train_config();
  cfg.adam_beta2 = 1.0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = tiny_train_config();
  cfg.image_size = 20;  // half-scale view would not divide by 4
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  CHECK_NOTHROW(validate_train_config(tiny_train_config()));
}

TEST_CASE("train config survives a json round trip") {
  TrainConfig cfg = tiny_train_config();
  cfg.weights.lambda_o = 7.5;
  cfg.flags.multi_scale = false;
  cfg.network.weight_sharing = WeightSharing::separate_D;
  nlohmann::json j = cfg;
  TrainConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);

  // partial documents override only the keys they carry
  TrainConfig layered = tiny_train_config();
  from_json(nlohmann::json{{"iterations", 42}, {"weights", {{"lambda_g", 3.0}}}}, layered);
  CHECK(layered.iterations == 42);
  CHECK(layered.weights.lambda_g == 3.0);
  CHECK(layered.weights.lambda_o == 10.0);
  CHECK(layered.image_size == 16);
  CHECK_THROWS_AS(from_json(nlohmann::json{{"network", {{"weight_sharing", "mystery"}}}}, layered), ConfigError);
}

TEST_CASE("adam walks a quadratic to its minimum") {
  Var p = ad::parameter(Tensor::scalar(0.0), "p");
  Adam opt({p}, 0.1, 0.9, 0.999, 0.0);
  for (int i = 0; i < 300; ++i) {
    Var loss = ad::square(ad::add_scalar(p, -3.0));
    ad::backward(loss);
    opt.step();
  }
  CHECK(p->value[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("adam state round-trips and rejects the wrong size") {
  Rng rng(3);
  Var p = ad::parameter(Tensor::uniform({4}, rng, -1, 1), "p");
  Var q = ad::parameter(Tensor::uniform({4}, rng, -1, 1), "q");
  auto run = [&](Adam& opt, int steps) {
    for (int i = 0; i < steps; ++i) {
      Var loss = ad::add(ad::mean_all(ad::square(p)), ad::mean_all(ad::square(q)));
      ad::backward(loss);
      opt.step();
    }
  };
  Adam opt({p, q}, 0.05, 0.5, 0.999, 1e-4);
  run(opt, 5);
  const std::vector<double> snap = opt.serialize();
  const Tensor p_snap = p->value;
  const Tensor q_snap = q->value;
  run(opt, 5);
  const Tensor p_end = p->value;

  // rewind both values and the optimizer; the replay must land on the same spot
  p->value = p_snap;
  q->value = q_snap;
  Adam opt2({p, q}, 0.05, 0.5, 0.999, 1e-4);
  opt2.restore(snap);
  CHECK(opt2.steps_taken() == 5);
  CHECK(opt2.serialize() == snap);
  run(opt2, 5);
  REQUIRE(p->value.numel() == p_end.numel());
  for (int64_t k = 0; k < p_end.numel(); ++k) CHECK(p->value[k] == p_end[k]);

  CHECK_THROWS_AS(opt2.restore(std::vector<double>(3, 0.0)), DataError);
}

TEST_CASE("zero learning rates leave parameters untouched but report losses") {
  TrainConfig cfg = tiny_train_config();
  cfg.lr_generator = 0.0;
  cfg.lr_discriminator = 0.0;
  Trainer tr(cfg, noise_pools());
  const std::vector<double> before = save_parameters(tr.state().model);
  const LossReport r = tr.step();
  const std::vector<double> after = save_parameters(tr.state().model);
  CHECK(before == after);
  CHECK(std::isfinite(r.total));
  CHECK(r.total > 0.0);
  CHECK(r.gan_discriminator > 0.0);
  CHECK(tr.state().iteration == 1);
}

TEST_CASE("two trainers with one seed emit identical report streams") {
  Trainer a(tiny_train_config(), noise_pools());
  Trainer b(tiny_train_config(), noise_pools());
  for (int i = 0; i < 3; ++i) {
    const LossReport ra = a.step();
    const LossReport rb = b.step();
    CHECK(reports_equal(ra, rb));
  }
  CHECK(save_parameters(a.state().model) == save_parameters(b.state().model));
}

TEST_CASE("each side's update leaves the other side's parameters bit-identical") {
  auto g_blob = [](const TranslationModel& m) {
    std::vector<double> out;
    for (const auto& p : m.generator_parameters())
      for (int64_t k = 0; k < p->value.numel(); ++k) out.push_back(p->value[k]);
    return out;
  };
  auto d_blob = [](const TranslationModel& m) {
    std::vector<double> out;
    for (const auto& p : m.discriminator_parameters())
      for (int64_t k = 0; k < p->value.numel(); ++k) out.push_back(p->value[k]);
    return out;
  };

  TrainConfig cfg = tiny_train_config();
  cfg.lr_discriminator = 0.0;
  Trainer only_g(cfg, noise_pools());
  auto g0 = g_blob(only_g.state().model);
  auto d0 = d_blob(only_g.state().model);
  only_g.step();
  CHECK(d_blob(only_g.state().model) == d0);
  CHECK(g_blob(only_g.state().model) != g0);

  cfg = tiny_train_config();
  cfg.lr_generator = 0.0;
  Trainer only_d(cfg, noise_pools());
  g0 = g_blob(only_d.state().model);
  d0 = d_blob(only_d.state().model);
  only_d.step();
  CHECK(g_blob(only_d.state().model) == g0);
  CHECK(d_blob(only_d.state().model) != d0);
}

TEST_CASE("multi_scale plans run at least one half-scale reconstruction per iteration") {
  Trainer tr(tiny_train_config(), noise_pools());
  tr.step();
  int half_steps = 0;
  for (const auto& s : tr.state().last_plan.steps)
    if (s.kind == StepKind::scale_recon && s.content.granularity == Granularity::half_scale) ++half_steps;
  CHECK(half_steps >= 1);

  TrainConfig cfg = tiny_train_config();
  cfg.flags.multi_scale = false;
  Trainer flat(cfg, noise_pools());
  flat.step();
  CHECK(flat.state().last_plan.count(StepKind::scale_recon) == 0);
}

TEST_CASE("report total equals its weighted recomputation") {
  Trainer tr(tiny_train_config(), noise_pools());
  const LossReport r = tr.step();
  CHECK(r.total == doctest::Approx(r.weighted_total(tiny_train_config().weights)).epsilon(1e-9));
}

TEST_CASE("translate needs no boxes and is deterministic per style") {
  auto model = TranslationModel::create(tiny_train_config().network, 5);
  ImageSample plain = noise_sample({"x", 0}, "plain", 77, /*with_box=*/false);

  StyleCode style;
  Rng rng(6);
  style.vector = Tensor::randn({4}, rng);
  const Tensor out1 = translate(model, plain.pixels, 0, 1, style);
  const Tensor out2 = translate(model, plain.pixels, 0, 1, style);
  CHECK(out1.shape() == plain.pixels.shape());
  REQUIRE(out1.numel() == out2.numel());
  for (int64_t i = 0; i < out1.numel(); ++i) REQUIRE(out1[i] == out2[i]);

  const Tensor pa = translate(model, plain.pixels, 0, 1, uint64_t{1});
  const Tensor pb = translate(model, plain.pixels, 0, 1, uint64_t{2});
  double mean_gap = 0;
  for (int c = 0; c < 3; ++c) {
    double ma = 0, mb = 0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        ma += pa.at(c, y, x);
        mb += pb.at(c, y, x);
      }
    mean_gap += std::abs(ma - mb) / 256.0;
  }
  CHECK(mean_gap > 1e-8);

  StyleCode bad;
  bad.vector = Tensor::zeros({7});
  CHECK_THROWS_AS(translate(model, plain.pixels, 0, 1, bad), ShapeError);
}

TEST_CASE("checkpoints round-trip and resumed training matches uninterrupted") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "instrans_ckpt_test";
  fs::remove_all(dir);

  TrainConfig cfg = tiny_train_config();
  cfg.iterations = 6;
  Trainer ref(cfg, noise_pools());
  Trainer split_run(cfg, noise_pools());
  for (int i = 0; i < 3; ++i) {
    ref.step();
    split_run.step();
  }
  save_checkpoint(split_run.state(), dir.string());

  Trainer resumed(load_checkpoint(dir.string()), noise_pools());
  CHECK(resumed.state().iteration == 3);
  CHECK(nlohmann::json(resumed.state().config) == nlohmann::json(cfg));
  CHECK(save_parameters(resumed.state().model) == save_parameters(split_run.state().model));

  for (int i = 0; i < 3; ++i) {
    const LossReport want = ref.step();
    const LossReport got = resumed.step();
    CHECK(std::abs(want.total - got.total) <= 1e-5);
    CHECK(reports_equal(want, got));
  }

  fs::remove_all(dir);
}

TEST_CASE("checkpoint loading rejects missing and tampered directories") {
  namespace fs = std::filesystem;
  CHECK_THROWS_AS(load_checkpoint((fs::temp_directory_path() / "instrans_no_such_ckpt").string()), DataError);

  const fs::path dir = fs::temp_directory_path() / "instrans_ckpt_tampered";
  fs::remove_all(dir);
  TrainConfig cfg = tiny_train_config();
  Trainer tr(cfg, noise_pools());
  save_checkpoint(tr.state(), dir.string());

  // bump the version field
  nlohmann::json meta;
  {
    std::ifstream in(dir / "meta.json");
    meta = nlohmann::json::parse(in);
  }
  meta["format_version"] = kCheckpointVersion + 1;
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    out << meta.dump(2);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.string()), doctest::Contains("version"), DataError);

  fs::remove_all(dir);
}

TEST_CASE("training writes a parseable jsonl log") {
  namespace fs = std::filesystem;
  const fs::path log = fs::temp_directory_path() / "instrans_train_log.jsonl";
  fs::remove(log);
  TrainConfig cfg = tiny_train_config();
  cfg.iterations = 2;
  Trainer tr(cfg, noise_pools());
  tr.run(log.string());
  std::ifstream in(log);
  REQUIRE(in.good());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("iteration").get<int>() == lines);
    CHECK(j.contains("total"));
    CHECK(j.contains("wall_ms"));
    ++lines;
  }
  CHECK(lines == 2);
  fs::remove(log);
}

}  // TEST_SUITE
