#include "instrans/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "instrans/errors.hpp"
#include "instrans/evaluation.hpp"
#include "instrans/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace instrans {

void to_json(json& j, const DomainPalette& p) {
  j = json{{"hue_lo", p.hue_lo},
           {"hue_hi", p.hue_hi},
           {"object_brightness_lo", p.object_brightness_lo},
           {"object_brightness_hi", p.object_brightness_hi}};
}

void from_json(const json& j, DomainPalette& p) {
  p.hue_lo = j.value("hue_lo", p.hue_lo);
  p.hue_hi = j.value("hue_hi", p.hue_hi);
  p.object_brightness_lo = j.value("object_brightness_lo", p.object_brightness_lo);
  p.object_brightness_hi = j.value("object_brightness_hi", p.object_brightness_hi);
}

void to_json(json& j, const SyntheticSceneSpec& s) {
  j = json{{"image_size", s.image_size},
           {"n_objects_lo", s.n_objects_lo},
           {"n_objects_hi", s.n_objects_hi},
           {"n_images", s.n_images},
           {"palette_x", s.palette_x},
           {"palette_y", s.palette_y},
           {"domain_names", s.domain_names},
           {"seed", s.seed}};
}

void from_json(const json& j, SyntheticSceneSpec& s) {
  s.image_size = j.value("image_size", s.image_size);
  s.n_objects_lo = j.value("n_objects_lo", s.n_objects_lo);
  s.n_objects_hi = j.value("n_objects_hi", s.n_objects_hi);
  s.n_images = j.value("n_images", s.n_images);
  if (j.contains("palette_x")) from_json(j.at("palette_x"), s.palette_x);
  if (j.contains("palette_y")) from_json(j.at("palette_y"), s.palette_y);
  if (j.contains("domain_names")) j.at("domain_names").get_to(s.domain_names);
  s.seed = j.value("seed", s.seed);
}

nlohmann::json default_run_config() {
  json train = TrainConfig{};
  train.erase("weights");
  train.erase("network");
  json synthetic = SyntheticSceneSpec{};
  synthetic["enabled"] = false;
  return json{{"out_dir", "runs/latest"},
              {"dataset",
               {{"manifest_x", ""}, {"manifest_y", ""}, {"split_seed", 7}, {"use_split", "train"}}},
              {"synthetic", synthetic},
              {"network", NetworkConfig{}},
              {"train", train},
              {"loss", LossWeights{}},
              {"eval",
               {{"n_inputs", 100},
                {"pairs_per_input", 19},
                {"extractor_seed", 17},
                {"splits", 1},
                {"probs_per_input", 19}}}};
}

namespace {

void check_known_keys(const json& defaults, const json& doc, const std::string& prefix) {
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + path);
    if (value.is_object() && defaults.at(key).is_object()) check_known_keys(defaults.at(key), value, path);
  }
}

json parse_override_value(const std::string& raw, const json& current) {
  if (current.is_string()) return raw;  // paths and names never get reinterpreted
  json parsed = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) return raw;
  return parsed;
}

[[noreturn]] void config_error_from_json(const nlohmann::json::exception& e) {
  throw ConfigError(std::string("config value has the wrong type: ") + e.what());
}

void print_final(const json& artifact) { std::cout << artifact.dump() << std::endl; }

ImageSample center_square(const ImageSample& sample, int size) {
  ImageSample s = resize_short_side(sample, size);
  const int h = s.height(), w = s.width();
  const int y0 = (h - size) / 2, x0 = (w - size) / 2;
  Tensor out({3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at(c, y, x) = s.pixels.at(c, y0 + y, x0 + x);
  ImageSample cropped;
  cropped.pixels = std::move(out);
  cropped.domain = s.domain;
  cropped.id = s.id;
  return cropped;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::vector<double>> read_probs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read probability table: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw DataError("probability table " + path + " has a non-numeric cell: '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// One row: source image followed by its styled translations.
Tensor contact_sheet(const Tensor& input, const std::vector<Tensor>& outputs) {
  const int s = input.dim(1);
  const int cols = 1 + static_cast<int>(outputs.size());
  Tensor sheet({3, s, s * cols});
  auto blit = [&](const Tensor& src, int col) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) sheet.at(c, y, col * s + x) = src.at(c, y, x);
  };
  blit(input, 0);
  for (size_t i = 0; i < outputs.size(); ++i) blit(outputs[i], 1 + static_cast<int>(i));
  return sheet;
}

struct EvalOptions {
  std::string checkpoint;
  std::string metrics = "is";
  std::string probs;
  std::string input;
  int source_domain = 0;
  int target_domain = 1;
  uint64_t seed = 1;
};

}  // namespace

TrainConfig RunConfig::train_config() const {
  try {
    TrainConfig cfg;
    from_json(tree.at("train"), cfg);
    from_json(tree.at("network"), cfg.network);
    from_json(tree.at("loss"), cfg.weights);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    config_error_from_json(e);
  }
}

SyntheticSceneSpec RunConfig::synthetic_spec() const {
  try {
    SyntheticSceneSpec spec;
    from_json(tree.at("synthetic"), spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    config_error_from_json(e);
  }
}

std::string RunConfig::out_dir() const { return tree.at("out_dir").get<std::string>(); }

void apply_set_overrides(json& tree, const std::vector<std::string>& sets) {
  for (const std::string& assignment : sets) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string dotted = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json* node = &tree;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown config key: " + dotted);
      node = &(*node)[parts[i]];
    }
    if (parts.empty() || !node->is_object() || !node->contains(parts.back()))
      throw ConfigError("unknown config key: " + dotted);
    json& slot = (*node)[parts.back()];
    slot = parse_override_value(raw, slot);
  }
}

RunConfig resolve_run_config(const std::string& config_path, const std::vector<std::string>& sets) {
  json tree = default_run_config();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config file: " + config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
    }
    check_known_keys(tree, file, "");
    tree.merge_patch(file);
  }
  apply_set_overrides(tree, sets);
  return RunConfig{std::move(tree)};
}

std::array<std::vector<ImageSample>, 2> load_pools(const RunConfig& cfg) {
  const json& dataset = cfg.tree.at("dataset");
  const std::string use = dataset.at("use_split").get<std::string>();
  if (use != "train" && use != "val" && use != "all")
    throw ConfigError("dataset.use_split must be train, val, or all");
  const uint64_t split_seed = dataset.at("split_seed").get<uint64_t>();

  std::array<DatasetManifest, 2> manifests;
  if (cfg.tree.at("synthetic").at("enabled").get<bool>()) {
    const fs::path data_dir = fs::path(cfg.out_dir()) / "data";
    auto [mx, my] = generate_synthetic(cfg.synthetic_spec(), data_dir);
    manifests = {std::move(mx), std::move(my)};
  } else {
    const std::string mx = dataset.at("manifest_x").get<std::string>();
    const std::string my = dataset.at("manifest_y").get<std::string>();
    if (mx.empty() || my.empty())
      throw ConfigError("no dataset configured: set dataset.manifest_x and dataset.manifest_y, or pass --synthetic");
    manifests = {load_manifest(mx), load_manifest(my)};
  }

  std::array<std::vector<ImageSample>, 2> pools;
  for (int d = 0; d < 2; ++d) {
    const DatasetManifest& m = manifests[static_cast<size_t>(d)];
    auto [train_ids, val_ids] = split(m, split_seed);
    std::vector<std::string> ids;
    if (use == "train")
      ids = std::move(train_ids);
    else if (use == "val")
      ids = std::move(val_ids);
    else
      for (const auto& im : m.images) ids.push_back(im.id);
    for (const std::string& id : ids) pools[static_cast<size_t>(d)].push_back(load_sample(m, id, d));
  }
  return pools;
}

namespace {

int cmd_synth(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  auto [mx, my] = generate_synthetic(cfg.synthetic_spec(), out);
  std::cout << mx.images.size() << " + " << my.images.size() << " images under " << out.string() << "\n";
  print_final(json{{"command", "synth"},
                   {"out_dir", out.string()},
                   {"manifests", {mx.annotation_file.string(), my.annotation_file.string()}},
                   {"images_per_domain", mx.images.size()}});
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const std::string out = cfg.out_dir();
  fs::create_directories(out);
  auto pools = load_pools(cfg);
  Trainer trainer(cfg.train_config(), std::move(pools));
  {
    std::ofstream cfg_copy(fs::path(out) / "run_config.json", std::ios::trunc);
    cfg_copy << cfg.tree.dump(2) << "\n";
  }
  const std::string log = (fs::path(out) / "train_log.jsonl").string();
  const std::string ckpt_dir = (fs::path(out) / "checkpoints").string();
  trainer.run(log, ckpt_dir);
  print_final(json{{"command", "train"},
                   {"iterations", trainer.state().iteration},
                   {"out_dir", out},
                   {"log", log},
                   {"checkpoint", ckpt_dir + "/final"},
                   {"final_loss", json::parse(trainer.history().back().to_json())}});
  return 0;
}

int cmd_translate(const std::string& checkpoint, const std::string& input_dir, int source_domain, int target_domain,
                  int n_styles, uint64_t seed, const std::string& out_dir) {
  if (n_styles < 1) throw ConfigError("n_styles must be positive");
  if (target_domain < 0 || target_domain > 1) throw ConfigError("target domain must be 0 or 1");
  const int src = source_domain >= 0 ? source_domain : 1 - target_domain;
  TrainState state = load_checkpoint(checkpoint);
  const int size = state.config.image_size;

  const std::vector<fs::path> files = list_images(input_dir);
  if (files.empty()) throw DataError("no images found in " + input_dir);
  fs::create_directories(out_dir);

  std::vector<uint64_t> style_seeds;
  for (int k = 0; k < n_styles; ++k)
    style_seeds.push_back(make_rng(seed, {0x57A1Eull, static_cast<uint64_t>(k)}).next_u64());

  json outputs = json::array();
  int written = 0;
  for (const fs::path& file : files) {
    ImageSample raw;
    raw.pixels = load_image_chw(file);
    raw.domain = DomainId{"", src};
    raw.id = file.stem().string();
    const ImageSample prepared = center_square(raw, size);
    std::vector<Tensor> outs;
    for (int k = 0; k < n_styles; ++k) {
      outs.push_back(translate(state.model, prepared.pixels, src, target_domain, style_seeds[static_cast<size_t>(k)]));
      const fs::path dst = fs::path(out_dir) / (prepared.id + "_s" + std::to_string(k) + ".png");
      save_image_chw(dst, outs.back());
      outputs.push_back(dst.string());
      ++written;
    }
    const fs::path sheet = fs::path(out_dir) / (prepared.id + "_sheet.png");
    save_image_chw(sheet, contact_sheet(prepared.pixels, outs));
    outputs.push_back(sheet.string());
  }
  print_final(json{{"command", "translate"},
                   {"inputs", files.size()},
                   {"outputs", written},
                   {"sheets", files.size()},
                   {"out_dir", out_dir},
                   {"files", outputs}});
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const EvalOptions& opt) {
  const json& eval = cfg.tree.at("eval");
  const std::string out = cfg.out_dir();
  fs::create_directories(out);

  std::vector<std::string> wanted;
  std::stringstream ss(opt.metrics);
  for (std::string m; std::getline(ss, m, ',');)
    if (!m.empty()) wanted.push_back(m);
  if (wanted.empty()) throw ConfigError("no metrics requested");

  json report_paths = json::object();
  for (const std::string& metric : wanted) {
    MetricReport report;
    report.metric = metric;
    report.seed = opt.seed;
    if (metric == "is" || metric == "cis") {
      if (opt.probs.empty()) throw ConfigError("metric '" + metric + "' needs --probs");
      const auto rows = read_probs_csv(opt.probs);
      if (metric == "is") {
        report.value = inception_score(rows, eval.at("splits").get<int>());
        report.n_inputs = static_cast<int>(rows.size());
      } else {
        const int per = eval.at("probs_per_input").get<int>();
        if (per < 2) throw ConfigError("eval.probs_per_input must be at least 2");
        if (rows.empty() || rows.size() % static_cast<size_t>(per) != 0)
          throw DataError("probability rows (" + std::to_string(rows.size()) + ") do not divide into groups of " +
                          std::to_string(per));
        std::vector<std::vector<std::vector<double>>> grouped;
        for (size_t at = 0; at < rows.size(); at += static_cast<size_t>(per))
          grouped.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(at),
                               rows.begin() + static_cast<std::ptrdiff_t>(at + static_cast<size_t>(per)));
        report.value = conditional_inception_score(grouped);
        report.n_inputs = static_cast<int>(grouped.size());
        report.n_pairs = per;
      }
    } else if (metric == "diversity") {
      if (opt.checkpoint.empty()) throw ConfigError("metric 'diversity' needs --checkpoint");
      if (opt.input.empty()) throw ConfigError("metric 'diversity' needs --input");
      TrainState state = load_checkpoint(opt.checkpoint);
      std::vector<Tensor> inputs;
      for (const fs::path& file : list_images(opt.input)) {
        ImageSample raw;
        raw.pixels = load_image_chw(file);
        raw.id = file.stem().string();
        inputs.push_back(center_square(raw, state.config.image_size).pixels);
      }
      RandomConvExtractor extractor(eval.at("extractor_seed").get<uint64_t>());
      report.n_inputs = eval.at("n_inputs").get<int>();
      report.n_pairs = eval.at("pairs_per_input").get<int>();
      report.extractor_id = extractor.id();
      report.value = diversity_score(state.model, opt.source_domain, opt.target_domain, inputs, report.n_inputs,
                                     report.n_pairs, extractor, opt.seed);
    } else if (metric == "styles") {
      if (opt.checkpoint.empty()) throw ConfigError("metric 'styles' needs --checkpoint");
      TrainState state = load_checkpoint(opt.checkpoint);
      auto pools = load_pools(cfg);
      std::vector<ImageSample> samples;
      for (auto& pool : pools)
        for (auto& s : pool) samples.push_back(std::move(s));
      const fs::path csv = fs::path(out) / "style_codes.csv";
      export_style_codes(state.model, samples, state.config.instance_size, csv.string());
      report.value = static_cast<double>(samples.size());
      report.n_inputs = static_cast<int>(samples.size());
      report_paths["styles_csv"] = csv.string();
    } else {
      throw ConfigError("unknown metric: " + metric);
    }
    const fs::path path = fs::path(out) / ("metric_" + metric + ".json");
    std::ofstream file(path, std::ios::trunc);
    file << report.to_json() << "\n";
    if (!file) throw DataError("cannot write metric report: " + path.string());
    std::cout << report.to_json() << "\n";
    report_paths[metric] = path.string();
  }
  print_final(json{{"command", "evaluate"}, {"out_dir", out}, {"reports", report_paths}});
  return 0;
}

int cmd_dataset_stats(const std::string& manifest_path, uint64_t seed) {
  const DatasetManifest m = load_manifest(manifest_path);
  auto [train_ids, val_ids] = split(m, seed);
  json domains = json::object();
  for (const auto& im : m.images) {
    const auto it = domains.find(im.domain);
    domains[im.domain] = (it == domains.end() ? 0 : it->get<int>()) + 1;
  }
  std::cout << m.images.size() << " images, " << m.total_boxes() << " boxes, split " << train_ids.size() << "/"
            << val_ids.size() << "\n";
  for (const auto& [name, count] : domains.items())
    std::cout << "  " << name << ": " << count.get<int>() << " images\n";
  print_final(json{{"command", "dataset-stats"},
                   {"manifest", manifest_path},
                   {"images", m.images.size()},
                   {"boxes", m.total_boxes()},
                   {"train", train_ids.size()},
                   {"val", val_ids.size()},
                   {"domains", domains}});
  return 0;
}

}  // namespace

nlohmann::json run_ablation(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto pools = load_pools(cfg);
  const TrainConfig base = cfg.train_config();

  struct Variant {
    std::string name;
    void (*tweak)(TrainConfig&);
  };
  const std::vector<Variant> variants = {
      {"shared_D", [](TrainConfig& c) { c.network.weight_sharing = WeightSharing::shared_D; }},
      {"separate_D", [](TrainConfig& c) { c.network.weight_sharing = WeightSharing::separate_D; }},
      {"no_cross_granularity", [](TrainConfig& c) { c.flags.cross_granularity = false; }},
      {"no_cross_domain", [](TrainConfig& c) { c.flags.cross_domain = false; }},
      {"no_multi_scale", [](TrainConfig& c) { c.flags.multi_scale = false; }},
  };

  json rows = json::array();
  for (const Variant& variant : variants) {
    TrainConfig tc = base;
    variant.tweak(tc);
    Trainer trainer(tc, pools);
    trainer.run((fs::path(out_dir) / ("ablate_" + variant.name + ".jsonl")).string());
    const auto& history = trainer.history();
    std::vector<double> tail;
    for (size_t i = history.size() - std::min<size_t>(history.size(), (history.size() + 3) / 4); i < history.size();
         ++i)
      tail.push_back(history[i].total);
    std::sort(tail.begin(), tail.end());
    const double median_tail = tail[tail.size() / 2];
    rows.push_back(json{{"name", variant.name},
                        {"weight_sharing", tc.network.weight_sharing == WeightSharing::shared_D ? "shared_D"
                                                                                                : "separate_D"},
                        {"flags", tc.flags},
                        {"iterations", tc.iterations},
                        {"final_loss", json::parse(history.back().to_json())},
                        {"median_total_last_quarter", median_tail}});
  }
  json report{{"command", "ablate"}, {"iterations", base.iterations}, {"out_dir", out_dir}, {"variants", rows}};
  std::ofstream out(fs::path(out_dir) / "ablation_report.json", std::ios::trunc);
  out << report.dump(2) << "\n";
  if (!out) throw DataError("cannot write ablation report under " + out_dir);
  return report;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"instance-aware unpaired image-to-image translation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_override;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file layered over defaults");
    cmd->add_option("--set", sets, "dotted config override, e.g. --set loss.lambda_g=0");
    cmd->add_option("--out", out_override, "output directory (shorthand for --set out_dir=...)");
  };

  auto* synth = app.add_subcommand("synth", "render the synthetic two-domain corpus");
  add_common(synth);
  uint64_t synth_seed = 0;
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "synthetic generator seed");

  auto* train = app.add_subcommand("train", "run the optimization loop");
  add_common(train);
  bool synthetic_flag = false;
  int iterations_flag = 0;
  uint64_t train_seed = 0;
  train->add_flag("--synthetic", synthetic_flag, "generate and train on the synthetic corpus");
  auto* iters_opt = train->add_option("--iterations", iterations_flag, "training iterations");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "training seed");

  auto* translate_cmd = app.add_subcommand("translate", "translate a directory of images");
  add_common(translate_cmd);
  std::string ckpt, input_dir;
  int target_domain = 1, source_domain = -1, n_styles = 3;
  uint64_t translate_seed = 1;
  translate_cmd->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
  translate_cmd->add_option("--input", input_dir, "directory of source images")->required();
  translate_cmd->add_option("--target-domain", target_domain, "decode into this domain (0 or 1)");
  translate_cmd->add_option("--source-domain", source_domain, "encode from this domain (default: the other one)");
  translate_cmd->add_option("--n-styles", n_styles, "styles sampled per input");
  translate_cmd->add_option("--seed", translate_seed, "style sampling seed");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "compute metrics and reports");
  add_common(evaluate_cmd);
  EvalOptions eval_opt;
  evaluate_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint directory");
  evaluate_cmd->add_option("--metrics", eval_opt.metrics, "comma list: diversity,is,cis,styles");
  evaluate_cmd->add_option("--probs", eval_opt.probs, "CSV of probability rows for is/cis");
  evaluate_cmd->add_option("--input", eval_opt.input, "directory of source images for diversity");
  evaluate_cmd->add_option("--source-domain", eval_opt.source_domain, "source domain index");
  evaluate_cmd->add_option("--target-domain", eval_opt.target_domain, "target domain index");
  evaluate_cmd->add_option("--seed", eval_opt.seed, "metric protocol seed");

  auto* stats = app.add_subcommand("dataset-stats", "print corpus statistics");
  add_common(stats);
  std::string manifest_path;
  uint64_t stats_seed = 7;
  stats->add_option("--manifest", manifest_path, "annotation JSON")->required();
  stats->add_option("--seed", stats_seed, "split seed");

  auto* ablate = app.add_subcommand("ablate", "train every ablation variant and compare");
  add_common(ablate);
  int ablate_iterations = 0;
  uint64_t ablate_seed = 0;
  auto* ablate_iters_opt = ablate->add_option("--iterations", ablate_iterations, "iterations per variant");
  auto* ablate_seed_opt = ablate->add_option("--seed", ablate_seed, "training seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    // named flags are sugar for --set entries, appended so they win
    if (!out_override.empty()) sets.push_back("out_dir=" + out_override);
    if (synthetic_flag) sets.push_back("synthetic.enabled=true");
    if (*iters_opt) sets.push_back("train.iterations=" + std::to_string(iterations_flag));
    if (*train_seed_opt) sets.push_back("train.seed=" + std::to_string(train_seed));
    if (*synth_seed_opt) sets.push_back("synthetic.seed=" + std::to_string(synth_seed));
    if (*ablate_iters_opt) sets.push_back("train.iterations=" + std::to_string(ablate_iterations));
    if (*ablate_seed_opt) sets.push_back("train.seed=" + std::to_string(ablate_seed));
    const RunConfig cfg = resolve_run_config(config_path, sets);

    if (*synth) return cmd_synth(cfg);
    if (*train) return cmd_train(cfg);
    if (*translate_cmd)
      return cmd_translate(ckpt, input_dir, source_domain, target_domain, n_styles, translate_seed, cfg.out_dir());
    if (*evaluate_cmd) return cmd_evaluate(cfg, eval_opt);
    if (*stats) return cmd_dataset_stats(manifest_path, stats_seed);
    if (*ablate) {
      const json report = run_ablation(cfg, cfg.out_dir());
      print_final(json{{"command", "ablate"},
                       {"report", (fs::path(cfg.out_dir()) / "ablation_report.json").string()},
                       {"variants", report.at("variants").size()}});
      return 0;
    }
    throw ConfigError("no command selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace instrans
