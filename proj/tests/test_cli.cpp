#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "instrans/cli.hpp"
#include "instrans/errors.hpp"
#include "instrans/losses.hpp"

using namespace instrans;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("instrans_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int run_tool(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(INSTRANS_TOOL_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string captured;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) captured.append(buf, n);
  const int status = pclose(pipe);
  if (out) *out = captured;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json last_json_line(const std::string& out) {
  std::stringstream ss(out);
  std::string line, found;
  while (std::getline(ss, line))
    if (!line.empty() && line.front() == '{') found = line;
  REQUIRE(!found.empty());
  return json::parse(found);
}

// small everything: 24px scenes, 16px crops, skeleton networks
const std::string kTiny =
    " --set synthetic.n_images=4 --set synthetic.image_size=24"
    " --set train.image_size=16 --set train.instance_size=8"
    " --set network.base_channels=4 --set network.n_residual_blocks=1"
    " --set network.style_dim=4 --set network.mlp_hidden=8"
    " --set network.discriminator_scales=1 --set network.discriminator_layers=2";

LossReport report_from_json(const json& j) {
  LossReport r;
  r.global_recon = j.at("global_recon").get<double>();
  r.instance_recon = j.at("instance_recon").get<double>();
  r.content_recon_global = j.at("content_recon_global").get<double>();
  r.content_recon_instance = j.at("content_recon_instance").get<double>();
  r.style_recon_global = j.at("style_recon_global").get<double>();
  r.style_recon_instance = j.at("style_recon_instance").get<double>();
  r.cycle_global = j.at("cycle_global").get<double>();
  r.cycle_instance = j.at("cycle_instance").get<double>();
  r.gan_generator = j.at("gan_generator").get<double>();
  r.gan_discriminator = j.at("gan_discriminator").get<double>();
  r.total = j.at("total").get<double>();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("defaults cover every section") {
    const json d = default_run_config();
    for (const char* key : {"out_dir", "dataset", "synthetic", "network", "train", "loss", "eval"})
      CHECK(d.contains(key));
    CHECK_FALSE(d.at("train").contains("weights"));
    CHECK_FALSE(d.at("train").contains("network"));
    CHECK(d.at("loss").at("lambda_g").get<double>() == 10.0);
    CHECK(d.at("synthetic").at("enabled").get<bool>() == false);
    CHECK(d.at("eval").at("pairs_per_input").get<int>() == 19);
  }

  TEST_CASE("set overrides parse scalars and keep strings") {
    json tree = default_run_config();
    apply_set_overrides(tree, {"train.iterations=42", "train.lr_generator=0.5", "synthetic.enabled=true",
                               "loss.lambda_g=0", "out_dir=runs/x", "dataset.use_split=val"});
    CHECK(tree.at("train").at("iterations").get<int>() == 42);
    CHECK(tree.at("train").at("lr_generator").get<double>() == 0.5);
    CHECK(tree.at("synthetic").at("enabled").get<bool>() == true);
    CHECK(tree.at("loss").at("lambda_g").get<double>() == 0.0);
    CHECK(tree.at("out_dir").is_string());
    CHECK(tree.at("out_dir").get<std::string>() == "runs/x");
    // string-typed keys never get reinterpreted, even when the value parses as JSON
    apply_set_overrides(tree, {"dataset.manifest_x=123"});
    CHECK(tree.at("dataset").at("manifest_x").get<std::string>() == "123");
  }

  TEST_CASE("set override rejections") {
    json tree = default_run_config();
    CHECK_THROWS_AS(apply_set_overrides(tree, {"nope=1"}), ConfigError);
    CHECK_THROWS_AS(apply_set_overrides(tree, {"train.nope=1"}), ConfigError);
    CHECK_THROWS_AS(apply_set_overrides(tree, {"loss.lambda_g.deeper=1"}), ConfigError);
    CHECK_THROWS_AS(apply_set_overrides(tree, {"no_equals"}), ConfigError);
    CHECK_THROWS_AS(apply_set_overrides(tree, {"=5"}), ConfigError);
  }

  TEST_CASE("three config layers, later wins") {
    TempDir dir("layers");
    const fs::path cfg_path = dir.path / "run.json";
    {
      std::ofstream f(cfg_path);
      f << R"({"train": {"iterations": 7}, "loss": {"lambda_o": 3}})";
    }
    const RunConfig cfg = resolve_run_config(cfg_path.string(), {"train.iterations=9"});
    const TrainConfig tc = cfg.train_config();
    CHECK(tc.iterations == 9);            // --set beats the file
    CHECK(tc.weights.lambda_o == 3.0);    // file beats the default
    CHECK(tc.weights.lambda_g == 10.0);   // untouched default
    CHECK(tc.batch_size == 1);

    {
      std::ofstream f(cfg_path);
      f << R"({"trian": {"iterations": 7}})";
    }
    CHECK_THROWS_AS(resolve_run_config(cfg_path.string(), {}), ConfigError);
    {
      std::ofstream f(cfg_path);
      f << "{not json";
    }
    CHECK_THROWS_AS(resolve_run_config(cfg_path.string(), {}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config((dir.path / "absent.json").string(), {}), ConfigError);
  }

  TEST_CASE("train_config pulls from all three sections") {
    json tree = default_run_config();
    apply_set_overrides(tree, {"loss.lambda_g=2.5", "network.base_channels=4", "train.flags.multi_scale=false",
                               "train.seed=99"});
    const TrainConfig tc = RunConfig{tree}.train_config();
    CHECK(tc.weights.lambda_g == 2.5);
    CHECK(tc.network.base_channels == 4);
    CHECK(tc.flags.multi_scale == false);
    CHECK(tc.flags.cross_domain == true);
    CHECK(tc.seed == 99);
  }

  TEST_CASE("synth then stats round trip") {
    TempDir dir("synth");
    std::string out;
    const int code = run_tool("synth --out " + dir.str() + " --seed 3 --set synthetic.n_images=3" +
                                  " --set synthetic.image_size=24",
                              &out);
    CHECK(code == 0);
    const json fin = last_json_line(out);
    CHECK(fin.at("command") == "synth");
    CHECK(fin.at("images_per_domain").get<int>() == 3);
    for (const auto& m : fin.at("manifests")) {
      std::string stats_out;
      CHECK(run_tool("dataset-stats --manifest " + m.get<std::string>(), &stats_out) == 0);
      const json s = last_json_line(stats_out);
      CHECK(s.at("images").get<int>() == 3);
      CHECK(s.at("train").get<int>() + s.at("val").get<int>() == 3);
    }
  }

  TEST_CASE("stats tolerates an empty corpus") {
    TempDir dir("empty");
    const fs::path manifest = dir.path / "ann.json";
    {
      std::ofstream f(manifest);
      f << R"({"images": []})";
    }
    std::string out;
    CHECK(run_tool("dataset-stats --manifest " + manifest.string(), &out) == 0);
    const json fin = last_json_line(out);
    CHECK(fin.at("images").get<int>() == 0);
    CHECK(fin.at("boxes").get<int>() == 0);

    CHECK(run_tool("dataset-stats --manifest " + (dir.path / "absent.json").string(), &out) == 2);
  }

  TEST_CASE("same seed, same summary") {
    TempDir dir("twice");
    std::string out_a, out_b;
    const std::string common = "train --synthetic --iterations 2 --seed 7" + kTiny + " --out ";
    REQUIRE(run_tool(common + (dir.path / "a").string(), &out_a) == 0);
    REQUIRE(run_tool(common + (dir.path / "b").string(), &out_b) == 0);
    const json fin_a = last_json_line(out_a);
    const json fin_b = last_json_line(out_b);
    CHECK(fin_a.at("final_loss") == fin_b.at("final_loss"));
    CHECK(fin_a.at("iterations").get<int>() == 2);
    CHECK(fs::exists(dir.path / "a" / "checkpoints" / "final" / "params.bin"));
    CHECK(fs::exists(dir.path / "a" / "train_log.jsonl"));
  }

  TEST_CASE("zeroed global weight leaves the total") {
    TempDir dir("zerog");
    std::string out;
    REQUIRE(run_tool("train --synthetic --iterations 1 --seed 5" + kTiny + " --set loss.lambda_g=0 --out " +
                         dir.str(),
                     &out) == 0);
    std::ifstream log(dir.path / "train_log.jsonl");
    std::string line;
    REQUIRE(std::getline(log, line));
    const LossReport r = report_from_json(json::parse(line));
    CHECK(r.global_recon > 0.0);  // still measured
    LossWeights zeroed;
    zeroed.lambda_g = 0.0;
    CHECK(r.total == doctest::Approx(r.weighted_total(zeroed)).epsilon(1e-9));
    CHECK(r.weighted_total(LossWeights{}) > r.total);  // but no longer paid for
  }

  TEST_CASE("translate bytes are seed-stable") {
    TempDir dir("trans");
    std::string out;
    REQUIRE(run_tool("train --synthetic --iterations 1 --seed 3" + kTiny + " --out " + (dir.path / "run").string(),
                     &out) == 0);
    const std::string ckpt = (dir.path / "run" / "checkpoints" / "final").string();

    const fs::path inputs = dir.path / "inputs";
    fs::create_directories(inputs);
    int copied = 0;
    for (const auto& entry : fs::directory_iterator(dir.path / "run" / "data" / "warm")) {
      if (entry.path().extension() != ".png" || copied >= 2) continue;
      fs::copy_file(entry.path(), inputs / entry.path().filename());
      ++copied;
    }
    REQUIRE(copied == 2);

    const std::string common =
        "translate --checkpoint " + ckpt + " --input " + inputs.string() + " --n-styles 3 --seed 11 --out ";
    REQUIRE(run_tool(common + (dir.path / "o1").string(), &out) == 0);
    const json fin = last_json_line(out);
    CHECK(fin.at("outputs").get<int>() == 6);
    CHECK(fin.at("sheets").get<int>() == 2);
    REQUIRE(run_tool(common + (dir.path / "o2").string(), &out) == 0);

    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir.path / "o1")) {
      CHECK(slurp(entry.path()) == slurp(dir.path / "o2" / entry.path().filename()));
      ++compared;
    }
    CHECK(compared == 8);  // 6 styled outputs + 2 sheets

    REQUIRE(run_tool("translate --checkpoint " + ckpt + " --input " + inputs.string() +
                         " --n-styles 3 --seed 12 --out " + (dir.path / "o3").string(),
                     &out) == 0);
    bool any_differs = false;
    for (const auto& entry : fs::directory_iterator(dir.path / "o3")) {
      const fs::path name = entry.path().filename();
      if (name.string().find("_sheet") != std::string::npos) continue;
      if (slurp(entry.path()) != slurp(dir.path / "o1" / name)) any_differs = true;
    }
    CHECK(any_differs);
  }

  TEST_CASE("one-hot table scores the class count") {
    TempDir dir("isfour");
    const fs::path csv = dir.path / "probs.csv";
    {
      std::ofstream f(csv);
      f << "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n";
    }
    std::string out;
    REQUIRE(run_tool("evaluate --metrics is --probs " + csv.string() + " --out " + dir.str(), &out) == 0);
    const json report = json::parse(slurp(dir.path / "metric_is.json"));
    CHECK(report.at("metric") == "is");
    CHECK(report.at("value").get<double>() == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(report.at("n_inputs").get<int>() == 4);

    CHECK(run_tool("evaluate --metrics fid --probs " + csv.string() + " --out " + dir.str(), &out) == 1);
    CHECK(out.find("unknown metric") != std::string::npos);
    CHECK(run_tool("evaluate --metrics is --probs " + (dir.path / "absent.csv").string() + " --out " + dir.str(),
                   &out) == 2);
    CHECK(run_tool("evaluate --metrics is --out " + dir.str(), &out) == 1);  // is needs --probs
  }

  TEST_CASE("bad usage exits with the usage code") {
    std::string out;
    CHECK(run_tool("", &out) == 1);                      // a subcommand is required
    CHECK(run_tool("translate", &out) == 1);             // missing required options
    CHECK(run_tool("--help", &out) == 0);
    CHECK(out.find("synth") != std::string::npos);
    CHECK(run_tool("train --synthetic --iterations 0" + kTiny, &out) == 1);  // rejected by validation
  }
}
