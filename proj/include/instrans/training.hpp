#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "instrans/association.hpp"
#include "instrans/losses.hpp"
#include "instrans/networks.hpp"
#include "instrans/rng.hpp"

namespace instrans {

struct TrainConfig {
  int iterations = 1000;
  int batch_size = 1;  // images per domain per iteration
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double weight_decay = 1e-4;
  uint64_t seed = 1;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  int image_size = 64;
  int instance_size = 32;
  int max_crops_per_item = 1;
  PlanFlags flags;
  LossWeights weights;
  NetworkConfig network;
};

// Throws ConfigError on non-positive iterations, rates, moments or sizes.
void validate_train_config(const TrainConfig& cfg);

// JSON round-trips for checkpoints and layered run configs. from_json reads
// only the keys present, keeping the other fields at their current values.
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const PlanFlags& f);
void from_json(const nlohmann::json& j, PlanFlags& f);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Adam with L2 regularization folded into the gradient. Every owned parameter
// is stepped every call (missing grads count as zero), then all grads reset.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ad::Var> params, double lr, double beta1, double beta2, double weight_decay);

  void step();
  int64_t steps_taken() const { return t_; }

  // Flat [t, m..., v...] snapshot; restore rejects a size mismatch.
  std::vector<double> serialize() const;
  void restore(const std::vector<double>& blob);

  double lr = 0.0;

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double weight_decay_ = 0.0;
  int64_t t_ = 0;
};

struct TrainState {
  TrainConfig config;
  TranslationModel model;
  Adam opt_g;
  Adam opt_d;
  int64_t iteration = 0;
  CyclePlan last_plan;  // the most recently executed plan, for inspection

  static TrainState create(const TrainConfig& cfg);
};

// One alternation: a discriminator update on the plan's translated outputs,
// then a generator/encoder update on the full weighted objective. Throws
// NumericError naming the offending term and the iteration if a loss leaves
// the finite range.
LossReport train_step(TrainState& state, const DomainBatch& batch_x, const DomainBatch& batch_y);

// Inference through the global branch only; no boxes consulted.
Tensor translate(const TranslationModel& model, const Tensor& image, int source_domain, int target_domain,
                 const StyleCode& style);
// Same, dressing the content in a style drawn from the unit normal prior.
Tensor translate(const TranslationModel& model, const Tensor& image, int source_domain, int target_domain,
                 uint64_t style_seed);

constexpr int kCheckpointVersion = 1;

// Directory layout: params.bin, optim.bin, meta.json. Throws DataError on a
// missing/corrupt checkpoint or a version mismatch.
void save_checkpoint(const TrainState& state, const std::string& dir);
TrainState load_checkpoint(const std::string& dir);

// Owns the loop: assembles per-iteration batches from the sample pools,
// executes train_step, keeps the report history, optionally appends a JSONL
// log line per iteration and writes periodic checkpoints.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::array<std::vector<ImageSample>, 2> pools);
  Trainer(TrainState state, std::array<std::vector<ImageSample>, 2> pools);

  LossReport step();
  void run(const std::string& log_path = "", const std::string& checkpoint_dir = "");

  TrainState& state() { return state_; }
  const std::vector<LossReport>& history() const { return history_; }

 private:
  DomainBatch assemble(int domain) const;

  TrainState state_;
  std::array<std::vector<ImageSample>, 2> pools_;
  std::vector<LossReport> history_;
};

}  // namespace instrans
