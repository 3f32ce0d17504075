#pragma once

#include <array>
#include <vector>

#include "instrans/datasets.hpp"
#include "instrans/networks.hpp"
#include "instrans/rng.hpp"
#include "instrans/types.hpp"

namespace instrans {

// Coarse styles may dress fine contents, never the reverse.
bool association_allowed(Granularity style_g, Granularity content_g);

// One training image with its derived views.
struct BatchItem {
  ImageSample full;
  ImageSample half;
  ImageSample background;
  std::vector<ImageSample> crops;
};

struct DomainBatch {
  std::vector<BatchItem> items;
};

struct TrainBatch {
  std::array<DomainBatch, 2> domains;
};

// Derives half/background/instance views; keeps at most max_crops boxes.
BatchItem make_batch_item(const ImageSample& sample, int instance_size, int max_crops);

// One style entry per global image, background and instance crop, both domains.
StyleBank build_style_bank(const TranslationModel& model, const TrainBatch& batch);

// Same key set as build_style_bank with empty vectors; enough for planning,
// skips the encoder passes.
StyleBank bank_keys(const TrainBatch& batch);

enum class StepKind { self_recon, scale_recon, cross_granularity, cross_domain, cycle_back };

struct ContentRef {
  int domain = 0;
  int item = 0;
  Granularity granularity = Granularity::global;
  int crop_index = -1;  // instance content only
};

struct StyleRef {
  enum class Source { bank, prior, scale };
  Source source = Source::bank;
  BankKey key;             // bank
  int domain = 0;          // prior/scale tag
  int item = 0;            // scale: whose half image
  uint64_t prior_seed = 0; // prior
  Granularity granularity() const;
};

struct PlanStep {
  StepKind kind = StepKind::self_recon;
  ContentRef content;
  StyleRef style;
  int decode_domain = 0;
  Granularity output_granularity = Granularity::global;
  int pair_index = -1;  // forward <-> back linkage for cycles
};

struct PlanFlags {
  bool cross_domain = true;
  bool cross_granularity = true;
  bool multi_scale = true;
};

struct CyclePlan {
  std::vector<PlanStep> steps;
  int count(StepKind k) const;
};

// Builds one iteration's frozen step list. Throws std::logic_error if any
// constructed step would break the association rule (never skips silently).
CyclePlan plan_cycles(const StyleBank& bank, const TrainBatch& batch, const PlanFlags& flags, Rng& rng);

// Structural checks: association rule on every step, cycle pairing involutive,
// back steps restore the source domain. Throws std::logic_error on violation.
void validate_plan(const CyclePlan& plan);

}  // namespace instrans
