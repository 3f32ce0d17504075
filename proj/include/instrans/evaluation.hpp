#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "instrans/networks.hpp"
#include "instrans/rng.hpp"
#include "instrans/types.hpp"

namespace instrans {

// Deterministic multi-stage feature maps for perceptual comparisons.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Tensor> stages(const Tensor& image) const = 0;
  virtual std::string id() const = 0;
};

// Single stage: the raw pixels. The fully transparent baseline.
class PixelExtractor : public FeatureExtractor {
 public:
  std::vector<Tensor> stages(const Tensor& image) const override;
  std::string id() const override { return "pixel"; }
};

// Fixed-seed random convolution stack; each downsampling stage is one output.
// Random projections preserve relative distances well enough for a desk-scale
// perceptual proxy.
class RandomConvExtractor : public FeatureExtractor {
 public:
  RandomConvExtractor(uint64_t seed, int channels = 8, int n_stages = 2);
  std::vector<Tensor> stages(const Tensor& image) const override;
  std::string id() const override;

 private:
  std::vector<Tensor> weights_;  // per stage: OC x IC x 3 x 3
  std::vector<Tensor> biases_;
  uint64_t seed_;
};

// Channel-unit-normalized L2 distance, averaged over positions then stages.
// Throws ShapeError when the images disagree in shape.
double perceptual_distance(const FeatureExtractor& extractor, const Tensor& a, const Tensor& b);

using TranslateFn = std::function<Tensor(const Tensor& image, uint64_t style_seed)>;

// Mean perceptual distance between pairs_per_input pairs of independently
// styled translations of each of the first n_inputs images. Throws ConfigError
// when fewer than n_inputs images are supplied.
double diversity_score(const TranslateFn& translate_fn, const std::vector<Tensor>& inputs, int n_inputs,
                       int pairs_per_input, const FeatureExtractor& extractor, uint64_t seed);
double diversity_score(const TranslationModel& model, int source_domain, int target_domain,
                       const std::vector<Tensor>& inputs, int n_inputs, int pairs_per_input,
                       const FeatureExtractor& extractor, uint64_t seed);

// exp(mean KL(row ‖ split marginal)), averaged over equal splits. Throws
// DataError when a row is not a distribution (tolerance 1e-4 on the sum),
// ConfigError on an impossible split count.
double inception_score(const std::vector<std::vector<double>>& probs, int splits = 1);

// Conditional variant: the marginal is per input, over that input's samples;
// needs at least two samples per input.
double conditional_inception_score(const std::vector<std::vector<std::vector<double>>>& probs_by_input);

// Probability vector over domain classes; rows sum to 1.
class DomainClassifier {
 public:
  virtual ~DomainClassifier() = default;
  virtual std::vector<double> predict_probs(const Tensor& image) const = 0;
  virtual int n_classes() const = 0;
};

// Two stride-2 convolutions, global pooling, and a linear head — enough to
// separate the synthetic palettes essentially perfectly.
class TinyDomainClassifier : public DomainClassifier {
 public:
  TinyDomainClassifier(int n_classes, uint64_t seed);

  // Shuffled minibatch Adam; stops early once train accuracy reaches target.
  // Returns the final train accuracy.
  double fit(const std::vector<Tensor>& images, const std::vector<int>& labels, int max_epochs = 40,
             double lr = 1e-3, double target_accuracy = 0.995);
  double accuracy(const std::vector<Tensor>& images, const std::vector<int>& labels) const;

  std::vector<double> predict_probs(const Tensor& image) const override;
  int n_classes() const override { return n_classes_; }

 private:
  ad::Var logits(const ad::Var& image) const;

  int n_classes_;
  ad::Var w1_, b1_, w2_, b2_, fw_, fb_;
};

// One CSV row per style bank entry: domain, granularity, source_id, then the
// style vector. Deterministic bytes for fixed inputs.
void export_style_codes(const TranslationModel& model, const std::vector<ImageSample>& samples, int instance_size,
                        const std::string& csv_path);

struct MetricReport {
  std::string metric;
  double value = 0.0;
  int n_inputs = 0;
  int n_pairs = 0;
  uint64_t seed = 0;
  std::string extractor_id;

  std::string to_json() const;
};

}  // namespace instrans
