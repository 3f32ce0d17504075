#include "instrans/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "instrans/association.hpp"
#include "instrans/errors.hpp"
#include "instrans/training.hpp"

namespace instrans {

namespace {

constexpr uint64_t kDiversityStream = 0xD1Eull;
constexpr uint64_t kClassifierStream = 0xC1A55ull;

void check_probability_row(const std::vector<double>& row, size_t k, const std::string& where) {
  if (row.size() != k) throw DataError(where + " has " + std::to_string(row.size()) + " entries, expected " +
                                       std::to_string(k));
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw DataError(where + " contains a negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-4)
    throw DataError(where + " sums to " + std::to_string(sum) + ", not 1");
}

// KL(p ‖ q) in nats, with 0·log 0 := 0.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

std::vector<double> mean_row(const std::vector<std::vector<double>>& rows, size_t lo, size_t hi) {
  std::vector<double> m(rows[lo].size(), 0.0);
  for (size_t i = lo; i < hi; ++i)
    for (size_t k = 0; k < m.size(); ++k) m[k] += rows[i][k];
  for (double& v : m) v /= static_cast<double>(hi - lo);
  return m;
}

}  // namespace

std::vector<Tensor> PixelExtractor::stages(const Tensor& image) const { return {image}; }

RandomConvExtractor::RandomConvExtractor(uint64_t seed, int channels, int n_stages) : seed_(seed) {
  if (channels <= 0 || n_stages <= 0) throw ConfigError("extractor needs positive channels and stages");
  Rng rng = make_rng(seed, {0xFEA7ull});
  int in_c = 3;
  int out_c = channels;
  for (int s = 0; s < n_stages; ++s) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in_c) * 9.0);
    weights_.push_back(Tensor::randn({out_c, in_c, 3, 3}, rng, stddev));
    biases_.push_back(Tensor::zeros({out_c}));
    in_c = out_c;
    out_c *= 2;
  }
}

std::vector<Tensor> RandomConvExtractor::stages(const Tensor& image) const {
  std::vector<Tensor> out;
  ad::Var h = ad::constant(image);
  for (size_t s = 0; s < weights_.size(); ++s) {
    h = ad::relu(ad::conv2d(h, ad::constant(weights_[s]), ad::constant(biases_[s]), 2, 1));
    out.push_back(h->value);
  }
  return out;
}

std::string RandomConvExtractor::id() const {
  return "randconv-" + std::to_string(seed_) + "x" + std::to_string(weights_.size());
}

double perceptual_distance(const FeatureExtractor& extractor, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("images must share a shape for perceptual distance");
  const std::vector<Tensor> fa = extractor.stages(a);
  const std::vector<Tensor> fb = extractor.stages(b);
  if (fa.size() != fb.size()) throw ShapeError("extractor returned differing stage counts");
  constexpr double eps = 1e-10;
  double total = 0.0;
  for (size_t s = 0; s < fa.size(); ++s) {
    const Tensor& x = fa[s];
    const Tensor& y = fb[s];
    if (!x.same_shape(y)) throw ShapeError("extractor stage shapes disagree");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    double stage = 0.0;
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        double nx = 0.0, ny = 0.0;
        for (int ic = 0; ic < c; ++ic) {
          nx += x.at(ic, iy, ix) * x.at(ic, iy, ix);
          ny += y.at(ic, iy, ix) * y.at(ic, iy, ix);
        }
        nx = std::sqrt(nx) + eps;
        ny = std::sqrt(ny) + eps;
        double d2 = 0.0;
        for (int ic = 0; ic < c; ++ic) {
          const double d = x.at(ic, iy, ix) / nx - y.at(ic, iy, ix) / ny;
          d2 += d * d;
        }
        stage += std::sqrt(d2);
      }
    }
    total += stage / (static_cast<double>(h) * w);
  }
  return total / static_cast<double>(fa.size());
}

double diversity_score(const TranslateFn& translate_fn, const std::vector<Tensor>& inputs, int n_inputs,
                       int pairs_per_input, const FeatureExtractor& extractor, uint64_t seed) {
  if (n_inputs <= 0 || pairs_per_input <= 0) throw ConfigError("diversity protocol sizes must be positive");
  if (static_cast<int>(inputs.size()) < n_inputs)
    throw ConfigError("diversity protocol needs " + std::to_string(n_inputs) + " inputs, found " +
                      std::to_string(inputs.size()));
  double total = 0.0;
  for (int i = 0; i < n_inputs; ++i) {
    for (int p = 0; p < pairs_per_input; ++p) {
      Rng rng = make_rng(seed, {kDiversityStream, static_cast<uint64_t>(i), static_cast<uint64_t>(p)});
      const uint64_t s1 = rng.next_u64();
      const uint64_t s2 = rng.next_u64();
      total += perceptual_distance(extractor, translate_fn(inputs[static_cast<size_t>(i)], s1),
                                   translate_fn(inputs[static_cast<size_t>(i)], s2));
    }
  }
  return total / (static_cast<double>(n_inputs) * pairs_per_input);
}

double diversity_score(const TranslationModel& model, int source_domain, int target_domain,
                       const std::vector<Tensor>& inputs, int n_inputs, int pairs_per_input,
                       const FeatureExtractor& extractor, uint64_t seed) {
  TranslateFn fn = [&](const Tensor& image, uint64_t style_seed) {
    return translate(model, image, source_domain, target_domain, style_seed);
  };
  return diversity_score(fn, inputs, n_inputs, pairs_per_input, extractor, seed);
}

double inception_score(const std::vector<std::vector<double>>& probs, int splits) {
  if (probs.empty()) throw DataError("inception score needs at least one probability row");
  if (splits < 1 || splits > static_cast<int>(probs.size()))
    throw ConfigError("cannot cut " + std::to_string(probs.size()) + " rows into " + std::to_string(splits) +
                      " splits");
  const size_t k = probs[0].size();
  for (size_t i = 0; i < probs.size(); ++i)
    check_probability_row(probs[i], k, "probability row " + std::to_string(i));

  const size_t n = probs.size();
  double score_sum = 0.0;
  for (int s = 0; s < splits; ++s) {
    const size_t lo = n * static_cast<size_t>(s) / static_cast<size_t>(splits);
    const size_t hi = n * static_cast<size_t>(s + 1) / static_cast<size_t>(splits);
    const std::vector<double> marginal = mean_row(probs, lo, hi);
    double kl_mean = 0.0;
    for (size_t i = lo; i < hi; ++i) kl_mean += kl_divergence(probs[i], marginal);
    kl_mean /= static_cast<double>(hi - lo);
    score_sum += std::exp(kl_mean);
  }
  return score_sum / splits;
}

double conditional_inception_score(const std::vector<std::vector<std::vector<double>>>& probs_by_input) {
  if (probs_by_input.empty()) throw DataError("conditional score needs at least one input");
  const size_t k = probs_by_input[0].empty() ? 0 : probs_by_input[0][0].size();
  double kl_over_inputs = 0.0;
  for (size_t m = 0; m < probs_by_input.size(); ++m) {
    const auto& rows = probs_by_input[m];
    if (rows.size() < 2)
      throw ConfigError("conditional score needs at least two samples per input, input " + std::to_string(m) +
                        " has " + std::to_string(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i)
      check_probability_row(rows[i], k, "input " + std::to_string(m) + " row " + std::to_string(i));
    const std::vector<double> marginal = mean_row(rows, 0, rows.size());
    double kl_mean = 0.0;
    for (const auto& row : rows) kl_mean += kl_divergence(row, marginal);
    kl_over_inputs += kl_mean / static_cast<double>(rows.size());
  }
  return std::exp(kl_over_inputs / static_cast<double>(probs_by_input.size()));
}

TinyDomainClassifier::TinyDomainClassifier(int n_classes, uint64_t seed) : n_classes_(n_classes) {
  if (n_classes < 2) throw ConfigError("classifier needs at least two classes");
  Rng rng = make_rng(seed, {kClassifierStream});
  auto init = [&](Shape shape, double fan_in, const std::string& name) {
    return ad::parameter(Tensor::randn(std::move(shape), rng, 1.0 / std::sqrt(fan_in)), name);
  };
  w1_ = init({8, 3, 3, 3}, 27.0, "clf.w1");
  b1_ = ad::parameter(Tensor::zeros({8}), "clf.b1");
  w2_ = init({16, 8, 3, 3}, 72.0, "clf.w2");
  b2_ = ad::parameter(Tensor::zeros({16}), "clf.b2");
  fw_ = init({n_classes, 16}, 16.0, "clf.fw");
  fb_ = ad::parameter(Tensor::zeros({n_classes}), "clf.fb");
}

ad::Var TinyDomainClassifier::logits(const ad::Var& image) const {
  ad::Var h = ad::relu(ad::conv2d(image, w1_, b1_, 2, 1));
  h = ad::relu(ad::conv2d(h, w2_, b2_, 2, 1));
  return ad::linear(ad::global_avg_pool(h), fw_, fb_);
}

double TinyDomainClassifier::fit(const std::vector<Tensor>& images, const std::vector<int>& labels, int max_epochs,
                                 double lr, double target_accuracy) {
  if (images.size() != labels.size() || images.empty()) throw ConfigError("classifier needs matching image labels");
  for (int label : labels)
    if (label < 0 || label >= n_classes_) throw ConfigError("label out of range");
  Adam opt({w1_, b1_, w2_, b2_, fw_, fb_}, lr, 0.9, 0.999, 0.0);
  const size_t n = images.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  double acc = accuracy(images, labels);
  for (int epoch = 0; epoch < max_epochs && acc < target_accuracy; ++epoch) {
    Rng rng = make_rng(0x5EEDull, {kClassifierStream, static_cast<uint64_t>(epoch)});
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    for (size_t at = 0; at < n; at += 8) {
      std::vector<ad::Var> terms;
      for (size_t j = at; j < std::min(at + 8, n); ++j) {
        const size_t idx = order[j];
        terms.push_back(ad::softmax_cross_entropy(logits(ad::constant(images[idx])), labels[idx]));
      }
      ad::backward(ad::scale(ad::add_n(terms), 1.0 / static_cast<double>(terms.size())));
      opt.step();
    }
    acc = accuracy(images, labels);
  }
  return acc;
}

double TinyDomainClassifier::accuracy(const std::vector<Tensor>& images, const std::vector<int>& labels) const {
  int hits = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    const std::vector<double> p = predict_probs(images[i]);
    const int guess = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (guess == labels[i]) ++hits;
  }
  return images.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(images.size());
}

std::vector<double> TinyDomainClassifier::predict_probs(const Tensor& image) const {
  const Tensor raw = logits(ad::constant(image))->value;
  double hi = raw[0];
  for (int64_t i = 1; i < raw.numel(); ++i) hi = std::max(hi, raw[i]);
  std::vector<double> p(static_cast<size_t>(raw.numel()));
  double sum = 0.0;
  for (int64_t i = 0; i < raw.numel(); ++i) {
    p[static_cast<size_t>(i)] = std::exp(raw[i] - hi);
    sum += p[static_cast<size_t>(i)];
  }
  for (double& v : p) v /= sum;
  return p;
}

void export_style_codes(const TranslationModel& model, const std::vector<ImageSample>& samples, int instance_size,
                        const std::string& csv_path) {
  TrainBatch batch;
  for (const ImageSample& s : samples) {
    if (s.domain.index < 0 || s.domain.index > 1) throw ConfigError("domain index out of range");
    batch.domains[static_cast<size_t>(s.domain.index)].items.push_back(
        make_batch_item(s, instance_size, static_cast<int>(s.boxes.size())));
  }
  const StyleBank bank = build_style_bank(model, batch);

  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw DataError("cannot write style export: " + csv_path);
  out << "domain,granularity,source_id";
  for (int i = 0; i < model.config.style_dim; ++i) out << ",s" << i;
  out << "\n";
  char buf[40];
  for (const auto& [key, code] : bank.entries) {
    out << key.domain << "," << granularity_name(key.granularity) << "," << key.source_id;
    for (int64_t i = 0; i < code.vector.numel(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", code.vector[i]);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("cannot write style export: " + csv_path);
}

std::string MetricReport::to_json() const {
  nlohmann::json j{{"metric", metric},   {"value", value}, {"n_inputs", n_inputs},
                   {"n_pairs", n_pairs}, {"seed", seed},   {"extractor_id", extractor_id}};
  return j.dump();
}

}  // namespace instrans
