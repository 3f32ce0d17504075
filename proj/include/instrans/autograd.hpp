#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "instrans/tensor.hpp"

namespace instrans::ad {

// Reverse-mode tape. Ops build fresh nodes each forward pass; parameters are
// long-lived leaf nodes whose .grad the optimizer reads after backward().
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first touch
  std::vector<Var> parents;
  std::function<void(Node&)> backward_op;
  bool requires_grad = false;  // leaf parameter
  bool needs_grad = false;     // reachable-from-parameter flag, set at build time
  std::string name;

  Tensor& ensure_grad();
  void add_grad(const Tensor& g);
};

Var constant(Tensor value);
Var parameter(Tensor value, std::string name);
Var detach(const Var& x);

// root must be scalar (numel == 1). Accumulates into every needs_grad leaf.
void backward(const Var& root);

// elementwise / arithmetic
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var relu(const Var& a);
Var lrelu(const Var& a, double slope = 0.2);
Var vtanh(const Var& a);
Var softplus(const Var& a);

// reductions
Var mean_all(const Var& a);
Var sum_all(const Var& a);
Var add_n(const std::vector<Var>& xs);

// shape
Var reshape(const Var& a, Shape shape);
Var slice1d(const Var& a, int offset, int length);

// conv stack (single image CHW; weight OC x IC x KH x KW)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2(const Var& x);
Var avgpool2(const Var& x);
Var global_avg_pool(const Var& x);  // CHW -> C

// normalization; eps matches the AdaIN contract
inline constexpr double kNormEps = 1e-5;
Var instance_norm(const Var& x, double eps = kNormEps);
// x CHW; mean/stdv are C vectors. Output channel c has the requested
// mean/stddev: stdv_c * (x_c - mu_c) / (sigma_c + eps) + mean_c.
Var adain(const Var& x, const Var& mean, const Var& stdv, double eps = kNormEps);

// dense
Var linear(const Var& x, const Var& w, const Var& b);  // x: (in), w: (out,in)

// losses
Var l1_loss(const Var& a, const Var& b);
Var softmax_cross_entropy(const Var& logits, int label);

}  // namespace instrans::ad
