#include "instrans/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "instrans/errors.hpp"

namespace instrans::ad {

Tensor& Node::ensure_grad() {
  // numel check matters for rank-0 scalars, whose shape matches a default
  // (empty) tensor's
  if (grad.numel() != value.numel() || grad.shape() != value.shape())
    grad = Tensor::zeros(value.shape());
  return grad;
}

void Node::add_grad(const Tensor& g) {
  Tensor& dst = ensure_grad();
  const double* src = g.data();
  double* d = dst.data();
  for (int64_t i = 0; i < dst.numel(); ++i) d[i] += src[i];
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var parameter(Tensor value, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->needs_grad = true;
  n->name = std::move(name);
  return n;
}

Var detach(const Var& x) { return constant(x->value); }

namespace {

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  for (const Var& p : parents) needs = needs || p->needs_grad;
  n->needs_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backward_op = std::move(backward_op);
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->value.shape()) + " vs " +
                     shape_str(b->value.shape()));
}

}  // namespace

void backward(const Var& root) {
  if (root->value.numel() != 1) throw ShapeError("backward root must be scalar");
  // iterative postorder DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_op) n->backward_op(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->add_grad(n.grad);
    if (b->needs_grad) b->add_grad(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->add_grad(n.grad);
    if (b->needs_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) {
      Tensor& g = a->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * b->value[i];
    }
    if (b->needs_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * a->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [a, s](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [a](Node& n) { a->add_grad(n.grad); });
}

Var square(const Var& a) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += 2.0 * a->value[i] * n.grad[i];
  });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i)
      if (a->value[i] > 0.0) g[i] += n.grad[i];
  });
}

Var lrelu(const Var& a, double slope) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return make_op(std::move(out), {a}, [a, slope](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (a->value[i] > 0.0 ? 1.0 : slope);
  });
}

Var vtanh(const Var& a) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  auto n = make_op(std::move(out), {a}, nullptr);
  if (n->needs_grad) {
    Node* np = n.get();
    n->backward_op = [a, np](Node& nn) {
      Tensor& g = a->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) {
        const double y = np->value[i];
        g[i] += nn.grad[i] * (1.0 - y * y);
      }
    };
  }
  return n;
}

Var softplus(const Var& a) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const double x = a->value[i];
      g[i] += n.grad[i] / (1.0 + std::exp(-x));
    }
  });
}

Var mean_all(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value.numel());
  Tensor out = Tensor::scalar(a->value.sum() * inv);
  return make_op(std::move(out), {a}, [a, inv](Node& n) {
    Tensor& g = a->ensure_grad();
    const double u = n.grad[0] * inv;
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += u;
  });
}

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(a->value.sum());
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    const double u = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += u;
  });
}

Var add_n(const std::vector<Var>& xs) {
  if (xs.empty()) return constant(Tensor::scalar(0.0));
  Var acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a->value.reshaped(shape);
  Shape orig = a->value.shape();
  return make_op(std::move(out), {a}, [a, orig](Node& n) { a->add_grad(n.grad.reshaped(orig)); });
}

Var slice1d(const Var& a, int offset, int length) {
  if (a->value.rank() != 1) throw ShapeError("slice1d expects rank-1 input");
  if (offset < 0 || length < 0 || offset + length > a->value.dim(0))
    throw ShapeError("slice1d out of range");
  Tensor out({length});
  for (int i = 0; i < length; ++i) out[i] = a->value[offset + i];
  return make_op(std::move(out), {a}, [a, offset, length](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < length; ++i) g[offset + i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// convolution

namespace {

struct ConvDims {
  int ic, ih, iw, oc, kh, kw, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.rank() != 3) throw ShapeError("conv2d input must be CHW, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ShapeError("conv2d weight must be OIHW, got " + shape_str(w.shape()));
  ConvDims d;
  d.ic = x.dim(0);
  d.ih = x.dim(1);
  d.iw = x.dim(2);
  d.oc = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.ic)
    throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()));
  d.oh = (d.ih + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.iw + 2 * pad - d.kw) / stride + 1;
  if (d.ih + 2 * pad < d.kh || d.iw + 2 * pad < d.kw)
    throw ShapeError("conv2d input too small: " + shape_str(x.shape()));
  return d;
}

// col: (ic*kh*kw) x (oh*ow)
Tensor im2col(const Tensor& x, const ConvDims& d, int stride, int pad) {
  Tensor col({d.ic * d.kh * d.kw, d.oh * d.ow});
  double* cp = col.data();
  const double* xp = x.data();
  for (int c = 0; c < d.ic; ++c)
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        const int row = (c * d.kh + ky) * d.kw + kx;
        double* out_row = cp + static_cast<int64_t>(row) * d.oh * d.ow;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.ih) {
            std::fill(out_row + static_cast<int64_t>(oy) * d.ow, out_row + static_cast<int64_t>(oy + 1) * d.ow, 0.0);
            continue;
          }
          const double* in_row = xp + (static_cast<int64_t>(c) * d.ih + iy) * d.iw;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            out_row[static_cast<int64_t>(oy) * d.ow + ox] = (ix < 0 || ix >= d.iw) ? 0.0 : in_row[ix];
          }
        }
      }
  return col;
}

void col2im_add(const Tensor& col, Tensor& x, const ConvDims& d, int stride, int pad) {
  const double* cp = col.data();
  double* xp = x.data();
  for (int c = 0; c < d.ic; ++c)
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        const int row = (c * d.kh + ky) * d.kw + kx;
        const double* in_row = cp + static_cast<int64_t>(row) * d.oh * d.ow;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.ih) continue;
          double* out_row = xp + (static_cast<int64_t>(c) * d.ih + iy) * d.iw;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < d.iw) out_row[ix] += in_row[static_cast<int64_t>(oy) * d.ow + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const ConvDims d = conv_dims(x->value, w->value, stride, pad);
  if (b->value.rank() != 1 || b->value.dim(0) != d.oc)
    throw ShapeError("conv2d bias must be (oc)");
  Tensor col = im2col(x->value, d, stride, pad);
  Tensor out({d.oc, d.oh, d.ow});
  gemm_nn(w->value.data(), col.data(), out.data(), d.oc, d.ic * d.kh * d.kw, d.oh * d.ow, false);
  {
    double* op = out.data();
    for (int c = 0; c < d.oc; ++c) {
      const double bc = b->value[c];
      for (int i = 0; i < d.oh * d.ow; ++i) op[static_cast<int64_t>(c) * d.oh * d.ow + i] += bc;
    }
  }
  auto col_keep = std::make_shared<Tensor>(std::move(col));
  return make_op(std::move(out), {x, w, b}, [x, w, b, d, stride, pad, col_keep](Node& n) {
    const int k = d.ic * d.kh * d.kw;
    const int p = d.oh * d.ow;
    if (w->needs_grad) {
      Tensor& gw = w->ensure_grad();
      gemm_nt(n.grad.data(), col_keep->data(), gw.data(), d.oc, p, k, true);
    }
    if (b->needs_grad) {
      Tensor& gb = b->ensure_grad();
      for (int c = 0; c < d.oc; ++c) {
        double acc = 0.0;
        for (int i = 0; i < p; ++i) acc += n.grad[static_cast<int64_t>(c) * p + i];
        gb[c] += acc;
      }
    }
    if (x->needs_grad) {
      Tensor dcol({k, p});
      gemm_tn(w->value.data(), n.grad.data(), dcol.data(), k, d.oc, p, false);
      Tensor& gx = x->ensure_grad();
      col2im_add(dcol, gx, d, stride, pad);
    }
  });
}

Var upsample_nearest2(const Var& x) {
  if (x->value.rank() != 3) throw ShapeError("upsample expects CHW");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const double v = x->value.at(ch, y, xx);
        out.at(ch, 2 * y, 2 * xx) = v;
        out.at(ch, 2 * y, 2 * xx + 1) = v;
        out.at(ch, 2 * y + 1, 2 * xx) = v;
        out.at(ch, 2 * y + 1, 2 * xx + 1) = v;
      }
  return make_op(std::move(out), {x}, [x, c, h, w](Node& n) {
    Tensor& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          g.at(ch, y, xx) += n.grad.at(ch, 2 * y, 2 * xx) + n.grad.at(ch, 2 * y, 2 * xx + 1) +
                             n.grad.at(ch, 2 * y + 1, 2 * xx) + n.grad.at(ch, 2 * y + 1, 2 * xx + 1);
  });
}

Var avgpool2(const Var& x) {
  if (x->value.rank() != 3) throw ShapeError("avgpool expects CHW");
  const int c = x->value.dim(0), h = x->value.dim(1) / 2, w = x->value.dim(2) / 2;
  if (h < 1 || w < 1) throw ShapeError("avgpool input too small: " + shape_str(x->value.shape()));
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        out.at(ch, y, xx) = 0.25 * (x->value.at(ch, 2 * y, 2 * xx) + x->value.at(ch, 2 * y, 2 * xx + 1) +
                                    x->value.at(ch, 2 * y + 1, 2 * xx) + x->value.at(ch, 2 * y + 1, 2 * xx + 1));
  return make_op(std::move(out), {x}, [x, c, h, w](Node& n) {
    Tensor& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double u = 0.25 * n.grad.at(ch, y, xx);
          g.at(ch, 2 * y, 2 * xx) += u;
          g.at(ch, 2 * y, 2 * xx + 1) += u;
          g.at(ch, 2 * y + 1, 2 * xx) += u;
          g.at(ch, 2 * y + 1, 2 * xx + 1) += u;
        }
  });
}

Var global_avg_pool(const Var& x) {
  if (x->value.rank() != 3) throw ShapeError("global_avg_pool expects CHW");
  const int c = x->value.dim(0);
  const int64_t hw = static_cast<int64_t>(x->value.dim(1)) * x->value.dim(2);
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (int64_t i = 0; i < hw; ++i) acc += x->value[ch * hw + i];
    out[ch] = acc / static_cast<double>(hw);
  }
  return make_op(std::move(out), {x}, [x, c, hw](Node& n) {
    Tensor& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double u = n.grad[ch] / static_cast<double>(hw);
      for (int64_t i = 0; i < hw; ++i) g[ch * hw + i] += u;
    }
  });
}

// ---------------------------------------------------------------------------
// normalization

namespace {

struct ChannelStats {
  std::vector<double> mu, sigma;  // biased std per channel
};

ChannelStats channel_stats(const Tensor& x) {
  const int c = x.dim(0);
  const int64_t hw = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  ChannelStats st;
  st.mu.resize(c);
  st.sigma.resize(c);
  for (int ch = 0; ch < c; ++ch) {
    const double* p = x.data() + ch * hw;
    double m = 0.0;
    for (int64_t i = 0; i < hw; ++i) m += p[i];
    m /= static_cast<double>(hw);
    double v = 0.0;
    for (int64_t i = 0; i < hw; ++i) {
      const double d = p[i] - m;
      v += d * d;
    }
    st.mu[ch] = m;
    st.sigma[ch] = std::sqrt(v / static_cast<double>(hw));
  }
  return st;
}

// shared forward/backward for y = g_c * (x_c - mu_c)/(sigma_c + eps) + b_c
Var normalize_impl(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (x->value.rank() != 3) throw ShapeError("normalization expects CHW");
  const int c = x->value.dim(0);
  const int64_t hw = static_cast<int64_t>(x->value.dim(1)) * x->value.dim(2);
  if (gain->value.rank() != 1 || gain->value.dim(0) != c || bias->value.rank() != 1 || bias->value.dim(0) != c)
    throw ShapeError("adain: channel mismatch, content has " + std::to_string(c) + " channels, style params " +
                     shape_str(gain->value.shape()));
  auto st = std::make_shared<ChannelStats>(channel_stats(x->value));
  Tensor out(x->value.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double inv = 1.0 / (st->sigma[ch] + eps);
    const double g = gain->value[ch];
    const double b = bias->value[ch];
    const double* xp = x->value.data() + ch * hw;
    double* op = out.data() + ch * hw;
    for (int64_t i = 0; i < hw; ++i) op[i] = g * (xp[i] - st->mu[ch]) * inv + b;
  }
  return make_op(std::move(out), {x, gain, bias}, [x, gain, bias, st, eps, c, hw](Node& n) {
    for (int ch = 0; ch < c; ++ch) {
      const double sigma = st->sigma[ch];
      const double inv = 1.0 / (sigma + eps);
      const double g = gain->value[ch];
      const double* xp = x->value.data() + ch * hw;
      const double* up = n.grad.data() + ch * hw;
      double udot = 0.0, uh = 0.0;
      for (int64_t i = 0; i < hw; ++i) {
        udot += up[i];
        uh += up[i] * (xp[i] - st->mu[ch]);
      }
      if (gain->needs_grad) gain->ensure_grad()[ch] += uh * inv;
      if (bias->needs_grad) bias->ensure_grad()[ch] += udot;
      if (x->needs_grad) {
        double* gx = x->ensure_grad().data() + ch * hw;
        // dL/dh_i = g*(u_i*inv - (u.h)*h_i*inv^2 / (hw*sigma)); dL/dx = dL/dh - mean(dL/dh)
        const double sig_term = sigma > 1e-12 ? uh * inv * inv / (static_cast<double>(hw) * sigma) : 0.0;
        double mean_dh = 0.0;
        for (int64_t i = 0; i < hw; ++i) {
          const double h = xp[i] - st->mu[ch];
          mean_dh += g * (up[i] * inv - sig_term * h);
        }
        mean_dh /= static_cast<double>(hw);
        for (int64_t i = 0; i < hw; ++i) {
          const double h = xp[i] - st->mu[ch];
          gx[i] += g * (up[i] * inv - sig_term * h) - mean_dh;
        }
      }
    }
  });
}

}  // namespace

Var instance_norm(const Var& x, double eps) {
  const int c = x->value.dim(0);
  Var gain = constant(Tensor::full({c}, 1.0));
  Var bias = constant(Tensor::zeros({c}));
  return normalize_impl(x, gain, bias, eps);
}

Var adain(const Var& x, const Var& mean, const Var& stdv, double eps) {
  for (int64_t i = 0; i < stdv->value.numel(); ++i)
    if (!(stdv->value[i] > 0.0))
      throw std::invalid_argument("adain: style std components must be positive");
  return normalize_impl(x, stdv, mean, eps);
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x->value.rank() != 1) throw ShapeError("linear expects rank-1 input");
  const int in = x->value.dim(0);
  const int out_dim = w->value.dim(0);
  if (w->value.rank() != 2 || w->value.dim(1) != in)
    throw ShapeError("linear: weight " + shape_str(w->value.shape()) + " vs input " + shape_str(x->value.shape()));
  Tensor out({out_dim});
  gemm_nn(w->value.data(), x->value.data(), out.data(), out_dim, in, 1, false);
  for (int i = 0; i < out_dim; ++i) out[i] += b->value[i];
  return make_op(std::move(out), {x, w, b}, [x, w, b, in, out_dim](Node& n) {
    if (x->needs_grad) {
      Tensor& gx = x->ensure_grad();
      gemm_tn(w->value.data(), n.grad.data(), gx.data(), in, out_dim, 1, true);
    }
    if (w->needs_grad) {
      Tensor& gw = w->ensure_grad();
      gemm_nt(n.grad.data(), x->value.data(), gw.data(), out_dim, 1, in, true);
    }
    if (b->needs_grad) b->add_grad(n.grad);
  });
}

Var l1_loss(const Var& a, const Var& b) {
  check_same_shape(a, b, "l1_loss");
  const int64_t n_el = a->value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n_el; ++i) acc += std::abs(a->value[i] - b->value[i]);
  Tensor out = Tensor::scalar(acc / static_cast<double>(n_el));
  return make_op(std::move(out), {a, b}, [a, b, n_el](Node& n) {
    const double u = n.grad[0] / static_cast<double>(n_el);
    double* ga = a->needs_grad ? a->ensure_grad().data() : nullptr;
    double* gb = b->needs_grad ? b->ensure_grad().data() : nullptr;
    for (int64_t i = 0; i < n_el; ++i) {
      const double d = a->value[i] - b->value[i];
      const double s = d > 0.0 ? u : (d < 0.0 ? -u : 0.0);
      if (ga) ga[i] += s;
      if (gb) gb[i] -= s;
    }
  });
}

Var softmax_cross_entropy(const Var& logits, int label) {
  if (logits->value.rank() != 1) throw ShapeError("softmax_cross_entropy expects rank-1 logits");
  const int k = logits->value.dim(0);
  if (label < 0 || label >= k) throw std::invalid_argument("label out of range");
  double mx = logits->value[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, logits->value[i]);
  double z = 0.0;
  for (int i = 0; i < k; ++i) z += std::exp(logits->value[i] - mx);
  const double lse = mx + std::log(z);
  Tensor out = Tensor::scalar(lse - logits->value[label]);
  return make_op(std::move(out), {logits}, [logits, label, k, mx, z](Node& n) {
    Tensor& g = logits->ensure_grad();
    const double u = n.grad[0];
    for (int i = 0; i < k; ++i) {
      const double p = std::exp(logits->value[i] - mx) / z;
      g[i] += u * (p - (i == label ? 1.0 : 0.0));
    }
  });
}

}  // namespace instrans::ad
