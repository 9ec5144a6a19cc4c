#include "shadowlab/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "shadowlab/error.hpp"

namespace shadowlab::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw InvalidInput(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                       shape_string(t.shape()));
  }
}

inline double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

struct ConvGeometry {
  int cin, h, w, cout, k, stride, pad, oh, ow;
  int rows() const { return cin * k * k; }
  int cols() const { return oh * ow; }
};

// cols[(ci*k + ky)*k + kx, oy*ow + ox] = x[ci, oy*s + ky - pad, ox*s + kx - pad] (zero padded)
void im2col(const Tensor& x, const ConvGeometry& g, MatR& cols) {
  cols.setZero(g.rows(), g.cols());
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols.row((ci * g.k + ky) * g.k + kx).data();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = &x.storage()[(static_cast<std::size_t>(ci) * g.h + iy) * g.w];
          double* dst = row + static_cast<std::ptrdiff_t>(oy) * g.ow;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ox] = src[ix];
          }
        }
      }
}

void col2im_add(const MatR& cols, const ConvGeometry& g, Tensor& dx) {
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols.row((ci * g.k + ky) * g.k + kx).data();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = &dx.storage()[(static_cast<std::size_t>(ci) * g.h + iy) * g.w];
          const double* src = row + static_cast<std::ptrdiff_t>(oy) * g.ow;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

void init_uniform(Parameter& p, Engine& rng, double bound) {
  for (auto& v : p.value.storage()) v = uniform_in(rng, -bound, bound);
  p.grad = Tensor(p.value.shape());
}

void init_kaiming(Parameter& p, Engine& rng, int fan_in) {
  init_uniform(p, rng, std::sqrt(6.0 / std::max(1, fan_in)));
}

void init_zero(Parameter& p) {
  p.value.fill(0.0);
  p.grad = Tensor(p.value.shape());
}

Var Graph::push(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> backward) {
  Node n;
  n.owned = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(p)].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor t) { return push(std::move(t), {}, nullptr); }

Var Graph::bind(const Parameter& p, bool trainable) {
  if (auto it = bindings_.find(&p); it != bindings_.end()) return Var{it->second};
  Node n;
  n.ref = &p.value;
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  bindings_.emplace(&p, id);
  return Var{id};
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.empty() && n.value().size() > 0 ? Tensor(n.value().shape()) : n.grad;
}

Tensor Graph::param_grad(const Parameter& p) const {
  auto it = bindings_.find(&p);
  if (it == bindings_.end()) return Tensor(p.value.shape());
  return grad(Var{it->second});
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(n.value().shape());
  return n.grad;
}

void Graph::backward(Var out) {
  if (value(out).size() != 1) throw InvalidInput("backward: output must be a scalar");
  grad_buffer(out.id)[0] += 1.0;
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

Var Graph::conv2d(Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  require_rank(xv, 3, "conv2d");
  require_rank(wv, 4, "conv2d");
  if (wv.dim(1) != xv.dim(0) || wv.dim(2) != wv.dim(3)) {
    throw InvalidInput("conv2d: weight " + shape_string(wv.shape()) + " incompatible with input " +
                       shape_string(xv.shape()));
  }
  ConvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), wv.dim(0), wv.dim(2), stride, pad, 0, 0};
  g.oh = (g.h + 2 * pad - g.k) / stride + 1;
  g.ow = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.oh < 1 || g.ow < 1) throw InvalidInput("conv2d: input too small for kernel");

  auto cols = std::make_shared<MatR>();
  im2col(xv, g, *cols);
  Tensor out({g.cout, g.oh, g.ow});
  MapR om(out.storage().data(), g.cout, g.cols());
  om.noalias() = CMapR(wv.storage().data(), g.cout, g.rows()) * (*cols);
  if (bias.valid()) {
    const Tensor& bv = value(bias);
    for (int co = 0; co < g.cout; ++co) om.row(co).array() += bv[static_cast<std::size_t>(co)];
  }

  std::vector<int> parents{x.id, weight.id};
  if (bias.valid()) parents.push_back(bias.id);
  return push(std::move(out), parents, [x, weight, bias, g, cols](Graph& gr, int self) {
    const Tensor& gout = gr.nodes_[static_cast<std::size_t>(self)].grad;
    CMapR go(gout.storage().data(), g.cout, g.cols());
    if (gr.needs_grad(weight.id)) {
      Tensor& gw = gr.grad_buffer(weight.id);
      MapR(gw.storage().data(), g.cout, g.rows()).noalias() += go * cols->transpose();
    }
    if (bias.valid() && gr.needs_grad(bias.id)) {
      Tensor& gb = gr.grad_buffer(bias.id);
      for (int co = 0; co < g.cout; ++co) gb[static_cast<std::size_t>(co)] += go.row(co).sum();
    }
    if (gr.needs_grad(x.id)) {
      const Tensor& wv = gr.value(weight);
      MatR dcols = CMapR(wv.storage().data(), g.cout, g.rows()).transpose() * go;
      col2im_add(dcols, g, gr.grad_buffer(x.id));
    }
  });
}

Var Graph::upsample2x(Var x) {
  const Tensor& xv = value(x);
  require_rank(xv, 3, "upsample2x");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) out.at(k, y, xx) = xv.at(k, y / 2, xx / 2);
  return push(std::move(out), {x.id}, [x, c, h, w](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& gx = gr.grad_buffer(x.id);
    for (int k = 0; k < c; ++k)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) gx.at(k, y / 2, xx / 2) += go.at(k, y, xx);
  });
}

Var Graph::maxpool2x2(Var x) {
  const Tensor& xv = value(x);
  require_rank(xv, 3, "maxpool2x2");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t o = 0;
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx, ++o) {
        double best = -INFINITY;
        std::size_t best_i = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = 2 * y + dy, ix = 2 * xx + dx;
            if (iy >= h || ix >= w) continue;
            const std::size_t i = (static_cast<std::size_t>(k) * h + iy) * w + ix;
            if (xv[i] > best) {
              best = xv[i];
              best_i = i;
            }
          }
        out[o] = best;
        (*argmax)[o] = best_i;
      }
  return push(std::move(out), {x.id}, [x, argmax](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& gx = gr.grad_buffer(x.id);
    for (std::size_t o = 0; o < go.size(); ++o) gx[(*argmax)[o]] += go[o];
  });
}

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(std::move(out), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    for (Var v : {a, b}) {
      if (!gr.needs_grad(v.id)) continue;
      Tensor& g = gr.grad_buffer(v.id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Tensor out = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return push(std::move(out), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    if (gr.needs_grad(a.id)) {
      Tensor& g = gr.grad_buffer(a.id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (gr.needs_grad(b.id)) {
      Tensor& g = gr.grad_buffer(b.id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] -= go[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Tensor out = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(std::move(out), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    if (gr.needs_grad(a.id)) {
      const Tensor& bv = gr.value(b);
      Tensor& g = gr.grad_buffer(a.id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * bv[i];
    }
    if (gr.needs_grad(b.id)) {
      const Tensor& av = gr.value(a);
      Tensor& g = gr.grad_buffer(b.id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * av[i];
    }
  });
}

Var Graph::scale(Var a, double s) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v *= s;
  return push(std::move(out), {a.id}, [a, s](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& g = gr.grad_buffer(a.id);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * s;
  });
}

Var Graph::add_const(Var a, const Tensor& c) {
  require_same_shape(value(a), c, "add_const");
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return push(std::move(out), {a.id}, [a](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& g = gr.grad_buffer(a.id);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
  });
}

Var Graph::mul_const(Var a, const Tensor& c) {
  require_same_shape(value(a), c, "mul_const");
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  auto factor = std::make_shared<Tensor>(c);
  return push(std::move(out), {a.id}, [a, factor](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& g = gr.grad_buffer(a.id);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * (*factor)[i];
  });
}

Var Graph::silu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = v * sigmoid(v);
  return push(std::move(out), {a.id}, [a](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& av = gr.value(a);
    Tensor& g = gr.grad_buffer(a.id);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double s = sigmoid(av[i]);
      g[i] += go[i] * s * (1.0 + av[i] * (1.0 - s));
    }
  });
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), {a.id}, [a](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& av = gr.value(a);
    Tensor& g = gr.grad_buffer(a.id);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (av[i] > 0.0) g[i] += go[i];
  });
}

Var Graph::linear(Var x, Var weight, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  require_rank(xv, 1, "linear");
  require_rank(wv, 2, "linear");
  const int out_dim = wv.dim(0), in_dim = wv.dim(1);
  if (xv.dim(0) != in_dim) throw InvalidInput("linear: input size mismatch");
  Tensor out({out_dim});
  Eigen::Map<Eigen::VectorXd>(out.storage().data(), out_dim).noalias() =
      CMapR(wv.storage().data(), out_dim, in_dim) *
      Eigen::Map<const Eigen::VectorXd>(xv.storage().data(), in_dim);
  if (bias.valid()) {
    const Tensor& bv = value(bias);
    for (int i = 0; i < out_dim; ++i) out[static_cast<std::size_t>(i)] += bv[static_cast<std::size_t>(i)];
  }
  std::vector<int> parents{x.id, weight.id};
  if (bias.valid()) parents.push_back(bias.id);
  return push(std::move(out), parents, [x, weight, bias, out_dim, in_dim](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Eigen::Map<const Eigen::VectorXd> gov(go.storage().data(), out_dim);
    if (gr.needs_grad(weight.id)) {
      const Tensor& xv = gr.value(x);
      MapR(gr.grad_buffer(weight.id).storage().data(), out_dim, in_dim).noalias() +=
          gov * Eigen::Map<const Eigen::VectorXd>(xv.storage().data(), in_dim).transpose();
    }
    if (bias.valid() && gr.needs_grad(bias.id)) {
      Tensor& gb = gr.grad_buffer(bias.id);
      for (int i = 0; i < out_dim; ++i) gb[static_cast<std::size_t>(i)] += go[static_cast<std::size_t>(i)];
    }
    if (gr.needs_grad(x.id)) {
      const Tensor& wv = gr.value(weight);
      Eigen::Map<Eigen::VectorXd>(gr.grad_buffer(x.id).storage().data(), in_dim).noalias() +=
          CMapR(wv.storage().data(), out_dim, in_dim).transpose() * gov;
    }
  });
}

Var Graph::film(Var x, Var scale_v, Var shift_v) {
  const Tensor& xv = value(x);
  require_rank(xv, 3, "film");
  const int c = xv.dim(0);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(1)) * static_cast<std::size_t>(xv.dim(2));
  if (value(scale_v).size() != static_cast<std::size_t>(c) || value(shift_v).size() != static_cast<std::size_t>(c)) {
    throw InvalidInput("film: scale/shift length must equal channel count");
  }
  Tensor out = xv;
  const Tensor& sc = value(scale_v);
  const Tensor& sh = value(shift_v);
  for (int k = 0; k < c; ++k) {
    const double a = 1.0 + sc[static_cast<std::size_t>(k)], b = sh[static_cast<std::size_t>(k)];
    double* p = &out.storage()[static_cast<std::size_t>(k) * hw];
    for (std::size_t i = 0; i < hw; ++i) p[i] = p[i] * a + b;
  }
  return push(std::move(out), {x.id, scale_v.id, shift_v.id}, [x, scale_v, shift_v, c, hw](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& xv = gr.value(x);
    const Tensor& sc = gr.value(scale_v);
    const bool gx = gr.needs_grad(x.id), gs = gr.needs_grad(scale_v.id), gb = gr.needs_grad(shift_v.id);
    for (int k = 0; k < c; ++k) {
      const std::size_t base = static_cast<std::size_t>(k) * hw;
      double dscale = 0.0, dshift = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        dscale += go[base + i] * xv[base + i];
        dshift += go[base + i];
      }
      if (gs) gr.grad_buffer(scale_v.id)[static_cast<std::size_t>(k)] += dscale;
      if (gb) gr.grad_buffer(shift_v.id)[static_cast<std::size_t>(k)] += dshift;
      if (gx) {
        Tensor& g = gr.grad_buffer(x.id);
        const double a = 1.0 + sc[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < hw; ++i) g[base + i] += go[base + i] * a;
      }
    }
  });
}

Var Graph::slice(Var v, int begin, int end) {
  const Tensor& vv = value(v);
  require_rank(vv, 1, "slice");
  if (begin < 0 || end > vv.dim(0) || begin >= end) throw InvalidInput("slice: bad range");
  Tensor out({end - begin});
  for (int i = begin; i < end; ++i) out[static_cast<std::size_t>(i - begin)] = vv[static_cast<std::size_t>(i)];
  return push(std::move(out), {v.id}, [v, begin, end](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    Tensor& g = gr.grad_buffer(v.id);
    for (int i = begin; i < end; ++i) g[static_cast<std::size_t>(i)] += go[static_cast<std::size_t>(i - begin)];
  });
}

Var Graph::concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_channels: no inputs");
  const Tensor& first = value(parts.front());
  require_rank(first, 3, "concat_channels");
  const int h = first.dim(1), w = first.dim(2);
  int c = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    require_rank(t, 3, "concat_channels");
    if (t.dim(1) != h || t.dim(2) != w) throw InvalidInput("concat_channels: spatial size mismatch");
    c += t.dim(0);
  }
  Tensor out({c, h, w});
  std::size_t off = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    const Tensor& t = value(p);
    std::copy(t.storage().begin(), t.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(off));
    off += t.size();
    ids.push_back(p.id);
  }
  return push(std::move(out), ids, [parts](Graph& gr, int self) {
    const Tensor& go = gr.nodes_[static_cast<std::size_t>(self)].grad;
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t n = gr.value(p).size();
      if (gr.needs_grad(p.id)) {
        Tensor& g = gr.grad_buffer(p.id);
        for (std::size_t i = 0; i < n; ++i) g[i] += go[off + i];
      }
      off += n;
    }
  });
}

Var Graph::mean_abs_diff(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mean_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return push(Tensor({1}, {s / n}), {a.id, b.id}, [a, b, n](Graph& gr, int self) {
    const double go = gr.nodes_[static_cast<std::size_t>(self)].grad[0] / n;
    const Tensor& av = gr.value(a);
    const Tensor& bv = gr.value(b);
    // Subgradient sign(0) = 0.
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    if (gr.needs_grad(a.id)) {
      Tensor& g = gr.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * sign(av[i] - bv[i]);
    }
    if (gr.needs_grad(b.id)) {
      Tensor& g = gr.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go * sign(av[i] - bv[i]);
    }
  });
}

Var Graph::mean_sq_diff(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mean_sq_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return push(Tensor({1}, {s / n}), {a.id, b.id}, [a, b, n](Graph& gr, int self) {
    const double go = gr.nodes_[static_cast<std::size_t>(self)].grad[0] * 2.0 / n;
    const Tensor& av = gr.value(a);
    const Tensor& bv = gr.value(b);
    if (gr.needs_grad(a.id)) {
      Tensor& g = gr.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * (av[i] - bv[i]);
    }
    if (gr.needs_grad(b.id)) {
      Tensor& g = gr.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go * (av[i] - bv[i]);
    }
  });
}

Var Graph::weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size() || scalars.empty()) throw InvalidInput("weighted_sum: size mismatch");
  double s = 0.0;
  std::vector<int> ids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    s += weights[i] * scalar(scalars[i]);
    ids.push_back(scalars[i].id);
  }
  return push(Tensor({1}, {s}), ids, [scalars, weights](Graph& gr, int self) {
    const double go = gr.nodes_[static_cast<std::size_t>(self)].grad[0];
    for (std::size_t i = 0; i < scalars.size(); ++i)
      if (gr.needs_grad(scalars[i].id)) gr.grad_buffer(scalars[i].id)[0] += go * weights[i];
  });
}

void Adam::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw InvalidInput("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  for (auto* p : params)
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->grad.fill(0.0);
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

}  // namespace shadowlab::nn
