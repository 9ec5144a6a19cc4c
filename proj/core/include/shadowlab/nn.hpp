#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "shadowlab/random.hpp"
#include "shadowlab/tensor.hpp"

// Minimal reverse-mode autodiff over CHW tensors, sized for desk-scale models.
namespace shadowlab::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value; accumulated by optimizers' callers

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  std::size_t size() const noexcept { return value.size(); }
};

// He-style initializers driven by an explicit engine.
void init_uniform(Parameter& p, Engine& rng, double bound);
void init_kaiming(Parameter& p, Engine& rng, int fan_in);
void init_zero(Parameter& p);

struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  // Binds a parameter by reference. Trainable bindings collect gradients that
  // param_grad() returns after backward(); frozen bindings behave like constants.
  Var bind(const Parameter& p, bool trainable);

  const Tensor& value(Var v) const;
  // Zero tensor when no gradient reached the node.
  Tensor grad(Var v) const;
  Tensor param_grad(const Parameter& p) const;
  double scalar(Var v) const { return value(v)[0]; }

  // Seeds d(out)/d(out) = 1 for a single-element output and propagates to all parents.
  void backward(Var out);

  Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
  Var upsample2x(Var x);
  Var maxpool2x2(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_const(Var a, const Tensor& c);
  Var mul_const(Var a, const Tensor& c);
  Var silu(Var a);
  Var relu(Var a);
  Var linear(Var x, Var weight, Var bias);
  // x[C,H,W] * (1 + scale[C]) + shift[C]
  Var film(Var x, Var scale, Var shift);
  Var slice(Var v, int begin, int end);
  Var concat_channels(const std::vector<Var>& parts);
  Var mean_abs_diff(Var a, Var b);
  Var mean_sq_diff(Var a, Var b);
  Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::vector<int> parents;
    std::function<void(Graph&, int)> backward;
    const Tensor& value() const { return ref ? *ref : owned; }
  };

  Var push(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> backward);
  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }
  Tensor& grad_buffer(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bindings_;
};

// Adam with bias correction; moments are indexed by parameter order.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update using each parameter's .grad.
  void step(const std::vector<Parameter*>& params);
  void set_lr(double lr) noexcept { lr_ = lr; }
  double lr() const noexcept { return lr_; }
  long iterations() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

void sgd_step(const std::vector<Parameter*>& params, double lr);
void zero_grads(const std::vector<Parameter*>& params);
std::size_t parameter_count(const std::vector<Parameter*>& params);

}  // namespace shadowlab::nn
