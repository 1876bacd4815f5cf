/*
 * Copyright 2026 The jattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jattn/core/errors.hpp"
#include "jattn/core/random.hpp"
#include "jattn/core/tensor.hpp"

namespace jattn {

// Named model parameter with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Owns all parameters of a model; addresses are stable for the store's
// lifetime. Lookup by name drives checkpoints and the trainable census.
class ParamStore {
 public:
  Param& create(const std::string& name, std::vector<std::size_t> shape) {
    if (find(name)) throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = Tensor(shape);
    p->grad = Tensor(std::move(shape));
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Param* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  Param& get(const std::string& name) {
    Param* p = find(name);
    if (!p) throw ConfigError("unknown parameter: " + name);
    return *p;
  }

  std::vector<Param*> all() {
    std::vector<Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<Param*> trainable() {
    std::vector<Param*> out;
    for (auto& p : params_)
      if (p->trainable) out.push_back(p.get());
    return out;
  }

  std::size_t trainable_count() {
    std::size_t n = 0;
    for (auto& p : params_)
      if (p->trainable) n += p->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

inline void init_normal(Param& p, Rng& rng, double stddev) {
  for (double& v : p.value.data) v = rng.normal(0.0, stddev);
}
inline void init_constant(Param& p, double v) {
  std::fill(p.value.data.begin(), p.value.data.end(), v);
}

// Reverse-mode autodiff over 2-D tensors. Append-only, so reverse creation
// order is a valid topological order for backprop. Gradients for subgraphs
// that cannot reach a trainable parameter are skipped entirely.
class Tape {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const { return id != static_cast<std::size_t>(-1); }
  };

  const Tensor& val(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  Var constant(Tensor t) { return push(std::move(t), false, nullptr); }

  Var param(Param& p) {
    Var v = push(p.value, p.trainable, nullptr);
    nodes_[v.id].bound = &p;
    return v;
  }

  Var matmul(Var a, Var b) {
    Tensor c;
    matmul_nn(val(a), val(b), c);
    Var out = push(std::move(c), needs(a) || needs(b), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Tensor& dc = t.nodes_[out.id].grad;
        if (t.needs(a)) matmul_nt(dc, t.val(b), t.grad_buf(a), true);
        if (t.needs(b)) matmul_tn(t.val(a), dc, t.grad_buf(b), true);
      };
    return out;
  }

  // a * b^T. Lets linear layers use (d_out, d_in) weights without copies.
  Var matmul_t(Var a, Var b) {
    Tensor c;
    matmul_nt(val(a), val(b), c);
    Var out = push(std::move(c), needs(a) || needs(b), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Tensor& dc = t.nodes_[out.id].grad;
        if (t.needs(a)) matmul_nn(dc, t.val(b), t.grad_buf(a), true);
        if (t.needs(b)) matmul_tn(dc, t.val(a), t.grad_buf(b), true);
      };
    return out;
  }

  Var add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Tensor c = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += vb.data[i];
    Var out = push(std::move(c), needs(a) || needs(b), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Tensor& dc = t.nodes_[out.id].grad;
        if (t.needs(a)) t.axpy(dc, 1.0, t.grad_buf(a));
        if (t.needs(b)) t.axpy(dc, 1.0, t.grad_buf(b));
      };
    return out;
  }

  // m (n x d) + row (1 x d), broadcast over rows.
  Var add_row(Var m, Var row) {
    const Tensor& vm = val(m);
    const Tensor& vr = val(row);
    if (vr.numel() != vm.cols())
      throw ShapeError("add_row: " + vm.shape_str() + " + " + vr.shape_str());
    Tensor c = vm;
    for (std::size_t r = 0; r < c.rows(); ++r)
      for (std::size_t j = 0; j < c.cols(); ++j) c.at(r, j) += vr.data[j];
    Var out = push(std::move(c), needs(m) || needs(row), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [m, row, out](Tape& t) {
        const Tensor& dc = t.nodes_[out.id].grad;
        if (t.needs(m)) t.axpy(dc, 1.0, t.grad_buf(m));
        if (t.needs(row)) {
          Tensor& dr = t.grad_buf(row);
          for (std::size_t r = 0; r < dc.rows(); ++r)
            for (std::size_t j = 0; j < dc.cols(); ++j) dr.data[j] += dc.at(r, j);
        }
      };
    return out;
  }

  Var scale(Var a, double c) {
    Tensor v = val(a);
    for (double& x : v.data) x *= c;
    Var out = push(std::move(v), needs(a), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [a, c, out](Tape& t) {
        t.axpy(t.nodes_[out.id].grad, c, t.grad_buf(a));
      };
    return out;
  }

  Var hadamard(Var a, Var b) {
    check_same_shape(val(a), val(b), "hadamard");
    Tensor c = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= vb.data[i];
    Var out = push(std::move(c), needs(a) || needs(b), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Tensor& dc = t.nodes_[out.id].grad;
        if (t.needs(a)) {
          Tensor& da = t.grad_buf(a);
          const Tensor& vb2 = t.val(b);
          for (std::size_t i = 0; i < dc.data.size(); ++i)
            da.data[i] += dc.data[i] * vb2.data[i];
        }
        if (t.needs(b)) {
          Tensor& db = t.grad_buf(b);
          const Tensor& va = t.val(a);
          for (std::size_t i = 0; i < dc.data.size(); ++i)
            db.data[i] += dc.data[i] * va.data[i];
        }
      };
    return out;
  }

  Var softmax_rows(Var x) {
    Tensor y = val(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double mx = y.at(r, 0);
      for (std::size_t j = 1; j < y.cols(); ++j) mx = std::max(mx, y.at(r, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) {
        y.at(r, j) = std::exp(y.at(r, j) - mx);
        sum += y.at(r, j);
      }
      for (std::size_t j = 0; j < y.cols(); ++j) y.at(r, j) /= sum;
    }
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        const Tensor& yv = t.val(out);
        Tensor& dx = t.grad_buf(x);
        for (std::size_t r = 0; r < dy.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < dy.cols(); ++j) dot += dy.at(r, j) * yv.at(r, j);
          for (std::size_t j = 0; j < dy.cols(); ++j)
            dx.at(r, j) += yv.at(r, j) * (dy.at(r, j) - dot);
        }
      };
    return out;
  }

  // Per-row layer norm with learned gain/bias (each 1 x d).
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Tensor& vx = val(x);
    const std::size_t n = vx.rows(), d = vx.cols();
    Tensor y({n, d});
    Tensor xhat({n, d});
    Tensor inv_sigma({n, 1});
    const Tensor& g = val(gain);
    const Tensor& b = val(bias);
    for (std::size_t r = 0; r < n; ++r) {
      double mu = 0.0;
      for (std::size_t j = 0; j < d; ++j) mu += vx.at(r, j);
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double c = vx.at(r, j) - mu;
        var += c * c;
      }
      var /= static_cast<double>(d);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_sigma.at(r, 0) = is;
      for (std::size_t j = 0; j < d; ++j) {
        xhat.at(r, j) = (vx.at(r, j) - mu) * is;
        y.at(r, j) = xhat.at(r, j) * g.data[j] + b.data[j];
      }
    }
    Var out = push(std::move(y), needs(x) || needs(gain) || needs(bias), nullptr);
    if (nodes_[out.id].needs_grad) {
      auto xh = std::make_shared<Tensor>(std::move(xhat));
      auto isg = std::make_shared<Tensor>(std::move(inv_sigma));
      nodes_[out.id].backprop = [x, gain, bias, out, xh, isg](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        const std::size_t n2 = dy.rows(), d2 = dy.cols();
        const Tensor& g2 = t.val(gain);
        if (t.needs(gain)) {
          Tensor& dg = t.grad_buf(gain);
          for (std::size_t r = 0; r < n2; ++r)
            for (std::size_t j = 0; j < d2; ++j)
              dg.data[j] += dy.at(r, j) * xh->at(r, j);
        }
        if (t.needs(bias)) {
          Tensor& db = t.grad_buf(bias);
          for (std::size_t r = 0; r < n2; ++r)
            for (std::size_t j = 0; j < d2; ++j) db.data[j] += dy.at(r, j);
        }
        if (t.needs(x)) {
          Tensor& dx = t.grad_buf(x);
          for (std::size_t r = 0; r < n2; ++r) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < d2; ++j) {
              const double dxh = dy.at(r, j) * g2.data[j];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * xh->at(r, j);
            }
            mean_dxhat /= static_cast<double>(d2);
            mean_dxhat_xhat /= static_cast<double>(d2);
            const double is = isg->at(r, 0);
            for (std::size_t j = 0; j < d2; ++j) {
              const double dxh = dy.at(r, j) * g2.data[j];
              dx.at(r, j) += is * (dxh - mean_dxhat - xh->at(r, j) * mean_dxhat_xhat);
            }
          }
        }
      };
    }
    return out;
  }

  Var gelu(Var x) {
    static constexpr double kInvSqrt2 = 0.70710678118654752440;
    static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    Tensor y = val(x);
    for (double& v : y.data) v = v * 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        const Tensor& vx = t.val(x);
        Tensor& dx = t.grad_buf(x);
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
          const double v = vx.data[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
          dx.data[i] += dy.data[i] * (cdf + v * pdf);
        }
      };
    return out;
  }

  Var slice_cols(Var x, std::size_t c0, std::size_t c1) {
    const Tensor& vx = val(x);
    if (c1 > vx.cols() || c0 >= c1)
      throw ShapeError("slice_cols: bad range on " + vx.shape_str());
    Tensor y({vx.rows(), c1 - c0});
    for (std::size_t r = 0; r < vx.rows(); ++r)
      for (std::size_t j = c0; j < c1; ++j) y.at(r, j - c0) = vx.at(r, j);
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, c0, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        Tensor& dx = t.grad_buf(x);
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t j = 0; j < dy.cols(); ++j) dx.at(r, c0 + j) += dy.at(r, j);
      };
    return out;
  }

  Var slice_rows(Var x, std::size_t r0, std::size_t r1) {
    const Tensor& vx = val(x);
    if (r1 > vx.rows() || r0 >= r1)
      throw ShapeError("slice_rows: bad range on " + vx.shape_str());
    const std::size_t d = vx.cols();
    Tensor y({r1 - r0, d});
    std::copy(vx.data.begin() + r0 * d, vx.data.begin() + r1 * d, y.data.begin());
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, r0, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        Tensor& dx = t.grad_buf(x);
        const std::size_t d2 = dy.cols();
        for (std::size_t i = 0; i < dy.data.size(); ++i)
          dx.data[r0 * d2 + i] += dy.data[i];
      };
    return out;
  }

  Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    const std::size_t n = val(xs[0]).rows();
    std::size_t total = 0;
    bool any = false;
    for (Var v : xs) {
      if (val(v).rows() != n) throw ShapeError("concat_cols: row mismatch");
      total += val(v).cols();
      any = any || needs(v);
    }
    Tensor y({n, total});
    std::size_t off = 0;
    for (Var v : xs) {
      const Tensor& t = val(v);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < t.cols(); ++j) y.at(r, off + j) = t.at(r, j);
      off += t.cols();
    }
    Var out = push(std::move(y), any, nullptr);
    if (nodes_[out.id].needs_grad) {
      auto parts = std::make_shared<std::vector<Var>>(xs);
      nodes_[out.id].backprop = [parts, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        std::size_t o = 0;
        for (Var v : *parts) {
          const std::size_t c = t.val(v).cols();
          if (t.needs(v)) {
            Tensor& dv = t.grad_buf(v);
            for (std::size_t r = 0; r < dy.rows(); ++r)
              for (std::size_t j = 0; j < c; ++j) dv.at(r, j) += dy.at(r, o + j);
          }
          o += c;
        }
      };
    }
    return out;
  }

  Var concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty input");
    const std::size_t d = val(xs[0]).cols();
    std::size_t total = 0;
    bool any = false;
    for (Var v : xs) {
      if (val(v).cols() != d) throw ShapeError("concat_rows: col mismatch");
      total += val(v).rows();
      any = any || needs(v);
    }
    Tensor y({total, d});
    std::size_t off = 0;
    for (Var v : xs) {
      const Tensor& t = val(v);
      std::copy(t.data.begin(), t.data.end(), y.data.begin() + off * d);
      off += t.rows();
    }
    Var out = push(std::move(y), any, nullptr);
    if (nodes_[out.id].needs_grad) {
      auto parts = std::make_shared<std::vector<Var>>(xs);
      nodes_[out.id].backprop = [parts, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        const std::size_t d2 = dy.cols();
        std::size_t o = 0;
        for (Var v : *parts) {
          const std::size_t r = t.val(v).rows();
          if (t.needs(v)) {
            Tensor& dv = t.grad_buf(v);
            for (std::size_t i = 0; i < r * d2; ++i) dv.data[i] += dy.data[o * d2 + i];
          }
          o += r;
        }
      };
    }
    return out;
  }

  // (n x d) -> (1 x d), arithmetic mean over rows.
  Var mean_rows(Var x) {
    const Tensor& vx = val(x);
    const std::size_t n = vx.rows(), d = vx.cols();
    if (n == 0) throw ShapeError("mean_rows: empty input");
    Tensor y({1, d});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) y.data[j] += vx.at(r, j);
    for (double& v : y.data) v /= static_cast<double>(n);
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, n, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        Tensor& dx = t.grad_buf(x);
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < dy.cols(); ++j) dx.at(r, j) += dy.data[j] * inv;
      };
    return out;
  }

  // (n x d) -> (1 x d), per-column max over rows (first max wins ties).
  Var max_rows(Var x) {
    const Tensor& vx = val(x);
    const std::size_t n = vx.rows(), d = vx.cols();
    if (n == 0) throw ShapeError("max_rows: empty input");
    Tensor y({1, d});
    auto arg = std::make_shared<std::vector<std::size_t>>(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
      double best = vx.at(0, j);
      for (std::size_t r = 1; r < n; ++r)
        if (vx.at(r, j) > best) {
          best = vx.at(r, j);
          (*arg)[j] = r;
        }
      y.data[j] = best;
    }
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, arg, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        Tensor& dx = t.grad_buf(x);
        for (std::size_t j = 0; j < dy.cols(); ++j) dx.at((*arg)[j], j) += dy.data[j];
      };
    return out;
  }

  // Inverted dropout; mask values are 0 or 1/(1-p). Callers skip this node
  // entirely in inference mode.
  Var dropout(Var x, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1)");
    const Tensor& vx = val(x);
    auto mask = std::make_shared<Tensor>(vx.shape);
    const double keep = 1.0 - p;
    for (double& m : mask->data) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor y = vx;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= mask->data[i];
    Var out = push(std::move(y), needs(x), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [x, mask, out](Tape& t) {
        const Tensor& dy = t.nodes_[out.id].grad;
        Tensor& dx = t.grad_buf(x);
        for (std::size_t i = 0; i < dy.data.size(); ++i)
          dx.data[i] += dy.data[i] * mask->data[i];
      };
    return out;
  }

  // Numerically stable binary cross-entropy on one logit (1 x 1).
  Var bce_with_logit(Var logit, double target, double weight = 1.0) {
    const double l = val(logit).data.at(0);
    const double loss =
        weight * (std::max(l, 0.0) - l * target + std::log1p(std::exp(-std::abs(l))));
    Tensor y({1, 1});
    y.data[0] = loss;
    Var out = push(std::move(y), needs(logit), nullptr);
    if (nodes_[out.id].needs_grad)
      nodes_[out.id].backprop = [logit, l, target, weight, out](Tape& t) {
        const double dy = t.nodes_[out.id].grad.data[0];
        const double sig = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l))
                                    : std::exp(l) / (1.0 + std::exp(l));
        t.grad_buf(logit).data[0] += dy * weight * (sig - target);
      };
    return out;
  }

  // Backprop from a scalar root. Parameters accumulate into Param::grad, so
  // several backward passes (one per batch sample) sum naturally.
  void backward(Var root) {
    if (val(root).numel() != 1) throw ShapeError("backward: root must be scalar");
    grad_buf(root).data[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backprop) n.backprop(*this);
      if (n.bound && n.bound->trainable) {
        Tensor& pg = n.bound->grad;
        for (std::size_t k = 0; k < pg.data.size(); ++k) pg.data[k] += n.grad.data[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first contribution
    bool needs_grad = false;
    std::function<void(Tape&)> backprop;
    Param* bound = nullptr;
  };

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  Tensor& grad_buf(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  void axpy(const Tensor& src, double a, Tensor& dst) {
    for (std::size_t i = 0; i < src.data.size(); ++i) dst.data[i] += a * src.data[i];
  }

  Var push(Tensor value, bool needs_grad, Param* bound) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace jattn
