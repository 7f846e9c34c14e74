// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/network.hpp"

#include <algorithm>
#include <cmath>

namespace cgru::numerics {

namespace {

std::string layer_name(std::size_t i) { return "layer" + std::to_string(i); }

// out(r, :) = bias + x(r, :) * w, with w stored (in, out). The k-summation
// order per output element is fixed, so a row's result never depends on
// which other rows share the batch.
void affine(const Tensor& x, const Tensor& w, const Tensor& bias, Tensor& out) {
  const std::size_t rows = x.rows(), in = w.shape()[0], cols = w.shape()[1];
  out = Tensor::matrix(rows, cols);
  const double* wp = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * cols;
    const double* xr = x.data() + r * in;
    std::copy(bias.data(), bias.data() + cols, o);
    for (std::size_t k = 0; k < in; ++k) {
      const double xk = xr[k];
      const double* wk = wp + k * cols;
      for (std::size_t j = 0; j < cols; ++j) o[j] += xk * wk[j];
    }
  }
}

// dw += x^T g, db += sum_rows g, dx = g w^T.
void affine_backward(const Tensor& x, const Tensor& w, const Tensor& g, Tensor& dw, Tensor& db, Tensor* dx) {
  const std::size_t rows = x.rows(), in = w.shape()[0], cols = w.shape()[1];
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g.data() + r * cols;
    const double* xr = x.data() + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double xk = xr[k];
      double* dwk = dw.data() + k * cols;
      for (std::size_t j = 0; j < cols; ++j) dwk[j] += xk * gr[j];
    }
    double* dbp = db.data();
    for (std::size_t j = 0; j < cols; ++j) dbp[j] += gr[j];
  }
  if (dx) {
    *dx = Tensor::matrix(rows, in);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.data() + r * cols;
      double* dxr = dx->data() + r * in;
      for (std::size_t k = 0; k < in; ++k) {
        const double* wk = w.data() + k * cols;
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += gr[j] * wk[j];
        dxr[k] = s;
      }
    }
  }
}

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError("non-finite value produced by " + where);
}

}  // namespace

Network::Network(std::vector<LayerSpec> arch) : arch_(std::move(arch)) {
  std::size_t width = 0;
  for (std::size_t i = 0; i < arch_.size(); ++i) {
    const LayerSpec& l = arch_[i];
    first_param_.push_back(params_.size());
    switch (l.kind) {
      case LayerKind::dense:
        if (l.a == 0 || l.b == 0) throw ShapeError(layer_name(i) + ": dense layer needs positive dims");
        if (width != 0 && width != l.a)
          throw ShapeError(layer_name(i) + ": dense input " + std::to_string(l.a) +
                           " does not match previous width " + std::to_string(width));
        params_.push_back({layer_name(i) + ".weight", Tensor::matrix(l.a, l.b)});
        params_.push_back({layer_name(i) + ".bias", Tensor({l.b})});
        width = l.b;
        break;
      case LayerKind::film:
        if (l.a == 0 || l.b == 0) throw ShapeError(layer_name(i) + ": film layer needs positive dims");
        if (width != l.a)
          throw ShapeError(layer_name(i) + ": film features " + std::to_string(l.a) +
                           " do not match previous width " + std::to_string(width));
        params_.push_back({layer_name(i) + ".cond_weight", Tensor::matrix(l.b, 2 * l.a)});
        params_.push_back({layer_name(i) + ".cond_bias", Tensor({2 * l.a})});
        break;
      case LayerKind::tanh:
      case LayerKind::relu:
      case LayerKind::softmax:
        if (width == 0) throw ShapeError(layer_name(i) + ": activation before any dense layer");
        break;
    }
  }
  if (arch_.empty() || arch_.front().kind != LayerKind::dense)
    throw ShapeError("network must start with a dense layer");
  std::size_t cond = 0;
  for (const auto& l : arch_)
    if (l.kind == LayerKind::film) {
      if (cond != 0 && cond != l.b) throw ShapeError("film layers disagree on conditioning width");
      cond = l.b;
    }
}

Network Network::initialized(std::vector<LayerSpec> arch, Rng& rng) {
  Network net(std::move(arch));
  for (std::size_t i = 0; i < net.arch_.size(); ++i) {
    const LayerSpec& l = net.arch_[i];
    if (l.kind != LayerKind::dense && l.kind != LayerKind::film) continue;
    Tensor& w = net.params_[net.first_param_[i]].value;
    const std::size_t in = w.shape()[0], out = w.shape()[1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    if (l.kind == LayerKind::film) {
      Tensor& b = net.params_[net.first_param_[i] + 1].value;
      for (std::size_t j = 0; j < l.a; ++j) b[j] = 1.0;
    }
  }
  return net;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t Network::input_dim() const { return arch_.empty() ? 0 : arch_.front().a; }

std::size_t Network::output_dim() const {
  for (auto it = arch_.rbegin(); it != arch_.rend(); ++it)
    if (it->kind == LayerKind::dense) return it->b;
  return 0;
}

std::size_t Network::cond_dim() const {
  for (const auto& l : arch_)
    if (l.kind == LayerKind::film) return l.b;
  return 0;
}

const Tensor& Network::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw UsageError("no parameter named " + name);
}

Tensor& Network::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Network&>(*this).param(name));
}

std::vector<double> Network::flat_params() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.value.values().begin(), p.value.values().end());
  return flat;
}

void Network::set_flat_params(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                     std::to_string(param_count()));
  std::size_t off = 0;
  for (auto& p : params_) {
    std::copy(flat.begin() + off, flat.begin() + off + p.value.size(), p.value.data());
    off += p.value.size();
  }
}

ParamGrads Network::zero_grads() const {
  ParamGrads g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.shape());
  return g;
}

ForwardTrace forward_trace(const Network& net, const Tensor& input, const Tensor* cond) {
  const auto& arch = net.arch();
  if (input.rank() != 2 || input.cols() != net.input_dim())
    throw ShapeError("layer0 (dense): expected input of shape (rows," + std::to_string(net.input_dim()) +
                     "), got " + shape_string(input.shape()));
  const std::size_t rows = input.rows();
  const std::size_t cdim = net.cond_dim();
  if (cdim == 0 && cond != nullptr) throw ShapeError("conditioning given to a network without film layers");
  if (cdim != 0) {
    if (cond == nullptr) throw ShapeError("film network requires a conditioning tensor");
    if (cond->rank() != 2 || cond->rows() != rows || cond->cols() != cdim)
      throw ShapeError("conditioning shape " + shape_string(cond->shape()) + " does not match (" +
                       std::to_string(rows) + "," + std::to_string(cdim) + ")");
  }

  ForwardTrace tr;
  tr.inputs.reserve(arch.size());
  if (cond) tr.cond = *cond;
  Tensor cur = input;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const LayerSpec& l = arch[i];
    tr.inputs.push_back(cur);
    Tensor next;
    switch (l.kind) {
      case LayerKind::dense:
        if (cur.cols() != l.a)
          throw ShapeError("layer" + std::to_string(i) + " (dense): input width " + std::to_string(cur.cols()) +
                           " != " + std::to_string(l.a));
        affine(cur, net.params()[slot].value, net.params()[slot + 1].value, next);
        slot += 2;
        break;
      case LayerKind::film: {
        Tensor ss;
        affine(*cond, net.params()[slot].value, net.params()[slot + 1].value, ss);
        slot += 2;
        const std::size_t f = l.a;
        next = Tensor::matrix(rows, f);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = ss.data() + r * 2 * f;
          const double* x = cur.data() + r * f;
          double* o = next.data() + r * f;
          for (std::size_t j = 0; j < f; ++j) o[j] = s[j] * x[j] + s[f + j];
        }
        tr.film_ss.push_back(std::move(ss));
        break;
      }
      case LayerKind::tanh:
        next = cur;
        for (double& v : next.values()) v = std::tanh(v);
        break;
      case LayerKind::relu:
        next = cur;
        for (double& v : next.values()) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::softmax: {
        next = cur;
        const std::size_t c = next.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          double* o = next.data() + r * c;
          const double mx = *std::max_element(o, o + c);
          double z = 0.0;
          for (std::size_t j = 0; j < c; ++j) z += (o[j] = std::exp(o[j] - mx));
          for (std::size_t j = 0; j < c; ++j) o[j] /= z;
        }
        break;
      }
    }
    cur = std::move(next);
  }
  check_finite(cur, "forward");
  tr.output = std::move(cur);
  return tr;
}

Tensor forward(const Network& net, const Tensor& input, const Tensor* cond) {
  return forward_trace(net, input, cond).output;
}

BackwardResult backward(const Network& net, const ForwardTrace& tr, const Tensor& out_grad) {
  if (out_grad.shape() != tr.output.shape())
    throw ShapeError("out_grad shape " + shape_string(out_grad.shape()) + " does not match output shape " +
                     shape_string(tr.output.shape()));
  const auto& arch = net.arch();
  BackwardResult res{net.zero_grads(), {}};
  Tensor g = out_grad;
  std::size_t slot = net.params().size();
  std::size_t film_idx = tr.film_ss.size();
  for (std::size_t ii = arch.size(); ii-- > 0;) {
    const LayerSpec& l = arch[ii];
    const Tensor& x = tr.inputs[ii];
    switch (l.kind) {
      case LayerKind::dense: {
        slot -= 2;
        Tensor dx;
        affine_backward(x, net.params()[slot].value, g, res.param_grads[slot], res.param_grads[slot + 1], &dx);
        g = std::move(dx);
        break;
      }
      case LayerKind::film: {
        slot -= 2;
        const Tensor& ss = tr.film_ss[--film_idx];
        const std::size_t f = l.a, rows = x.rows();
        Tensor dss = Tensor::matrix(rows, 2 * f);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = ss.data() + r * 2 * f;
          const double* xr = x.data() + r * f;
          double* gr = g.data() + r * f;
          double* d = dss.data() + r * 2 * f;
          for (std::size_t j = 0; j < f; ++j) {
            d[j] = gr[j] * xr[j];
            d[f + j] = gr[j];
            gr[j] *= s[j];
          }
        }
        affine_backward(tr.cond, net.params()[slot].value, dss, res.param_grads[slot], res.param_grads[slot + 1],
                        nullptr);
        break;
      }
      case LayerKind::tanh: {
        const Tensor& y = tr.inputs.size() > ii + 1 ? tr.inputs[ii + 1] : tr.output;
        for (std::size_t k = 0; k < g.size(); ++k) g[k] *= 1.0 - y[k] * y[k];
        break;
      }
      case LayerKind::relu:
        for (std::size_t k = 0; k < g.size(); ++k)
          if (!(x[k] > 0.0)) g[k] = 0.0;
        break;
      case LayerKind::softmax: {
        const Tensor& y = tr.inputs.size() > ii + 1 ? tr.inputs[ii + 1] : tr.output;
        const std::size_t c = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const double* yr = y.data() + r * c;
          double* gr = g.data() + r * c;
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += yr[j] * gr[j];
          for (std::size_t j = 0; j < c; ++j) gr[j] = yr[j] * (gr[j] - dot);
        }
        break;
      }
    }
  }
  for (std::size_t k = 0; k < res.param_grads.size(); ++k) check_finite(res.param_grads[k], "backward");
  check_finite(g, "backward");
  res.input_grad = std::move(g);
  return res;
}

BackwardResult backward(const Network& net, const Tensor& input, const Tensor* cond, const Tensor& out_grad) {
  return backward(net, forward_trace(net, input, cond), out_grad);
}

std::vector<double> flatten(const ParamGrads& grads) {
  std::vector<double> flat;
  for (const auto& g : grads) flat.insert(flat.end(), g.values().begin(), g.values().end());
  return flat;
}

ParamGrads unflatten(const Network& like, std::span<const double> flat) {
  ParamGrads g = like.zero_grads();
  std::size_t off = 0;
  for (auto& t : g) {
    if (off + t.size() > flat.size()) throw ShapeError("flat gradient too short");
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data());
    off += t.size();
  }
  if (off != flat.size()) throw ShapeError("flat gradient too long");
  return g;
}

}  // namespace cgru::numerics
