/*
 * Copyright 2026 The VFedTrans Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Fully connected networks with batched backpropagation and Adam.

#ifndef VFEDTRANS_NN_HPP_
#define VFEDTRANS_NN_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/rng.hpp"

namespace vfedtrans::nn {

enum class Activation { kIdentity, kSigmoid, kRelu };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "identity";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  if (s == "sigmoid" || s == "logistic") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
  }
  return z;
}

// Derivative expressed through the activation's output y.
inline double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kSigmoid: return y * (1.0 - y);
    case Activation::kRelu: return y > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

struct Dense {
  Matrix w;  // in x out
  Vector b;  // out
  Activation act = Activation::kIdentity;

  std::size_t in() const { return w.rows(); }
  std::size_t out() const { return w.cols(); }
};

// Activations recorded by a forward pass: a[0] is the input, a[l + 1] the
// output of layer l.
struct Tape {
  std::vector<Matrix> a;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Dense> layers) : layers_(std::move(layers)) { check_chain(); }

  // widths = {in, h1, ..., out}. Glorot-uniform weights (He for relu), zero
  // biases.
  static Network build(std::span<const std::size_t> widths, Activation hidden, Activation output,
                       Rng& rng) {
    if (widths.size() < 2) throw ShapeError("Network::build: need at least input and output width");
    std::vector<Dense> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      if (in == 0 || out == 0) throw ShapeError("Network::build: zero layer width");
      const Activation act = l + 2 == widths.size() ? output : hidden;
      const double limit = act == Activation::kRelu
                               ? std::sqrt(6.0 / static_cast<double>(in))
                               : std::sqrt(6.0 / static_cast<double>(in + out));
      Dense d{Matrix(in, out), Vector(out, 0.0), act};
      for (double& v : d.w.data()) v = limit * (2.0 * uniform01(rng) - 1.0);
      layers.push_back(std::move(d));
    }
    return Network(std::move(layers));
  }

  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }
  std::size_t input_width() const { return layers_.front().in(); }
  std::size_t output_width() const { return layers_.back().out(); }

  Network zeros_like() const {
    Network g = *this;
    for (auto& d : g.layers_) {
      d.w = Matrix(d.in(), d.out(), 0.0);
      d.b.assign(d.out(), 0.0);
    }
    return g;
  }

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const {
    if (x.cols() != input_width()) {
      throw ShapeError("Network::forward: input width " + std::to_string(x.cols()) +
                       ", expected " + std::to_string(input_width()));
    }
    if (tape) {
      tape->a.clear();
      tape->a.push_back(x);
    }
    Matrix cur = x;
    for (const auto& d : layers_) {
      Matrix z = matmul(cur, d.w);
      for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = activate(d.act, row[j] + d.b[j]);
      }
      cur = std::move(z);
      if (tape) tape->a.push_back(cur);
    }
    return cur;
  }

  // Given dL/d(output), accumulates parameter gradients into `grad` (same
  // shapes as *this) and returns dL/d(input).
  Matrix backward(const Tape& tape, Matrix d_out, Network& grad) const {
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Dense& d = layers_[l];
      const Matrix& y = tape.a[l + 1];
      for (std::size_t k = 0; k < d_out.data().size(); ++k) {
        d_out.data()[k] *= activate_grad(d.act, y.data()[k]);
      }
      grad.layers_[l].w += matmul_tn(tape.a[l], d_out);
      for (std::size_t i = 0; i < d_out.rows(); ++i) {
        auto row = d_out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) grad.layers_[l].b[j] += row[j];
      }
      d_out = matmul(d_out, d.w.transpose());
    }
    return d_out;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& d : layers_) n += d.w.data().size() + d.b.size();
    return n;
  }

  Vector flat() const {
    Vector out;
    out.reserve(num_params());
    for (const auto& d : layers_) {
      out.insert(out.end(), d.w.data().begin(), d.w.data().end());
      out.insert(out.end(), d.b.begin(), d.b.end());
    }
    return out;
  }

  // Reads parameters from `v` starting at `offset`; returns the new offset.
  std::size_t set_flat(std::span<const double> v, std::size_t offset = 0) {
    for (auto& d : layers_) {
      for (double& x : d.w.data()) x = v[offset++];
      for (double& x : d.b) x = v[offset++];
    }
    return offset;
  }

  bool all_finite() const {
    for (const auto& d : layers_) {
      for (double v : d.w.data())
        if (!std::isfinite(v)) return false;
      for (double v : d.b)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : layers_) {
      arr.push_back({{"in", d.in()},
                     {"out", d.out()},
                     {"activation", activation_name(d.act)},
                     {"w", d.w.data()},
                     {"b", d.b}});
    }
    return arr;
  }

  static Network from_json(const nlohmann::json& j) {
    std::vector<Dense> layers;
    for (const auto& e : j) {
      const auto in = e.at("in").get<std::size_t>();
      const auto out = e.at("out").get<std::size_t>();
      layers.push_back({Matrix(in, out, e.at("w").get<std::vector<double>>()),
                        e.at("b").get<std::vector<double>>(),
                        activation_from_name(e.at("activation").get<std::string>())});
      if (layers.back().b.size() != out) throw ShapeError("Network::from_json: bias length mismatch");
    }
    return Network(std::move(layers));
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      const auto &x = a.layers_[l], &y = b.layers_[l];
      if (!(x.w == y.w) || x.b != y.b || x.act != y.act) return false;
    }
    return true;
  }

 private:
  void check_chain() const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].b.size() != layers_[l].out()) throw ShapeError("Network: bias length mismatch");
      if (l > 0 && layers_[l - 1].out() != layers_[l].in()) {
        throw ShapeError("Network: layer " + std::to_string(l) + " expects width " +
                         std::to_string(layers_[l].in()) + ", previous layer emits " +
                         std::to_string(layers_[l - 1].out()));
      }
    }
  }

  std::vector<Dense> layers_;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(Vector& params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw ShapeError("Adam::step: parameter count changed");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      params[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector m_, v_;
  std::size_t t_ = 0;
};

}  // namespace vfedtrans::nn

#endif  // VFEDTRANS_NN_HPP_
