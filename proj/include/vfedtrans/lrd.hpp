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

// Local representation distillation. An autoencoder on the task party's
// features is trained with
//
//   L(x) = |Dec(Enc(x)) - x|^2 / |X_t|                       (private rows)
//   L(x) = |Dec(Enc(x)) - x|^2 / |X_t| + theta·|Enc(x) - fed|^2 / r   (shared rows)
//
// so the latent code of shared samples is pulled toward the federated
// representation. Enc then enriches every task row: x* = [x, Enc_1(x), ...].

#ifndef VFEDTRANS_LRD_HPP_
#define VFEDTRANS_LRD_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vfedtrans/csv.hpp"
#include "vfedtrans/error.hpp"
#include "vfedtrans/frl.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/nn.hpp"
#include "vfedtrans/rng.hpp"
#include "vfedtrans/transcript.hpp"

namespace vfedtrans {

enum class DistillNorm { kL2, kL1 };

struct DistillConfig {
  double theta = 0.001;
  double learning_rate = 0.001;
  std::size_t batch_size = 100;
  std::size_t epochs = 500;
  std::size_t depth = 6;  // encoder + decoder layers
  nn::Activation hidden = nn::Activation::kSigmoid;
  DistillNorm norm = DistillNorm::kL2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(theta >= 0.0)) throw ConfigError("lrd.theta must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("lrd.learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("lrd.batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("lrd.epochs must be >= 1");
    if (depth < 2 || depth % 2 != 0) throw ConfigError("lrd.depth must be an even number >= 2");
  }
};

// Encoder widths {in, h_1, ..., r}: geometric interpolation between in and r.
inline std::vector<std::size_t> encoder_widths(std::size_t in, std::size_t r, std::size_t depth) {
  const std::size_t n = depth / 2;
  std::vector<std::size_t> w{in};
  for (std::size_t k = 1; k < n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    const double v = std::exp((1.0 - t) * std::log(double(in)) + t * std::log(double(r)));
    w.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(v))));
  }
  w.push_back(r);
  return w;
}

struct EncoderParams {
  nn::Network encoder;  // in -> r, linear latent
  nn::Network decoder;  // r -> in, linear output

  static EncoderParams init(std::size_t in, std::size_t r, std::size_t depth, nn::Activation hidden,
                            Rng& rng) {
    if (in < 1 || r < 1) throw ShapeError("EncoderParams: widths must be >= 1");
    auto enc = encoder_widths(in, r, depth);
    std::vector<std::size_t> dec(enc.rbegin(), enc.rend());
    EncoderParams p;
    p.encoder = nn::Network::build(enc, hidden, nn::Activation::kIdentity, rng);
    p.decoder = nn::Network::build(dec, hidden, nn::Activation::kIdentity, rng);
    return p;
  }

  std::size_t input_width() const { return encoder.input_width(); }
  std::size_t latent_width() const { return encoder.output_width(); }

  Matrix encode(const Matrix& x) const { return encoder.forward(x); }
  Matrix reconstruct(const Matrix& x) const { return decoder.forward(encoder.forward(x)); }

  std::size_t num_params() const { return encoder.num_params() + decoder.num_params(); }

  Vector flat() const {
    Vector v = encoder.flat();
    Vector d = decoder.flat();
    v.insert(v.end(), d.begin(), d.end());
    return v;
  }

  void set_flat(std::span<const double> v) {
    if (v.size() != num_params()) throw ShapeError("EncoderParams::set_flat: wrong length");
    decoder.set_flat(v, encoder.set_flat(v));
  }

  std::string digest() const {
    Vector v = flat();
    return vfedtrans::digest(v.size(), 1, v);
  }

  nlohmann::json to_json() const {
    return {{"version", 1},
            {"input_width", input_width()},
            {"latent_width", latent_width()},
            {"encoder", encoder.to_json()},
            {"decoder", decoder.to_json()}};
  }

  static EncoderParams from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != 1) throw DataError("EncoderParams: unsupported version");
    EncoderParams p{nn::Network::from_json(j.at("encoder")), nn::Network::from_json(j.at("decoder"))};
    if (p.encoder.output_width() != p.decoder.input_width() ||
        p.decoder.output_width() != p.encoder.input_width()) {
      throw ShapeError("EncoderParams: encoder and decoder do not chain");
    }
    return p;
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct LossParts {
  double reconstruction = 0.0;  // mean over the batch
  double distillation = 0.0;    // mean over the batch (zero for private rows)
  double total = 0.0;
};

namespace detail {

inline double distill_term(std::span<const double> z, std::span<const double> fed, DistillNorm norm) {
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double e = z[j] - fed[j];
    s += norm == DistillNorm::kL2 ? e * e : std::abs(e);
  }
  return s / static_cast<double>(z.size());
}

inline void check_batch(const EncoderParams& p, const Matrix& x, const Matrix& fed,
                        std::span<const char> shared) {
  if (x.rows() == 0) throw ShapeError("lrd: empty batch");
  if (x.cols() != p.input_width()) {
    throw ShapeError("lrd: input width " + std::to_string(x.cols()) + ", encoder expects " +
                     std::to_string(p.input_width()));
  }
  if (shared.size() != x.rows() || fed.rows() != x.rows()) {
    throw ShapeError("lrd: batch rows, fed rows and shared mask disagree");
  }
  if (fed.cols() != p.latent_width()) {
    throw ShapeError("lrd: fed width " + std::to_string(fed.cols()) + ", latent width " +
                     std::to_string(p.latent_width()));
  }
}

}  // namespace detail

// Mean loss over a batch. fed row i is read only where shared[i] != 0.
inline LossParts lrd_batch_loss(const EncoderParams& p, const Matrix& x, const Matrix& fed,
                                std::span<const char> shared, double theta,
                                DistillNorm norm = DistillNorm::kL2) {
  detail::check_batch(p, x, fed, shared);
  const Matrix z = p.encode(x);
  const Matrix y = p.decoder.forward(z);
  LossParts out;
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double e = y(i, j) - x(i, j);
      r += e * e;
    }
    out.reconstruction += r / static_cast<double>(x.cols()) / n;
    if (shared[i]) out.distillation += detail::distill_term(z.row(i), fed.row(i), norm) / n;
  }
  out.total = out.reconstruction + theta * out.distillation;
  return out;
}

// Single-row loss; `fed` present iff the row is a shared sample.
inline double lrd_loss(const EncoderParams& p, std::span<const double> x,
                       std::optional<std::span<const double>> fed, double theta,
                       DistillNorm norm = DistillNorm::kL2) {
  if (fed && fed->size() != p.latent_width()) {
    throw ShapeError("lrd_loss: fed has length " + std::to_string(fed->size()) + ", latent width " +
                     std::to_string(p.latent_width()));
  }
  Matrix xm(1, x.size(), Vector(x.begin(), x.end()));
  Matrix fm(1, p.latent_width(), 0.0);
  if (fed) std::copy(fed->begin(), fed->end(), fm.row(0).begin());
  const char shared = fed ? 1 : 0;
  return lrd_batch_loss(p, xm, fm, std::span<const char>(&shared, 1), theta, norm).total;
}

struct LrdGradient {
  nn::Network encoder;
  nn::Network decoder;
  LossParts loss;

  Vector flat() const {
    Vector v = encoder.flat();
    Vector d = decoder.flat();
    v.insert(v.end(), d.begin(), d.end());
    return v;
  }
};

// Analytic gradient of the mean batch loss.
inline LrdGradient lrd_gradient(const EncoderParams& p, const Matrix& x, const Matrix& fed,
                                std::span<const char> shared, double theta,
                                DistillNorm norm = DistillNorm::kL2) {
  detail::check_batch(p, x, fed, shared);
  nn::Tape te, td;
  const Matrix z = p.encoder.forward(x, &te);
  const Matrix y = p.decoder.forward(z, &td);
  const double n = static_cast<double>(x.rows());
  const double dx = static_cast<double>(x.cols());
  const double dr = static_cast<double>(z.cols());

  LrdGradient g{p.encoder.zeros_like(), p.decoder.zeros_like(), {}};
  Matrix dy(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const double e = y(i, j) - x(i, j);
      r += e * e;
      dy(i, j) = 2.0 * e / dx / n;
    }
    g.loss.reconstruction += r / dx / n;
  }
  Matrix dz = p.decoder.backward(td, std::move(dy), g.decoder);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (!shared[i]) continue;
    g.loss.distillation += detail::distill_term(z.row(i), fed.row(i), norm) / n;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double e = z(i, j) - fed(i, j);
      const double d = norm == DistillNorm::kL2 ? 2.0 * e : (e > 0.0) - (e < 0.0);
      dz(i, j) += theta * d / dr / n;
    }
  }
  p.encoder.backward(te, std::move(dz), g.encoder);
  g.loss.total = g.loss.reconstruction + theta * g.loss.distillation;
  return g;
}

struct TrainedEncoder {
  EncoderParams params;
  std::vector<double> loss_curve;  // epoch-averaged total loss

  void write_loss_curve(const std::filesystem::path& path) const {
    csv::Table t{{"epoch", "loss"}, {}};
    for (std::size_t e = 0; e < loss_curve.size(); ++e) {
      t.rows.push_back({std::to_string(e + 1), csv::format_double(loss_curve[e])});
    }
    csv::write_file(path, t);
  }
};

// Trains on every row of `x`; rows with shared[i] != 0 also carry the
// distillation term toward fed row i. Deterministic given cfg.seed.
inline TrainedEncoder train_distilled_encoder(const Matrix& x, const Matrix& fed,
                                              std::span<const char> shared, const DistillConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) throw ShapeError("train_distilled_encoder: no rows");
  if (fed.rows() != x.rows() || shared.size() != x.rows()) {
    throw ShapeError("train_distilled_encoder: fed rows and shared mask must align with x");
  }
  Rng init_rng(derive_seed(cfg.seed, "lrd_init"));
  Rng shuffle_rng(derive_seed(cfg.seed, "lrd_shuffle"));
  TrainedEncoder out;
  out.params = EncoderParams::init(x.cols(), fed.cols(), cfg.depth, cfg.hidden, init_rng);
  Vector theta_vec = out.params.flat();
  nn::Adam adam(theta_vec.size(), {cfg.learning_rate, 0.9, 0.999, 1e-8});

  const std::size_t n = x.rows();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(n, shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<char> mask(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) mask[k] = shared[idx[k]];
      LrdGradient g = lrd_gradient(out.params, x.select_rows(idx), fed.select_rows(idx), mask,
                                   cfg.theta, cfg.norm);
      if (!std::isfinite(g.loss.total)) {
        throw NumericError("lrd: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch));
      }
      epoch_loss += g.loss.total * static_cast<double>(idx.size());
      adam.step(theta_vec, g.flat());
      out.params.set_flat(theta_vec);
    }
    out.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  if (!out.params.encoder.all_finite() || !out.params.decoder.all_finite()) {
    throw NumericError("lrd: non-finite parameters after training");
  }
  return out;
}

// Aligns the federated representation to task rows by id and trains.
inline TrainedEncoder train_distilled_encoder(const Matrix& x, std::span<const std::string> ids,
                                              const FedRepresentation& fed, const DistillConfig& cfg) {
  if (ids.size() != x.rows()) throw ShapeError("train_distilled_encoder: ids do not match rows");
  if (fed.ids.size() != fed.matrix.rows()) {
    throw ShapeError("train_distilled_encoder: federated representation has no ids");
  }
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < fed.ids.size(); ++i) pos.emplace(fed.ids[i], i);
  Matrix aligned(x.rows(), fed.matrix.cols(), 0.0);
  std::vector<char> shared(x.rows(), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = pos.find(ids[i]);
    if (it == pos.end()) continue;
    shared[i] = 1;
    ++hits;
    auto src = fed.matrix.row(it->second);
    std::copy(src.begin(), src.end(), aligned.row(i).begin());
  }
  if (hits != fed.ids.size()) {
    throw DataError("train_distilled_encoder: " + std::to_string(fed.ids.size() - hits) +
                    " federated ids are not task rows");
  }
  return train_distilled_encoder(x, aligned, shared, cfg);
}

struct EnrichedRepresentation {
  std::vector<std::string> ids;
  Matrix matrix;
  std::vector<std::string> provenance;  // "raw" or "enc<k>" per column
};

inline EnrichedRepresentation enrich(std::span<const EncoderParams> encoders, const Matrix& x,
                                     std::span<const std::string> ids = {}) {
  std::vector<Matrix> parts{x};
  EnrichedRepresentation out;
  out.ids.assign(ids.begin(), ids.end());
  out.provenance.assign(x.cols(), "raw");
  for (std::size_t k = 0; k < encoders.size(); ++k) {
    if (encoders[k].input_width() != x.cols()) {
      throw ShapeError("enrich: encoder " + std::to_string(k) + " expects width " +
                       std::to_string(encoders[k].input_width()) + ", rows have " +
                       std::to_string(x.cols()));
    }
    parts.push_back(encoders[k].encode(x));
    out.provenance.insert(out.provenance.end(), encoders[k].latent_width(), "enc" + std::to_string(k));
  }
  out.matrix = hstack(parts);
  return out;
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_LRD_HPP_
