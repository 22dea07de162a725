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

// Federated representation learning over the shared samples.
//
// FedSVD: a trusted key generator draws orthogonal A (|I_s| x |I_s|) and
// B (|X_td| x |X_td|), B split row-wise into per-party blocks B_k. Party k
// uploads A·S_k·B_k; the server sums the uploads, which equals A·[S_t|S_d]·B,
// runs an SVD and returns only the leading r columns of Û to the task party,
// which recovers U = Aᵀ·Û.
//
// VFedPCA: every party runs power iteration on its sample-space Gram matrix
// S_i·S_iᵀ / |X_i|, uploads (a_i, alpha_i), and the server returns the
// eigenvalue-weighted sum u. After the last round the task party builds
// S_t·M·Mᵀ / |M·Mᵀ|_F with M = S_tᵀ·u.

#ifndef VFEDTRANS_FRL_HPP_
#define VFEDTRANS_FRL_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vfedtrans/csv.hpp"
#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/rng.hpp"
#include "vfedtrans/transcript.hpp"

namespace vfedtrans {

enum class FrlMethod { kFedSvd, kVFedPca };

inline const char* frl_method_name(FrlMethod m) {
  return m == FrlMethod::kFedSvd ? "fedsvd" : "vfedpca";
}

inline FrlMethod frl_method_from_name(const std::string& s) {
  if (s == "fedsvd") return FrlMethod::kFedSvd;
  if (s == "vfedpca") return FrlMethod::kVFedPca;
  throw ConfigError("unknown FRL method '" + s + "' (expected fedsvd or vfedpca)");
}

struct FedSvdConfig {
  std::size_t block_size = 100;
  // Return U·diag(sigma) instead of U.
  bool scale_by_singular_values = false;
};

struct VFedPcaConfig {
  std::size_t iter_num = 100;
  std::size_t period_num = 10;
  bool warm_start = true;
};

struct FrlConfig {
  FrlMethod method = FrlMethod::kFedSvd;
  // Latent width r; defaults to the task party's feature count.
  std::optional<std::size_t> rank;
  FedSvdConfig fedsvd;
  VFedPcaConfig vfedpca;
  std::size_t num_party = 2;
};

struct FedRepresentation {
  std::vector<std::string> ids;
  Matrix matrix;  // |I_s| x r, rows aligned with ids
  std::size_t rank = 0;
  FrlMethod method = FrlMethod::kFedSvd;
  // Diagnostics. For FedSVD: every singular value the server computed.
  Vector server_singular_values;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    return {{"version", 1},
            {"method", frl_method_name(method)},
            {"rank", rank},
            {"shape", {matrix.rows(), matrix.cols()}},
            {"digest", digest(matrix)},
            {"ids", ids},
            {"server_singular_values", server_singular_values},
            {"warnings", warnings}};
  }

  void write_csv(const std::filesystem::path& path) const {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < matrix.cols(); ++j) names.push_back("z" + std::to_string(j));
    csv::write_file(path, csv::matrix_table(matrix, names, ids));
  }
};

// Default party names used in transcripts.
inline constexpr const char* kTaskRole = "task";
inline constexpr const char* kServerRole = "server";
inline constexpr const char* kKeygenRole = "keygen";

inline std::vector<std::string> default_data_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back("data" + std::to_string(k));
  return out;
}

// ---------------------------------------------------------------------------
// FedSVD

struct MaskingKeys {
  Matrix a;                    // |I_s| x |I_s|
  std::vector<Matrix> b_parts;  // B_k: |X_k| x |X_td|

  Matrix b() const { return vstack(b_parts); }
};

inline MaskingKeys fedsvd_keygen(std::size_t n_shared, std::span<const std::size_t> feature_sizes,
                                 std::size_t block_size, Rng& rng) {
  if (n_shared < 1) throw ShapeError("fedsvd_keygen: n_shared must be >= 1");
  if (feature_sizes.empty()) throw ShapeError("fedsvd_keygen: no parties");
  const std::size_t total = std::accumulate(feature_sizes.begin(), feature_sizes.end(), std::size_t{0});
  MaskingKeys keys;
  keys.a = random_orthogonal(n_shared, block_size, rng);
  Matrix b = random_orthogonal(total, block_size, rng);
  std::size_t off = 0;
  for (std::size_t f : feature_sizes) {
    if (f < 1) throw ShapeError("fedsvd_keygen: a party has no features");
    keys.b_parts.push_back(b.block(off, 0, f, total));
    off += f;
  }
  return keys;
}

// Ŝ_k = A·S_k·B_k
inline Matrix fedsvd_mask(const Matrix& s_k, const Matrix& a, const Matrix& b_k) {
  if (a.rows() != a.cols() || a.cols() != s_k.rows()) {
    throw ShapeError("fedsvd_mask: A is " + shape_str(a.rows(), a.cols()) + ", S_k is " +
                     shape_str(s_k.rows(), s_k.cols()));
  }
  if (b_k.rows() != s_k.cols()) {
    throw ShapeError("fedsvd_mask: B_k is " + shape_str(b_k.rows(), b_k.cols()) + ", S_k is " +
                     shape_str(s_k.rows(), s_k.cols()));
  }
  return matmul(a, matmul(s_k, b_k));
}

namespace roles {

class MaskingParty {
 public:
  MaskingParty(std::string name, const Matrix& shared) : name_(std::move(name)), shared_(shared) {}

  void receive_a(const Message& m) { a_ = m.payload; }
  void receive_b(const Message& m) { b_ = m.payload; }

  Message upload() const {
    return {name_, kServerRole, PayloadKind::kMaskedMatrix, fedsvd_mask(shared_, a_, b_)};
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  const Matrix& shared_;
  Matrix a_, b_;
};

class SvdServer {
 public:
  void receive(const Message& m) {
    if (sum_.empty()) {
      sum_ = m.payload;
    } else {
      sum_ += m.payload;
    }
  }

  // Full thin SVD of the summed uploads; only r columns of Û leave the server.
  Message reply(const std::string& task, std::size_t r, bool scale) {
    const std::size_t k = std::min(sum_.rows(), sum_.cols());
    SvdResult s = svd(sum_, k);
    sigma_ = s.sigma;
    Matrix u_hat = s.u.block(0, 0, s.u.rows(), r);
    if (scale) {
      for (std::size_t i = 0; i < u_hat.rows(); ++i)
        for (std::size_t j = 0; j < r; ++j) u_hat(i, j) *= sigma_[j];
    }
    return {kServerRole, task, PayloadKind::kSvdResult, std::move(u_hat)};
  }

  const Vector& singular_values() const { return sigma_; }

 private:
  Matrix sum_;
  Vector sigma_;
};

}  // namespace roles

inline void check_shared_alignment(const Matrix& task_shared, std::span<const Matrix> data_shared,
                                   std::span<const std::string> ids) {
  if (data_shared.empty()) throw ShapeError("FRL: no data parties");
  for (const auto& d : data_shared) {
    if (d.rows() != task_shared.rows()) {
      throw ShapeError("FRL: shared slices are not row-aligned (" + std::to_string(d.rows()) +
                       " vs " + std::to_string(task_shared.rows()) + " rows)");
    }
  }
  if (!ids.empty() && ids.size() != task_shared.rows()) {
    throw ShapeError("FRL: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(task_shared.rows()) + " shared rows");
  }
}

inline std::size_t resolve_rank(const FrlConfig& cfg, const Matrix& task_shared, std::size_t total_cols) {
  const std::size_t r = cfg.rank.value_or(task_shared.cols());
  const std::size_t cap = std::min(task_shared.rows(), total_cols);
  if (r < 1 || r > cap) {
    throw ShapeError("FRL: rank " + std::to_string(r) + " outside [1, min(|I_s|, |X_td|) = " +
                     std::to_string(cap) + "]");
  }
  return r;
}

// FedSVD with caller-supplied keys (tests pass A = I, B = I here).
inline FedRepresentation fedsvd_run_with_keys(const Matrix& task_shared,
                                              std::span<const Matrix> data_shared,
                                              const MaskingKeys& keys, const FrlConfig& cfg,
                                              Transcript& transcript,
                                              std::span<const std::string> ids = {},
                                              std::span<const std::string> data_names = {}) {
  check_shared_alignment(task_shared, data_shared, ids);
  std::size_t total = task_shared.cols();
  for (const auto& d : data_shared) total += d.cols();
  const std::size_t r = resolve_rank(cfg, task_shared, total);
  if (keys.b_parts.size() != data_shared.size() + 1) {
    throw ShapeError("fedsvd: key partition does not match the party count");
  }
  const auto names = data_names.empty() ? default_data_names(data_shared.size())
                                        : std::vector<std::string>(data_names.begin(), data_names.end());

  std::vector<roles::MaskingParty> parties;
  parties.emplace_back(kTaskRole, task_shared);
  for (std::size_t k = 0; k < data_shared.size(); ++k) parties.emplace_back(names[k], data_shared[k]);

  // Step 1: key distribution.
  for (std::size_t k = 0; k < parties.size(); ++k) {
    parties[k].receive_a(transcript.send({kKeygenRole, parties[k].name(), PayloadKind::kMaskingKey, keys.a}));
    parties[k].receive_b(
        transcript.send({kKeygenRole, parties[k].name(), PayloadKind::kMaskingKey, keys.b_parts[k]}));
  }
  // Steps 2-3: local masking, upload, server-side SVD.
  roles::SvdServer server;
  for (const auto& p : parties) server.receive(transcript.send(p.upload()));
  const Message reply =
      transcript.send(server.reply(kTaskRole, r, cfg.fedsvd.scale_by_singular_values));

  // Step 4: recovery at the task party.
  FedRepresentation rep;
  rep.method = FrlMethod::kFedSvd;
  rep.rank = r;
  rep.matrix = matmul_tn(keys.a, reply.payload);
  rep.ids.assign(ids.begin(), ids.end());
  rep.server_singular_values = server.singular_values();
  const auto& sig = rep.server_singular_values;
  const double scale = std::max(1.0, sig.empty() ? 0.0 : sig[0]);
  for (std::size_t j = 0; j < r && j + 1 < sig.size(); ++j) {
    if (sig[j] - sig[j + 1] <= 1e-10 * scale) {
      rep.warnings.push_back("degenerate singular values at positions " + std::to_string(j) +
                             "," + std::to_string(j + 1) + "; only the subspace is determined");
    }
  }
  return rep;
}

inline FedRepresentation fedsvd_run(const Matrix& task_shared, std::span<const Matrix> data_shared,
                                    const FrlConfig& cfg, Rng& rng, Transcript& transcript,
                                    std::span<const std::string> ids = {},
                                    std::span<const std::string> data_names = {}) {
  check_shared_alignment(task_shared, data_shared, ids);
  std::vector<std::size_t> sizes{task_shared.cols()};
  for (const auto& d : data_shared) sizes.push_back(d.cols());
  MaskingKeys keys = fedsvd_keygen(task_shared.rows(), sizes, cfg.fedsvd.block_size, rng);
  return fedsvd_run_with_keys(task_shared, data_shared, keys, cfg, transcript, ids, data_names);
}

// ---------------------------------------------------------------------------
// VFedPCA

struct EigenPair {
  Vector vector;  // unit norm, length |I_s|
  double value = 0.0;
};

// Power iteration on S_i·S_iᵀ / |X_i| without forming the |I_s| x |I_s| matrix.
inline EigenPair vfedpca_local(const Matrix& s_i, std::size_t iter_num,
                               std::optional<Vector> start = std::nullopt) {
  if (s_i.empty() || max_abs(s_i) == 0.0) {
    throw NumericError("vfedpca_local: zero feature matrix has no dominant eigenvector");
  }
  const double inv = 1.0 / static_cast<double>(s_i.cols());
  auto apply = [&](const Vector& x) {
    Vector y = matvec(s_i, matvec_t(s_i, x));
    for (double& v : y) v *= inv;
    return y;
  };
  PowerResult p = power_iteration_op(apply, s_i.rows(), iter_num, std::move(start));
  return {std::move(p.vector), p.value};
}

struct Aggregation {
  Vector u;
  Vector weights;
  bool degenerate = false;  // the weighted sum cancelled to (near) zero
};

inline Aggregation vfedpca_aggregate(std::span<const EigenPair> pairs) {
  if (pairs.empty()) throw ShapeError("vfedpca_aggregate: no eigenpairs");
  const std::size_t n = pairs.front().vector.size();
  double total = 0.0;
  for (const auto& p : pairs) {
    if (p.vector.size() != n) {
      throw ShapeError("vfedpca_aggregate: eigenvector lengths differ (" + std::to_string(n) +
                       " vs " + std::to_string(p.vector.size()) + ")");
    }
    if (!(p.value >= 0.0)) throw NumericError("vfedpca_aggregate: negative eigenvalue");
    total += p.value;
  }
  if (total == 0.0) throw NumericError("vfedpca_aggregate: all eigenvalues are zero");
  Aggregation agg;
  agg.u.assign(n, 0.0);
  double largest = 0.0;
  for (const auto& p : pairs) {
    const double w = p.value / total;
    agg.weights.push_back(w);
    for (std::size_t i = 0; i < n; ++i) agg.u[i] += w * p.vector[i];
    largest = std::max(largest, norm2(p.vector));
  }
  agg.degenerate = norm2(agg.u) <= 1e-12 * std::max(largest, 1.0);
  return agg;
}

// S_t·M·Mᵀ / |M·Mᵀ|_F with M = S_tᵀ·u.
inline FedRepresentation vfedpca_reconstruct(const Matrix& s_t, std::span<const double> u) {
  if (u.size() != s_t.rows()) {
    throw ShapeError("vfedpca_reconstruct: u has length " + std::to_string(u.size()) +
                     ", expected |I_s| = " + std::to_string(s_t.rows()));
  }
  const Vector m = matvec_t(s_t, u);
  const Matrix mmt = outer(m, m);
  const double nrm = frobenius_norm(mmt);
  if (!(nrm > 0.0)) throw NumericError("vfedpca_reconstruct: representation collapsed (M = 0)");
  FedRepresentation rep;
  rep.method = FrlMethod::kVFedPca;
  rep.matrix = matmul(s_t, mmt) * (1.0 / nrm);
  rep.rank = rep.matrix.cols();
  return rep;
}

inline Matrix column_vector(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

inline FedRepresentation vfedpca_run(const Matrix& task_shared, std::span<const Matrix> data_shared,
                                     const FrlConfig& cfg, Transcript& transcript,
                                     std::span<const std::string> ids = {},
                                     std::span<const std::string> data_names = {}) {
  check_shared_alignment(task_shared, data_shared, ids);
  const auto& pc = cfg.vfedpca;
  if (pc.period_num < 1) throw ConfigError("vfedpca: period_num must be >= 1");
  const auto names = data_names.empty() ? default_data_names(data_shared.size())
                                        : std::vector<std::string>(data_names.begin(), data_names.end());
  std::vector<std::pair<std::string, const Matrix*>> parties{{kTaskRole, &task_shared}};
  for (std::size_t k = 0; k < data_shared.size(); ++k) parties.emplace_back(names[k], &data_shared[k]);

  std::vector<std::string> warnings;
  std::optional<Vector> global;
  for (std::size_t round = 0; round < pc.period_num; ++round) {
    std::vector<EigenPair> uploads;
    for (const auto& [name, s] : parties) {
      std::optional<Vector> start = pc.warm_start ? global : std::nullopt;
      EigenPair local = vfedpca_local(*s, pc.iter_num, std::move(start));
      const Message m =
          transcript.send({name, kServerRole, PayloadKind::kEigenPair, column_vector(local.vector), local.value});
      uploads.push_back({m.payload.data(), m.scalar});
    }
    Aggregation agg = vfedpca_aggregate(uploads);
    if (agg.degenerate) {
      warnings.push_back("round " + std::to_string(round) + ": aggregated direction cancelled");
    }
    for (const auto& [name, s] : parties) {
      transcript.send({kServerRole, name, PayloadKind::kAggregatedVector, column_vector(agg.u)});
    }
    global = std::move(agg.u);
  }
  FedRepresentation rep = vfedpca_reconstruct(task_shared, *global);
  rep.ids.assign(ids.begin(), ids.end());
  rep.warnings = std::move(warnings);
  return rep;
}

inline FedRepresentation frl_run(const Matrix& task_shared, std::span<const Matrix> data_shared,
                                 const FrlConfig& cfg, Rng& rng, Transcript& transcript,
                                 std::span<const std::string> ids = {},
                                 std::span<const std::string> data_names = {}) {
  if (cfg.method == FrlMethod::kFedSvd) {
    return fedsvd_run(task_shared, data_shared, cfg, rng, transcript, ids, data_names);
  }
  return vfedpca_run(task_shared, data_shared, cfg, transcript, ids, data_names);
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_FRL_HPP_
