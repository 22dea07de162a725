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

// Append-only log of every message that crosses a party boundary. Payloads
// are not stored, only their shape and content digests, which is enough to
// audit that no raw feature matrix (or column of one) ever left its owner.

#ifndef VFEDTRANS_TRANSCRIPT_HPP_
#define VFEDTRANS_TRANSCRIPT_HPP_

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"

namespace vfedtrans {

enum class PayloadKind {
  kMaskingKey,        // A or B_k from the key generator
  kMaskedMatrix,      // A·S_k·B_k
  kSvdResult,         // truncated Û
  kEigenPair,         // (a_i, alpha_i)
  kAggregatedVector,  // federated u
  kRawMatrix,         // never sent by an honest party
};

inline const char* payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::kMaskingKey: return "masking_key";
    case PayloadKind::kMaskedMatrix: return "masked_matrix";
    case PayloadKind::kSvdResult: return "svd_result";
    case PayloadKind::kEigenPair: return "eigen_pair";
    case PayloadKind::kAggregatedVector: return "aggregated_vector";
    case PayloadKind::kRawMatrix: return "raw_matrix";
  }
  return "unknown";
}

inline PayloadKind payload_kind_from_name(std::string_view s) {
  for (auto k : {PayloadKind::kMaskingKey, PayloadKind::kMaskedMatrix, PayloadKind::kSvdResult,
                 PayloadKind::kEigenPair, PayloadKind::kAggregatedVector, PayloadKind::kRawMatrix}) {
    if (s == payload_kind_name(k)) return k;
  }
  throw DataError("unknown payload kind '" + std::string(s) + "'");
}

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

// FNV-1a over the shape and the IEEE-754 bytes of the values.
inline std::string digest(std::size_t rows, std::size_t cols, std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t shape[2] = {rows, cols};
  detail::fnv1a(h, shape, sizeof(shape));
  for (double v : values) {
    if (v == 0.0) v = 0.0;  // fold -0.0
    detail::fnv1a(h, &v, sizeof(v));
  }
  return detail::hex64(h);
}

inline std::string digest_text(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  detail::fnv1a(h, s.data(), s.size());
  return detail::hex64(h);
}

inline std::string digest(const Matrix& m) { return digest(m.rows(), m.cols(), m.data()); }

inline std::string column_digest(const Matrix& m, std::size_t j) {
  Vector c = m.col(j);
  return digest(c.size(), 1, c);
}

inline std::vector<std::string> column_digests(const Matrix& m) {
  std::vector<std::string> out;
  out.reserve(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out.push_back(column_digest(m, j));
  return out;
}

struct Message {
  std::string sender;
  std::string receiver;
  PayloadKind kind = PayloadKind::kRawMatrix;
  Matrix payload;
  double scalar = 0.0;  // eigenvalue for kEigenPair
};

struct TranscriptRecord {
  std::size_t step = 0;
  std::string sender;
  std::string receiver;
  PayloadKind kind = PayloadKind::kRawMatrix;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string digest;
  std::vector<std::string> column_digests;

  friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

class Transcript {
 public:
  // Logs the message and hands the payload to the receiver.
  Message send(Message m) {
    TranscriptRecord r;
    r.step = records_.size();
    r.sender = m.sender;
    r.receiver = m.receiver;
    r.kind = m.kind;
    r.rows = m.payload.rows();
    r.cols = m.payload.cols();
    if (m.kind == PayloadKind::kEigenPair) {
      std::vector<double> with_scalar = m.payload.data();
      with_scalar.push_back(m.scalar);
      r.digest = digest(r.rows, r.cols, with_scalar);
    } else {
      r.digest = digest(m.payload);
    }
    r.column_digests = column_digests(m.payload);
    records_.push_back(std::move(r));
    return m;
  }

  const std::vector<TranscriptRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Digest of the whole transcript, for determinism checks.
  std::string fingerprint() const {
    std::string acc;
    for (const auto& r : records_) {
      acc += r.sender + ">" + r.receiver + ":" + payload_kind_name(r.kind) + ":" + r.digest + ";";
    }
    return digest_text(acc);
  }

  void append(const Transcript& other) {
    for (auto r : other.records_) {
      r.step = records_.size();
      records_.push_back(std::move(r));
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records_) {
      arr.push_back({{"step", r.step},
                     {"sender", r.sender},
                     {"receiver", r.receiver},
                     {"payload_kind", payload_kind_name(r.kind)},
                     {"shape", {r.rows, r.cols}},
                     {"digest", r.digest},
                     {"column_digests", r.column_digests}});
    }
    return {{"version", 1}, {"records", arr}};
  }

  static Transcript from_json(const nlohmann::json& j) {
    Transcript t;
    for (const auto& e : j.at("records")) {
      TranscriptRecord r;
      r.step = e.at("step").get<std::size_t>();
      r.sender = e.at("sender").get<std::string>();
      r.receiver = e.at("receiver").get<std::string>();
      r.kind = payload_kind_from_name(e.at("payload_kind").get<std::string>());
      r.rows = e.at("shape").at(0).get<std::size_t>();
      r.cols = e.at("shape").at(1).get<std::size_t>();
      r.digest = e.at("digest").get<std::string>();
      r.column_digests = e.value("column_digests", std::vector<std::string>{});
      t.records_.push_back(std::move(r));
    }
    return t;
  }

 private:
  std::vector<TranscriptRecord> records_;
};

}  // namespace vfedtrans

#endif  // VFEDTRANS_TRANSCRIPT_HPP_
