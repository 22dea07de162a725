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

// Datasets and the hospital split: one task party (labels + few features) and
// one or more data parties (more features) that overlap on a shared id set.

#ifndef VFEDTRANS_DATASET_HPP_
#define VFEDTRANS_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vfedtrans/csv.hpp"
#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/rng.hpp"

namespace vfedtrans {

using Labels = std::vector<int>;

struct Dataset {
  std::vector<std::string> ids;
  Matrix features;
  std::optional<Labels> labels;
  std::vector<std::string> feature_names;
  // label_names[c] is the original spelling of class c (e.g. "B", "M").
  std::vector<std::string> label_names;

  std::size_t rows() const { return features.rows(); }
  std::size_t cols() const { return features.cols(); }

  std::size_t n_classes() const {
    if (!labels || labels->empty()) return 0;
    return std::set<int>(labels->begin(), labels->end()).size();
  }

  // Row subset in the given order.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset d;
    d.features = features.select_rows(rows);
    d.feature_names = feature_names;
    d.label_names = label_names;
    d.ids.reserve(rows.size());
    for (std::size_t r : rows) d.ids.push_back(ids[r]);
    if (labels) {
      Labels l;
      for (std::size_t r : rows) l.push_back((*labels)[r]);
      d.labels = std::move(l);
    }
    return d;
  }
};

inline void validate(const Dataset& ds) {
  if (ds.ids.size() != ds.rows()) {
    throw DataError("dataset: " + std::to_string(ds.ids.size()) + " ids for " +
                    std::to_string(ds.rows()) + " rows");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ds.ids)
    if (!seen.insert(id).second) throw DataError("dataset: duplicate id '" + id + "'");
  if (ds.labels) {
    if (ds.labels->size() != ds.rows()) throw DataError("dataset: label count != row count");
    const std::size_t k = ds.n_classes();
    if (k < 2 || k > ds.rows()) {
      throw DataError("dataset: class count " + std::to_string(k) + " outside [2, rows]");
    }
  }
}

// Ids that are plain non-negative integers sort numerically, others
// lexicographically.
inline bool id_less(const std::string& a, const std::string& b) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (numeric(a) && numeric(b)) {
    std::string_view sa(a), sb(b);
    while (sa.size() > 1 && sa.front() == '0') sa.remove_prefix(1);
    while (sb.size() > 1 && sb.front() == '0') sb.remove_prefix(1);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

// Sorted intersection of two id sets. Plain set intersection standing in for
// a cryptographic PSI protocol.
template <typename T, typename Less = std::less<T>>
std::vector<T> psi_intersect(std::span<const T> a, std::span<const T> b, Less less = {}) {
  std::vector<T> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end(), less);
  std::sort(sb.begin(), sb.end(), less);
  sa.erase(std::unique(sa.begin(), sa.end(),
                       [&](const T& x, const T& y) { return !less(x, y) && !less(y, x); }),
           sa.end());
  std::vector<T> out;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(out),
                        less);
  return out;
}

inline std::vector<std::string> psi_intersect(std::span<const std::string> a,
                                              std::span<const std::string> b) {
  return psi_intersect<std::string>(a, b, id_less);
}

// ---------------------------------------------------------------------------
// CSV ingestion

// Reads a header-first CSV. `label_column` may be empty for unlabeled data.
// Integer labels are kept as-is; anything else is mapped to 0..k-1 in sorted
// order of the distinct strings (so "B" -> 0, "M" -> 1).
inline Dataset load_csv(const std::filesystem::path& path, const std::string& id_column,
                        const std::string& label_column) {
  csv::Table t = csv::read_file(path);
  if (t.rows.empty()) throw DataError(path.string() + ": no data rows");

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
  };
  const std::optional<std::size_t> id_idx =
      id_column.empty() ? std::nullopt : std::optional<std::size_t>(find_col(id_column));
  const std::optional<std::size_t> label_idx =
      label_column.empty() ? std::nullopt : std::optional<std::size_t>(find_col(label_column));

  std::vector<std::size_t> feat_idx;
  Dataset ds;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j == id_idx || j == label_idx) continue;
    feat_idx.push_back(j);
    ds.feature_names.push_back(t.header[j]);
  }

  std::vector<double> values;
  values.reserve(t.rows.size() * feat_idx.size());
  std::vector<std::string> raw_labels;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;  // 1-based, after the header
    if (row.size() != t.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(line) + " has " +
                      std::to_string(row.size()) + " cells, header has " +
                      std::to_string(t.header.size()));
    }
    std::string id = id_idx ? row[*id_idx] : std::to_string(r);
    if (!seen.insert(id).second) {
      throw DataError(path.string() + ": duplicate id '" + id + "' at row " + std::to_string(line));
    }
    ds.ids.push_back(std::move(id));
    for (std::size_t j : feat_idx) {
      auto v = csv::parse_double(row[j]);
      if (!v) {
        throw DataError(path.string() + ": non-numeric cell '" + row[j] + "' at row " +
                        std::to_string(line) + ", column '" + t.header[j] + "'");
      }
      values.push_back(*v);
    }
    if (label_idx) raw_labels.push_back(row[*label_idx]);
  }
  ds.features = Matrix(t.rows.size(), feat_idx.size(), std::move(values));

  if (label_idx) {
    bool all_int = true;
    for (const auto& s : raw_labels) {
      int v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        all_int = false;
        break;
      }
    }
    Labels y;
    if (all_int) {
      for (const auto& s : raw_labels) y.push_back(std::stoi(s));
      std::set<int> classes(y.begin(), y.end());
      for (int c : classes) ds.label_names.push_back(std::to_string(c));
    } else {
      std::set<std::string> names(raw_labels.begin(), raw_labels.end());
      std::map<std::string, int> code;
      for (const auto& n : names) {
        code.emplace(n, static_cast<int>(ds.label_names.size()));
        ds.label_names.push_back(n);
      }
      for (const auto& s : raw_labels) y.push_back(code.at(s));
    }
    ds.labels = std::move(y);
  }
  validate(ds);
  return ds;
}

inline void save_csv(const std::filesystem::path& path, const Dataset& ds,
                     const std::string& label_column = "label") {
  csv::Table t = csv::matrix_table(ds.features, ds.feature_names, ds.ids);
  if (ds.labels) {
    t.header.push_back(label_column);
    for (std::size_t i = 0; i < ds.rows(); ++i) t.rows[i].push_back(std::to_string((*ds.labels)[i]));
  }
  csv::write_file(path, t);
}

// ---------------------------------------------------------------------------
// Synthetic data

inline std::string synth_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "s" + std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

// Balanced labels 0..k-1 in a seeded random order.
inline Labels balanced_labels(std::size_t n, std::size_t n_classes, Rng& rng) {
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % n_classes);
  auto perm = permutation(n, rng);
  Labels out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[perm[i]];
  return out;
}

// Gaussian blobs. Recipe: class centers c_k ~ N(0, I_d); a sample of class k
// is class_separation * c_k + N(0, I_d). Labels are balanced and shuffled.
// With separation 0 the features carry no label information.
inline Dataset synth_generate(std::size_t n_samples, std::size_t n_features,
                              std::size_t n_classes, double class_separation,
                              std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("synth_generate: n_classes must be >= 2");
  if (n_features < 2) throw ConfigError("synth_generate: n_features must be >= 2");
  if (n_samples < n_classes) throw ConfigError("synth_generate: fewer samples than classes");
  Rng rng(derive_seed(seed, "synth_generate"));
  Matrix centers = Matrix::gaussian(n_classes, n_features, rng);
  Dataset ds;
  ds.labels = balanced_labels(n_samples, n_classes, rng);
  ds.features = Matrix(n_samples, n_features);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto c = static_cast<std::size_t>((*ds.labels)[i]);
    for (std::size_t j = 0; j < n_features; ++j)
      ds.features(i, j) = class_separation * centers(c, j) + gaussian(rng);
    ds.ids.push_back(synth_id(i));
  }
  for (std::size_t j = 0; j < n_features; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  for (std::size_t c = 0; c < n_classes; ++c) ds.label_names.push_back(std::to_string(c));
  return ds;
}

struct TransferSynthConfig {
  std::size_t n_samples = 2000;
  std::size_t task_features = 10;
  std::size_t data_features = 20;
  std::size_t n_classes = 2;
  std::size_t latent_dim = 2;
  double class_separation = 2.0;
  double task_noise = 3.0;
  double data_noise = 0.3;
};

// Data for knowledge-transfer experiments. Recipe: class centers m_k ~ N(0, I_q)
// in a q-dim latent space; a sample of class k has latent
// z = class_separation * m_k + N(0, I_q). Every column j carries z through a
// random unit loading w_j: x_j = <w_j, z> + noise_j. The first task_features
// columns use noise sd task_noise (each column alone is a weak label
// predictor), the remaining data_features columns use data_noise. The label
// information is therefore spread thinly over the task columns but
// concentrated in the data columns, which is what a federated
// representation over the shared samples picks up.
inline Dataset synth_transfer(const TransferSynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_classes < 2) throw ConfigError("synth_transfer: n_classes must be >= 2");
  if (cfg.latent_dim < 1) throw ConfigError("synth_transfer: latent_dim must be >= 1");
  if (cfg.task_features < 1 || cfg.data_features < 1) {
    throw ConfigError("synth_transfer: both column groups must be nonempty");
  }
  Rng rng(derive_seed(seed, "synth_transfer"));
  const std::size_t q = cfg.latent_dim;
  const std::size_t d = cfg.task_features + cfg.data_features;
  Matrix centers = Matrix::gaussian(cfg.n_classes, q, rng);
  Matrix loadings = Matrix::gaussian(d, q, rng);
  for (std::size_t j = 0; j < d; ++j) {
    const double n = norm2(loadings.row(j));
    for (double& v : loadings.row(j)) v /= n;
  }
  Dataset ds;
  ds.labels = balanced_labels(cfg.n_samples, cfg.n_classes, rng);
  ds.features = Matrix(cfg.n_samples, d);
  Vector z(q);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const auto c = static_cast<std::size_t>((*ds.labels)[i]);
    for (std::size_t a = 0; a < q; ++a) z[a] = cfg.class_separation * centers(c, a) + gaussian(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = j < cfg.task_features ? cfg.task_noise : cfg.data_noise;
      ds.features(i, j) = dot(loadings.row(j), z) + sd * gaussian(rng);
    }
    ds.ids.push_back(synth_id(i));
  }
  for (std::size_t j = 0; j < d; ++j)
    ds.feature_names.push_back((j < cfg.task_features ? "t" : "d") + std::to_string(j));
  for (std::size_t c = 0; c < cfg.n_classes; ++c) ds.label_names.push_back(std::to_string(c));
  return ds;
}

// ---------------------------------------------------------------------------
// Scenario split

enum class Role { kTask, kData };

inline const char* role_name(Role r) { return r == Role::kTask ? "task" : "data"; }

struct PartyView {
  std::string party_id;
  Role role = Role::kData;
  std::vector<std::string> ids;
  Matrix features;
  std::optional<Labels> labels;  // present iff role == kTask
  std::vector<std::size_t> feature_columns;  // source dataset column indices
  std::vector<std::string> feature_names;

  std::size_t rows() const { return features.rows(); }
  std::size_t cols() const { return features.cols(); }

  // Row index of every id.
  std::unordered_map<std::string, std::size_t> index() const {
    std::unordered_map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], i);
    return m;
  }

  PartyView subset(std::span<const std::size_t> rows) const {
    PartyView v;
    v.party_id = party_id;
    v.role = role;
    v.features = features.select_rows(rows);
    v.feature_columns = feature_columns;
    v.feature_names = feature_names;
    for (std::size_t r : rows) v.ids.push_back(ids[r]);
    if (labels) {
      Labels l;
      for (std::size_t r : rows) l.push_back((*labels)[r]);
      v.labels = std::move(l);
    }
    return v;
  }
};

struct Interval {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

// Sizes of one data party: samples I_d, features X_d, shared samples I_s.
struct DataPartySize {
  std::size_t samples = 0;
  std::size_t features = 0;
  std::size_t shared = 0;
};

// Multi-party settings draw every data party's sizes uniformly from intervals.
struct MultiPartySpec {
  std::size_t n_parties = 0;
  Interval samples;
  Interval features;
  Interval shared;
};

struct SplitConfig {
  std::size_t task_samples = 0;   // I_t
  std::size_t task_features = 0;  // X_t
  std::vector<DataPartySize> data_parties;
  std::optional<MultiPartySpec> multi_party;
  bool shuffle_columns = false;
  double test_fraction = 0.2;
};

// Reference split for the Breast data.
inline SplitConfig breast_split_config() {
  SplitConfig c;
  c.task_samples = 300;
  c.task_features = 15;
  c.data_parties = {{400, 15, 200}};
  return c;
}

struct ScenarioSplit {
  PartyView task;
  std::vector<PartyView> data_parties;
  // Per data party: sorted shared ids and their row positions in both views,
  // aligned so task_rows[i] and data_rows[i] hold the same sample.
  std::vector<std::vector<std::string>> shared_ids;
  std::vector<std::vector<std::size_t>> shared_task_rows;
  std::vector<std::vector<std::size_t>> shared_data_rows;
  std::vector<std::size_t> train_rows;  // task rows
  std::vector<std::size_t> test_rows;

  Matrix task_shared(std::size_t k) const { return task.features.select_rows(shared_task_rows[k]); }
  Matrix data_shared(std::size_t k) const {
    return data_parties[k].features.select_rows(shared_data_rows[k]);
  }
};

// Resolve interval draws into concrete per-party sizes using a dedicated
// sub-seed, so party shapes do not depend on anything but (cfg, seed).
inline std::vector<DataPartySize> resolve_parties(const SplitConfig& cfg, std::uint64_t seed) {
  if (!cfg.multi_party) return cfg.data_parties;
  const auto& mp = *cfg.multi_party;
  for (const Interval* iv : {&mp.samples, &mp.features, &mp.shared}) {
    if (iv->lo > iv->hi) throw ConfigError("split: interval lower bound exceeds upper bound");
  }
  Rng rng(derive_seed(seed, "multi_party_sizes"));
  std::vector<DataPartySize> out;
  for (std::size_t k = 0; k < mp.n_parties; ++k) {
    DataPartySize p;
    p.samples = uniform_int(rng, mp.samples.lo, mp.samples.hi);
    p.features = uniform_int(rng, mp.features.lo, mp.features.hi);
    p.shared = uniform_int(rng, mp.shared.lo, mp.shared.hi);
    out.push_back(p);
  }
  return out;
}

namespace detail {

inline void require(bool ok, const std::string& inequality, const std::string& values) {
  if (!ok) throw DataError("infeasible split: requires " + inequality + " (" + values + ")");
}

inline std::string n(std::size_t v) { return std::to_string(v); }

}  // namespace detail

// Shuffle rows with a seeded RNG and carve out the task party and data
// parties. For data party 0: rows [0, I_s) are shared, [I_s, I_t) task-private
// and the next I_d - I_s rows data-private. Further parties share a seeded
// subset of the task rows and draw their private rows from the non-task pool.
// Task columns are the first X_t (after the optional seeded column shuffle);
// party 0 takes the next X_d, other parties a seeded subset of the non-task
// columns.
inline ScenarioSplit partition_scenario(const Dataset& ds, const SplitConfig& cfg,
                                        std::uint64_t seed) {
  validate(ds);
  if (!ds.labels) throw DataError("partition_scenario: dataset has no labels");
  const std::size_t rows = ds.rows(), cols = ds.cols();
  const std::size_t it = cfg.task_samples, xt = cfg.task_features;
  const auto parties = resolve_parties(cfg, seed);

  using detail::n;
  detail::require(it >= 1, "I_t >= 1", "I_t=" + n(it));
  detail::require(xt >= 1, "X_t >= 1", "X_t=" + n(xt));
  detail::require(it <= rows, "I_t <= rows", "I_t=" + n(it) + ", rows=" + n(rows));
  detail::require(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0, "0 < test_fraction < 1",
                  "test_fraction=" + std::to_string(cfg.test_fraction));
  for (std::size_t k = 0; k < parties.size(); ++k) {
    const auto& p = parties[k];
    const std::string tag = " for data party " + n(k);
    detail::require(p.shared >= 1, "I_s >= 1" + tag, "I_s=" + n(p.shared));
    detail::require(p.shared <= it && p.shared <= p.samples, "I_s <= min(I_t, I_d)" + tag,
                    "I_s=" + n(p.shared) + ", I_t=" + n(it) + ", I_d=" + n(p.samples));
    detail::require(it + p.samples - p.shared <= rows, "I_t + I_d - I_s <= rows" + tag,
                    n(it) + " + " + n(p.samples) + " - " + n(p.shared) + " > " + n(rows));
    detail::require(p.features >= 1, "X_d >= 1" + tag, "X_d=" + n(p.features));
    detail::require(xt + p.features <= cols, "X_t + X_d <= cols" + tag,
                    n(xt) + " + " + n(p.features) + " > " + n(cols));
  }
  if (parties.empty()) {
    detail::require(xt <= cols, "X_t <= cols", "X_t=" + n(xt) + ", cols=" + n(cols));
  }

  Rng row_rng(derive_seed(seed, "rows"));
  const auto order = permutation(rows, row_rng);
  std::vector<std::size_t> col_order(cols);
  std::iota(col_order.begin(), col_order.end(), std::size_t{0});
  if (cfg.shuffle_columns) {
    Rng col_rng(derive_seed(seed, "columns"));
    col_order = permutation(cols, col_rng);
  }

  auto make_view = [&](std::string id, Role role, std::vector<std::size_t> src_rows,
                       std::vector<std::size_t> src_cols) {
    PartyView v;
    v.party_id = std::move(id);
    v.role = role;
    v.features = ds.features.select_rows(src_rows).select_cols(src_cols);
    for (std::size_t r : src_rows) v.ids.push_back(ds.ids[r]);
    if (role == Role::kTask) {
      Labels y;
      for (std::size_t r : src_rows) y.push_back((*ds.labels)[r]);
      v.labels = std::move(y);
    }
    for (std::size_t c : src_cols) v.feature_names.push_back(ds.feature_names[c]);
    v.feature_columns = std::move(src_cols);
    return v;
  };

  ScenarioSplit split;
  std::vector<std::size_t> task_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(it));
  std::vector<std::size_t> task_cols(col_order.begin(), col_order.begin() + static_cast<std::ptrdiff_t>(xt));
  split.task = make_view("task", Role::kTask, task_rows, task_cols);

  const std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(it), order.end());
  const std::vector<std::size_t> free_cols(col_order.begin() + static_cast<std::ptrdiff_t>(xt),
                                           col_order.end());
  for (std::size_t k = 0; k < parties.size(); ++k) {
    const auto& p = parties[k];
    std::vector<std::size_t> drows, dcols;
    if (k == 0) {
      drows.assign(task_rows.begin(), task_rows.begin() + static_cast<std::ptrdiff_t>(p.shared));
      drows.insert(drows.end(), pool.begin(),
                   pool.begin() + static_cast<std::ptrdiff_t>(p.samples - p.shared));
      dcols.assign(free_cols.begin(), free_cols.begin() + static_cast<std::ptrdiff_t>(p.features));
    } else {
      Rng prng(derive_seed(seed, "party", k));
      auto tp = permutation(task_rows.size(), prng);
      for (std::size_t i = 0; i < p.shared; ++i) drows.push_back(task_rows[tp[i]]);
      auto pp = permutation(pool.size(), prng);
      for (std::size_t i = 0; i < p.samples - p.shared; ++i) drows.push_back(pool[pp[i]]);
      auto cp = permutation(free_cols.size(), prng);
      for (std::size_t i = 0; i < p.features; ++i) dcols.push_back(free_cols[cp[i]]);
      std::sort(dcols.begin(), dcols.end());
    }
    split.data_parties.push_back(make_view("data" + n(k), Role::kData, drows, dcols));
  }

  const auto task_index = split.task.index();
  for (const auto& dp : split.data_parties) {
    auto shared = psi_intersect(std::span<const std::string>(split.task.ids),
                                std::span<const std::string>(dp.ids));
    if (shared.empty()) throw DataError("partition_scenario: empty intersection with " + dp.party_id);
    const auto data_index = dp.index();
    std::vector<std::size_t> tr, dr;
    for (const auto& id : shared) {
      tr.push_back(task_index.at(id));
      dr.push_back(data_index.at(id));
    }
    split.shared_ids.push_back(std::move(shared));
    split.shared_task_rows.push_back(std::move(tr));
    split.shared_data_rows.push_back(std::move(dr));
  }

  Rng tt_rng(derive_seed(seed, "train_test"));
  auto tp = permutation(it, tt_rng);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(it)));
  detail::require(n_test >= 1 && n_test < it, "1 <= test rows < I_t",
                  "test rows=" + n(n_test) + ", I_t=" + n(it));
  split.test_rows.assign(tp.begin(), tp.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train_rows.assign(tp.begin() + static_cast<std::ptrdiff_t>(n_test), tp.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  return split;
}

enum class InductiveMode { kIid, kNonIid };

inline const char* mode_name(InductiveMode m) { return m == InductiveMode::kIid ? "iid" : "noniid"; }

struct InductiveSplit {
  ScenarioSplit split;
  PartyView new_samples;  // task columns only, labeled
  InductiveMode mode = InductiveMode::kIid;
  std::vector<int> held_out_classes;  // non-IID only
};

// Non-IID: pick half of the classes (at least one), hold out 40% of their
// rows as new samples; the rest of the data feeds partition_scenario.
// IID: hold out the same number of rows uniformly at random.
inline InductiveSplit inductive_split(const Dataset& ds, const SplitConfig& cfg,
                                      std::uint64_t seed, InductiveMode mode,
                                      double holdout_fraction = 0.4) {
  validate(ds);
  if (!ds.labels) throw DataError("inductive_split: dataset has no labels");
  const std::size_t k = ds.n_classes();
  if (k < 2) throw DataError("inductive_split: needs at least two classes");

  std::vector<int> classes;
  for (int c : std::set<int>(ds.labels->begin(), ds.labels->end())) classes.push_back(c);
  Rng rng(derive_seed(seed, "inductive"));
  auto cperm = permutation(classes.size(), rng);
  std::vector<int> chosen;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, k / 2); ++i) chosen.push_back(classes[cperm[i]]);
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::size_t> portion;
  for (std::size_t i = 0; i < ds.rows(); ++i)
    if (std::binary_search(chosen.begin(), chosen.end(), (*ds.labels)[i])) portion.push_back(i);
  const auto n_new =
      static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(portion.size())));
  if (n_new == 0) throw DataError("inductive_split: holdout is empty");

  std::vector<bool> held(ds.rows(), false);
  if (mode == InductiveMode::kNonIid) {
    auto p = permutation(portion.size(), rng);
    for (std::size_t i = 0; i < n_new; ++i) held[portion[p[i]]] = true;
  } else {
    auto p = permutation(ds.rows(), rng);
    for (std::size_t i = 0; i < n_new; ++i) held[p[i]] = true;
  }
  std::vector<std::size_t> keep, out;
  for (std::size_t i = 0; i < ds.rows(); ++i) (held[i] ? out : keep).push_back(i);

  InductiveSplit res;
  res.mode = mode;
  if (mode == InductiveMode::kNonIid) res.held_out_classes = chosen;
  res.split = partition_scenario(ds.subset(keep), cfg, seed);
  Dataset fresh = ds.subset(out);
  PartyView nv;
  nv.party_id = "task";
  nv.role = Role::kTask;
  nv.feature_columns = res.split.task.feature_columns;
  nv.feature_names = res.split.task.feature_names;
  nv.features = fresh.features.select_cols(nv.feature_columns);
  nv.ids = fresh.ids;
  nv.labels = fresh.labels;
  res.new_samples = std::move(nv);
  return res;
}

// Per-feature z-scoring. Constant columns get unit scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& m, std::span<const std::size_t> rows) {
    Standardizer s;
    s.mean.assign(m.cols(), 0.0);
    s.scale.assign(m.cols(), 1.0);
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < m.cols(); ++j) s.mean[j] += m(r, j) / n;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double var = 0.0;
      for (std::size_t r : rows) var += (m(r, j) - s.mean[j]) * (m(r, j) - s.mean[j]);
      const double sd = std::sqrt(var / n);
      s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  static Standardizer fit(const Matrix& m) {
    std::vector<std::size_t> all(m.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit(m, all);
  }

  Matrix apply(const Matrix& m) const {
    if (m.cols() != mean.size()) throw ShapeError("Standardizer: width mismatch");
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - mean[j]) / scale[j];
    return out;
  }
};

// Writes task.csv, data<k>.csv, shared_ids_<k>.csv and train/test row lists.
inline void export_split(const ScenarioSplit& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_view = [&](const PartyView& v, const std::string& file) {
    csv::Table t = csv::matrix_table(v.features, v.feature_names, v.ids);
    if (v.labels) {
      t.header.push_back("label");
      for (std::size_t i = 0; i < v.rows(); ++i) t.rows[i].push_back(std::to_string((*v.labels)[i]));
    }
    csv::write_file(dir / file, t);
  };
  write_view(s.task, "task.csv");
  for (std::size_t k = 0; k < s.data_parties.size(); ++k) {
    write_view(s.data_parties[k], "data" + std::to_string(k) + ".csv");
    csv::Table ids{{"id"}, {}};
    for (const auto& id : s.shared_ids[k]) ids.rows.push_back({id});
    csv::write_file(dir / ("shared_ids_" + std::to_string(k) + ".csv"), ids);
  }
  csv::Table tt{{"row", "id", "part"}, {}};
  for (std::size_t r : s.train_rows) tt.rows.push_back({std::to_string(r), s.task.ids[r], "train"});
  for (std::size_t r : s.test_rows) tt.rows.push_back({std::to_string(r), s.task.ids[r], "test"});
  csv::write_file(dir / "task_rows.csv", tt);
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_DATASET_HPP_
