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

// Downstream classifiers: random forest, k-nearest neighbours and a small MLP.
// Every vote (forest, neighbours) breaks ties toward the smallest class id.

#ifndef VFEDTRANS_DOWNSTREAM_HPP_
#define VFEDTRANS_DOWNSTREAM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfedtrans/dataset.hpp"
#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/nn.hpp"
#include "vfedtrans/rng.hpp"

namespace vfedtrans {

enum class ClassifierKind { kRandomForest, kKnn, kMlp };

inline const char* classifier_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kRandomForest: return "rf";
    case ClassifierKind::kKnn: return "knn";
    case ClassifierKind::kMlp: return "mlp";
  }
  return "rf";
}

inline ClassifierKind classifier_from_name(const std::string& s) {
  if (s == "rf") return ClassifierKind::kRandomForest;
  if (s == "knn") return ClassifierKind::kKnn;
  if (s == "mlp" || s == "nn") return ClassifierKind::kMlp;
  throw ConfigError("unknown classifier '" + s + "' (expected rf, knn or mlp)");
}

struct RandomForestConfig {
  std::size_t n_estimators = 200;
  std::size_t max_depth = 10;
  // Candidate features per split; 0 means ceil(sqrt(d)).
  std::size_t max_features = 0;
  bool bootstrap = true;
};

struct KnnConfig {
  std::size_t n_neighbors = 8;
};

struct MlpConfig {
  std::vector<std::size_t> hidden{100, 100, 50};
  double l2_alpha = 0.01;
  std::size_t max_iter = 400;
  double learning_rate = 0.001;
  std::size_t batch_size = 200;
  nn::Activation activation = nn::Activation::kRelu;
};

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::kRandomForest;
  RandomForestConfig rf;
  KnnConfig knn;
  MlpConfig mlp;

  void validate() const {
    if (rf.n_estimators < 1) throw ConfigError("classifier.rf.n_estimators must be >= 1");
    if (rf.max_depth < 1) throw ConfigError("classifier.rf.max_depth must be >= 1");
    if (knn.n_neighbors < 1) throw ConfigError("classifier.knn.n_neighbors must be >= 1");
    if (mlp.max_iter < 1) throw ConfigError("classifier.mlp.max_iter must be >= 1");
    if (mlp.batch_size < 1) throw ConfigError("classifier.mlp.batch_size must be >= 1");
    if (!(mlp.l2_alpha >= 0.0)) throw ConfigError("classifier.mlp.l2_alpha must be >= 0");
    for (std::size_t h : mlp.hidden)
      if (h < 1) throw ConfigError("classifier.mlp.hidden widths must be >= 1");
  }
};

// Index of the largest count; the first (smallest class id) wins ties.
inline std::size_t argmax_vote(std::span<const double> counts) {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// ---------------------------------------------------------------------------
// CART tree

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0, right = 0;
  std::size_t label = 0;  // class index at leaves
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  std::size_t predict_index(std::span<const double> x) const {
    std::size_t n = 0;
    while (nodes[n].feature >= 0) {
      n = x[static_cast<std::size_t>(nodes[n].feature)] <= nodes[n].threshold ? nodes[n].left
                                                                              : nodes[n].right;
    }
    return nodes[n].label;
  }
};

namespace detail {

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 1.0;
  for (double c : counts) s -= (c / total) * (c / total);
  return s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
              std::size_t max_depth, std::size_t max_features, Rng& rng)
      : x_(x), y_(y), k_(n_classes), max_depth_(max_depth), max_features_(max_features), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    std::vector<double> counts(k_, 0.0);
    for (std::size_t r : rows) counts[y_[r]] += 1.0;
    tree_.nodes[id].label = argmax_vote(counts);
    const double parent = gini(counts, static_cast<double>(rows.size()));
    if (depth >= max_depth_ || rows.size() < 2 || parent == 0.0) return id;

    int best_f = -1;
    double best_t = 0.0, best_imp = parent;
    const auto feats = permutation(x_.cols(), rng_);
    std::vector<std::pair<double, std::size_t>> sorted(rows.size());
    for (std::size_t fi = 0; fi < std::min(max_features_, feats.size()); ++fi) {
      const std::size_t f = feats[fi];
      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> left(k_, 0.0), right = counts;
      const double n = static_cast<double>(rows.size());
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[sorted[i].second] += 1.0;
        right[sorted[i].second] -= 1.0;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (imp < best_imp - 1e-12) {
          best_imp = imp;
          best_f = static_cast<int>(f);
          best_t = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) (x_(r, static_cast<std::size_t>(best_f)) <= best_t ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = best_t;
    const std::size_t l = grow(lrows, depth + 1);
    const std::size_t r = grow(rrows, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Matrix& x_;
  std::span<const std::size_t> y_;
  std::size_t k_, max_depth_, max_features_;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Fitted model

struct FittedModel {
  ClassifierKind kind = ClassifierKind::kRandomForest;
  std::vector<int> classes;  // sorted label values; predictions index into this
  std::size_t width = 0;
  // rf
  std::vector<DecisionTree> trees;
  // knn and mlp inputs are standardized with these
  Vector mean, scale;
  // knn
  Matrix reference;
  std::vector<std::size_t> reference_labels;
  std::size_t k = 0;
  // mlp
  nn::Network network;

  Matrix standardize(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto row = out.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"version", 1}, {"kind", classifier_name(kind)}, {"classes", classes}, {"width", width}};
    if (kind == ClassifierKind::kRandomForest) {
      nlohmann::json ts = nlohmann::json::array();
      for (const auto& t : trees) {
        nlohmann::json ns = nlohmann::json::array();
        for (const auto& n : t.nodes) ns.push_back({n.feature, n.threshold, n.left, n.right, n.label});
        ts.push_back(ns);
      }
      j["trees"] = ts;
    } else {
      j["mean"] = mean;
      j["scale"] = scale;
      if (kind == ClassifierKind::kKnn) {
        j["k"] = k;
        j["reference"] = reference.data();
        j["reference_labels"] = reference_labels;
      } else {
        j["network"] = network.to_json();
      }
    }
    return j;
  }

  static FittedModel from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != 1) throw DataError("FittedModel: unsupported version");
    FittedModel m;
    m.kind = classifier_from_name(j.at("kind").get<std::string>());
    m.classes = j.at("classes").get<std::vector<int>>();
    m.width = j.at("width").get<std::size_t>();
    if (m.kind == ClassifierKind::kRandomForest) {
      for (const auto& t : j.at("trees")) {
        DecisionTree tree;
        for (const auto& n : t) {
          tree.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<std::size_t>(),
                                n[3].get<std::size_t>(), n[4].get<std::size_t>()});
        }
        m.trees.push_back(std::move(tree));
      }
    } else {
      m.mean = j.at("mean").get<Vector>();
      m.scale = j.at("scale").get<Vector>();
      if (m.kind == ClassifierKind::kKnn) {
        m.k = j.at("k").get<std::size_t>();
        m.reference_labels = j.at("reference_labels").get<std::vector<std::size_t>>();
        m.reference = Matrix(m.reference_labels.size(), m.width, j.at("reference").get<Vector>());
      } else {
        m.network = nn::Network::from_json(j.at("network"));
      }
    }
    return m;
  }
};

namespace detail {

inline void fit_standardizer(const Matrix& x, FittedModel& m) {
  m.mean.assign(x.cols(), 0.0);
  m.scale.assign(x.cols(), 0.0);
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) m.mean[j] += x(i, j) / n;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) m.scale[j] += (x(i, j) - m.mean[j]) * (x(i, j) - m.mean[j]) / n;
  for (double& s : m.scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;
}

inline void fit_forest(const Matrix& x, std::span<const std::size_t> y, const RandomForestConfig& cfg,
                       std::uint64_t seed, FittedModel& m) {
  const std::size_t mf = cfg.max_features
                             ? std::min(cfg.max_features, x.cols())
                             : static_cast<std::size_t>(std::ceil(std::sqrt(double(x.cols()))));
  for (std::size_t t = 0; t < cfg.n_estimators; ++t) {
    Rng rng(derive_seed(seed, "rf_tree", t));
    std::vector<std::size_t> rows(x.rows());
    if (cfg.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng() % x.rows());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    TreeBuilder b(x, y, m.classes.size(), cfg.max_depth, mf, rng);
    m.trees.push_back(b.build(std::move(rows)));
  }
}

// Softmax cross-entropy plus 0.5·alpha·|W|^2 / batch, the usual MLP penalty.
inline void fit_mlp(const Matrix& x, std::span<const std::size_t> y, const MlpConfig& cfg,
                    std::uint64_t seed, FittedModel& m) {
  fit_standardizer(x, m);
  const Matrix xs = m.standardize(x);
  std::vector<std::size_t> widths{x.cols()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(m.classes.size());
  Rng init(derive_seed(seed, "mlp_init"));
  Rng shuffle(derive_seed(seed, "mlp_shuffle"));
  m.network = nn::Network::build(widths, cfg.activation, nn::Activation::kIdentity, init);
  Vector params = m.network.flat();
  nn::Adam adam(params.size(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  const std::size_t n = x.rows();
  const std::size_t bs = std::min(cfg.batch_size, n);
  for (std::size_t epoch = 0; epoch < cfg.max_iter; ++epoch) {
    const auto order = permutation(n, shuffle);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const double nb = static_cast<double>(idx.size());
      nn::Tape tape;
      Matrix logits = m.network.forward(xs.select_rows(idx), &tape);
      for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double& v : row) z += (v = std::exp(v - mx));
        for (double& v : row) v /= z;
        row[y[idx[i]]] -= 1.0;
        for (double& v : row) v /= nb;
      }
      nn::Network grad = m.network.zeros_like();
      m.network.backward(tape, std::move(logits), grad);
      for (std::size_t l = 0; l < grad.layers().size(); ++l) {
        auto& gw = grad.layers()[l].w.data();
        const auto& w = m.network.layers()[l].w.data();
        for (std::size_t q = 0; q < gw.size(); ++q) gw[q] += cfg.l2_alpha * w[q] / nb;
      }
      adam.step(params, grad.flat());
      m.network.set_flat(params);
    }
  }
  if (!m.network.all_finite()) throw NumericError("mlp: non-finite parameters after training");
}

}  // namespace detail

inline FittedModel fit(const Matrix& x, std::span<const int> y, const ClassifierConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  if (x.rows() != y.size()) {
    throw ShapeError("fit: " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                     " labels");
  }
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("fit: empty training matrix");
  FittedModel m;
  m.kind = cfg.kind;
  m.width = x.cols();
  m.classes.assign(y.begin(), y.end());
  std::sort(m.classes.begin(), m.classes.end());
  m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
  if (m.classes.size() < 2) throw DataError("fit: training labels contain a single class");
  std::vector<std::size_t> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yi[i] = static_cast<std::size_t>(std::lower_bound(m.classes.begin(), m.classes.end(), y[i]) -
                                     m.classes.begin());
  }
  switch (cfg.kind) {
    case ClassifierKind::kRandomForest:
      detail::fit_forest(x, yi, cfg.rf, seed, m);
      break;
    case ClassifierKind::kKnn:
      detail::fit_standardizer(x, m);
      m.reference = m.standardize(x);
      m.reference_labels = yi;
      m.k = std::min(cfg.knn.n_neighbors, x.rows());
      break;
    case ClassifierKind::kMlp:
      detail::fit_mlp(x, yi, cfg.mlp, seed, m);
      break;
  }
  return m;
}

inline std::vector<int> predict(const FittedModel& m, const Matrix& x) {
  if (x.cols() != m.width) {
    throw ShapeError("predict: input width " + std::to_string(x.cols()) + ", model expects " +
                     std::to_string(m.width));
  }
  std::vector<int> out(x.rows());
  const std::size_t k = m.classes.size();
  switch (m.kind) {
    case ClassifierKind::kRandomForest:
      for (std::size_t i = 0; i < x.rows(); ++i) {
        std::vector<double> votes(k, 0.0);
        for (const auto& t : m.trees) votes[t.predict_index(x.row(i))] += 1.0;
        out[i] = m.classes[argmax_vote(votes)];
      }
      break;
    case ClassifierKind::kKnn: {
      const Matrix xs = m.standardize(x);
      std::vector<std::pair<double, std::size_t>> d(m.reference.rows());
      for (std::size_t i = 0; i < xs.rows(); ++i) {
        for (std::size_t r = 0; r < m.reference.rows(); ++r) {
          double s = 0.0;
          for (std::size_t j = 0; j < xs.cols(); ++j) {
            const double e = xs(i, j) - m.reference(r, j);
            s += e * e;
          }
          d[r] = {s, r};
        }
        std::sort(d.begin(), d.end());
        // Neighbours tied with the k-th distance all vote.
        std::vector<double> votes(k, 0.0);
        const double cutoff = d[m.k - 1].first;
        for (std::size_t r = 0; r < d.size() && (r < m.k || d[r].first == cutoff); ++r) {
          votes[m.reference_labels[d[r].second]] += 1.0;
        }
        out[i] = m.classes[argmax_vote(votes)];
      }
      break;
    }
    case ClassifierKind::kMlp: {
      const Matrix logits = m.network.forward(m.standardize(x));
      for (std::size_t i = 0; i < x.rows(); ++i) out[i] = m.classes[argmax_vote(logits.row(i))];
      break;
    }
  }
  return out;
}

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  if (pred.empty()) throw ShapeError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_DOWNSTREAM_HPP_
