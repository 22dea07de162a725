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

// JSON experiment configuration.
//
//   {
//     "name": "breast",
//     "dataset": {"source": "breast"},
//     "split": {"I_t": 300, "X_t": 15, "data_parties": [{"I_d": 400, "X_d": 15, "I_s": 200}]},
//     "frl": {"method": "fedsvd", "block_size": 100},
//     "lrd": {"theta": 0.001, "epochs": 500},
//     "classifier": {"kind": "rf", "n_estimators": 200},
//     "experiment": {"scenario": "main", "n_seeds": 10}
//   }
//
// Every section and key is optional; missing keys keep their defaults.
// Unknown keys and ill-typed values raise ConfigError naming the key.

#ifndef VFEDTRANS_CONFIG_HPP_
#define VFEDTRANS_CONFIG_HPP_

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfedtrans/error.hpp"
#include "vfedtrans/orchestrator.hpp"
#include "vfedtrans/transcript.hpp"

namespace vfedtrans {

namespace detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    for (const auto& [k, v] : j_.items()) {
      if (!allowed.count(k)) throw ConfigError(key(k) + ": unknown key");
    }
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  const json& at(const std::string& k) const { return j_.at(k); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  void get(const std::string& k, std::size_t& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(key(k) + " must be a non-negative integer");
    out = v.get<std::size_t>();
  }
  void get(const std::string& k, double& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(key(k) + " must be a number");
    out = v.get<double>();
  }
  void get(const std::string& k, bool& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_boolean()) throw ConfigError(key(k) + " must be a boolean");
    out = v.get<bool>();
  }
  void get(const std::string& k, std::string& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(key(k) + " must be a string");
    out = v.get<std::string>();
  }
  void get(const std::string& k, std::vector<std::size_t>& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(key(k) + " must be an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        throw ConfigError(key(k) + " must be an array of non-negative integers");
      }
      out.push_back(e.get<std::size_t>());
    }
  }
  void get(const std::string& k, std::vector<double>& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(key(k) + " must be an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key(k) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void get(const std::string& k, Interval& out) const {
    std::vector<std::size_t> v;
    get(k, v);
    if (!has(k)) return;
    if (v.size() != 2 || v[0] > v[1]) throw ConfigError(key(k) + " must be [lo, hi] with lo <= hi");
    out = {v[0], v[1]};
  }

  // Wraps name lookups so their errors name the key.
  template <typename F>
  auto named(const std::string& k, F&& f) const -> decltype(f(std::string{})) {
    std::string s;
    get(k, s);
    try {
      return f(s);
    } catch (const ConfigError& e) {
      throw ConfigError(key(k) + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
};

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::Section;
  ExperimentConfig c;
  Section root(j, "", {"name", "dataset", "split", "frl", "lrd", "classifier", "experiment"});
  root.get("name", c.name);

  if (root.has("dataset")) {
    Section s(root.at("dataset"), "dataset",
              {"source", "path", "id_column", "label_column", "n_samples", "n_features", "n_classes",
               "class_separation", "task_features", "data_features", "latent_dim", "task_noise", "data_noise",
               "seed"});
    auto& d = c.dataset;
    s.get("source", d.source);
    if (!std::set<std::string>{"breast", "csv", "synthetic", "synthetic_transfer"}.count(d.source)) {
      throw ConfigError("dataset.source: unknown source '" + d.source + "'");
    }
    s.get("path", d.path);
    s.get("id_column", d.id_column);
    s.get("label_column", d.label_column);
    if (d.source == "csv" && d.path.empty()) throw ConfigError("dataset.path is required for source 'csv'");
    s.get("seed", d.seed);
    if (d.source == "synthetic_transfer") {
      auto& t = d.transfer;
      s.get("n_samples", t.n_samples);
      s.get("task_features", t.task_features);
      s.get("data_features", t.data_features);
      s.get("n_classes", t.n_classes);
      s.get("latent_dim", t.latent_dim);
      s.get("class_separation", t.class_separation);
      s.get("task_noise", t.task_noise);
      s.get("data_noise", t.data_noise);
    } else {
      s.get("n_samples", d.n_samples);
      s.get("n_features", d.n_features);
      s.get("n_classes", d.n_classes);
      s.get("class_separation", d.class_separation);
    }
  }

  if (root.has("split")) {
    Section s(root.at("split"), "split",
              {"I_t", "X_t", "data_parties", "multi_party", "shuffle_columns", "test_fraction"});
    auto& sp = c.split;
    s.get("I_t", sp.task_samples);
    s.get("X_t", sp.task_features);
    s.get("shuffle_columns", sp.shuffle_columns);
    s.get("test_fraction", sp.test_fraction);
    if (!(sp.test_fraction > 0.0 && sp.test_fraction < 1.0)) {
      throw ConfigError("split.test_fraction must be in (0, 1)");
    }
    if (s.has("data_parties")) {
      const auto& arr = s.at("data_parties");
      if (!arr.is_array()) throw ConfigError("split.data_parties must be an array");
      sp.data_parties.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section p(arr[i], "split.data_parties[" + std::to_string(i) + "]", {"I_d", "X_d", "I_s"});
        DataPartySize d;
        p.get("I_d", d.samples);
        p.get("X_d", d.features);
        p.get("I_s", d.shared);
        sp.data_parties.push_back(d);
      }
    }
    if (s.has("multi_party")) {
      Section p(s.at("multi_party"), "split.multi_party", {"n_parties", "I_d", "X_d", "I_s"});
      MultiPartySpec mp;
      p.get("n_parties", mp.n_parties);
      p.get("I_d", mp.samples);
      p.get("X_d", mp.features);
      p.get("I_s", mp.shared);
      if (mp.n_parties < 1) throw ConfigError("split.multi_party.n_parties must be >= 1");
      sp.multi_party = mp;
    }
  }

  if (root.has("frl")) {
    Section s(root.at("frl"), "frl",
              {"method", "rank", "num_party", "block_size", "scale_by_singular_values", "party_num", "iter_num",
               "period_num", "warm_start"});
    auto& f = c.frl;
    if (s.has("method")) f.method = s.named("method", [](const std::string& v) { return frl_method_from_name(v); });
    if (s.has("rank")) {
      std::size_t r = 0;
      s.get("rank", r);
      if (r < 1) throw ConfigError("frl.rank must be >= 1");
      f.rank = r;
    }
    s.get("num_party", f.num_party);
    s.get("party_num", f.num_party);
    s.get("block_size", f.fedsvd.block_size);
    if (f.fedsvd.block_size < 1) throw ConfigError("frl.block_size must be >= 1");
    s.get("scale_by_singular_values", f.fedsvd.scale_by_singular_values);
    s.get("iter_num", f.vfedpca.iter_num);
    s.get("period_num", f.vfedpca.period_num);
    s.get("warm_start", f.vfedpca.warm_start);
    if (f.vfedpca.iter_num < 1) throw ConfigError("frl.iter_num must be >= 1");
    if (f.vfedpca.period_num < 1) throw ConfigError("frl.period_num must be >= 1");
  }

  if (root.has("lrd")) {
    Section s(root.at("lrd"), "lrd", {"theta", "learning_rate", "batch_size", "epochs", "depth", "activation", "norm"});
    auto& l = c.lrd;
    s.get("theta", l.theta);
    s.get("learning_rate", l.learning_rate);
    s.get("batch_size", l.batch_size);
    s.get("epochs", l.epochs);
    s.get("depth", l.depth);
    if (s.has("activation")) l.hidden = s.named("activation", [](const std::string& v) { return nn::activation_from_name(v); });
    if (s.has("norm")) {
      l.norm = s.named("norm", [](const std::string& v) {
        if (v == "l2") return DistillNorm::kL2;
        if (v == "l1") return DistillNorm::kL1;
        throw ConfigError("unknown norm '" + v + "'");
      });
    }
  }

  if (root.has("classifier")) {
    Section s(root.at("classifier"), "classifier",
              {"kind", "n_estimators", "max_depth", "max_features", "bootstrap", "n_neighbors", "hidden_layer_sizes",
               "alpha", "max_iter", "learning_rate", "batch_size", "activation"});
    auto& k = c.classifier;
    if (s.has("kind")) k.kind = s.named("kind", [](const std::string& v) { return classifier_from_name(v); });
    s.get("n_estimators", k.rf.n_estimators);
    s.get("max_depth", k.rf.max_depth);
    s.get("max_features", k.rf.max_features);
    s.get("bootstrap", k.rf.bootstrap);
    s.get("n_neighbors", k.knn.n_neighbors);
    s.get("hidden_layer_sizes", k.mlp.hidden);
    s.get("alpha", k.mlp.l2_alpha);
    s.get("max_iter", k.mlp.max_iter);
    s.get("learning_rate", k.mlp.learning_rate);
    s.get("batch_size", k.mlp.batch_size);
    if (s.has("activation")) {
      k.mlp.activation = s.named("activation", [](const std::string& v) { return nn::activation_from_name(v); });
    }
  }

  if (root.has("experiment")) {
    Section s(root.at("experiment"), "experiment",
              {"scenario", "seeds", "n_seeds", "few_shot_fraction", "holdout", "sweep"});
    if (s.has("scenario")) c.scenario = s.named("scenario", [](const std::string& v) { return scenario_from_name(v); });
    if (s.has("seeds") && s.has("n_seeds")) throw ConfigError("experiment.seeds and experiment.n_seeds are exclusive");
    if (s.has("n_seeds")) {
      std::size_t n = 0;
      s.get("n_seeds", n);
      if (n < 1) throw ConfigError("experiment.n_seeds must be >= 1");
      c.seeds = default_seeds(n);
    }
    if (s.has("seeds")) {
      std::vector<std::size_t> v;
      s.get("seeds", v);
      c.seeds.assign(v.begin(), v.end());
    }
    s.get("few_shot_fraction", c.few_shot_fraction);
    s.get("holdout", c.inductive_holdout);
    if (s.has("sweep")) {
      Section w(s.at("sweep"), "experiment.sweep", {"axis", "values"});
      w.get("axis", c.sweep_axis);
      w.get("values", c.sweep_values);
      if (!std::set<std::string>{"task_features", "data_features", "shared_samples", "n_parties"}.count(c.sweep_axis)) {
        throw ConfigError("experiment.sweep.axis: unknown axis '" + c.sweep_axis + "'");
      }
      if (c.sweep_values.empty()) throw ConfigError("experiment.sweep.values must be nonempty");
    }
  }

  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json dataset = {{"source", c.dataset.source}, {"seed", c.dataset.seed}};
  if (c.dataset.source == "csv") {
    dataset["path"] = c.dataset.path;
    dataset["id_column"] = c.dataset.id_column;
    dataset["label_column"] = c.dataset.label_column;
  } else if (c.dataset.source == "synthetic") {
    dataset["n_samples"] = c.dataset.n_samples;
    dataset["n_features"] = c.dataset.n_features;
    dataset["n_classes"] = c.dataset.n_classes;
    dataset["class_separation"] = c.dataset.class_separation;
  } else if (c.dataset.source == "synthetic_transfer") {
    const auto& t = c.dataset.transfer;
    dataset.update({{"n_samples", t.n_samples}, {"task_features", t.task_features},
                    {"data_features", t.data_features}, {"n_classes", t.n_classes}, {"latent_dim", t.latent_dim},
                    {"class_separation", t.class_separation}, {"task_noise", t.task_noise},
                    {"data_noise", t.data_noise}});
  }

  json parties = json::array();
  for (const auto& p : c.split.data_parties) parties.push_back({{"I_d", p.samples}, {"X_d", p.features}, {"I_s", p.shared}});
  json split = {{"I_t", c.split.task_samples}, {"X_t", c.split.task_features}, {"data_parties", parties},
                {"shuffle_columns", c.split.shuffle_columns}, {"test_fraction", c.split.test_fraction}};
  if (c.split.multi_party) {
    const auto& m = *c.split.multi_party;
    split["multi_party"] = {{"n_parties", m.n_parties},
                            {"I_d", {m.samples.lo, m.samples.hi}},
                            {"X_d", {m.features.lo, m.features.hi}},
                            {"I_s", {m.shared.lo, m.shared.hi}}};
  }

  json frl = {{"method", frl_method_name(c.frl.method)},
              {"num_party", c.frl.num_party},
              {"block_size", c.frl.fedsvd.block_size},
              {"scale_by_singular_values", c.frl.fedsvd.scale_by_singular_values},
              {"iter_num", c.frl.vfedpca.iter_num},
              {"period_num", c.frl.vfedpca.period_num},
              {"warm_start", c.frl.vfedpca.warm_start}};
  if (c.frl.rank) frl["rank"] = *c.frl.rank;

  json lrd = {{"theta", c.lrd.theta},
              {"learning_rate", c.lrd.learning_rate},
              {"batch_size", c.lrd.batch_size},
              {"epochs", c.lrd.epochs},
              {"depth", c.lrd.depth},
              {"activation", nn::activation_name(c.lrd.hidden)},
              {"norm", c.lrd.norm == DistillNorm::kL2 ? "l2" : "l1"}};

  const auto& k = c.classifier;
  json classifier = {{"kind", classifier_name(k.kind)},
                     {"n_estimators", k.rf.n_estimators},
                     {"max_depth", k.rf.max_depth},
                     {"max_features", k.rf.max_features},
                     {"bootstrap", k.rf.bootstrap},
                     {"n_neighbors", k.knn.n_neighbors},
                     {"hidden_layer_sizes", k.mlp.hidden},
                     {"alpha", k.mlp.l2_alpha},
                     {"max_iter", k.mlp.max_iter},
                     {"learning_rate", k.mlp.learning_rate},
                     {"batch_size", k.mlp.batch_size},
                     {"activation", nn::activation_name(k.mlp.activation)}};

  json experiment = {{"scenario", scenario_name(c.scenario)},
                     {"seeds", c.seeds},
                     {"few_shot_fraction", c.few_shot_fraction},
                     {"holdout", c.inductive_holdout}};
  if (!c.sweep_axis.empty()) experiment["sweep"] = {{"axis", c.sweep_axis}, {"values", c.sweep_values}};

  return {{"name", c.name}, {"dataset", dataset}, {"split", split}, {"frl", frl},
          {"lrd", lrd},     {"classifier", classifier}, {"experiment", experiment}};
}

// Digest of the canonical serialization; recorded in run manifests.
inline std::string config_digest(const ExperimentConfig& c) { return digest_text(config_to_json(c).dump()); }

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_CONFIG_HPP_
