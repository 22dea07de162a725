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

// End-to-end pipeline and experiment drivers.
//
//   partition -> id intersection -> FRL per data party (Step 1)
//             -> distilled encoder per data party (Step 2)
//             -> enrich task rows, train/test the downstream model (Step 3)
//
// The LOCAL baseline runs Step 3 on the raw task features of the same split.

#ifndef VFEDTRANS_ORCHESTRATOR_HPP_
#define VFEDTRANS_ORCHESTRATOR_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vfedtrans/csv.hpp"
#include "vfedtrans/dataset.hpp"
#include "vfedtrans/downstream.hpp"
#include "vfedtrans/error.hpp"
#include "vfedtrans/frl.hpp"
#include "vfedtrans/linalg.hpp"
#include "vfedtrans/lrd.hpp"
#include "vfedtrans/rng.hpp"
#include "vfedtrans/transcript.hpp"

namespace vfedtrans {

enum class Scenario {
  kMain,
  kFewShot,
  kMultiParty,
  kInductiveIid,
  kInductiveNonIid,
  kNewDataHospital,
  kDistillAblation,
};

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kMain: return "main";
    case Scenario::kFewShot: return "few_shot";
    case Scenario::kMultiParty: return "multi_party";
    case Scenario::kInductiveIid: return "inductive_iid";
    case Scenario::kInductiveNonIid: return "inductive_noniid";
    case Scenario::kNewDataHospital: return "new_data_hospital";
    case Scenario::kDistillAblation: return "distill_ablation";
  }
  return "main";
}

inline Scenario scenario_from_name(const std::string& s) {
  for (auto v : {Scenario::kMain, Scenario::kFewShot, Scenario::kMultiParty, Scenario::kInductiveIid,
                 Scenario::kInductiveNonIid, Scenario::kNewDataHospital, Scenario::kDistillAblation}) {
    if (s == scenario_name(v)) return v;
  }
  throw ConfigError("unknown scenario '" + s + "'");
}

struct DatasetSource {
  // breast | csv | synthetic | synthetic_transfer
  std::string source = "breast";
  std::string path;  // csv only; relative paths resolve against the data dir
  std::string id_column = "id";
  std::string label_column = "diagnosis";
  // synthetic (Gaussian blobs)
  std::size_t n_samples = 1000;
  std::size_t n_features = 20;
  std::size_t n_classes = 2;
  double class_separation = 2.0;
  // synthetic_transfer
  TransferSynthConfig transfer;
  std::uint64_t seed = 0;
};

inline Dataset load_dataset(const DatasetSource& src, const std::filesystem::path& data_dir) {
  if (src.source == "breast") return load_csv(data_dir / "breast.csv", "id", "diagnosis");
  if (src.source == "csv") {
    std::filesystem::path p(src.path);
    if (p.is_relative() && !std::filesystem::exists(p)) p = data_dir / p;
    return load_csv(p, src.id_column, src.label_column);
  }
  if (src.source == "synthetic") {
    return synth_generate(src.n_samples, src.n_features, src.n_classes, src.class_separation, src.seed);
  }
  if (src.source == "synthetic_transfer") return synth_transfer(src.transfer, src.seed);
  throw ConfigError("dataset.source: unknown source '" + src.source + "'");
}

inline std::vector<std::uint64_t> default_seeds(std::size_t n = 10) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), std::uint64_t{0});
  return s;
}

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSource dataset;
  SplitConfig split = breast_split_config();
  FrlConfig frl;
  DistillConfig lrd;
  ClassifierConfig classifier;
  std::vector<std::uint64_t> seeds = default_seeds();
  Scenario scenario = Scenario::kMain;
  double few_shot_fraction = 0.1;
  double inductive_holdout = 0.4;
  std::string sweep_axis;  // empty: no sweep
  std::vector<double> sweep_values;

  void validate() const {
    if (seeds.empty()) throw ConfigError("experiment.seeds must be nonempty");
    if (!(few_shot_fraction > 0.0 && few_shot_fraction <= 1.0)) {
      throw ConfigError("experiment.few_shot_fraction must be in (0, 1]");
    }
    if (!(inductive_holdout > 0.0 && inductive_holdout < 1.0)) {
      throw ConfigError("experiment.inductive_holdout must be in (0, 1)");
    }
    if (scenario == Scenario::kNewDataHospital && split.data_parties.size() + (split.multi_party ? 1 : 0) < 2 &&
        !(split.multi_party && split.multi_party->n_parties >= 2)) {
      throw ConfigError("split.data_parties: new_data_hospital needs at least two data parties");
    }
    lrd.validate();
    classifier.validate();
  }
};

struct PhaseTimes {
  double frl = 0.0;
  double lrd = 0.0;
  double downstream = 0.0;
  double total() const { return frl + lrd + downstream; }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// Runs f, rethrowing any library failure as a PhaseError naming `phase`.
template <typename F>
auto in_phase(const std::string& phase, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PhaseError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::string cause = e.what();
    if (cause.rfind(phase + ": ", 0) == 0) cause.erase(0, phase.size() + 2);
    throw PhaseError(phase, cause);
  }
}

}  // namespace detail

// Everything the task party holds after Steps 1-2, plus what the simulation
// needs to audit the run.
struct PipelineState {
  ScenarioSplit split;
  Standardizer task_scaler;
  Matrix task_x;  // standardized task features, all task rows
  std::vector<Standardizer> data_scalers;
  std::vector<Matrix> data_x;  // standardized data-party features
  std::vector<FedRepresentation> fed;
  std::vector<EncoderParams> encoders;
  std::vector<std::vector<double>> loss_curves;
  Transcript transcript;
  PhaseTimes times;

  std::size_t n_parties() const { return split.data_parties.size(); }
  const Labels& labels() const { return *split.task.labels; }

  std::vector<std::string> encoder_digests() const {
    std::vector<std::string> d;
    for (const auto& e : encoders) d.push_back(e.digest());
    return d;
  }

  // Matrices no party may ever send: raw views, standardized views and the
  // standardized shared slices that enter the protocol.
  std::vector<Matrix> private_matrices() const {
    std::vector<Matrix> out{split.task.features, task_x};
    for (std::size_t k = 0; k < split.data_parties.size(); ++k) {
      out.push_back(split.data_parties[k].features);
      out.push_back(data_x[k]);
      out.push_back(task_x.select_rows(split.shared_task_rows[k]));
      out.push_back(data_x[k].select_rows(split.shared_data_rows[k]));
    }
    return out;
  }
};

// Standardizes the split; no federated work yet. Task columns use the task
// party's training-row statistics, each data party its own rows.
inline PipelineState prepare_state(ScenarioSplit split) {
  PipelineState s;
  s.task_scaler = Standardizer::fit(split.task.features, split.train_rows);
  s.task_x = s.task_scaler.apply(split.task.features);
  for (const auto& dp : split.data_parties) {
    s.data_scalers.push_back(Standardizer::fit(dp.features));
    s.data_x.push_back(s.data_scalers.back().apply(dp.features));
  }
  s.split = std::move(split);
  return s;
}

// Steps 1-2 for data party k (already present in state.split).
inline void learn_from_party(PipelineState& s, std::size_t k, const ExperimentConfig& cfg,
                             std::uint64_t seed) {
  const auto& sp = s.split;
  const std::string name = sp.data_parties[k].party_id;
  detail::Stopwatch frl_clock;
  FedRepresentation fed = detail::in_phase("frl", [&] {
    Transcript t;
    Rng rng(derive_seed(seed, "frl", k));
    const Matrix ts = s.task_x.select_rows(sp.shared_task_rows[k]);
    const std::vector<Matrix> ds{s.data_x[k].select_rows(sp.shared_data_rows[k])};
    const std::vector<std::string> names{name};
    FedRepresentation rep = frl_run(ts, ds, cfg.frl, rng, t, sp.shared_ids[k], names);
    s.transcript.append(t);
    return rep;
  });
  s.times.frl += frl_clock.seconds();

  detail::Stopwatch lrd_clock;
  TrainedEncoder enc = detail::in_phase("lrd", [&] {
    DistillConfig dc = cfg.lrd;
    dc.seed = derive_seed(seed, "lrd", k);
    return train_distilled_encoder(s.task_x, sp.task.ids, fed, dc);
  });
  s.times.lrd += lrd_clock.seconds();

  s.fed.push_back(std::move(fed));
  s.encoders.push_back(std::move(enc.params));
  s.loss_curves.push_back(std::move(enc.loss_curve));
}

inline PipelineState train_pipeline(ScenarioSplit split, const ExperimentConfig& cfg, std::uint64_t seed) {
  PipelineState s = prepare_state(std::move(split));
  for (std::size_t k = 0; k < s.n_parties(); ++k) learn_from_party(s, k, cfg, seed);
  return s;
}

inline ScenarioSplit make_split(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  return detail::in_phase("partition", [&] { return partition_scenario(ds, cfg.split, seed); });
}

// Downstream training rows; in few-shot mode a stratified seeded subsample of
// the training partition (at least one row per class). Test rows untouched.
inline std::vector<std::size_t> downstream_train_rows(const PipelineState& s, const ExperimentConfig& cfg,
                                                      std::uint64_t seed) {
  if (cfg.scenario != Scenario::kFewShot) return s.split.train_rows;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t r : s.split.train_rows) by_class[s.labels()[r]].push_back(r);
  Rng rng(derive_seed(seed, "few_shot"));
  std::vector<std::size_t> out;
  for (auto& [c, rows] : by_class) {
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.few_shot_fraction * double(rows.size()))));
    auto p = permutation(rows.size(), rng);
    for (std::size_t i = 0; i < std::min(take, rows.size()); ++i) out.push_back(rows[p[i]]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Evaluation {
  double accuracy = 0.0;
  FittedModel model;
};

inline Evaluation fit_and_score(const Matrix& x, const Labels& y, std::span<const std::size_t> train,
                                std::span<const std::size_t> test, const ClassifierConfig& cc,
                                std::uint64_t seed) {
  return detail::in_phase("downstream", [&] {
    Labels ytr, yte;
    for (std::size_t r : train) ytr.push_back(y[r]);
    for (std::size_t r : test) yte.push_back(y[r]);
    Evaluation e;
    e.model = fit(x.select_rows(train), ytr, cc, derive_seed(seed, "downstream"));
    e.accuracy = accuracy(predict(e.model, x.select_rows(test)), yte);
    return e;
  });
}

inline Matrix enriched_features(const PipelineState& s) {
  return enrich(s.encoders, s.task_x, s.split.task.ids).matrix;
}

struct MethodResult {
  double accuracy = 0.0;
  PhaseTimes times;
  std::string transcript_digest;
  std::vector<std::string> encoder_digests;
  std::size_t width = 0;
};

inline MethodResult evaluate_vfedtrans(PipelineState& s, const ExperimentConfig& cfg, std::uint64_t seed,
                                       const Labels* labels = nullptr) {
  detail::Stopwatch clock;
  const Matrix x = enriched_features(s);
  const auto train = downstream_train_rows(s, cfg, seed);
  Evaluation e = fit_and_score(x, labels ? *labels : s.labels(), train, s.split.test_rows, cfg.classifier, seed);
  s.times.downstream += clock.seconds();
  return {e.accuracy, s.times, s.transcript.fingerprint(), s.encoder_digests(), x.cols()};
}

inline MethodResult evaluate_local(const PipelineState& s, const ExperimentConfig& cfg, std::uint64_t seed) {
  detail::Stopwatch clock;
  const auto train = downstream_train_rows(s, cfg, seed);
  Evaluation e = fit_and_score(s.task_x, s.labels(), train, s.split.test_rows, cfg.classifier, seed);
  MethodResult r;
  r.accuracy = e.accuracy;
  r.times.downstream = clock.seconds();
  r.width = s.task_x.cols();
  return r;
}

// Whole pipeline for one seed.
inline MethodResult run_pipeline(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  PipelineState s = train_pipeline(make_split(ds, cfg, seed), cfg, seed);
  return evaluate_vfedtrans(s, cfg, seed);
}

inline MethodResult run_local_baseline(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  return evaluate_local(prepare_state(make_split(ds, cfg, seed)), cfg, seed);
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string scenario;
  std::string axis;
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  double accuracy = 0.0;
  PhaseTimes times;
  std::string transcript_digest;
  std::string note;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

inline Summary summarize(std::span<const double> v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / double(v.size() - 1));
  }
  return s;
}

struct RunResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;

  std::vector<double> accuracies(const std::string& method, std::optional<double> axis_value = {}) const {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.method == method && (!axis_value || r.axis_value == *axis_value)) out.push_back(r.accuracy);
    }
    return out;
  }

  Summary summary(const std::string& method, std::optional<double> axis_value = {}) const {
    return summarize(accuracies(method, axis_value));
  }

  void append(const RunResult& o) {
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
  }

  // Long format; wall-clock figures go to write_timings_csv so this file is
  // byte-identical across reruns.
  void write_csv(const std::filesystem::path& path) const {
    csv::Table t{{"scenario", "axis", "axis_value", "seed", "method", "accuracy", "transcript_digest", "note"}, {}};
    for (const auto& r : rows) {
      t.rows.push_back({r.scenario, r.axis, csv::format_double(r.axis_value), std::to_string(r.seed), r.method,
                        csv::format_double(r.accuracy), r.transcript_digest, r.note});
    }
    csv::write_file(path, t);
  }

  void write_timings_csv(const std::filesystem::path& path) const {
    csv::Table t{{"scenario", "axis", "axis_value", "seed", "method", "time_frl", "time_lrd",
                  "time_downstream", "time_total"},
                 {}};
    for (const auto& r : rows) {
      t.rows.push_back({r.scenario, r.axis, csv::format_double(r.axis_value), std::to_string(r.seed), r.method,
                        csv::format_double(r.times.frl), csv::format_double(r.times.lrd),
                        csv::format_double(r.times.downstream), csv::format_double(r.times.total())});
    }
    csv::write_file(path, t);
  }

  nlohmann::json summary_json() const {
    std::set<std::pair<double, std::string>> keys;
    for (const auto& r : rows) keys.emplace(r.axis_value, r.method);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [v, m] : keys) {
      Summary s = summary(m, v);
      arr.push_back({{"axis_value", v}, {"method", m}, {"n", s.n}, {"mean", s.mean}, {"std", s.std}});
    }
    return arr;
  }
};

inline ResultRow make_row(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& method,
                          const MethodResult& m) {
  ResultRow r;
  r.scenario = scenario_name(cfg.scenario);
  r.seed = seed;
  r.method = method;
  r.accuracy = m.accuracy;
  r.times = m.times;
  r.transcript_digest = m.transcript_digest;
  return r;
}

// VFedTrans and LOCAL on the same split for one seed.
inline RunResult run_seed(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  RunResult out;
  PipelineState s = train_pipeline(make_split(ds, cfg, seed), cfg, seed);
  for (const auto& f : s.fed)
    for (const auto& w : f.warnings) out.warnings.push_back("seed " + std::to_string(seed) + ": " + w);
  out.rows.push_back(make_row(cfg, seed, "local", evaluate_local(s, cfg, seed)));
  out.rows.push_back(make_row(cfg, seed, "vfedtrans", evaluate_vfedtrans(s, cfg, seed)));
  if (cfg.scenario == Scenario::kDistillAblation) {
    ExperimentConfig plain = cfg;
    plain.lrd.theta = 0.0;
    PipelineState p = train_pipeline(make_split(ds, plain, seed), plain, seed);
    out.rows.push_back(make_row(cfg, seed, "vfedtrans_no_distill", evaluate_vfedtrans(p, plain, seed)));
  }
  return out;
}

// Runs `job(seed)` for every seed, optionally on worker threads. Results are
// merged in seed order, so output does not depend on the thread count.
inline RunResult run_seeds(const ExperimentConfig& cfg, const std::function<RunResult(std::uint64_t)>& job,
                           std::size_t parallel = 1) {
  const std::size_t n = cfg.seeds.size();
  std::vector<RunResult> parts(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        parts[i] = job(cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  RunResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.append(parts[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inductive evaluation

struct InductiveResult {
  double vfedtrans = 0.0;
  double local = 0.0;
  double vfedtrans_in_distribution = 0.0;
  double local_in_distribution = 0.0;
  std::size_t new_samples = 0;
};

// Trains on the scenario split, then scores the frozen encoders and frozen
// classifiers on held-out new samples.
inline InductiveResult inductive_eval(const Dataset& ds, const ExperimentConfig& cfg, InductiveMode mode,
                                      std::uint64_t seed) {
  InductiveSplit is = detail::in_phase(
      "partition", [&] { return inductive_split(ds, cfg.split, seed, mode, cfg.inductive_holdout); });
  PipelineState s = train_pipeline(std::move(is.split), cfg, seed);
  const Matrix fresh = s.task_scaler.apply(is.new_samples.features);
  const Labels& truth = *is.new_samples.labels;
  const auto train = downstream_train_rows(s, cfg, seed);

  InductiveResult r;
  r.new_samples = fresh.rows();
  Evaluation loc = fit_and_score(s.task_x, s.labels(), train, s.split.test_rows, cfg.classifier, seed);
  Evaluation fed = fit_and_score(enriched_features(s), s.labels(), train, s.split.test_rows, cfg.classifier, seed);
  r.local_in_distribution = loc.accuracy;
  r.vfedtrans_in_distribution = fed.accuracy;
  r.local = accuracy(predict(loc.model, fresh), truth);
  r.vfedtrans = accuracy(predict(fed.model, enrich(s.encoders, fresh).matrix), truth);
  return r;
}

// ---------------------------------------------------------------------------
// Updating scenarios

// A new data hospital joins: Steps 1-2 run with that party only and its
// encoder is appended; existing encoders are untouched.
inline void add_data_hospital(PipelineState& s, PartyView party, const ExperimentConfig& cfg,
                              std::uint64_t seed) {
  auto shared = psi_intersect(std::span<const std::string>(s.split.task.ids), std::span<const std::string>(party.ids));
  if (shared.empty()) throw DataError("add_data_hospital: " + party.party_id + " shares no samples with the task party");
  const auto ti = s.split.task.index();
  const auto di = party.index();
  std::vector<std::size_t> tr, dr;
  for (const auto& id : shared) {
    tr.push_back(ti.at(id));
    dr.push_back(di.at(id));
  }
  s.split.shared_ids.push_back(std::move(shared));
  s.split.shared_task_rows.push_back(std::move(tr));
  s.split.shared_data_rows.push_back(std::move(dr));
  s.data_scalers.push_back(Standardizer::fit(party.features));
  s.data_x.push_back(s.data_scalers.back().apply(party.features));
  s.split.data_parties.push_back(std::move(party));
  learn_from_party(s, s.n_parties() - 1, cfg, seed);
}

// Local incremental learning: new task-local rows arrive and every encoder is
// retrained from the federated representations the task party already holds.
// No message is sent to any other party.
inline void local_incremental_update(PipelineState& s, const PartyView& new_rows, const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  if (new_rows.cols() != s.split.task.cols()) throw ShapeError("local_incremental_update: width mismatch");
  if (!new_rows.labels) throw DataError("local_incremental_update: new rows carry no labels");
  auto& task = s.split.task;
  task.features = vstack(std::vector<Matrix>{task.features, new_rows.features});
  task.ids.insert(task.ids.end(), new_rows.ids.begin(), new_rows.ids.end());
  task.labels->insert(task.labels->end(), new_rows.labels->begin(), new_rows.labels->end());
  s.task_x = s.task_scaler.apply(task.features);
  for (std::size_t k = 0; k < s.encoders.size(); ++k) {
    DistillConfig dc = cfg.lrd;
    dc.seed = derive_seed(seed, "lrd", k);
    TrainedEncoder enc = train_distilled_encoder(s.task_x, task.ids, s.fed[k], dc);
    s.encoders[k] = std::move(enc.params);
    s.loss_curves[k] = std::move(enc.loss_curve);
  }
}

// ---------------------------------------------------------------------------
// Scenario dispatch

// One seed of cfg.scenario. Methods: local and vfedtrans everywhere, plus
// vfedtrans_no_distill (distill_ablation), vfedtrans_before_join
// (new_data_hospital) and *_in_distribution (inductive).
inline RunResult run_scenario_seed(const Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.scenario == Scenario::kInductiveIid || cfg.scenario == Scenario::kInductiveNonIid) {
    const auto mode = cfg.scenario == Scenario::kInductiveIid ? InductiveMode::kIid : InductiveMode::kNonIid;
    const InductiveResult ir = inductive_eval(ds, cfg, mode, seed);
    RunResult out;
    auto row = [&](const std::string& method, double acc) {
      MethodResult m;
      m.accuracy = acc;
      out.rows.push_back(make_row(cfg, seed, method, m));
    };
    row("local", ir.local);
    row("vfedtrans", ir.vfedtrans);
    row("local_in_distribution", ir.local_in_distribution);
    row("vfedtrans_in_distribution", ir.vfedtrans_in_distribution);
    return out;
  }
  if (cfg.scenario == Scenario::kNewDataHospital) {
    ScenarioSplit full = make_split(ds, cfg, seed);
    if (full.data_parties.size() < 2) {
      throw ConfigError("split.data_parties: new_data_hospital needs at least two data parties");
    }
    PartyView joining = full.data_parties.back();
    full.data_parties.pop_back();
    full.shared_ids.pop_back();
    full.shared_task_rows.pop_back();
    full.shared_data_rows.pop_back();
    PipelineState s = train_pipeline(std::move(full), cfg, seed);
    RunResult out;
    out.rows.push_back(make_row(cfg, seed, "local", evaluate_local(s, cfg, seed)));
    out.rows.push_back(make_row(cfg, seed, "vfedtrans_before_join", evaluate_vfedtrans(s, cfg, seed)));
    detail::in_phase("add_data_hospital", [&] {
      add_data_hospital(s, std::move(joining), cfg, seed);
      return 0;
    });
    out.rows.push_back(make_row(cfg, seed, "vfedtrans", evaluate_vfedtrans(s, cfg, seed)));
    return out;
  }
  return run_seed(ds, cfg, seed);
}

inline RunResult run_experiment(const Dataset& ds, const ExperimentConfig& cfg, std::size_t parallel = 1) {
  cfg.validate();
  return run_seeds(cfg, [&](std::uint64_t seed) { return run_scenario_seed(ds, cfg, seed); }, parallel);
}

// Private matrices as plain CSV files, one per matrix, for offline audits.
inline std::vector<std::filesystem::path> write_views(const PipelineState& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names{"task_raw", "task_standardized"};
  for (std::size_t k = 0; k < s.n_parties(); ++k) {
    const std::string p = s.split.data_parties[k].party_id;
    for (const char* tag : {"_raw", "_standardized", "_shared_task_slice", "_shared_slice"}) names.push_back(p + tag);
  }
  const auto mats = s.private_matrices();
  std::vector<std::filesystem::path> out;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    out.push_back(dir / (names[i] + ".csv"));
    csv::write_file(out.back(), csv::matrix_table(mats[i], {}));
  }
  return out;
}

// Reads every *.csv under dir as a matrix; columns named id or label and
// columns holding non-numeric cells are skipped.
inline std::vector<Matrix> read_views(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("views: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Matrix> out;
  for (const auto& f : files) {
    const csv::Table t = csv::read_file(f);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (t.header[j] == "id" || t.header[j] == "label") continue;
      bool numeric = true;
      for (const auto& r : t.rows) numeric = numeric && j < r.size() && csv::parse_double(r[j]).has_value();
      if (numeric) keep.push_back(j);
    }
    if (keep.empty() || t.rows.empty()) continue;
    Matrix m(t.rows.size(), keep.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      for (std::size_t j = 0; j < keep.size(); ++j) m(i, j) = *csv::parse_double(t.rows[i][keep[j]]);
    out.push_back(std::move(m));
  }
  if (out.empty()) throw DataError("views: no numeric CSV files in " + dir.string());
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps and timing

inline ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis, double value) {
  const auto v = static_cast<std::size_t>(std::llround(value));
  if (axis == "task_features") {
    cfg.split.task_features = v;
  } else if (axis == "data_features") {
    for (auto& p : cfg.split.data_parties) p.features = v;
  } else if (axis == "shared_samples") {
    for (auto& p : cfg.split.data_parties) p.shared = v;
  } else if (axis == "n_parties") {
    if (cfg.split.data_parties.empty()) throw ConfigError("sweep: n_parties needs a data party template");
    const DataPartySize tmpl = cfg.split.data_parties.front();
    if (cfg.split.multi_party) {
      cfg.split.multi_party->n_parties = v;
    } else {
      cfg.split.data_parties.assign(v, tmpl);
    }
  } else {
    throw ConfigError("experiment.sweep.axis: unknown axis '" + axis + "'");
  }
  return cfg;
}

inline RunResult sweep(const Dataset& ds, const ExperimentConfig& cfg, const std::string& axis,
                       std::span<const double> values, std::size_t parallel = 1) {
  RunResult out;
  for (double value : values) {
    ExperimentConfig c = apply_axis(cfg, axis, value);
    RunResult part;
    try {
      part = run_seeds(c, [&](std::uint64_t seed) { return run_seed(ds, c, seed); }, parallel);
    } catch (const PhaseError& e) {
      if (e.phase() != "partition") throw;
      ResultRow skip;
      skip.scenario = scenario_name(cfg.scenario);
      skip.method = "skipped";
      skip.note = e.what();
      part.rows.push_back(skip);
      part.warnings.push_back(axis + "=" + csv::format_double(value) + " skipped: " + e.what());
    }
    for (auto& r : part.rows) {
      r.axis = axis;
      r.axis_value = value;
    }
    out.append(part);
  }
  return out;
}

struct TimingRow {
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  PhaseTimes times;
};

inline std::vector<TimingRow> timing_report(const Dataset& ds, const ExperimentConfig& cfg, const std::string& axis,
                                            std::span<const double> values) {
  std::vector<TimingRow> out;
  for (double value : values) {
    ExperimentConfig c = apply_axis(cfg, axis, value);
    for (std::uint64_t seed : c.seeds) {
      PipelineState s = train_pipeline(make_split(ds, c, seed), c, seed);
      evaluate_vfedtrans(s, c, seed);
      out.push_back({axis, value, seed, s.times});
    }
  }
  return out;
}

inline void write_timing_csv(const std::filesystem::path& path, std::span<const TimingRow> rows) {
  csv::Table t{{"axis", "axis_value", "seed", "time_frl", "time_lrd", "time_downstream", "time_total"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.axis, csv::format_double(r.value), std::to_string(r.seed), csv::format_double(r.times.frl),
                      csv::format_double(r.times.lrd), csv::format_double(r.times.downstream),
                      csv::format_double(r.times.total())});
  }
  csv::write_file(path, t);
}

// Least-squares line y = a + b·x; returns {a, b, R^2}.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("linear_fit: need >= 2 paired points");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 && sxx > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t q = i; q <= j; ++q) r[idx[q]] = 0.5 * double(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

// ---------------------------------------------------------------------------
// Privacy audit

struct AuditViolation {
  std::size_t step = 0;
  std::string sender;
  std::string receiver;
  std::string kind;
  std::string reason;
};

struct AuditReport {
  std::size_t records = 0;
  std::vector<AuditViolation> violations;
  std::map<std::string, std::set<std::string>> edges;  // "sender->receiver" -> kinds

  bool ok() const { return violations.empty(); }

  std::set<std::string> kinds_touching(const std::string& role) const {
    std::set<std::string> out;
    for (const auto& [edge, kinds] : edges) {
      const auto arrow = edge.find("->");
      if (edge.substr(0, arrow) == role || edge.substr(arrow + 2) == role) out.insert(kinds.begin(), kinds.end());
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : violations) {
      v.push_back({{"step", x.step}, {"sender", x.sender}, {"receiver", x.receiver}, {"payload_kind", x.kind},
                   {"reason", x.reason}});
    }
    nlohmann::json e = nlohmann::json::object();
    for (const auto& [edge, kinds] : edges) e[edge] = kinds;
    return {{"version", 1}, {"records", records}, {"violation_count", violations.size()}, {"violations", v},
            {"edges", e}};
  }
};

// Flags every record that (a) carries the digest of a private matrix or of
// one of its columns, or (b) is not a protocol message for its edge:
// keygen->party masking_key, party->server masked_matrix | eigen_pair,
// server->party svd_result | aggregated_vector. One violation per record.
inline AuditReport audit_transcript(const Transcript& t, std::span<const Matrix> private_matrices) {
  std::set<std::string> whole, cols;
  for (const auto& m : private_matrices) {
    whole.insert(digest(m));
    for (auto& c : column_digests(m)) cols.insert(std::move(c));
  }
  AuditReport rep;
  rep.records = t.size();
  for (const auto& r : t.records()) {
    const std::string kind = payload_kind_name(r.kind);
    rep.edges[r.sender + "->" + r.receiver].insert(kind);
    std::vector<std::string> reasons;
    if (whole.count(r.digest)) reasons.push_back("payload equals a private matrix");
    std::size_t leaked = 0;
    for (const auto& c : r.column_digests) leaked += cols.count(c);
    if (leaked) reasons.push_back(std::to_string(leaked) + " payload column(s) equal private columns");

    const bool from_keygen = r.sender == kKeygenRole, to_server = r.receiver == kServerRole,
               from_server = r.sender == kServerRole;
    bool allowed = false;
    if (from_keygen && !to_server) allowed = r.kind == PayloadKind::kMaskingKey;
    else if (to_server && !from_keygen && !from_server)
      allowed = r.kind == PayloadKind::kMaskedMatrix || r.kind == PayloadKind::kEigenPair;
    else if (from_server && r.receiver != kKeygenRole)
      allowed = r.kind == PayloadKind::kSvdResult || r.kind == PayloadKind::kAggregatedVector;
    if (!allowed) reasons.push_back("payload kind " + kind + " is not a protocol message on this edge");

    if (!reasons.empty()) {
      std::string joined;
      for (const auto& x : reasons) joined += (joined.empty() ? "" : "; ") + x;
      rep.violations.push_back({r.step, r.sender, r.receiver, kind, joined});
    }
  }
  return rep;
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_ORCHESTRATOR_HPP_
