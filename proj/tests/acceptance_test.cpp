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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any of them fails. `--only N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vfedtrans/orchestrator.hpp"

namespace vfedtrans {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Dataset load(const ExperimentConfig& c) { return load_dataset(c.dataset, VFEDTRANS_DATA_DIR); }

// 1 ------------------------------------------------------------------------

Outcome fedsvd_correctness() {
  const auto t0 = Clock::now();
  Rng rng(20260101);
  double worst_sigma = 0.0, worst_proj = 0.0;
  int checked_proj = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng() % 281;  // 20..300
    const std::size_t n_data = 1 + rng() % 3;
    std::size_t budget = 40;
    const std::size_t xt = 2 + rng() % 9;
    budget -= xt;
    std::vector<Matrix> data;
    for (std::size_t k = 0; k < n_data; ++k) {
      const std::size_t left = n_data - k - 1;
      const std::size_t cap = std::min<std::size_t>(12, budget - left);
      const std::size_t xd = 1 + rng() % cap;
      budget -= xd;
      data.push_back(Matrix::gaussian(n, xd, rng));
    }
    Matrix task = Matrix::gaussian(n, xt, rng);
    FrlConfig cfg;
    Transcript t;
    FedRepresentation rep = fedsvd_run(task, data, cfg, rng, t);

    std::vector<Matrix> parts{task};
    parts.insert(parts.end(), data.begin(), data.end());
    const Matrix joint = hstack(parts);
    const std::vector<double> ref = oracle::singular_values(joint);
    if (rep.server_singular_values.size() < ref.size()) {
      return {false, "trial " + std::to_string(trial) + ": server reported too few singular values"};
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst_sigma = std::max(worst_sigma, std::abs(rep.server_singular_values[i] - ref[i]) / ref[0]);
    }
    const std::size_t r = rep.rank;
    if (r < ref.size() && ref[r - 1] - ref[r] > 1e-8) {
      const double d = oracle::projector_distance(oracle::projector(oracle::to_eigen(rep.matrix)),
                                                  oracle::projector(oracle::left_subspace(joint, r)));
      worst_proj = std::max(worst_proj, d);
      ++checked_proj;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_sigma <= 1e-10 && worst_proj < 1e-6 && secs < 30.0;
  return {pass, "max rel sigma err " + fmt("%.2e", worst_sigma) + ", max projector err " + fmt("%.2e", worst_proj) +
                    " over " + std::to_string(checked_proj) + " gapped scenarios, " + fmt("%.1f s", secs)};
}

// 2 ------------------------------------------------------------------------

ExperimentConfig audit_config() {
  ExperimentConfig c;
  c.dataset.source = "synthetic_transfer";
  c.dataset.transfer.n_samples = 400;
  c.dataset.transfer.task_features = 5;
  c.dataset.transfer.data_features = 8;
  c.split.task_samples = 150;
  c.split.task_features = 5;
  c.split.data_parties = {{200, 4, 80}, {180, 4, 60}};
  c.lrd.epochs = 5;
  c.classifier.rf.n_estimators = 5;
  return c;
}

Outcome audit_privacy() {
  std::size_t honest_runs = 0, honest_violations = 0;
  for (auto method : {FrlMethod::kFedSvd, FrlMethod::kVFedPca}) {
    ExperimentConfig c = audit_config();
    c.frl.method = method;
    c.frl.vfedpca.period_num = 3;
    Dataset ds = load(c);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      PipelineState s = train_pipeline(make_split(ds, c, seed), c, seed);
      honest_violations += audit_transcript(s.transcript, s.private_matrices()).violations.size();
      ++honest_runs;
    }
  }

  // Leaky double: three injected leaks of different shapes.
  ExperimentConfig c = audit_config();
  Dataset ds = load(c);
  PipelineState s = train_pipeline(make_split(ds, c, 7), c, 7);
  Transcript leaky = s.transcript;
  std::set<std::size_t> injected;
  injected.insert(leaky.size());
  leaky.send({kTaskRole, kServerRole, PayloadKind::kRawMatrix,
              s.task_x.select_rows(s.split.shared_task_rows[0]), 0.0});
  injected.insert(leaky.size());
  const std::vector<std::size_t> col{1};
  Matrix smuggled = hstack(std::vector<Matrix>{
      s.data_x[1].select_rows(s.split.shared_data_rows[1]).select_cols(col),
      Matrix(s.split.shared_ids[1].size(), 2, 0.5)});
  leaky.send({"data1", kServerRole, PayloadKind::kMaskedMatrix, smuggled, 0.0});
  // An honest-looking message in between must stay clean.
  leaky.send({kKeygenRole, kTaskRole, PayloadKind::kMaskingKey, Matrix(4, 4, 0.125), 0.0});
  injected.insert(leaky.size());
  leaky.send({kServerRole, "data0", PayloadKind::kRawMatrix, Matrix(2, 2, 3.0), 0.0});

  AuditReport rep = audit_transcript(leaky, s.private_matrices());
  std::set<std::size_t> flagged;
  for (const auto& v : rep.violations) flagged.insert(v.step);
  const bool exact = flagged == injected && rep.violations.size() == injected.size();
  return {honest_violations == 0 && exact,
          std::to_string(honest_violations) + " violations over " + std::to_string(honest_runs) +
              " honest runs; leaky double flagged " + std::to_string(rep.violations.size()) + " of " +
              std::to_string(injected.size()) + " injected" + (exact ? " at the injected steps" : " (mismatch)")};
}

// 3 ------------------------------------------------------------------------

// S = Q·diag(sig)·Wᵀ with orthonormal Q, W.
Matrix with_spectrum(std::size_t n, const std::vector<double>& sig, Rng& rng) {
  const std::size_t m = sig.size();
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::to_eigen(Matrix::gaussian(n, m, rng)))
                          .householderQ() *
                      Eigen::MatrixXd::Identity(n, m);
  Eigen::MatrixXd w = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::to_eigen(Matrix::gaussian(m, m, rng)))
                          .householderQ();
  Eigen::VectorXd d(m);
  for (std::size_t i = 0; i < m; ++i) d(i) = sig[i];
  return oracle::from_eigen(q * d.asDiagonal() * w.transpose());
}

Outcome vfedpca_properties() {
  Rng rng(33);
  double worst_w = 0.0, worst_recon = 0.0, worst_eig = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng() % 200;
    std::vector<EigenPair> pairs;
    const std::size_t parties = 2 + rng() % 6;
    for (std::size_t k = 0; k < parties; ++k) {
      EigenPair p;
      p.vector = Matrix::gaussian(n, 1, rng).data();
      const double nv = norm2(p.vector);
      for (double& v : p.vector) v /= nv;
      p.value = std::exp(gaussian(rng) * 3.0);
      pairs.push_back(std::move(p));
    }
    const Aggregation agg = vfedpca_aggregate(pairs);
    double sum = 0.0;
    for (double w : agg.weights) sum += w;
    worst_w = std::max(worst_w, std::abs(sum - 1.0) / static_cast<double>(n));

    // Single party: rank-1 PCA reconstruction.
    const Matrix s = Matrix::gaussian(n, 3 + rng() % 6, rng);
    std::vector<EigenPair> one{vfedpca_local(s, 1000)};
    const FedRepresentation rep = vfedpca_reconstruct(s, vfedpca_aggregate(one).u);
    Eigen::BDCSVD<Eigen::MatrixXd> ref(oracle::to_eigen(s), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd rank1 = ref.singularValues()(0) * ref.matrixU().col(0) * ref.matrixV().col(0).transpose();
    worst_recon = std::max(worst_recon, (oracle::to_eigen(rep.matrix) - rank1).cwiseAbs().maxCoeff());

    // Well-separated spectrum: sigma_1 / sigma_2 = 2.
    std::vector<double> sig{4.0, 2.0, 1.5, 1.0, 0.5};
    const Matrix sep = with_spectrum(n + 5, sig, rng);
    const EigenPair local = vfedpca_local(sep, 100);
    Matrix gram = matmul(sep, sep.transpose()) * (1.0 / static_cast<double>(sep.cols()));
    const double lam = oracle::largest_eigenvalue(gram);
    worst_eig = std::max(worst_eig, std::abs(local.value - lam));
  }
  const bool pass = worst_w <= 1e-15 && worst_recon <= 1e-10 && worst_eig <= 1e-6;
  return {pass, "weight-sum err/n " + fmt("%.1e", worst_w) + ", rank-1 recon err " + fmt("%.1e", worst_recon) +
                    ", eigenvalue err " + fmt("%.1e", worst_eig)};
}

// 4 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  Rng rng(44);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t in = 3 + rng() % 10;
    const std::size_t r = 1 + rng() % in;
    const std::size_t rows = 4 + rng() % 12;
    Rng prng(1000 + draw);
    EncoderParams p = EncoderParams::init(in, r, 6, nn::Activation::kSigmoid, prng);
    Matrix x = Matrix::gaussian(rows, in, rng);
    Matrix fed = Matrix::gaussian(rows, r, rng);
    std::vector<char> mask(rows);
    for (auto& m : mask) m = static_cast<char>(rng() % 2);
    const double theta = std::exp(gaussian(rng));
    const Vector analytic = lrd_gradient(p, x, fed, mask, theta).flat();
    const Vector numeric = gradcheck::central_difference(p.flat(), 1e-5, [&](const Vector& v) {
      EncoderParams q = p;
      q.set_flat(v);
      return lrd_batch_loss(q, x, fed, mask, theta).total;
    });
    worst = std::max(worst, gradcheck::max_relative_error(analytic, numeric));
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 20 draws"};
}

// 5 ------------------------------------------------------------------------

// Task features are label-blind noise-heavy views; the data party's view of
// the shared patients carries the class signal.
ExperimentConfig transfer_config() {
  ExperimentConfig c;
  c.name = "transfer";
  c.dataset.source = "synthetic_transfer";
  c.dataset.transfer.n_samples = 2000;
  c.dataset.transfer.task_features = 10;
  c.dataset.transfer.data_features = 20;
  c.split.task_samples = 600;
  c.split.task_features = 10;
  c.split.data_parties = {{800, 20, 400}};
  c.seeds = default_seeds(10);
  return c;
}

Outcome distillation_ablation() {
  const auto t0 = Clock::now();
  ExperimentConfig c = transfer_config();
  c.scenario = Scenario::kDistillAblation;
  c.lrd.theta = 0.001;
  Dataset ds = load(c);
  RunResult r = run_experiment(ds, c, 4);
  const double with = mean(r.accuracies("vfedtrans"));
  const double without = mean(r.accuracies("vfedtrans_no_distill"));
  const double secs = seconds_since(t0);
  return {with - without >= 0.03 && secs < 600.0,
          "theta=0.001 " + fmt("%.4f", with) + " vs theta=0 " + fmt("%.4f", without) + ", gap " +
              fmt("%+.4f", with - without) + " (need >= 0.03), " + fmt("%.0f s", secs)};
}

// 6 ------------------------------------------------------------------------

Outcome breast_end_to_end() {
  const auto t0 = Clock::now();
  ExperimentConfig c;  // Breast, reference split, all defaults
  c.seeds = default_seeds(10);
  Dataset ds = load(c);
  RunResult r = run_experiment(ds, c, 4);
  const double vft = mean(r.accuracies("vfedtrans"));
  const double loc = mean(r.accuracies("local"));
  const double secs = seconds_since(t0);
  const bool gap = vft - loc > 0.0;
  const bool band = std::abs(vft - 0.9253) <= 0.05 && std::abs(loc - 0.9100) <= 0.05;
  return {gap && band && secs < 900.0,
          "VFedTrans " + fmt("%.4f", vft) + ", LOCAL " + fmt("%.4f", loc) + ", gap " + fmt("%+.4f", vft - loc) +
              (gap ? "" : " (not > 0)") + (band ? ", both in band" : ", outside band") + ", " + fmt("%.0f s", secs)};
}

// 7 ------------------------------------------------------------------------

Outcome shared_sample_trend() {
  ExperimentConfig c;
  c.seeds = default_seeds(10);
  Dataset ds = load(c);
  const std::vector<double> values{150, 200, 250, 300};
  RunResult r = sweep(ds, c, "shared_samples", values, 4);
  std::vector<double> means;
  std::string detail;
  for (double v : values) {
    means.push_back(mean(r.accuracies("vfedtrans", v)));
    detail += fmt("%.0f:", v) + fmt("%.4f ", means.back());
  }
  const double rho = spearman(values, means);
  return {rho > 0.0, "Breast I_s " + detail + "-> spearman " + fmt("%.3f", rho)};
}

// 8 ------------------------------------------------------------------------

Outcome scalability_trend() {
  ExperimentConfig c;
  c.dataset.source = "synthetic_transfer";
  c.dataset.transfer.n_samples = 2000;
  c.dataset.transfer.task_features = 10;
  c.dataset.transfer.data_features = 20;
  c.split.task_samples = 600;
  c.split.task_features = 10;
  c.split.data_parties = {{800, 20, 400}};
  c.lrd.epochs = 100;
  c.seeds = {0, 1, 2};
  Dataset ds = load(c);
  const std::vector<double> values{1, 2, 3, 4};
  const auto rows = timing_report(ds, c, "n_parties", values);
  std::vector<double> totals;
  std::string detail;
  for (double v : values) {
    std::vector<double> t;
    for (const auto& row : rows) {
      if (row.value == v) t.push_back(row.times.total());
    }
    totals.push_back(mean(t));
    detail += fmt("%.0f:", v) + fmt("%.2fs ", totals.back());
  }
  const LinearFit fit = linear_fit(values, totals);
  return {fit.r2 > 0.9, detail + "-> R^2 " + fmt("%.4f", fit.r2)};
}

// 9 ------------------------------------------------------------------------

Outcome updating_contracts() {
  ExperimentConfig c = audit_config();
  c.lrd.epochs = 20;
  Dataset ds = load(c);
  std::vector<std::string> failures;

  // New task on the same rows.
  {
    PipelineState s = train_pipeline(make_split(ds, c, 0), c, 0);
    const auto digests = s.encoder_digests();
    const std::size_t msgs = s.transcript.size();
    Labels other(s.split.task.rows());
    for (std::size_t i = 0; i < other.size(); ++i) other[i] = s.split.task.features(i, 1) > 0.0 ? 1 : 0;
    evaluate_vfedtrans(s, c, 0, &other);
    if (s.encoder_digests() != digests || s.transcript.size() != msgs) failures.push_back("new task");
  }
  // Local incremental update.
  {
    PipelineState s = train_pipeline(make_split(ds, c, 1), c, 1);
    const std::size_t before = s.transcript.size();
    std::set<std::string> held(s.split.task.ids.begin(), s.split.task.ids.end());
    for (const auto& dp : s.split.data_parties) held.insert(dp.ids.begin(), dp.ids.end());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < ds.rows() && fresh.size() < 25; ++i) {
      if (!held.count(ds.ids[i])) fresh.push_back(i);
    }
    Dataset sub = ds.subset(fresh);
    PartyView add;
    add.party_id = kTaskRole;
    add.role = Role::kTask;
    add.features = sub.features.select_cols(s.split.task.feature_columns);
    add.ids = sub.ids;
    add.labels = sub.labels;
    local_incremental_update(s, add, c, 1);
    if (s.transcript.size() != before || fresh.size() != 25) failures.push_back("local incremental");
  }
  // Late-joining data hospital.
  {
    const ScenarioSplit full = make_split(ds, c, 2);
    PipelineState scratch = train_pipeline(full, c, 2);
    ScenarioSplit partial = full;
    partial.data_parties.pop_back();
    partial.shared_ids.pop_back();
    partial.shared_task_rows.pop_back();
    partial.shared_data_rows.pop_back();
    PipelineState grown = train_pipeline(partial, c, 2);
    add_data_hospital(grown, full.data_parties.back(), c, 2);
    if (grown.encoder_digests() != scratch.encoder_digests() ||
        grown.transcript.fingerprint() != scratch.transcript.fingerprint() ||
        evaluate_vfedtrans(grown, c, 2).accuracy != evaluate_vfedtrans(scratch, c, 2).accuracy) {
      failures.push_back("add_data_hospital");
    }
  }
  std::string detail = failures.empty() ? "new task, local incremental and add_data_hospital hold" : "broken:";
  for (const auto& f : failures) detail += " " + f;
  return {failures.empty(), detail};
}

// 10 -----------------------------------------------------------------------

Outcome noniid_inductive() {
  ExperimentConfig c = transfer_config();
  c.dataset.transfer.n_classes = 4;
  c.split.data_parties = {{700, 20, 300}};
  Dataset ds = load(c);
  std::vector<double> iid_v, iid_l, non_v, non_l;
  for (std::uint64_t seed : c.seeds) {
    const InductiveResult a = inductive_eval(ds, c, InductiveMode::kIid, seed);
    const InductiveResult b = inductive_eval(ds, c, InductiveMode::kNonIid, seed);
    iid_v.push_back(a.vfedtrans);
    iid_l.push_back(a.local);
    non_v.push_back(b.vfedtrans);
    non_l.push_back(b.local);
  }
  const double iv = mean(iid_v), il = mean(iid_l), nv = mean(non_v), nl = mean(non_l);
  const bool order = nv <= iv && nl <= il;
  const bool gap = iv - il >= 0.0 && nv - nl >= 0.0;
  return {order && gap, "IID VFedTrans " + fmt("%.4f", iv) + " LOCAL " + fmt("%.4f", il) + "; non-IID VFedTrans " +
                            fmt("%.4f", nv) + " LOCAL " + fmt("%.4f", nl)};
}

}  // namespace
}  // namespace vfedtrans

int main(int argc, char** argv) {
  using namespace vfedtrans;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"fedsvd correctness", fedsvd_correctness},
      {"masking privacy audit", audit_privacy},
      {"vfedpca properties", vfedpca_properties},
      {"lrd gradient correctness", gradient_correctness},
      {"distillation ablation", distillation_ablation},
      {"breast end-to-end", breast_end_to_end},
      {"shared-sample sweep trend", shared_sample_trend},
      {"scalability trend", scalability_trend},
      {"updating contracts", updating_contracts},
      {"non-iid inductive", noniid_inductive},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
