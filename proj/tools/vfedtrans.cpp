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

// vfedtrans: command-line driver.
//
// Exit codes: 0 success, 1 config or usage error, 2 runtime failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfedtrans/config.hpp"
#include "vfedtrans/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr const char* kOutEnv = "VFEDTRANS_OUT";
constexpr const char* kDataEnv = "VFEDTRANS_DATA_DIR";

int g_verbosity = 1;

void log(int level, const std::string& msg) {
  if (level <= g_verbosity) std::cerr << msg << '\n';
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

fs::path data_dir() {
  if (const char* d = std::getenv(kDataEnv)) return d;
#ifdef VFEDTRANS_DEFAULT_DATA_DIR
  return VFEDTRANS_DEFAULT_DATA_DIR;
#else
  return "data";
#endif
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::size_t> n_seeds;
  std::optional<std::uint64_t> seed;
  std::size_t parallel = 1;
  // sweep
  std::string axis;
  std::vector<double> values;
  // inductive
  std::string mode = "both";
  // audit
  std::string transcript;
  std::string views;
  // report
  std::string results;
};

// Split feasibility is part of config validation: checked on the first seed
// before any computation.
void preflight(const vfedtrans::Dataset& ds, const vfedtrans::ExperimentConfig& c) {
  try {
    if (c.scenario == vfedtrans::Scenario::kInductiveIid || c.scenario == vfedtrans::Scenario::kInductiveNonIid) {
      const auto mode = c.scenario == vfedtrans::Scenario::kInductiveIid ? vfedtrans::InductiveMode::kIid
                                                                          : vfedtrans::InductiveMode::kNonIid;
      vfedtrans::inductive_split(ds, c.split, c.seeds.front(), mode, c.inductive_holdout);
    } else {
      vfedtrans::partition_scenario(ds, c.split, c.seeds.front());
    }
  } catch (const vfedtrans::DataError& e) {
    throw vfedtrans::ConfigError(std::string("split: ") + e.what());
  }
}

fs::path out_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* d = std::getenv(kOutEnv)) return d;
  return "vfedtrans_out";
}

vfedtrans::ExperimentConfig load(const Options& o) {
  vfedtrans::ExperimentConfig c =
      o.config.empty() ? vfedtrans::config_from_json(json::object()) : vfedtrans::load_config(o.config);
  if (o.n_seeds) {
    if (*o.n_seeds < 1) throw vfedtrans::ConfigError("--seeds must be >= 1");
    c.seeds = vfedtrans::default_seeds(*o.n_seeds);
  }
  if (o.seed) c.seeds = {*o.seed};
  c.validate();
  return c;
}

class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : dir_(std::move(dir)), started_(utc_now()) {
    j_ = {{"tool", "vfedtrans"}, {"version", kVersion}, {"command", std::move(command)}};
    j_["artifacts"] = json::array();
    clock_ = std::chrono::steady_clock::now();
  }
  void config(const vfedtrans::ExperimentConfig& c) {
    j_["config_digest"] = vfedtrans::config_digest(c);
    j_["config"] = vfedtrans::config_to_json(c);
    j_["seeds"] = c.seeds;
  }
  void artifact(const fs::path& p) { j_["artifacts"].push_back(fs::relative(p, dir_).generic_string()); }
  json& extra() { return j_; }
  void write() {
    j_["timestamps"] = {
        {"started", started_},
        {"finished", utc_now()},
        {"elapsed_seconds",
         std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count()}};
    std::ofstream(dir_ / "manifest.json") << j_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::string started_;
  std::chrono::steady_clock::time_point clock_;
  json j_;
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw vfedtrans::DataError("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

void print_summary(const vfedtrans::RunResult& r) {
  const bool swept = !r.rows.empty() && !r.rows.front().axis.empty();
  for (const auto& s : r.summary_json()) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << s["method"].get<std::string>();
    if (swept) os << " @ " << s["axis_value"].get<double>();
    os << ": " << s["mean"].get<double>() << " +- " << s["std"].get<double>() << " (n=" << s["n"] << ")";
    std::cout << os.str() << '\n';
  }
  for (const auto& w : r.warnings) log(1, "warning: " + w);
}

void write_results(const vfedtrans::RunResult& r, const fs::path& dir, Manifest& m) {
  r.write_csv(dir / "results.csv");
  m.artifact(dir / "results.csv");
  r.write_timings_csv(dir / "timings.csv");
  m.artifact(dir / "timings.csv");
  write_json(dir / "summary.json", {{"summary", r.summary_json()}, {"warnings", r.warnings}});
  m.artifact(dir / "summary.json");
}

// Trains seed `seed` once more to export the protocol transcript, its audit,
// the private views and the encoders.
void export_artifacts(const vfedtrans::Dataset& ds, const vfedtrans::ExperimentConfig& c, std::uint64_t seed,
                      const fs::path& dir, Manifest& m) {
  using namespace vfedtrans;
  PipelineState s = train_pipeline(make_split(ds, c, seed), c, seed);
  write_json(dir / "transcript.json", s.transcript.to_json());
  m.artifact(dir / "transcript.json");
  const AuditReport rep = audit_transcript(s.transcript, s.private_matrices());
  write_json(dir / "audit.json", rep.to_json());
  m.artifact(dir / "audit.json");
  for (const auto& p : write_views(s, dir / "views")) m.artifact(p);
  fs::create_directories(dir / "encoders");
  for (std::size_t k = 0; k < s.encoders.size(); ++k) {
    const fs::path e = dir / "encoders" / ("encoder_" + s.split.data_parties[k].party_id + ".json");
    write_json(e, s.encoders[k].to_json());
    m.artifact(e);
    const fs::path l = dir / "encoders" / ("loss_" + s.split.data_parties[k].party_id + ".csv");
    TrainedEncoder{s.encoders[k], s.loss_curves[k]}.write_loss_curve(l);
    m.artifact(l);
  }
  m.extra()["artifact_seed"] = seed;
  m.extra()["audit_violations"] = rep.violations.size();
  if (!rep.ok()) log(0, "warning: audit found " + std::to_string(rep.violations.size()) + " violation(s)");
}

int cmd_generate(const Options& o) {
  using namespace vfedtrans;
  const auto c = load(o);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  Manifest m("generate", dir);
  m.config(c);
  const Dataset ds = load_dataset(c.dataset, data_dir());
  preflight(ds, c);
  save_csv(dir / "dataset.csv", ds);
  m.artifact(dir / "dataset.csv");
  for (std::uint64_t seed : c.seeds) {
    const fs::path sd = dir / ("split_seed" + std::to_string(seed));
    export_split(detail::in_phase("partition", [&] { return partition_scenario(ds, c.split, seed); }), sd);
    for (const auto& e : fs::directory_iterator(sd)) m.artifact(e.path());
  }
  m.write();
  log(1, "wrote " + std::to_string(ds.rows()) + " rows and " + std::to_string(c.seeds.size()) + " split(s) to " +
             dir.string());
  return 0;
}

int cmd_run(const Options& o) {
  using namespace vfedtrans;
  const auto c = load(o);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  Manifest m("run", dir);
  m.config(c);
  const Dataset ds = load_dataset(c.dataset, data_dir());
  preflight(ds, c);
  log(1, "scenario " + std::string(scenario_name(c.scenario)) + ", " + std::to_string(c.seeds.size()) + " seed(s)");
  RunResult r = run_experiment(ds, c, o.parallel);
  write_results(r, dir, m);
  if (c.scenario != Scenario::kInductiveIid && c.scenario != Scenario::kInductiveNonIid) {
    export_artifacts(ds, c, c.seeds.front(), dir, m);
  }
  m.write();
  print_summary(r);
  return 0;
}

int cmd_sweep(const Options& o) {
  using namespace vfedtrans;
  auto c = load(o);
  if (!o.axis.empty()) c.sweep_axis = o.axis;
  if (!o.values.empty()) c.sweep_values = o.values;
  if (c.sweep_axis.empty() || c.sweep_values.empty()) {
    throw ConfigError("experiment.sweep: an axis and values are required (config or --axis/--values)");
  }
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  Manifest m("sweep", dir);
  m.config(c);
  const Dataset ds = load_dataset(c.dataset, data_dir());
  RunResult r = sweep(ds, c, c.sweep_axis, c.sweep_values, o.parallel);
  write_results(r, dir, m);
  std::vector<double> xs, ys;
  for (double v : c.sweep_values) {
    const auto acc = r.accuracies("vfedtrans", v);
    if (acc.empty()) continue;
    xs.push_back(v);
    ys.push_back(summarize(acc).mean);
  }
  if (xs.size() >= 2) m.extra()["spearman_vfedtrans"] = spearman(xs, ys);
  m.write();
  print_summary(r);
  return 0;
}

int cmd_inductive(const Options& o) {
  using namespace vfedtrans;
  auto c = load(o);
  std::vector<Scenario> modes;
  if (o.mode == "iid" || o.mode == "both") modes.push_back(Scenario::kInductiveIid);
  if (o.mode == "noniid" || o.mode == "both") modes.push_back(Scenario::kInductiveNonIid);
  if (modes.empty()) throw ConfigError("--mode must be iid, noniid or both");
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  Manifest m("inductive", dir);
  m.config(c);
  const Dataset ds = load_dataset(c.dataset, data_dir());
  RunResult all;
  for (Scenario s : modes) {
    c.scenario = s;
    preflight(ds, c);
    all.append(run_experiment(ds, c, o.parallel));
  }
  write_results(all, dir, m);
  m.write();
  for (Scenario s : modes) {
    RunResult part;
    for (const auto& row : all.rows)
      if (row.scenario == scenario_name(s)) part.rows.push_back(row);
    std::cout << scenario_name(s) << '\n';
    print_summary(part);
  }
  return 0;
}

int cmd_audit(const Options& o) {
  using namespace vfedtrans;
  if (o.transcript.empty() || o.views.empty()) throw ConfigError("audit needs --transcript and --views");
  std::ifstream in(o.transcript);
  if (!in) throw ConfigError("cannot open transcript " + o.transcript);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(o.transcript + ": " + e.what());
  }
  const Transcript t = Transcript::from_json(j);
  const auto views = read_views(o.views);
  const AuditReport rep = audit_transcript(t, views);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  write_json(dir / "audit.json", rep.to_json());
  std::cout << rep.records << " record(s), " << views.size() << " private view(s), " << rep.violations.size()
            << " violation(s)\n";
  for (const auto& v : rep.violations) {
    std::cout << "  step " << v.step << " " << v.sender << "->" << v.receiver << " [" << v.kind << "]: " << v.reason
              << '\n';
  }
  return 0;
}

int cmd_report(const Options& o) {
  using namespace vfedtrans;
  const fs::path src = o.results.empty() ? out_dir(o) / "results.csv" : fs::path(o.results);
  const csv::Table t = csv::read_file(src);
  auto col = [&](const std::string& name) {
    for (std::size_t j = 0; j < t.header.size(); ++j)
      if (t.header[j] == name) return j;
    throw DataError(src.string() + ": missing column " + name);
  };
  const std::size_t sc = col("scenario"), ax = col("axis"), av = col("axis_value"), me = col("method"),
                    ac = col("accuracy");
  std::map<std::tuple<std::string, std::string, double, std::string>, std::vector<double>> groups;
  for (const auto& r : t.rows) {
    if (r[me] == "skipped") continue;
    groups[{r[sc], r[ax], *csv::parse_double(r[av]), r[me]}].push_back(*csv::parse_double(r[ac]));
  }
  csv::Table out{{"scenario", "axis", "axis_value", "method", "n", "mean", "std"}, {}};
  for (const auto& [k, v] : groups) {
    const Summary s = summarize(v);
    out.rows.push_back({std::get<0>(k), std::get<1>(k), csv::format_double(std::get<2>(k)), std::get<3>(k),
                        std::to_string(s.n), csv::format_double(s.mean), csv::format_double(s.std)});
    std::cout << std::fixed << std::setprecision(4) << std::get<0>(k) << " ";
    if (!std::get<1>(k).empty()) std::cout << std::get<1>(k) << "=" << std::get<2>(k) << " ";
    std::cout << std::get<3>(k) << ": " << s.mean << " +- " << s.std << " (n=" << s.n << ")\n";
  }
  const fs::path dst = src.parent_path() / "report.csv";
  csv::write_file(dst, out);
  log(1, "wrote " + dst.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vfedtrans: vertical federated knowledge transfer simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(std::string("Environment:\n  ") + kOutEnv + "       default output directory\n  " + kDataEnv +
             "  directory holding breast.csv and relative dataset paths\n"
             "Exit codes: 0 success, 1 config or usage error, 2 runtime failure");
  Options o;
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Only errors on stderr");

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "Experiment config JSON (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, std::string("Output directory (default: $") + kOutEnv + " or ./vfedtrans_out)");
    sub->add_option("--seeds", o.n_seeds, "Run seeds 0..N-1 instead of the configured list");
    sub->add_option("--seed", o.seed, "Run this single seed");
    sub->add_option("--parallel-seeds", o.parallel, "Worker threads across seeds (default 1)")
        ->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("generate", "Write the dataset and per-seed party splits as CSV");
  common(gen);
  auto* run = app.add_subcommand("run", "Run the configured scenario (VFedTrans and LOCAL) over all seeds");
  common(run);
  auto* swp = app.add_subcommand("sweep", "Sweep one split axis; long-format results");
  common(swp);
  swp->add_option("--axis", o.axis, "task_features | data_features | shared_samples | n_parties")
      ->check(CLI::IsMember({"task_features", "data_features", "shared_samples", "n_parties"}));
  swp->add_option("--values", o.values, "Axis values");
  auto* ind = app.add_subcommand("inductive", "Score frozen pipelines on held-out new samples");
  common(ind);
  ind->add_option("--mode", o.mode, "iid | noniid | both")->check(CLI::IsMember({"iid", "noniid", "both"}));
  auto* aud = app.add_subcommand("audit", "Check a transcript against private views");
  aud->add_option("--transcript", o.transcript, "Transcript JSON")->required()->check(CLI::ExistingFile);
  aud->add_option("--views", o.views, "Directory of private matrices as CSV")->required()->check(CLI::ExistingDirectory);
  aud->add_option("-o,--out", o.out, "Output directory for audit.json");
  auto* rep = app.add_subcommand("report", "Summarize a results CSV as mean +- std");
  rep->add_option("--results", o.results, "results.csv (default: <out>/results.csv)");
  rep->add_option("-o,--out", o.out, "Directory holding results.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  g_verbosity = quiet ? 0 : 1 + verbose;

  try {
    if (*gen) return cmd_generate(o);
    if (*run) return cmd_run(o);
    if (*swp) return cmd_sweep(o);
    if (*ind) return cmd_inductive(o);
    if (*aud) return cmd_audit(o);
    if (*rep) return cmd_report(o);
  } catch (const vfedtrans::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const vfedtrans::PhaseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
