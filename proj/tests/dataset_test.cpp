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

#include "vfedtrans/dataset.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vfedtrans {
namespace {

namespace fs = std::filesystem;

fs::path breast_csv() { return fs::path(VFEDTRANS_DATA_DIR) / "breast.csv"; }

fs::path write_temp(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / ("vfedtrans_" + name);
  std::ofstream(p) << body;
  return p;
}

// Leave-one-out 1-NN accuracy, brute force.
double loo_1nn_accuracy(const Dataset& ds) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    double best = 1e300;
    int label = -1;
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      if (i == j) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < ds.cols(); ++c) {
        const double diff = ds.features(i, c) - ds.features(j, c);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        label = (*ds.labels)[j];
      }
    }
    hits += label == (*ds.labels)[i];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.rows());
}

TEST(LoadCsvTest, BreastHas569RowsAnd30Features) {
  Dataset ds = load_csv(breast_csv(), "id", "diagnosis");
  EXPECT_EQ(ds.rows(), 569u);
  EXPECT_EQ(ds.cols(), 30u);
  EXPECT_EQ(ds.n_classes(), 2u);
  ASSERT_EQ(ds.label_names.size(), 2u);
  EXPECT_EQ(ds.label_names[0], "B");
  EXPECT_EQ(ds.label_names[1], "M");
  std::size_t malignant = 0;
  for (int y : *ds.labels) malignant += y == 1;
  EXPECT_EQ(malignant, 212u);
}

TEST(LoadCsvTest, EmptyFileHasNoDataRows) {
  auto p = write_temp("empty.csv", "id,a,b,label\n");
  try {
    load_csv(p, "id", "label");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no data rows"), std::string::npos);
  }
}

TEST(LoadCsvTest, DuplicateIdIsNamed) {
  auto p = write_temp("dup.csv", "id,a,label\n7,1.0,0\n8,2.0,1\n7,3.0,0\n");
  try {
    load_csv(p, "id", "label");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'7'"), std::string::npos) << e.what();
  }
}

TEST(LoadCsvTest, NonNumericCellNamesRowAndColumn) {
  auto p = write_temp("bad.csv", "id,a,b,label\n1,1.0,2.0,0\n2,x,2.0,1\n");
  try {
    load_csv(p, "id", "label");
    FAIL();
  } catch (const DataError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("row 3"), std::string::npos) << w;
    EXPECT_NE(w.find("column 'a'"), std::string::npos) << w;
  }
}

TEST(LoadCsvTest, MissingColumn) {
  auto p = write_temp("nocol.csv", "id,a,label\n1,1.0,0\n2,1.0,1\n");
  EXPECT_THROW(load_csv(p, "id", "target"), DataError);
}

TEST(SynthTest, SeparatedBlobsAreEasyFor1nn) {
  Dataset ds = synth_generate(100, 4, 2, 5.0, 42);
  EXPECT_GE(loo_1nn_accuracy(ds), 0.95);
}

TEST(SynthTest, ZeroSeparationHasNoSignal) {
  // Averaged over many seeds, 1-NN is at chance when labels are independent.
  double total = 0.0;
  for (std::uint64_t s = 0; s < 40; ++s) total += loo_1nn_accuracy(synth_generate(10, 2, 2, 0.0, s));
  EXPECT_NEAR(total / 40.0, 0.5, 0.1);
}

TEST(SynthTest, DeterministicGivenSeed) {
  Dataset a = synth_generate(50, 3, 3, 1.0, 9);
  Dataset b = synth_generate(50, 3, 3, 1.0, 9);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(*a.labels, *b.labels);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_NE(synth_generate(50, 3, 3, 1.0, 10).features, a.features);
}

TEST(SynthTest, TransferDataPutsSignalInDataColumns) {
  TransferSynthConfig cfg;
  cfg.n_samples = 400;
  Dataset ds = synth_transfer(cfg, 1);
  std::vector<std::size_t> task_cols(cfg.task_features), data_cols(cfg.data_features);
  std::iota(task_cols.begin(), task_cols.end(), std::size_t{0});
  std::iota(data_cols.begin(), data_cols.end(), cfg.task_features);
  Dataset task = ds, data = ds;
  task.features = ds.features.select_cols(task_cols);
  data.features = ds.features.select_cols(data_cols);
  EXPECT_GT(loo_1nn_accuracy(data), loo_1nn_accuracy(task) + 0.05);
}

TEST(PsiTest, Intersections) {
  std::vector<int> a{1, 2, 3}, b{2, 3, 4}, c{7, 8};
  EXPECT_EQ(psi_intersect<int>(a, b), (std::vector<int>{2, 3}));
  EXPECT_TRUE(psi_intersect<int>(a, c).empty());
  EXPECT_EQ(psi_intersect<int>(a, a), a);
}

TEST(PsiTest, StringIdsSortNumerically) {
  std::vector<std::string> a{"10", "9", "100"}, b{"100", "9", "10", "11"};
  EXPECT_EQ(psi_intersect(std::span<const std::string>(a), std::span<const std::string>(b)),
            (std::vector<std::string>{"9", "10", "100"}));
}

void expect_exact_partition(const Dataset& ds, const ScenarioSplit& s) {
  const std::set<std::string> src(ds.ids.begin(), ds.ids.end());
  std::set<std::size_t> tcols(s.task.feature_columns.begin(), s.task.feature_columns.end());
  for (std::size_t k = 0; k < s.data_parties.size(); ++k) {
    const auto& dp = s.data_parties[k];
    for (std::size_t c : dp.feature_columns) EXPECT_FALSE(tcols.count(c)) << "column " << c;
    for (const auto& id : dp.ids) EXPECT_TRUE(src.count(id));
    EXPECT_FALSE(dp.labels.has_value());
    ASSERT_FALSE(s.shared_ids[k].empty());
    for (std::size_t i = 0; i < s.shared_ids[k].size(); ++i) {
      EXPECT_EQ(s.task.ids[s.shared_task_rows[k][i]], s.shared_ids[k][i]);
      EXPECT_EQ(dp.ids[s.shared_data_rows[k][i]], s.shared_ids[k][i]);
    }
    // Disjoint roles per pairing: shared, task-private, data-private.
    std::set<std::string> shared(s.shared_ids[k].begin(), s.shared_ids[k].end());
    std::set<std::string> tids(s.task.ids.begin(), s.task.ids.end());
    for (const auto& id : dp.ids) {
      if (!shared.count(id)) {
        EXPECT_FALSE(tids.count(id)) << id;
      }
    }
  }
  EXPECT_TRUE(s.task.labels.has_value());
  std::set<std::size_t> tt(s.train_rows.begin(), s.train_rows.end());
  for (std::size_t r : s.test_rows) EXPECT_FALSE(tt.count(r));
  EXPECT_EQ(s.train_rows.size() + s.test_rows.size(), s.task.rows());
}

TEST(PartitionTest, BreastTable7Split) {
  Dataset ds = load_csv(breast_csv(), "id", "diagnosis");
  ScenarioSplit s = partition_scenario(ds, breast_split_config(), 0);
  EXPECT_EQ(s.task.rows(), 300u);
  EXPECT_EQ(s.task.cols(), 15u);
  ASSERT_EQ(s.data_parties.size(), 1u);
  EXPECT_EQ(s.data_parties[0].rows(), 400u);
  EXPECT_EQ(s.data_parties[0].cols(), 15u);
  Matrix parts[] = {s.task_shared(0), s.data_shared(0)};
  Matrix shared = hstack(parts);
  EXPECT_EQ(shared.rows(), 200u);
  EXPECT_EQ(shared.cols(), 30u);
  EXPECT_EQ(s.test_rows.size(), 60u);
  expect_exact_partition(ds, s);
  // Shared slices reproduce the source rows.
  auto idx = [&] {
    std::map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < ds.rows(); ++i) m[ds.ids[i]] = i;
    return m;
  }();
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t src = idx.at(s.shared_ids[0][i]);
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_EQ(shared(i, j), ds.features(src, j));
      EXPECT_EQ(shared(i, 15 + j), ds.features(src, 15 + j));
    }
  }
}

TEST(PartitionTest, FullOverlapIsClassicalVfl) {
  Dataset ds = synth_generate(120, 6, 2, 1.0, 3);
  SplitConfig cfg;
  cfg.task_samples = 100;
  cfg.task_features = 2;
  cfg.data_parties = {{100, 4, 100}};
  ScenarioSplit s = partition_scenario(ds, cfg, 5);
  EXPECT_EQ(s.shared_ids[0].size(), 100u);
  std::set<std::string> a(s.task.ids.begin(), s.task.ids.end());
  std::set<std::string> b(s.data_parties[0].ids.begin(), s.data_parties[0].ids.end());
  EXPECT_EQ(a, b);
}

TEST(PartitionTest, InfeasibleConfigQuotesInequality) {
  Dataset ds = synth_generate(50, 6, 2, 1.0, 3);
  SplitConfig cfg;
  cfg.task_samples = 40;
  cfg.task_features = 3;
  cfg.data_parties = {{40, 3, 10}};
  try {
    partition_scenario(ds, cfg, 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("I_t + I_d - I_s <= rows"), std::string::npos) << e.what();
  }
  cfg.data_parties = {{20, 4, 10}};
  EXPECT_THROW(partition_scenario(ds, cfg, 1), DataError);
}

TEST(PartitionTest, MultiPartyIntervals) {
  Dataset ds = synth_generate(30000, 15, 4, 1.0, 11);
  SplitConfig cfg;
  cfg.task_samples = 5000;
  cfg.task_features = 5;
  cfg.multi_party = MultiPartySpec{3, {8000, 25000}, {5, 10}, {2000, 4000}};
  ScenarioSplit s = partition_scenario(ds, cfg, 2);
  ASSERT_EQ(s.data_parties.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_GE(s.data_parties[k].rows(), 8000u);
    EXPECT_LE(s.data_parties[k].rows(), 25000u);
    EXPECT_GE(s.data_parties[k].cols(), 5u);
    EXPECT_LE(s.data_parties[k].cols(), 10u);
    EXPECT_GE(s.shared_ids[k].size(), 2000u);
    EXPECT_LE(s.shared_ids[k].size(), 4000u);
  }
  expect_exact_partition(ds, s);
}

TEST(PartitionTest, Deterministic) {
  Dataset ds = synth_generate(200, 8, 3, 1.0, 4);
  SplitConfig cfg;
  cfg.task_samples = 100;
  cfg.task_features = 3;
  cfg.data_parties = {{120, 5, 60}};
  cfg.shuffle_columns = true;
  ScenarioSplit a = partition_scenario(ds, cfg, 77), b = partition_scenario(ds, cfg, 77);
  EXPECT_EQ(a.task.ids, b.task.ids);
  EXPECT_EQ(a.task.features, b.task.features);
  EXPECT_EQ(a.data_parties[0].feature_columns, b.data_parties[0].feature_columns);
  EXPECT_EQ(a.train_rows, b.train_rows);
  ScenarioSplit c = partition_scenario(ds, cfg, 78);
  EXPECT_NE(a.task.ids, c.task.ids);
}

TEST(InductiveSplitTest, NonIidDrawsFromHalfTheClasses) {
  Dataset ds = synth_generate(800, 8, 4, 1.0, 6);
  SplitConfig cfg;
  cfg.task_samples = 200;
  cfg.task_features = 3;
  cfg.data_parties = {{250, 5, 100}};
  InductiveSplit is = inductive_split(ds, cfg, 3, InductiveMode::kNonIid);
  ASSERT_EQ(is.held_out_classes.size(), 2u);
  // 200 rows per class, two classes chosen, 40% of 400 held out.
  EXPECT_EQ(is.new_samples.rows(), 160u);
  for (int y : *is.new_samples.labels) {
    EXPECT_TRUE(y == is.held_out_classes[0] || y == is.held_out_classes[1]);
  }
  EXPECT_EQ(is.new_samples.feature_columns, is.split.task.feature_columns);
  std::set<std::string> fresh(is.new_samples.ids.begin(), is.new_samples.ids.end());
  for (const auto& id : is.split.task.ids) EXPECT_FALSE(fresh.count(id));
  for (const auto& id : is.split.data_parties[0].ids) EXPECT_FALSE(fresh.count(id));
}

TEST(InductiveSplitTest, IidHoldoutFollowsGlobalHistogram) {
  Dataset ds = synth_generate(2000, 6, 4, 1.0, 7);
  SplitConfig cfg;
  cfg.task_samples = 300;
  cfg.task_features = 3;
  cfg.data_parties = {{400, 3, 150}};
  InductiveSplit is = inductive_split(ds, cfg, 8, InductiveMode::kIid);
  EXPECT_EQ(is.new_samples.rows(), 400u);
  std::map<int, double> hist;
  for (int y : *is.new_samples.labels) hist[y] += 1.0;
  // Pearson chi-square against the uniform global histogram, 3 dof; 16.27 is
  // the 0.999 quantile.
  double chi2 = 0.0;
  for (int c = 0; c < 4; ++c) chi2 += (hist[c] - 100.0) * (hist[c] - 100.0) / 100.0;
  EXPECT_LT(chi2, 16.27);
}

TEST(InductiveSplitTest, DeterministicAndRejectsSingleClass) {
  Dataset ds = synth_generate(400, 6, 2, 1.0, 7);
  SplitConfig cfg;
  cfg.task_samples = 100;
  cfg.task_features = 3;
  cfg.data_parties = {{150, 3, 50}};
  auto a = inductive_split(ds, cfg, 1, InductiveMode::kNonIid);
  auto b = inductive_split(ds, cfg, 1, InductiveMode::kNonIid);
  EXPECT_EQ(a.new_samples.ids, b.new_samples.ids);
  EXPECT_EQ(a.split.task.ids, b.split.task.ids);

  Dataset one = ds;
  one.labels->assign(ds.rows(), 0);
  EXPECT_THROW(inductive_split(one, cfg, 1, InductiveMode::kIid), DataError);
}

TEST(ExportSplitTest, WritesOneFilePerParty) {
  Dataset ds = synth_generate(60, 6, 2, 1.0, 3);
  SplitConfig cfg;
  cfg.task_samples = 30;
  cfg.task_features = 2;
  cfg.data_parties = {{30, 4, 10}};
  ScenarioSplit s = partition_scenario(ds, cfg, 1);
  fs::path dir = fs::temp_directory_path() / "vfedtrans_split_export";
  fs::remove_all(dir);
  export_split(s, dir);
  EXPECT_TRUE(fs::exists(dir / "task.csv"));
  EXPECT_TRUE(fs::exists(dir / "data0.csv"));
  EXPECT_TRUE(fs::exists(dir / "shared_ids_0.csv"));
  Dataset back = load_csv(dir / "task.csv", "id", "label");
  EXPECT_EQ(back.features, s.task.features);
}

TEST(StandardizerTest, ZeroMeanUnitVariance) {
  Dataset ds = synth_generate(100, 3, 2, 2.0, 1);
  Matrix z = Standardizer::fit(ds.features).apply(ds.features);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 100; ++i) m += z(i, j) / 100.0;
    for (std::size_t i = 0; i < 100; ++i) v += (z(i, j) - m) * (z(i, j) - m) / 100.0;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace vfedtrans
