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

#include "vfedtrans/lrd.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"

namespace vfedtrans {
namespace {

// Straight-line forward pass written independently of nn::Network.
Vector forward_oracle(const nn::Network& net, Vector a) {
  for (const auto& d : net.layers()) {
    Vector z(d.out(), 0.0);
    for (std::size_t j = 0; j < d.out(); ++j) {
      double s = d.b[j];
      for (std::size_t i = 0; i < d.in(); ++i) s += a[i] * d.w(i, j);
      switch (d.act) {
        case nn::Activation::kSigmoid: s = 1.0 / (1.0 + std::exp(-s)); break;
        case nn::Activation::kRelu: s = std::max(0.0, s); break;
        case nn::Activation::kIdentity: break;
      }
      z[j] = s;
    }
    a = std::move(z);
  }
  return a;
}

double loss_oracle(const EncoderParams& p, const Vector& x, const Vector* fed, double theta) {
  const Vector z = forward_oracle(p.encoder, x);
  const Vector y = forward_oracle(p.decoder, z);
  double rec = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) rec += (y[j] - x[j]) * (y[j] - x[j]);
  rec /= static_cast<double>(x.size());
  if (!fed) return rec;
  double dist = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) dist += (z[j] - (*fed)[j]) * (z[j] - (*fed)[j]);
  return rec + theta * dist / static_cast<double>(z.size());
}

EncoderParams random_params(std::size_t in, std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  return EncoderParams::init(in, r, 6, nn::Activation::kSigmoid, rng);
}

TEST(LrdShapeTest, GeometricHiddenWidths) {
  EXPECT_EQ(encoder_widths(15, 5, 6), (std::vector<std::size_t>{15, 10, 7, 5}));
  EXPECT_EQ(encoder_widths(15, 15, 6), (std::vector<std::size_t>{15, 15, 15, 15}));
  EXPECT_EQ(encoder_widths(8, 2, 2), (std::vector<std::size_t>{8, 2}));
  EncoderParams p = random_params(15, 5, 1);
  EXPECT_EQ(p.encoder.layers().size() + p.decoder.layers().size(), 6u);
  EXPECT_EQ(p.decoder.layers().back().out(), 15u);
  EXPECT_EQ(p.encoder.layers()[0].act, nn::Activation::kSigmoid);
  EXPECT_EQ(p.encoder.layers().back().act, nn::Activation::kIdentity);
  EXPECT_EQ(p.decoder.layers().back().act, nn::Activation::kIdentity);
}

TEST(LrdLossTest, ZeroWhenPerfect) {
  // One-layer identity encoder and decoder.
  nn::Dense id{Matrix::identity(3), Vector(3, 0.0), nn::Activation::kIdentity};
  EncoderParams p{nn::Network({id}), nn::Network({id})};
  Vector x{0.3, -1.0, 2.0};
  EXPECT_EQ(lrd_loss(p, x, std::span<const double>(x), 0.5), 0.0);
}

TEST(LrdLossTest, ThetaZeroIgnoresFed) {
  EncoderParams p = random_params(6, 3, 2);
  Vector x{1, 2, 3, 4, 5, 6}, fed{9, -9, 9};
  EXPECT_EQ(lrd_loss(p, x, std::span<const double>(fed), 0.0), lrd_loss(p, x, std::nullopt, 0.0));
}

TEST(LrdLossTest, MatchesStraightLineOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    EncoderParams p = random_params(7, 4, 100 + trial);
    Vector x(7), fed(4);
    for (double& v : x) v = gaussian(rng);
    for (double& v : fed) v = gaussian(rng);
    EXPECT_NEAR(lrd_loss(p, x, std::nullopt, 0.001), loss_oracle(p, x, nullptr, 0.001), 1e-13);
    EXPECT_NEAR(lrd_loss(p, x, std::span<const double>(fed), 0.37), loss_oracle(p, x, &fed, 0.37),
                1e-13);
  }
}

TEST(LrdLossTest, DecomposesIntoReconstructionPlusThetaDistillation) {
  EncoderParams p = random_params(5, 2, 4);
  Rng rng(5);
  Matrix x = Matrix::gaussian(8, 5, rng);
  Matrix fed = Matrix::gaussian(8, 2, rng);
  std::vector<char> all(8, 1), none(8, 0);
  const double theta = 0.25;
  LossParts with = lrd_batch_loss(p, x, fed, all, theta);
  LossParts without = lrd_batch_loss(p, x, fed, none, theta);
  EXPECT_EQ(with.reconstruction, without.reconstruction);
  EXPECT_EQ(with.total - without.total, theta * with.distillation);
}

TEST(LrdLossTest, RejectsDimensionMismatch) {
  EncoderParams p = random_params(5, 2, 4);
  Vector x(5, 0.0), bad_fed(3, 0.0), bad_x(4, 0.0);
  EXPECT_THROW(lrd_loss(p, x, std::span<const double>(bad_fed), 0.1), ShapeError);
  EXPECT_THROW(lrd_loss(p, bad_x, std::nullopt, 0.1), ShapeError);
}

TEST(LrdGradientTest, MatchesCentralDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    EncoderParams p = random_params(6, 3, 200 + trial);
    Matrix x = Matrix::gaussian(10, 6, rng);
    Matrix fed = Matrix::gaussian(10, 3, rng);
    std::vector<char> mask(10);
    for (auto& m : mask) m = static_cast<char>(rng() % 2);
    const double theta = 0.5;
    const Vector analytic = lrd_gradient(p, x, fed, mask, theta).flat();
    const Vector numeric = gradcheck::central_difference(
        p.flat(), 1e-5, [&](const Vector& v) {
          EncoderParams q = p;
          q.set_flat(v);
          return lrd_batch_loss(q, x, fed, mask, theta).total;
        });
    EXPECT_LT(gradcheck::max_relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(LrdGradientTest, L1SwitchMatchesCentralDifferences) {
  Rng rng(7);
  EncoderParams p = random_params(4, 2, 9);
  Matrix x = Matrix::gaussian(10, 4, rng);
  Matrix fed = Matrix::gaussian(10, 2, rng) * 5.0;  // keep residuals away from the kink
  std::vector<char> mask(10, 1);
  const Vector analytic = lrd_gradient(p, x, fed, mask, 0.3, DistillNorm::kL1).flat();
  const Vector numeric = gradcheck::central_difference(p.flat(), 1e-5, [&](const Vector& v) {
    EncoderParams q = p;
    q.set_flat(v);
    return lrd_batch_loss(q, x, fed, mask, 0.3, DistillNorm::kL1).total;
  });
  EXPECT_LT(gradcheck::max_relative_error(analytic, numeric), 1e-4);
}

TEST(LrdGradientTest, NoSharedRowsMeansNoDistillationGradient) {
  Rng rng(8);
  EncoderParams p = random_params(5, 2, 10);
  Matrix x = Matrix::gaussian(6, 5, rng);
  Matrix fed = Matrix::gaussian(6, 2, rng);
  std::vector<char> none(6, 0);
  EXPECT_EQ(lrd_gradient(p, x, fed, none, 10.0).flat(), lrd_gradient(p, x, fed, none, 0.0).flat());
}

TEST(LrdGradientTest, VanishesAtTrainedStationaryPoint) {
  // Linear autoencoder with full-width latent: the global minimum is exact.
  Rng rng(9);
  Matrix x = Matrix::gaussian(20, 3, rng);
  Matrix fed(20, 3, 0.0);
  std::vector<char> none(20, 0);
  DistillConfig cfg;
  cfg.depth = 2;
  cfg.epochs = 6000;
  cfg.batch_size = 20;
  cfg.learning_rate = 0.01;
  cfg.theta = 0.0;
  TrainedEncoder t = train_distilled_encoder(x, fed, none, cfg);
  EncoderParams start = random_params(3, 3, 0);
  const double g0 = norm2(lrd_gradient(start, x, fed, none, 0.0).flat());
  const double g1 = norm2(lrd_gradient(t.params, x, fed, none, 0.0).flat());
  EXPECT_LT(t.loss_curve.back(), 1e-8);
  EXPECT_LT(g1, 1e-4 * std::max(g0, 1.0));
}

class LrdTrainTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(11);
    x = Matrix::gaussian(150, 6, rng);
    fed = Matrix::gaussian(150, 3, rng) * 0.1;
    shared.assign(150, 0);
    for (std::size_t i = 0; i < 60; ++i) shared[i] = 1;
    cfg.epochs = 40;
  }
  Matrix x, fed;
  std::vector<char> shared;
  DistillConfig cfg;
};

TEST_F(LrdTrainTest, LossTrendsDownAndRunIsDeterministic) {
  TrainedEncoder a = train_distilled_encoder(x, fed, shared, cfg);
  TrainedEncoder b = train_distilled_encoder(x, fed, shared, cfg);
  ASSERT_EQ(a.loss_curve.size(), 40u);
  EXPECT_LT(a.loss_curve.back(), a.loss_curve.front());
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.params.digest(), b.params.digest());
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  cfg.seed = 1;
  TrainedEncoder c = train_distilled_encoder(x, fed, shared, cfg);
  EXPECT_NE(a.params.digest(), c.params.digest());
}

TEST_F(LrdTrainTest, ThetaZeroIsPlainAutoencoder) {
  cfg.theta = 0.0;
  std::vector<char> none(150, 0), all(150, 1);
  TrainedEncoder a = train_distilled_encoder(x, fed, all, cfg);
  TrainedEncoder b = train_distilled_encoder(x, fed, none, cfg);
  EXPECT_TRUE(a.params == b.params);
}

TEST_F(LrdTrainTest, DistillationPullsLatentTowardFed) {
  cfg.epochs = 150;
  cfg.theta = 0.0;
  TrainedEncoder plain = train_distilled_encoder(x, fed, shared, cfg);
  cfg.theta = 1.0;
  TrainedEncoder pulled = train_distilled_encoder(x, fed, shared, cfg);
  auto distill = [&](const EncoderParams& p) { return lrd_batch_loss(p, x, fed, shared, 1.0).distillation; };
  EXPECT_LT(distill(pulled.params), distill(plain.params));
}

TEST_F(LrdTrainTest, NonFiniteLossAbortsWithPosition) {
  Matrix huge(150, 6, 1e200);
  try {
    train_distilled_encoder(huge, fed, shared, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
}

TEST_F(LrdTrainTest, RejectsBadConfig) {
  cfg.theta = -1.0;
  EXPECT_THROW(train_distilled_encoder(x, fed, shared, cfg), ConfigError);
  cfg.theta = 0.001;
  cfg.epochs = 0;
  EXPECT_THROW(train_distilled_encoder(x, fed, shared, cfg), ConfigError);
}

TEST(LrdAlignTest, AlignsFederatedRowsById) {
  Rng rng(12);
  Matrix x = Matrix::gaussian(5, 3, rng);
  std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  FedRepresentation fed;
  fed.ids = {"d", "b"};
  fed.matrix = Matrix::gaussian(2, 2, rng);
  DistillConfig cfg;
  cfg.epochs = 3;
  Matrix aligned(5, 2, 0.0);
  aligned.row(3)[0] = fed.matrix(0, 0);
  aligned.row(3)[1] = fed.matrix(0, 1);
  aligned.row(1)[0] = fed.matrix(1, 0);
  aligned.row(1)[1] = fed.matrix(1, 1);
  std::vector<char> mask{0, 1, 0, 1, 0};
  EXPECT_TRUE(train_distilled_encoder(x, ids, fed, cfg).params ==
              train_distilled_encoder(x, aligned, mask, cfg).params);
  fed.ids = {"d", "zz"};
  EXPECT_THROW(train_distilled_encoder(x, ids, fed, cfg), DataError);
}

TEST(EnrichTest, ConcatenatesRawThenEncodersInOrder) {
  Rng rng(13);
  Matrix x = Matrix::gaussian(4, 15, rng);
  std::vector<EncoderParams> one{random_params(15, 5, 1)};
  EnrichedRepresentation e1 = enrich(one, x);
  EXPECT_EQ(e1.matrix.cols(), 20u);
  EXPECT_EQ(e1.provenance[14], "raw");
  EXPECT_EQ(e1.provenance[15], "enc0");

  std::vector<EncoderParams> three{random_params(15, 5, 1), random_params(15, 3, 2),
                                   random_params(15, 7, 3)};
  EnrichedRepresentation e3 = enrich(three, x);
  EXPECT_EQ(e3.matrix.cols(), 15u + 5u + 3u + 7u);
  EXPECT_EQ(e3.provenance.back(), "enc2");
  Matrix z1 = three[1].encode(x);
  EXPECT_EQ(e3.matrix(2, 20), z1(2, 0));

  EnrichedRepresentation e0 = enrich({}, x);
  EXPECT_TRUE(e0.matrix == x);
  EXPECT_TRUE(enrich(three, x).matrix == e3.matrix);

  std::vector<EncoderParams> wrong{random_params(14, 5, 1)};
  EXPECT_THROW(enrich(wrong, x), ShapeError);
}

TEST(EncoderParamsTest, JsonRoundTripAndLossCurveCsv) {
  EncoderParams p = random_params(6, 2, 14);
  EncoderParams q = EncoderParams::from_json(nlohmann::json::parse(p.to_json().dump()));
  EXPECT_TRUE(p == q);

  TrainedEncoder t{p, {0.5, 0.25}};
  auto path = std::filesystem::temp_directory_path() / "vfedtrans_loss_curve.csv";
  t.write_loss_curve(path);
  csv::Table tab = csv::read_file(path);
  ASSERT_EQ(tab.rows.size(), 2u);
  EXPECT_EQ(tab.rows[1][1], "0.25");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace vfedtrans
