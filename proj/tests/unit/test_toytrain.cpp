#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "heightlab/error.hpp"
#include "heightlab/metrics.hpp"
#include "heightlab/parallel.hpp"
#include "heightlab/synth.hpp"
#include "heightlab/toytrain.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace heightlab;

namespace {

const double kAnchorGrade = default_slopes()[3];

Scene grade_scene(double grade, int length, std::uint64_t seed = 7) {
  SceneSpec s;
  s.surface_kind = SurfaceKind::grade;
  s.params.grade = grade;
  s.length = length;
  s.seed = seed;
  return generate_scene(s);
}

struct Fixture {
  Scene scene;
  SlopeAnchorSet anchors;
  TrainBatch batch;
};

Fixture make_fixture(double grade, int frames) {
  Scene scene = grade_scene(grade, frames);
  SlopeAnchorSet anchors = make_anchor_set(scene.spec.grid, default_slopes());
  TrainBatch batch{anchors, {}};
  batch.sequences.push_back(sequence_from_scene(scene, anchors, 0, frames));
  return {std::move(scene), anchors, std::move(batch)};
}

PredictorParams random_params(int channels, int anchors, std::uint64_t seed, double scale) {
  TrainConfig c;
  c.seed = seed;
  c.init_scale = scale;
  return initial_params(c, channels, anchors);
}

double loss_at(const PredictorParams& p, const TrainBatch& b, const LossWeights& w) {
  return forward_loss(p, b, w).loss.total;
}

}  // namespace

TEST(PredictorParams, ZerosAndValidation) {
  PredictorParams p = PredictorParams::zeros(8, 5);
  EXPECT_EQ(p.channels(), 8);
  EXPECT_EQ(p.anchors(), 5);
  EXPECT_NO_THROW(p.validate());
  p.bias[2] = std::nan("");
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = PredictorParams::zeros(8, 5);
  p.bias.resize(4);
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(PredictorInput, GroundWeightedMean) {
  SampledAnchors s;
  s.features = {FeatureGrid(1, 2, 2), FeatureGrid(1, 2, 2), FeatureGrid(1, 2, 2)};
  s.valid = {CellMask{1, 1}, CellMask{1, 1}, CellMask{0, 1}};
  // Cell 0: ground weights 1 and 3 on anchors 0, 1; anchor 2 invalid.
  s.features[0].at(0, 0, 0) = 1.0;
  s.features[0].at(0, 0, 1) = 2.0;
  s.features[1].at(0, 0, 0) = 3.0;
  s.features[1].at(0, 0, 1) = 6.0;
  s.features[2].at(0, 0, 1) = 100.0;
  // Cell 1: no ground anywhere, plain mean.
  s.features[0].at(0, 1, 1) = 3.0;
  s.features[1].at(0, 1, 1) = 6.0;
  s.features[2].at(0, 1, 1) = 9.0;
  const FeatureGrid f = predictor_input(s);
  EXPECT_DOUBLE_EQ(f.at(0, 0, 0), (1.0 * 1.0 + 3.0 * 3.0) / 4.0);
  EXPECT_DOUBLE_EQ(f.at(0, 0, 1), (1.0 * 2.0 + 3.0 * 6.0) / 4.0);
  EXPECT_DOUBLE_EQ(f.at(0, 1, 0), 0.0);
  EXPECT_DOUBLE_EQ(f.at(0, 1, 1), 6.0);
  s.valid = {CellMask{0, 0}, CellMask{0, 0}, CellMask{0, 0}};
  const FeatureGrid none = predictor_input(s);
  for (double v : none.data()) EXPECT_EQ(v, 0.0);
}

TEST(PredictLogits, LinearMapAndShapeCheck) {
  FeatureGrid f(2, 3, 2);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      f.at(r, c, 0) = r + c;
      f.at(r, c, 1) = r - c;
    }
  PredictorParams p = PredictorParams::zeros(2, 2);
  p.weight << 1.0, 0.5, -2.0, 0.0;
  p.bias << 0.25, -1.0;
  const AnchorLogits l = predict_logits(p, f);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_DOUBLE_EQ(l.at(0, r, c), 0.25 + (r + c) - 2.0 * (r - c));
      EXPECT_DOUBLE_EQ(l.at(1, r, c), -1.0 + 0.5 * (r + c));
    }
  }
  PredictorParams bias_only = PredictorParams::zeros(2, 2);
  bias_only.bias << 0.7, -0.3;
  const AnchorLogits lb = predict_logits(bias_only, f);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(lb.at(0, r, c), 0.7);
      EXPECT_EQ(lb.at(1, r, c), -0.3);
    }
  EXPECT_THROW(predict_logits(PredictorParams::zeros(3, 2), f), InvalidArgument);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_EQ(c.learning_rate, 0.1);
  EXPECT_EQ(c.steps, 100);
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = -0.1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.steps = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.loss_weights.lambda_h = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(InitialParams, SeededAndScaled) {
  const PredictorParams a = random_params(8, 5, 3, 0.2), b = random_params(8, 5, 3, 0.2);
  const PredictorParams c = random_params(8, 5, 4, 0.2);
  EXPECT_EQ(a.weight, b.weight);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_NE(a.weight, c.weight);
  EXPECT_LE(a.weight.cwiseAbs().maxCoeff(), 0.2);
  EXPECT_EQ(random_params(8, 5, 3, 0.0).weight, PredictorParams::zeros(8, 5).weight);
}

TEST(PredictHeightmap, ZeroParamsGiveAnchorMean) {
  const Fixture fx = make_fixture(0.0, 1);
  const TrainFrame& f = fx.batch.sequences[0].frames[0];
  const HeightMap h = predict_heightmap(PredictorParams::zeros(8, 5), fx.anchors, f);
  int checked = 0;
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * h.cols() + c;
      bool all = true;
      for (int a = 0; a < 5; ++a) all = all && f.anchor_valid[a][i];
      if (!all) continue;
      ++checked;
      double mean = 0.0;
      for (int a = 0; a < 5; ++a) mean += fx.anchors.height(a, r, c) / 5.0;
      EXPECT_NEAR(h.at(r, c), mean, 1e-12);
      EXPECT_NEAR(h.at(r, c), 0.0, 1e-12);  // default slopes are symmetric
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(PredictHeightmap, GradeCueSelectsMatchingAnchor) {
  const Fixture fx = make_fixture(kAnchorGrade, 1);
  const TrainFrame& f = fx.batch.sequences[0].frames[0];
  // logit_a = k (s_a g - s_a^2 / 2) peaks at the anchor nearest to the grade g.
  PredictorParams p = PredictorParams::zeros(8, 5);
  const double k = 2e5;
  for (int a = 0; a < 5; ++a) {
    const double s = fx.anchors.slopes()[a];
    p.weight(1, a) = k * kMaxGrade * s;
    p.weight(0, a) = 0.0;
    p.bias[a] = -0.5 * k * s * s;
  }
  const HeightMap h = predict_heightmap(p, fx.anchors, f);
  int hits = 0, n = 0;
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * h.cols() + c;
      if (!h.valid(r, c) || !f.anchor_valid[3][i] || f.bev_features.at(r, c, 0) < 0.999) continue;
      ++n;
      hits += std::abs(h.at(r, c) - fx.anchors.height(3, r, c)) < 1e-6;
    }
  }
  EXPECT_GT(n, 1000);
  EXPECT_EQ(hits, n);
}

TEST(ForwardLoss, HeightOnlyWeightsEqualMeanL1) {
  const Fixture fx = make_fixture(0.03, 2);
  const PredictorParams p = random_params(8, 5, 11, 0.5);
  const ForwardResult r = forward_loss(p, fx.batch, LossWeights{0, 0, 1});
  double expected = 0.0;
  for (const TrainFrame& f : fx.batch.sequences[0].frames)
    expected += height_l1(predict_heightmap(p, fx.anchors, f), f.ground_truth) / 2.0;
  EXPECT_NEAR(r.loss.total, expected, 1e-12);
  EXPECT_NEAR(r.loss.l_h, expected, 1e-12);
  EXPECT_GE(r.loss.l_sa, 0.0);
  EXPECT_LE(r.loss.l_sa, 1.0);
  EXPECT_GE(r.loss.l_cons, 0.0);
}

TEST(ForwardLoss, WeightedSumOfTerms) {
  const Fixture fx = make_fixture(0.03, 2);
  const PredictorParams p = random_params(8, 5, 12, 0.5);
  const LossBreakdown l = forward_loss(p, fx.batch, LossWeights{}).loss;
  EXPECT_NEAR(l.total, 5 * l.l_sa + 2 * l.l_cons + 10 * l.l_h, 1e-12);
}

TEST(ForwardLoss, OneHotOnTrueAnchorGivesZeroHeightLoss) {
  const Fixture fx = make_fixture(kAnchorGrade, 1);
  PredictorParams p = PredictorParams::zeros(8, 5);
  p.bias << -200, -200, -200, 0, -200;
  const TrainFrame& f = fx.batch.sequences[0].frames[0];
  const HeightMap h = predict_heightmap(p, fx.anchors, f);
  HeightMap covered(h.grid());
  int n = 0;
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      if (f.anchor_valid[3][static_cast<std::size_t>(r) * h.cols() + c]) {
        covered.set(r, c, h.at(r, c));
        ++n;
      } else {
        covered.set_nodata(r, c);
      }
    }
  }
  EXPECT_GT(n, 5000);
  EXPECT_LT(height_l1(covered, f.ground_truth), 1e-9);
}

TEST(ForwardLoss, ConsistencyNeedsPairs) {
  const Fixture fx = make_fixture(0.0, 1);
  EXPECT_THROW(forward_loss(PredictorParams::zeros(8, 5), fx.batch, LossWeights{}), InvalidArgument);
  EXPECT_NO_THROW(forward_loss(PredictorParams::zeros(8, 5), fx.batch, LossWeights{5, 0, 10}));
  EXPECT_THROW(forward_loss(PredictorParams::zeros(8, 4), fx.batch, LossWeights{5, 0, 10}), InvalidArgument);
}

TEST(Backward, MatchesCentralDifferences) {
  for (int draw = 0; draw < 3; ++draw) {
    const Fixture fx = make_fixture(-0.06 + 0.05 * draw, 2);
    const PredictorParams p = random_params(8, 5, 100 + draw, 0.5);
    const auto checks = heightlab_test::gradient_check(p, fx.batch, LossWeights{}, 1e-5);
    ASSERT_EQ(checks.size(), 45u);
    for (const auto& c : checks) {
      EXPECT_TRUE(c.smooth);
      EXPECT_LE(c.rel_error, 1e-4) << (c.bias ? "bias " : "weight ") << c.channel << "," << c.anchor << " numeric "
                                   << c.numeric << " analytic " << c.analytic << " step " << c.step;
    }
  }
}

TEST(Backward, KinkSignatureDetectsClampCrossing) {
  const Fixture fx = make_fixture(0.0, 1);
  const PredictorParams p = random_params(8, 5, 7, 0.5);
  const LossWeights w{1, 0, 1};
  const ForwardResult a = forward_loss(p, fx.batch, w);
  EXPECT_EQ(heightlab_test::kink_signature(fx.batch, a.cache),
            heightlab_test::kink_signature(fx.batch, forward_loss(p, fx.batch, w).cache));
  PredictorParams q = p;
  q.bias[0] += 5.0;
  EXPECT_NE(heightlab_test::kink_signature(fx.batch, a.cache),
            heightlab_test::kink_signature(fx.batch, forward_loss(q, fx.batch, w).cache));
}

TEST(Backward, LinearInLossWeights) {
  const Fixture fx = make_fixture(0.02, 2);
  const PredictorParams p = random_params(8, 5, 61, 0.3);
  const PredictorParams g1 = backward(p, fx.batch, forward_loss(p, fx.batch, LossWeights{1, 0.5, 2}).cache);
  const PredictorParams g3 = backward(p, fx.batch, forward_loss(p, fx.batch, LossWeights{3, 1.5, 6}).cache);
  EXPECT_LE((g3.weight - 3 * g1.weight).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((g3.bias - 3 * g1.bias).cwiseAbs().maxCoeff(), 1e-10);
  const PredictorParams g0 = backward(p, fx.batch, forward_loss(p, fx.batch, LossWeights{0, 0, 0}).cache);
  EXPECT_EQ(g0.weight.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g0.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, SoftmaxShiftInvariance) {
  const Fixture fx = make_fixture(0.02, 2);
  PredictorParams p = random_params(8, 5, 62, 0.3);
  const ForwardResult base = forward_loss(p, fx.batch, LossWeights{});
  const PredictorParams g = backward(p, fx.batch, base.cache);
  EXPECT_NEAR(g.bias.sum(), 0.0, 1e-10);
  p.bias.array() += 3.0;
  EXPECT_NEAR(forward_loss(p, fx.batch, LossWeights{}).loss.total, base.loss.total, 1e-10);
}

TEST(Train, ZeroLearningRateFreezesParameters) {
  const Fixture fx = make_fixture(0.02, 2);
  TrainConfig c;
  c.learning_rate = 0.0;
  c.steps = 3;
  c.init_scale = 0.1;
  c.seed = 5;
  const TrainResult r = train(c, fx.batch);
  const PredictorParams init = initial_params(c, 8, 5);
  EXPECT_EQ(r.params.weight, init.weight);
  EXPECT_EQ(r.params.bias, init.bias);
  ASSERT_EQ(r.trace.size(), 3u);
  EXPECT_EQ(r.trace[0].total, r.trace[2].total);
}

TEST(Train, SmallStepsNeverIncreaseLoss) {
  const Fixture fx = make_fixture(0.06, 2);
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.steps = 50;
  const TrainResult r = train(c, fx.batch);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].total, r.trace[k - 1].total + 1e-12) << k;
  EXPECT_LT(r.trace.back().total, r.trace.front().total);
}

TEST(Train, OverfitsSingleScene) {
  const Fixture fx = make_fixture(0.044, 1);
  TrainConfig c;
  c.steps = 500;
  c.loss_weights.lambda_cons = 0.0;
  const TrainResult r = train(c, fx.batch);
  const TrainFrame& f = fx.batch.sequences[0].frames[0];
  const double baseline = mae(predict_heightmap(PredictorParams::zeros(8, 5), fx.anchors, f), f.ground_truth);
  const double trained = mae(predict_heightmap(r.params, fx.anchors, f), f.ground_truth);
  EXPECT_LE(trained, 0.02);
  EXPECT_LT(trained, baseline);
  EXPECT_LT(r.trace.back().total, r.trace.front().total);
}

TEST(Train, DeterministicAcrossWorkerCounts) {
  const Fixture fx = make_fixture(0.03, 3);
  TrainConfig c;
  c.steps = 4;
  set_worker_count(1);
  const TrainResult a = train(c, fx.batch);
  set_worker_count(5);
  const TrainResult b = train(c, fx.batch);
  set_worker_count(0);
  EXPECT_EQ(a.params.weight, b.params.weight);
  EXPECT_EQ(a.params.bias, b.params.bias);
  EXPECT_EQ(trace_csv(a.trace), trace_csv(b.trace));
}

TEST(TraceCsv, Format) {
  const std::vector<LossBreakdown> t{{1.5, 0.1, 0.2, 0.03}, {1.0, 0.05, 0.25, 0.0}};
  const std::string csv = trace_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,loss,l_sa,l_cons,l_h");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("\n0,1.5,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,1,"), std::string::npos);
}

TEST(Prm1, RoundTripIsExact) {
  const PredictorParams p = random_params(6, 4, 70, 3.0);
  const std::string bytes = encode_params(p);
  EXPECT_EQ(bytes.size(), 8 + 16 + 8 * (6 * 4 + 4));
  EXPECT_EQ(bytes.substr(0, 8), std::string(kPrm1Magic));
  const PredictorParams q = decode_params(bytes);
  EXPECT_EQ(q.weight, p.weight);
  EXPECT_EQ(q.bias, p.bias);
  EXPECT_EQ(encode_params(q), bytes);

  heightlab_test::TempDir dir;
  write_params(dir / "p.prm", p);
  EXPECT_EQ(heightlab_test::slurp(dir / "p.prm"), bytes);
  EXPECT_EQ(read_params(dir / "p.prm").weight, p.weight);
}

TEST(Prm1, CorruptInputRejected) {
  const std::string bytes = encode_params(random_params(3, 2, 71, 1.0));
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_params(bad), DataError);
  EXPECT_THROW(decode_params(bytes.substr(0, bytes.size() - 1)), DataError);
  EXPECT_THROW(decode_params(bytes + "x"), DataError);
  EXPECT_THROW(decode_params(bytes.substr(0, 5)), DataError);
  std::string dims = bytes;
  const double neg = -3.0;
  std::memcpy(dims.data() + 8, &neg, 8);
  EXPECT_THROW(decode_params(dims), DataError);
  heightlab_test::TempDir dir;
  EXPECT_THROW(read_params(dir / "missing.prm"), DataError);
}
