#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "zolr/experiment.hpp"
#include "zolr/extractor.hpp"
#include "zolr/lab.hpp"
#include "zolr/regress.hpp"
#include "zolr/regret.hpp"

using namespace zolr;
using zolr::gen::Gen;

namespace {

CorruptionSpec spec(CorruptionKind k, Severity s = Severity::moderate, std::uint64_t seed = 0) {
  CorruptionSpec c;
  c.kind = k;
  c.severity = s;
  c.seed = seed;
  return c;
}

double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Extractor fitted briefly on a few clean scenes, shared across tests.
const PointSetExtractor& fitted_extractor() {
  static const PointSetExtractor ex = [] {
    PointSetExtractor e(7);
    std::vector<PointCloud> clouds;
    for (std::uint64_t s = 0; s < 200; ++s) clouds.push_back(generate_random_scene(derive_seed(77, s)));
    ExtractorTrainOptions opt;
    opt.epochs = 5;
    opt.seed = 1;
    e.fit(clouds, opt);
    return e;
  }();
  return ex;
}

}  // namespace

TEST(Scene, SphereAtOriginStaysNearTheSurface) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pc = generate_scene(SceneParams{{0, 0, 0}, {1, 1, 1}, SceneShape::sphere}, seed);
    ASSERT_EQ(pc.points.size(), kScenePoints);
    for (const auto& p : pc.points) EXPECT_LE(range_of(p), 1.0 + 5 * kSurfaceNoise);
  }
}

TEST(Scene, BoxFacesMatchGroundTruth) {
  Gen g(1);
  for (int t = 0; t < 50; ++t) {
    Rng rng(g.seed());
    const auto params = sample_scene_params(SceneShape::box, rng);
    const auto pc = generate_scene(params, g.seed());
    for (std::size_t k = 0; k < 3; ++k) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& p : pc.points) {
        lo = std::min(lo, p[k]);
        hi = std::max(hi, p[k]);
      }
      const double tol = 5 * kSurfaceNoise;
      EXPECT_NEAR(lo, params.centroid[k] - params.extent[k], tol);
      EXPECT_NEAR(hi, params.centroid[k] + params.extent[k], tol);
    }
  }
}

TEST(Scene, DeterministicUnderSeed) {
  for (auto shape : {SceneShape::box, SceneShape::sphere, SceneShape::plane_composite}) {
    const auto a = generate_scene(shape, 42);
    const auto b = generate_scene(shape, 42);
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.scene, b.scene);
    EXPECT_NE(generate_scene(shape, 43).points, a.points);
  }
  EXPECT_EQ(generate_random_scene(5).points, generate_random_scene(5).points);
}

TEST(Corrupt, BeamMissingDropsFlooredFraction) {
  const auto pc = generate_random_scene(3);
  const auto m = corrupt(pc, spec(CorruptionKind::beam_missing, Severity::moderate));
  EXPECT_EQ(m.points.size(), kScenePoints - 64);
  const auto h = corrupt(pc, spec(CorruptionKind::beam_missing, Severity::heavy));
  EXPECT_EQ(h.points.size(), kScenePoints - 128);
  // Dropped points are a subset of the original cloud.
  for (const auto& p : m.points) EXPECT_NE(std::find(pc.points.begin(), pc.points.end(), p), pc.points.end());
}

TEST(Corrupt, ZeroMagnitudeFogIsIdentity) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto pc = generate_random_scene(s);
    auto c = spec(CorruptionKind::fog, Severity::heavy, s);
    c.magnitude_override = 0.0;
    const auto out = corrupt(pc, c);
    EXPECT_EQ(out.points, pc.points);
  }
}

TEST(Corrupt, HeavyCrosstalkAddsOutliersInsideTripledBox) {
  const auto pc = generate_random_scene(11);
  const auto out = corrupt(pc, spec(CorruptionKind::crosstalk, Severity::heavy, 4));
  const std::size_t added = static_cast<std::size_t>(std::floor(0.2 * kScenePoints));
  ASSERT_EQ(out.points.size(), kScenePoints + added);
  EXPECT_TRUE(std::equal(pc.points.begin(), pc.points.end(), out.points.begin()));
  Point3 lo = pc.points[0], hi = pc.points[0];
  for (const auto& p : pc.points)
    for (std::size_t k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  for (std::size_t i = kScenePoints; i < out.points.size(); ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      const double mid = 0.5 * (lo[k] + hi[k]), half = 1.5 * (hi[k] - lo[k]);
      EXPECT_GE(out.points[i][k], mid - half);
      EXPECT_LE(out.points[i][k], mid + half);
    }
}

TEST(Corrupt, CountsFollowTheSeverityTable) {
  const auto pc = generate_random_scene(12);
  auto count = [&](CorruptionKind k, Severity s) { return corrupt(pc, spec(k, s)).points.size(); };
  EXPECT_EQ(count(CorruptionKind::fog, Severity::moderate), 256u - 12);
  EXPECT_EQ(count(CorruptionKind::fog, Severity::heavy), 256u - 25);
  EXPECT_EQ(count(CorruptionKind::snow, Severity::moderate), 256u + 12);
  EXPECT_EQ(count(CorruptionKind::rain, Severity::heavy), 256u - 15);
  EXPECT_EQ(count(CorruptionKind::motion_blur, Severity::heavy), 256u);
  EXPECT_EQ(count(CorruptionKind::incomplete_echo, Severity::moderate), 256u - 64);
  EXPECT_EQ(count(CorruptionKind::cross_sensor, Severity::moderate), 256u + 38);
  EXPECT_EQ(count(CorruptionKind::crosstalk, Severity::moderate), 256u + 25);
}

TEST(Corrupt, DeterministicFiniteAndLabelPreserving) {
  Gen g(2);
  for (int t = 0; t < 100; ++t) {
    const auto pc = generate_random_scene(g.seed());
    const auto c = spec(kAllCorruptions[t % 8], t % 2 ? Severity::heavy : Severity::moderate, g.seed());
    const auto a = corrupt(pc, c);
    EXPECT_EQ(a.points, corrupt(pc, c).points);
    EXPECT_EQ(a.scene, pc.scene);
    EXPECT_GE(a.points.size(), kMinPoints);
    for (const auto& p : a.points)
      for (double v : p) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Corrupt, RejectsResultBelowMinimumPoints) {
  PointCloud pc = generate_random_scene(1);
  pc.points.resize(20);
  EXPECT_THROW(corrupt(pc, spec(CorruptionKind::beam_missing, Severity::heavy)),
               CorruptionError);
  auto negative = spec(CorruptionKind::fog);
  negative.magnitude_override = -1.0;
  EXPECT_THROW(corrupt(pc, negative), InvalidArgument);
}

TEST(Extractor, PermutationInvariantAtEveryTap) {
  const auto& ex = fitted_extractor();
  Gen g(3);
  for (int t = 0; t < 20; ++t) {
    const auto pc = generate_random_scene(g.seed());
    PointCloud shuffled = pc;
    std::mt19937_64 rng(g.seed());
    std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
    for (auto tap : {Tap::point_level, Tap::feature_level, Tap::encoder_level})
      EXPECT_EQ(ex.extract(pc, tap).values, ex.extract(shuffled, tap).values);
  }
}

TEST(Extractor, ShapesAndErrors) {
  const auto& ex = fitted_extractor();
  const auto pc = generate_random_scene(4);
  for (auto tap : {Tap::point_level, Tap::feature_level, Tap::encoder_level}) {
    const auto f = ex.extract(pc, tap);
    EXPECT_EQ(f.values.size(), PointSetExtractor::feature_dim(tap));
    EXPECT_EQ(f.tap, tap);
    EXPECT_EQ(f.modality, Modality::lidar);
  }
  EXPECT_EQ(ex.extract(pc, Tap::feature_level).values.size(), 32u);
  EXPECT_EQ(ex.extract(pc, Tap::encoder_level).values.size(), 32u);
  PointCloud tiny = pc;
  tiny.points.resize(kMinPoints - 1);
  EXPECT_THROW(ex.extract(tiny, Tap::encoder_level), InvalidArgument);
}

TEST(Extractor, FittingIsDeterministicAndReducesLoss) {
  std::vector<PointCloud> clouds;
  for (std::uint64_t s = 0; s < 40; ++s) clouds.push_back(generate_random_scene(s));
  ExtractorTrainOptions opt;
  opt.epochs = 4;
  PointSetExtractor a(1), b(1);
  const auto ca = a.fit(clouds, opt);
  const auto cb = b.fit(clouds, opt);
  EXPECT_EQ(ca, cb);
  EXPECT_LT(ca.back(), ca.front());
  EXPECT_EQ(a.extract(clouds[0], Tap::encoder_level).values, b.extract(clouds[0], Tap::encoder_level).values);
}

TEST(Extractor, HeavyFogMovesEncoderFeatures) {
  const auto& ex = fitted_extractor();
  double total = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto pc = generate_random_scene(derive_seed(9, s));
    const auto fogged = corrupt(pc, spec(CorruptionKind::fog, Severity::heavy, s));
    total += dist(ex.extract(pc, Tap::encoder_level).values, ex.extract(fogged, Tap::encoder_level).values);
  }
  EXPECT_GT(total / 50.0, 0.0);
}

TEST(Extractor, HeavyDisplacesAtLeastAsMuchAsModerate) {
  const auto& ex = fitted_extractor();
  for (auto kind : kAllCorruptions) {
    double moderate = 0.0, heavy = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto pc = generate_random_scene(derive_seed(21, s));
      const auto clean = ex.extract(pc, Tap::encoder_level).values;
      moderate += dist(clean, ex.extract(corrupt(pc, spec(kind, Severity::moderate, s)),
                                         Tap::encoder_level).values);
      heavy += dist(clean, ex.extract(corrupt(pc, spec(kind, Severity::heavy, s)),
                                      Tap::encoder_level).values);
    }
    EXPECT_GE(heavy, moderate) << to_string(kind);
  }
}

TEST(SecondModality, NormalizedAndSparse) {
  // Box entirely inside the bin x in [4, 8), y in [-8, -4).
  const auto pc = generate_scene(SceneParams{{6, -6, 0}, {0.5, 0.5, 0.5}, SceneShape::box}, 1);
  const Vec h = occupancy_histogram(pc);
  ASSERT_EQ(h.size(), 16u);
  EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(h[1 * 4 + 0], 1.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (i != 4) {
      EXPECT_EQ(h[i], 0.0);
    }

  Gen g(4);
  for (int t = 0; t < 50; ++t) {
    const Vec r = occupancy_histogram(generate_random_scene(g.seed()));
    EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(SecondModality, DeterministicNoisyCameraVector) {
  const auto pc = generate_random_scene(8);
  const auto a = second_modality(pc, 3);
  EXPECT_EQ(a.values, second_modality(pc, 3).values);
  EXPECT_NE(a.values, second_modality(pc, 4).values);
  EXPECT_EQ(a.modality, Modality::camera);
  EXPECT_EQ(a.values.size(), 16u);
  const Vec clean = occupancy_histogram(pc);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_LT(std::abs(a.values[i] - clean[i]), 6 * 0.005);
}

TEST(SecondModality, TranslationByOneBinShiftsThePattern) {
  // Straddles two y bins so the pattern has some structure.
  const auto pc = generate_scene(SceneParams{{6, -4, 0}, {1.0, 1.5, 0.5}, SceneShape::box}, 2);
  PointCloud moved = pc;
  for (auto& p : moved.points) p[0] += OccupancyGrid::kBinWidth;
  const Vec a = occupancy_histogram(pc), b = occupancy_histogram(moved);
  for (std::size_t y = 0; y < 4; ++y) {
    EXPECT_EQ(b[0 * 4 + y], 0.0);
    for (std::size_t x = 0; x + 1 < 4; ++x) EXPECT_EQ(b[(x + 1) * 4 + y], a[x * 4 + y]);
  }
  EXPECT_GT(a[1 * 4 + 0], 0.0);
  EXPECT_GT(a[1 * 4 + 1], 0.0);
}

TEST(Fuse, ConcatenatesAndSlicesBack) {
  const auto& ex = fitted_extractor();
  const auto pc = generate_random_scene(6);
  const auto lidar = ex.extract(pc, Tap::encoder_level);
  const auto cam = second_modality(pc, 1);
  const auto f = fuse(lidar, cam);
  ASSERT_EQ(f.values.size(), 48u);
  EXPECT_EQ(f.modality, Modality::fused);
  EXPECT_EQ(Vec(f.values.begin(), f.values.begin() + 32), lidar.values);
  EXPECT_EQ(Vec(f.values.begin() + 32, f.values.end()), cam.values);
  EXPECT_THROW(fuse(cam, lidar), InvalidArgument);
}

TEST(Fuse, ZeroCameraVectorKeepsScoresFinite) {
  const auto& ex = fitted_extractor();
  std::vector<Vec> data;
  FeatureVector zero_cam;
  zero_cam.modality = Modality::camera;
  zero_cam.values.assign(16, 0.0);
  for (std::uint64_t s = 0; s < 64; ++s)
    data.push_back(fuse(ex.extract(generate_random_scene(s), Tap::encoder_level), zero_cam).values);
  TrainOptions opt;
  opt.epochs = 5;
  const auto model = train(init_params(48, 4, {16}, 1), data, opt).params;
  ZoConfig c;
  c.iterations = 10;
  for (const auto& x : data) {
    EXPECT_TRUE(std::isfinite(score_likelihood(model, x, 4, 0)));
    const auto s = score_lr(model, x, c, std::nullopt, 4, 0);
    EXPECT_TRUE(std::isfinite(s.lr));
  }
}

TEST(Downstream, R2Examples) {
  const std::vector<Vec> truths{{1.0}, {2.0}, {3.0}};
  EXPECT_NEAR(*r2(std::vector<Vec>{{1.1}, {1.9}, {3.2}}, truths), 0.97, 1e-12);
  EXPECT_EQ(*r2(truths, truths), 1.0);
  EXPECT_EQ(*r2(std::vector<Vec>(3, Vec{2.0}), truths), 0.0);
  EXPECT_FALSE(r2(std::vector<Vec>(3, Vec{1.0}), std::vector<Vec>(3, Vec{5.0})));
  EXPECT_THROW(r2(std::vector<Vec>{{1.0}}, truths), InvalidArgument);
}

TEST(Downstream, R2PoolsOutputDimensions) {
  // Dimension 0 is predicted perfectly, dimension 1 by its mean.
  const std::vector<Vec> truths{{0.0, 0.0}, {1.0, 10.0}, {2.0, 20.0}};
  const std::vector<Vec> preds{{0.0, 10.0}, {1.0, 10.0}, {2.0, 10.0}};
  EXPECT_NEAR(*r2(preds, truths), 1.0 - 200.0 / 202.0, 1e-12);
}

TEST(Downstream, RidgeRecoversLinearMap) {
  Gen g(5);
  std::vector<Vec> xs, ys;
  for (int i = 0; i < 60; ++i) {
    const Vec x = g.normals(4);
    xs.push_back(x);
    ys.push_back({2 * x[0] - x[3] + 1, 0.5 * x[1] + x[2] - 3});
  }
  RidgeRegressor r;
  r.fit(xs, ys, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Vec p = predict_downstream(xs[i], r);
    EXPECT_NEAR(p[0], ys[i][0], 1e-9);
    EXPECT_NEAR(p[1], ys[i][1], 1e-9);
  }
  const auto back = RidgeRegressor::deserialize(r.serialize());
  EXPECT_EQ(back.predict(xs[3]), r.predict(xs[3]));
  EXPECT_THROW(RidgeRegressor().predict(xs[0]), InvalidArgument);
}

TEST(Downstream, CleanFeaturesPredictSceneParameters) {
  LabConfig cfg;
  cfg.n_train = 300;
  cfg.n_test = 100;
  cfg.kinds = {};
  cfg.severities = {};
  const auto sets = build_scene_sets(cfg);
  const auto& ex = fitted_extractor();
  const auto& train_set = find_set(sets, "train");
  const auto& test_set = find_set(sets, "test_clean");
  RidgeRegressor r;
  r.fit(featurize_all(ex, train_set, {}), targets_of(train_set));
  std::vector<Vec> preds;
  for (const auto& x : featurize_all(ex, test_set, {})) preds.push_back(r.predict(x));
  EXPECT_GT(*r2(preds, targets_of(test_set)), 0.5);
}
